"""Gaussian-source sweep over scattering strength and CFL number.

Prints one CSV line per (sigma_s, CFL) pair with the SI-DSA and DMD-SI-DSA
average sweeps per step and the phase boundaries.

    python scripts/cfl_sweep.py --nx 41 --quad 8,4 --sigma-s 1 100 --cfl 0.25 0.5 1 2
"""

import argparse

import numpy as np

from rte_accel import SolverConfig, build_problem, scenario_catalog, time_march


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nx", type=int, default=41)
    p.add_argument("--quad", default="8,4")
    p.add_argument("--t-final", type=float, default=2.5)
    p.add_argument("--sigma-s", type=float, nargs="+", default=[1.0, 100.0])
    p.add_argument("--cfl", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    args = p.parse_args()
    quad = tuple(int(x) for x in args.quad.split(","))
    print("sigma_s,cfl,steps,N0,N1,phase3_steps,avg_sweeps_si_dsa,avg_sweeps_dmd,max_abs_diff")
    for s in args.sigma_s:
        for cfl in args.cfl:
            sc = scenario_catalog("gaussian_source_2d", nx=args.nx, quad=quad, sigma_s=s, cfl=cfl,
                                  t_final=args.t_final)
            pb = build_problem(sc)
            _, rb, mb = time_march(SolverConfig(mode="si-dsa", **sc.tolerances()), pb)
            _, rd, md = time_march(SolverConfig(mode="dmd-si-dsa", **sc.tolerances()), pb)
            print(f"{s:g},{cfl:g},{len(md.steps)},{md.N0},{md.N1},{len(md.phase_steps(3))},"
                  f"{mb.avg_sweeps():.3f},{md.avg_sweeps():.3f},{np.max(np.abs(rb - rd)):.2e}", flush=True)


if __name__ == "__main__":
    main()
