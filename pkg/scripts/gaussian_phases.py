"""Phase trace of the scaled Gaussian-source run at a chosen final time.

At 41x41 / CL(8,4) the correction ROM needs about twenty phase-II steps,
so phase III only appears once the run is longer than about 32 steps.

    python scripts/gaussian_phases.py --t-final 2.5
"""

import argparse

from rte_accel import SolverConfig, build_problem, scenario_catalog, time_march

HYBRID_TOL = dict(eps_sisa=1e-8, eps_ig=1e-6, eps_pc=1e-6, eps_up=1e-6)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--t-final", type=float, default=2.5)
    p.add_argument("--nx", type=int, default=41)
    args = p.parse_args()
    sc = scenario_catalog("gaussian_source_2d", nx=args.nx, quad=(8, 4), sigma_s=1.0, cfl=1.0,
                          t_final=args.t_final)
    pb = build_problem(sc)
    for label, mode, tol in (("si-dsa", "si-dsa", sc.tolerances()), ("dmd-si-dsa", "dmd-si-dsa", sc.tolerances()),
                             ("hybrid-dsa", "dmd-si-dsa", HYBRID_TOL), ("hybrid-mh", "dmd-si-mh", HYBRID_TOL)):
        _, _, m = time_march(SolverConfig(mode=mode, **tol), pb)
        print(f"{label}: N0={m.N0} N1={m.N1}")
        print("  phase     " + " ".join(str(r.phase) for r in m.steps))
        print("  iterations " + " ".join(str(r.iterations) for r in m.steps))
        for ph in (1, 2, 3):
            if m.phase_steps(ph):
                print(f"  phase {ph}: {len(m.phase_steps(ph))} steps, avg sweeps {m.avg_sweeps(ph):.3f}")


if __name__ == "__main__":
    main()
