"""Spectral radius of the SI-DSA iteration matrix for a grid of penalty floors.

Forms ``G = T S + C^{-1} S (T S - I)`` densely, so keep the meshes small.

    python scripts/dsa_radius_scan.py --floors 0.1 0.333 1 --boundary-floors 0.2 0.25 0.5
"""

import argparse

import numpy as np

from rte_accel.dg import CrossSections, assemble_operators, build_dg_space, build_mesh, sigma_s_matrix
from rte_accel.dsa import assemble_dsa_system
from rte_accel.quadrature import gauss_legendre_1d
from rte_accel.scenarios import build_problem, scenario_catalog
from rte_accel.sweep import apply_T


def slab(cells, length, sigma_s, dt):
    space = build_dg_space(build_mesh((0.0, length), cells), 1)
    xs = CrossSections.from_functions(space, lambda x: sigma_s + 0 * x, lambda x: 0 * x)
    return space, xs, assemble_operators(space, gauss_legendre_1d(6), xs, dt=dt)


def radius(space, xs, ops, **kw):
    n = ops.n_dofs
    T = np.column_stack([apply_T(ops, e) for e in np.eye(n)])
    S = sigma_s_matrix(ops).toarray()
    C = assemble_dsa_system(space, xs, ops.dt, **kw).matrix.toarray()
    G = T @ S + np.linalg.solve(C, S) @ (T @ S - np.eye(n))
    return float(np.max(np.abs(np.linalg.eigvals(G))))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--floors", type=float, nargs="+", default=[0.1, 1 / 3, 1.0])
    p.add_argument("--boundary-floors", type=float, nargs="+", default=[0.25])
    p.add_argument("--eta", type=float, default=4.0)
    args = p.parse_args()

    pb = build_problem(scenario_catalog("two_material_1d"))
    cases = {
        "two_material_1d": (pb.space, pb.xs, pb.ops),
        "slab sigma_s*h=10": slab(40, 4.0, 100.0, 10.0),
        "slab sigma_s*h=100": slab(40, 40.0, 100.0, 10.0),
        "slab sigma_s*h=0.1": slab(40, 4.0, 1.0, 10.0),
    }
    print("penalty_floor,boundary_floor," + ",".join(cases))
    for pf in args.floors:
        for bf in args.boundary_floors:
            rads = [radius(*c, eta=args.eta, penalty_floor=pf, boundary_floor=bf) for c in cases.values()]
            print(f"{pf:.4g},{bf:.4g}," + ",".join(f"{r:.4f}" for r in rads))


if __name__ == "__main__":
    main()
