"""Reduced-size runs of every catalog scenario in both SI-DSA and DMD-SI-DSA."""

import numpy as np
import pytest

from rte_accel import SolverConfig, build_problem, scenario_catalog, time_march

REDUCED = {
    "two_material_1d": dict(t_final=500.0),
    "gaussian_source_2d": dict(nx=21, quad=(4, 2), cfl=0.5),
    "variable_scattering_2d": dict(nx=21, quad=(4, 2), cfl=0.5),
    "lattice_2d": dict(nx=20, quad=(4, 2)),
}


@pytest.fixture(scope="module", params=sorted(REDUCED))
def pair(request):
    sc = scenario_catalog(request.param, **REDUCED[request.param])
    pb = build_problem(sc)
    cfg = SolverConfig(**sc.tolerances())
    base = time_march(SolverConfig(mode="si-dsa", **sc.tolerances()), pb)
    dmd = time_march(SolverConfig(mode="dmd-si-dsa", **sc.tolerances()), pb)
    return cfg, base, dmd


def test_same_solution(pair):
    cfg, (_, rho_b, _), (_, rho_d, _) = pair
    assert np.max(np.abs(rho_b - rho_d)) <= 100 * cfg.eps_sisa


def test_phase3_fewer_iterations(pair):
    _, (_, _, mb), (_, _, md) = pair
    p3 = md.phase_steps(3)
    assert p3, f"no phase III (N0={md.N0}, N1={md.N1})"
    base = {r.step: r.iterations for r in mb.steps}
    assert np.mean([r.iterations for r in p3]) < np.mean([base[r.step] for r in p3])


def test_accounting(pair):
    _, (_, _, mb), (_, _, md) = pair
    for m in (mb, md):
        np.testing.assert_array_equal(m.column("sweeps"), m.column("iterations") + 2)
    ph = md.column("phase")
    assert np.all(np.diff(ph) >= 0)
    assert md.N0 + md.N1 + 1 <= md.phase_steps(3)[0].step
