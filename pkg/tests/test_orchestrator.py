import numpy as np
import pytest

from rte_accel.dg import CrossSections, assemble_operators, build_dg_space, build_mesh
from rte_accel.orchestrator import (ROM, ConvergenceFailure, PhaseState, SolverConfig, maybe_update_ig,
                                    maybe_update_pc, time_march)
from rte_accel.quadrature import gauss_legendre_1d
from rte_accel.scenarios import Problem, build_problem, scenario_catalog


@pytest.fixture(scope="module")
def two_material():
    return build_problem(scenario_catalog("two_material_1d", t_final=400.0))


@pytest.fixture(scope="module")
def runs(two_material):
    return {mode: time_march(SolverConfig(mode=mode), two_material) for mode in ("si-dsa", "dmd-si-dsa")}


def absorber_problem(n_steps=5):
    space = build_dg_space(build_mesh((0.0, 2.0), 10), 1)
    quad = gauss_legendre_1d(4)
    xs = CrossSections.from_functions(space, lambda x: 0 * x, lambda x: 1 + 0 * x)
    ops = assemble_operators(space, quad, xs, None, lambda x: 1 + 0 * x, dt=0.5)
    f0 = np.zeros((quad.count, space.n_dofs))
    return Problem(None, space, quad, xs, ops, f0, np.zeros(space.n_dofs), n_steps, "absorber")


@pytest.mark.parametrize("mode", ["si", "si-dsa", "dmd-si-dsa", "mh", "dmd-si-mh"])
def test_pure_absorber_one_iteration(mode):
    _, _, m = time_march(SolverConfig(mode=mode), absorber_problem())
    assert list(m.column("iterations")) == [1] * 5
    assert list(m.column("sweeps")) == [3] * 5


def test_sweeps_are_iterations_plus_two(runs):
    for _, _, m in runs.values():
        np.testing.assert_array_equal(m.column("sweeps"), m.column("iterations") + 2)


def test_modes_agree(runs):
    a, b = runs["si-dsa"][1], runs["dmd-si-dsa"][1]
    assert np.linalg.norm(a - b) <= 1e-8


def test_phase_lifecycle(runs):
    _, _, m = runs["dmd-si-dsa"]
    ph = m.column("phase")
    assert np.all(np.diff(ph) >= 0) and ph[-1] == 3
    first3 = m.phase_steps(3)[0].step
    assert 0 < m.N0 < m.N0 + m.N1 + 1 <= first3
    assert np.all(np.diff(m.column("rank_ig")[: m.N0]) >= 0)
    p2 = m.phase_steps(2)
    assert np.all(np.diff([r.rank_pc for r in p2]) >= 0)
    assert all(1 <= r.iterations <= 6 for r in m.phase_steps(3))
    assert set(runs["si-dsa"][2].column("phase")) == {1}


def test_rank_cap(two_material):
    _, _, m = time_march(SolverConfig(mode="dmd-si-dsa", rank_cap=5), two_material)
    p3 = m.phase_steps(3)
    assert p3 and all(r.rank_ig <= 5 and r.rank_pc <= 5 for r in p3)


def test_deterministic(two_material, runs):
    F, rho, m = time_march(SolverConfig(mode="dmd-si-dsa"), two_material)
    F0, rho0, m0 = runs["dmd-si-dsa"]
    np.testing.assert_array_equal(rho, rho0)
    np.testing.assert_array_equal(F, F0)
    for a, b in zip(m.steps, m0.steps):
        assert (a.iterations, a.rank_ig, a.rank_pc, a.phase) == (b.iterations, b.rank_ig, b.rank_pc, b.phase)


def test_nonconvergence_raises(two_material):
    with pytest.raises(ConvergenceFailure):
        time_march(SolverConfig(mode="si", n_iter=3), two_material)


def test_on_step_callback():
    seen = []
    time_march(SolverConfig(mode="si"), absorber_problem(3), on_step=seen.append)
    assert [r.step for r in seen] == [1, 2, 3]
    np.testing.assert_allclose([r.time for r in seen], [0.5, 1.0, 1.5])


@pytest.mark.parametrize("kw", [dict(mode="gmres"), dict(eps_sisa=0.0), dict(eps_up=-1.0), dict(n_iter=0),
                                dict(rank_cap=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_config_base():
    assert SolverConfig(mode="dmd-si-mh").base == "mh"
    assert SolverConfig(mode="dmd-si-dsa").base == "dsa" and SolverConfig(mode="dmd-si-dsa").uses_rom
    assert SolverConfig(mode="si").base == "none" and not SolverConfig(mode="si").uses_rom


def _state(n=6, cap=3):
    st = PhaseState(1e-9, 1e-6, 1e-9, ROM(n, 1e-9, cap, "initial-guess"), ROM(n, 1e-6, cap, "preconditioner"))
    rng = np.random.default_rng(0)
    for _ in range(3):
        x = rng.standard_normal(n)
        st.ig.append(x, 2 * x)
        st.pc.append(x, 3 * x)
    st.ig.rebuild()
    st.pc.rebuild()
    return st, rng


def test_update_ig_indicator():
    st, rng = _state()
    x = rng.standard_normal(6)
    upd, err = maybe_update_ig(st, x, 2 * x, x + 1e-12)
    assert not upd and err < 1e-9 and st.ig.rank == 3 and st.ig.rebuilds == 1
    upd, err = maybe_update_ig(st, x, 2 * x, x + 1.0)
    assert upd and st.ig.rank <= 3 and st.ig.rebuilds == 2


def test_update_pc_indicator():
    st, rng = _state()
    x = rng.standard_normal(6)
    assert maybe_update_pc(st, x, 3 * x, x, False) == (False, 0.0)
    upd, _ = maybe_update_pc(st, x, 3 * x, x, True)
    assert upd
    upd, err = maybe_update_pc(st, x, 3 * x, None, False)
    assert upd and err == np.inf


def test_forced_update_with_duplicate_data():
    st = PhaseState(1e-9, 1e-6, 1e-9, ROM(4, 1e-9, 8, "initial-guess"), ROM(4, 1e-6, 8, "preconditioner"))
    x = np.array([1.0, 2.0, 0.0, -1.0])
    st.pc.append(x, x)
    st.pc.rebuild()
    upd, _ = maybe_update_pc(st, 2 * x, 2 * x, 2 * x, True)
    assert upd and st.pc.rank == 1
    assert st.phase == 1
    st.flag_ig = True
    assert st.phase == 2
    st.flag_pc = True
    assert st.phase == 3
