import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rte_accel import cli, outputs
from rte_accel.orchestrator import RunMetrics, StepRecord
from rte_accel.scenarios import (CATALOG, Scenario, UnknownScenarioError, build_problem, lattice_absorber,
                                 scenario_catalog, variable_sigma_s)


def test_catalog_examples():
    tm = scenario_catalog("two_material_1d")
    assert tm.bounds == ((0.0, 11.0),) and tm.h == pytest.approx(0.1)
    assert tm.time_step == 10.0 and tm.n_steps == 100
    lat = scenario_catalog("lattice_2d")
    assert lat.cells == (80, 80) and lat.quad == (40, 6) and lat.n_steps == 80
    assert lattice_absorber(np.array(1.5), np.array(3.5)) and not lattice_absorber(np.array(2.5), np.array(2.5))
    g = scenario_catalog("gaussian_source_2d", sigma_s=100.0)
    assert g.sigma_s == 100.0 and g.eps_sisa == 1e-12


def test_two_material_fields():
    pb = build_problem(scenario_catalog("two_material_1d", nx=22))
    centers = pb.space.mesh.cell_centers()[:, 0]
    sig_a = pb.xs.sigma_a.mean(axis=1)
    np.testing.assert_allclose(sig_a[centers < 1], 1.0)
    np.testing.assert_allclose(pb.xs.sigma_s.mean(axis=1)[centers > 1], 100.0)
    assert np.linalg.norm(pb.ops.inflow) > 0 and not pb.rho0.any()


def test_variable_sigma_as_printed():
    assert variable_sigma_s(np.array(0.0), np.array(0.0)) == pytest.approx(0.1)
    # [DERIVED] 99.9 (1 + sqrt2)^2 (1 - sqrt2)^2 + 0.1 = 100 just inside the unit circle
    assert variable_sigma_s(np.array(1 - 1e-12), np.array(0.0)) == pytest.approx(100.0)
    assert variable_sigma_s(np.array(1.0), np.array(0.5)) == 1.0


def test_overrides():
    g = scenario_catalog("gaussian_source_2d", nx=41, quad=(8, 4), t_final=1.25)
    assert g.cells == (41, 41) and g.n_steps == 26
    g2 = scenario_catalog("gaussian_source_2d", sigma_s=1.0, cfl=2.0)
    assert g2.time_step == pytest.approx(2 * 2 / 81)
    assert scenario_catalog("lattice_2d", cfl=1.0).dt is None
    with pytest.raises(ValueError):
        scenario_catalog("two_material_1d", ny=4)
    with pytest.raises(ValueError):
        scenario_catalog("two_material_1d", t_final=1.0)


def test_unknown_name_lists_catalog():
    with pytest.raises(UnknownScenarioError) as exc:
        scenario_catalog("nope")
    assert all(name in str(exc.value) for name in CATALOG)


@given(name=st.sampled_from(sorted(CATALOG)), n=st.integers(1, 200), K=st.integers(0, 3),
       dt=st.floats(1e-4, 1.0, allow_nan=False), eps=st.floats(1e-14, 1e-3), t=st.floats(1.0, 50.0))
@settings(max_examples=60, deadline=None)
def test_config_round_trip(name, n, K, dt, eps, t):
    sc = scenario_catalog(name, nx=n, degree=K, dt=dt, eps_up=eps, t_final=t)
    back = Scenario.from_config(sc.to_config())
    assert back == sc and back.digest() == sc.digest()


def _rec(step, phase=1, iters=3, ms=1.0):
    return StepRecord(step, 0.1 * step, phase, iters, iters + 2, ms, 0, 0, 0, 0, math.nan, math.nan)


def _metrics(phases, ms=1.0, iters=3, h="h"):
    return RunMetrics("x", h, [_rec(k + 1, p, iters, ms) for k, p in enumerate(phases)])


def test_compare_identity_and_symmetry():
    a = _metrics([1, 1, 2, 3, 3])
    for row in outputs.compare_runs(a, a)[:-2]:
        assert row.ratio == 1.0
    b = _metrics([1, 1, 1, 1, 1], ms=2.5, iters=7)
    ab = outputs.compare_runs(b, a)
    ba = outputs.compare_runs(a, b)
    for x, y in zip(ab[:-2], ba[:-2]):
        assert (x.quantity, x.phase) == (y.quantity, y.phase)
        assert x.ratio * y.ratio == pytest.approx(1.0)
    assert outputs.speedup(ab) == pytest.approx(2.5)
    with pytest.raises(outputs.ComparisonError):
        outputs.compare_runs(a, _metrics([1, 1]))
    with pytest.raises(outputs.ComparisonError):
        outputs.compare_runs(a, _metrics([1] * 5, h="other"))


def test_metrics_csv_lossless(tmp_path):
    m = _metrics([1, 2, 3])
    m.steps[1].err_ig = 0.1 + 0.2
    path = outputs.write_metrics(m, tmp_path / "m.csv")
    with path.open() as fh:
        assert tuple(next(csv.reader(fh))) == outputs.METRICS_HEADER
    back = outputs.read_metrics(path)
    assert back[1].err_ig == 0.1 + 0.2 and math.isnan(back[0].err_pc)
    assert [r.step for r in back] == [1, 2, 3]


def test_zero_solution(tmp_path):
    pb = build_problem(scenario_catalog("two_material_1d", nx=11))
    outputs.write_solution(pb.space, np.zeros(pb.space.n_dofs), tmp_path / "s.csv")
    with (tmp_path / "s.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 11 and all(float(r["density"]) == 0.0 for r in rows)


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_cli_compare_baseline(tmp_path):
    out = tmp_path / "res"
    code = cli.main(["--scenario", "two_material_1d", "--mode", "dmd-si-dsa", "--t-final", "300",
                     "--compare-baseline", "--out", str(out), "--quiet"])
    assert code == 0
    rows = _read(out / "metrics.csv")
    assert len(rows) == 30 and len(_read(out / "baseline" / "metrics.csv")) == 30
    comp = {(r["quantity"], r["phase"]): r for r in _read(out / "comparison.csv")}
    assert ("avg_sweeps", "III") in comp and ("speedup", "all") in comp
    summary = {r["phase"]: r for r in _read(out / "summary.csv")}
    assert float(summary["III"]["avg_sweeps"]) < float(summary["III"]["baseline_avg_sweeps"])
    assert Scenario.from_config((out / "scenario.ini").read_text()).t_final == 300.0


def test_cli_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[scenario]\nname = two_material_1d\nt_final = 50.0\nnx = 20\n"
                   "[solver]\nmode = si-dsa\neps_sisa = 1e-10\n")
    args = cli.make_parser().parse_args(["--config", str(cfg), "--eps-sisa", "1e-9"])
    with pytest.raises(ValueError):
        cli.resolve(args)
    cfg.write_text("[scenario]\nname = two_material_1d\nt_final = 50.0\ncells = 20\n"
                   "[solver]\nmode = si-dsa\neps_sisa = 1e-10\n")
    sc, conf = cli.resolve(cli.make_parser().parse_args(["--config", str(cfg), "--eps-sisa", "1e-9"]))
    assert sc.cells == (20,) and sc.n_steps == 5
    assert conf.mode == "si-dsa" and conf.eps_sisa == 1e-9


def test_cli_cfl_flag():
    sc, _ = cli.resolve(cli.make_parser().parse_args(["--scenario", "gaussian_source_2d", "--sigma-s", "1",
                                                      "--cfl", "2"]))
    assert sc.time_step == pytest.approx(2 * sc.h)


def test_cli_seed_check(tmp_path, capsys):
    code = cli.main(["--scenario", "two_material_1d", "--nx", "22", "--t-final", "200", "--mode", "dmd-si-dsa",
                     "--seed-check", "--out", str(tmp_path)])
    assert code == 0 and "identical" in capsys.readouterr().out


@pytest.mark.parametrize("argv,code", [
    (["--scenario", "nope"], 2),
    (["--scenario", "two_material_1d", "--mode", "fast"], 2),
    (["--scenario", "two_material_1d", "--sigma-s", "3"], 2),
    (["--scenario", "two_material_1d", "--cfl", "1", "--dt", "1"], 2),
    ([], 2),
    (["--config", "/nonexistent/run.ini"], 4),
    (["--scenario", "two_material_1d", "--t-final", "20", "--n-iter", "2"], 3),
])
def test_cli_exit_codes(argv, code, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path), "--quiet"]) == code
    if argv[:2] == ["--scenario", "nope"]:
        assert "two_material_1d" in capsys.readouterr().err


def test_cli_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["--scenario", "two_material_1d", "--t-final", "20", "--out", str(blocker), "--quiet"]) == 4
