"""CSV outputs and run comparison.

Every float is written with ``%.17g`` so a re-read reproduces the doubles.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dg import DGSpace, cell_averages
from .orchestrator import RunMetrics, StepRecord

METRICS_HEADER = ("step", "time", "phase", "iterations", "sweeps", "wallclock_ms",
                  "rank_ig", "rank_pc", "updated_ig", "updated_pc", "err_ig", "err_pc")
TIMING_COLUMNS = ("wallclock_ms",)
PHASES = (1, 2, 3)


class ComparisonError(ValueError):
    pass


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _write(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else fmt(x) for x in row])
    return path


def write_metrics(metrics: RunMetrics, path):
    rows = ([getattr(r, k) for k in METRICS_HEADER] for r in metrics.steps)
    return _write(path, METRICS_HEADER, rows)


def read_metrics(path):
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != METRICS_HEADER:
            raise ComparisonError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            vals = {}
            for k, v in row.items():
                if k in ("step", "phase", "iterations", "sweeps", "rank_ig", "rank_pc",
                         "updated_ig", "updated_pc"):
                    vals[k] = int(v)
                else:
                    vals[k] = float(v)
            out.append(StepRecord(**vals))
    return out


def write_solution(space: DGSpace, rho, path):
    """Cell centres, cell-average density and its log10 (floored at 1e-300)."""
    centers = space.mesh.cell_centers()
    avg = cell_averages(space, rho)
    log_avg = np.log10(np.maximum(np.abs(avg), 1e-300))
    coords = ("x", "y")[: space.dim]
    rows = (list(c) + [a, la] for c, a, la in zip(centers, avg, log_avg))
    return _write(path, coords + ("density", "log10_density"), rows)


def _phase_rows(steps, phase):
    return [r for r in steps if phase is None or r.phase == phase]


def _mean(vals):
    return float(np.mean(vals)) if len(vals) else float("nan")


def write_summary(metrics: RunMetrics, path, baseline: RunMetrics = None):
    """Per-phase counts, average sweeps and times.

    With a baseline the same step ranges of the baseline run are averaged
    alongside, and ``relative_time`` is accelerated over baseline time.
    """
    header = ("phase", "steps", "avg_iterations", "avg_sweeps", "wallclock_ms",
              "baseline_avg_sweeps", "baseline_wallclock_ms", "relative_time")
    base_by_step = {r.step: r for r in baseline.steps} if baseline is not None else {}
    rows = []
    for label, phase in (("I", 1), ("II", 2), ("III", 3), ("all", None)):
        sel = _phase_rows(metrics.steps, phase)
        t = sum(r.wallclock_ms for r in sel)
        if baseline is not None and sel:
            bsel = [base_by_step[r.step] for r in sel]
            bsweeps = _mean([r.sweeps for r in bsel])
            bt = sum(r.wallclock_ms for r in bsel)
            rel = t / bt if bt > 0 else float("nan")
        else:
            bsweeps = bt = rel = float("nan")
        rows.append([label, len(sel), _mean([r.iterations for r in sel]),
                     _mean([r.sweeps for r in sel]), t, bsweeps, bt, rel])
    return _write(path, header, rows)


@dataclass
class ComparisonRow:
    quantity: str
    phase: str
    baseline: float
    accelerated: float

    @property
    def ratio(self):
        if self.baseline == 0:
            return 1.0 if self.accelerated == 0 else math.inf
        return self.accelerated / self.baseline


def compare_runs(baseline: RunMetrics, accelerated: RunMetrics):
    """Per-phase sweep and wall-clock ratios, accelerated over baseline.

    Steps are grouped by the higher of the two runs' phase labels, so
    swapping the arguments only inverts the ratios. The ``rom_overhead``
    and ``ig_overhead`` rows put the time spent building/updating the ROMs
    and evaluating initial guesses over the baseline's total time.
    """
    if baseline.scenario_hash != accelerated.scenario_hash:
        raise ComparisonError("runs come from different scenarios")
    if len(baseline.steps) != len(accelerated.steps):
        raise ComparisonError(
            f"step counts differ: {len(baseline.steps)} vs {len(accelerated.steps)}")
    # a plain run stays in phase I, so the larger label is the ROM run's
    phases = [max(a.phase, b.phase) for a, b in zip(accelerated.steps, baseline.steps)]
    rows = []
    for label, phase in (("I", 1), ("II", 2), ("III", 3), ("all", None)):
        idx = [i for i, p in enumerate(phases) if phase is None or p == phase]
        if not idx:
            continue
        b = [baseline.steps[i] for i in idx]
        a = [accelerated.steps[i] for i in idx]
        rows.append(ComparisonRow("avg_sweeps", label, _mean([r.sweeps for r in b]),
                                  _mean([r.sweeps for r in a])))
        rows.append(ComparisonRow("wallclock_ms", label, sum(r.wallclock_ms for r in b),
                                  sum(r.wallclock_ms for r in a)))
    total_b = baseline.total_ms
    rows.append(ComparisonRow("rom_overhead", "all", total_b,
                              sum(r.rom_ms for r in accelerated.steps)))
    rows.append(ComparisonRow("ig_overhead", "all", total_b,
                              sum(r.predict_ms for r in accelerated.steps)))
    return rows


def speedup(rows):
    """Baseline over accelerated whole-run wall-clock."""
    for r in rows:
        if r.quantity == "wallclock_ms" and r.phase == "all":
            return 1.0 / r.ratio if r.ratio else math.inf
    raise ComparisonError("no whole-run wall-clock row")


def write_comparison(rows, path):
    out = [[r.quantity, r.phase, r.baseline, r.accelerated, r.ratio] for r in rows]
    out.append(["speedup", "all", math.nan, math.nan, speedup(rows)])
    return _write(path, ("quantity", "phase", "baseline", "accelerated", "ratio"), out)
