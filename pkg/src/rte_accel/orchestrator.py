"""Implicit time marching with the three-phase ROM lifecycle.

Phase I   plain SI-SA; snapshots ``(rho^n, b~^{n-1})`` feed the
          initial-guess ROM until its singular-value ratio drops below
          ``eps_ig``.
Phase II  ROM initial guesses; snapshots ``(rho^n - rho_half,
          rho_half - rho_guess)`` feed the correction ROM until ``eps_pc``.
Phase III ROM initial guess, ROM correction at the first iteration and the
          base preconditioner afterwards. Both ROMs are refreshed by
          truncated appends whenever their error indicators exceed
          ``eps_up``.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .dsa import assemble_dsa_system
from .rom import IncrementalSVD, SnapshotStore, dmd_reduced_operator, reduced_solve, sv_ratio_met
from .si import DSA, MH, Acceleration, Hybrid, si_sa_solve
from .sweep import SweepCounter, compute_btilde, recover_angular_flux

MODES = ("si", "si-dsa", "dmd-si-dsa", "mh", "dmd-si-mh")


class ConvergenceFailure(RuntimeError):
    pass


@dataclass
class SolverConfig:
    mode: str = "si-dsa"
    eps_sisa: float = 1e-11
    eps_ig: float = 1e-9
    eps_pc: float = 1e-6
    eps_up: float = 1e-9
    n_iter: int = 1000
    rank_cap: int = 128
    mh_snapshots: int = 4
    dsa_eta: float = 4.0
    threads: int = 0  # 0 leaves numba's thread count alone

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        for name in ("eps_sisa", "eps_ig", "eps_pc", "eps_up"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        if self.rank_cap < 1:
            raise ValueError("rank_cap must be at least 1")

    @property
    def uses_rom(self):
        return self.mode.startswith("dmd")

    @property
    def base(self):
        return "mh" if self.mode.endswith("mh") else ("dsa" if self.mode.endswith("dsa") else "none")


class ROM:
    """Incremental SVD of the solution snapshots plus the paired rhs columns."""

    def __init__(self, n_rows, trunc_tol, rank_cap, role):
        self.svd = IncrementalSVD(n_rows, trunc_tol, rank_cap)
        self.store = SnapshotStore(n_rows)
        self.role = role
        self.reduced = None
        self.rebuilds = 0

    @property
    def rank(self):
        return self.svd.rank

    def append(self, x, b, truncate=False):
        self.svd.append(x, truncate=truncate)
        self.store.append(b)

    def rebuild(self):
        self.svd.trim()
        self.reduced = dmd_reduced_operator(self.svd, self.store, self.role)
        self.rebuilds += 1

    def solve(self, rhs):
        return None if self.reduced is None else reduced_solve(self.reduced, rhs)


@dataclass
class PhaseState:
    eps_ig: float
    eps_pc: float
    eps_up: float
    ig: ROM
    pc: ROM
    flag_ig: bool = False
    flag_pc: bool = False
    N0: int = 0
    N1: int = 0

    @property
    def phase(self):
        return 3 if self.flag_pc else (2 if self.flag_ig else 1)


@dataclass
class StepRecord:
    step: int
    time: float
    phase: int
    iterations: int
    sweeps: int
    wallclock_ms: float
    rank_ig: int
    rank_pc: int
    updated_ig: int
    updated_pc: int
    err_ig: float
    err_pc: float
    rom_ms: float = 0.0
    predict_ms: float = 0.0
    fallbacks: int = 0


@dataclass
class RunMetrics:
    mode: str
    scenario_hash: str
    steps: list = field(default_factory=list)
    N0: int = 0
    N1: int = 0
    setup_ms: float = 0.0

    def column(self, name):
        return np.array([getattr(r, name) for r in self.steps])

    def phase_steps(self, phase):
        return [r for r in self.steps if r.phase == phase]

    def avg_sweeps(self, phase=None):
        rows = self.steps if phase is None else self.phase_steps(phase)
        return float(np.mean([r.sweeps for r in rows])) if rows else float("nan")

    @property
    def total_ms(self):
        return float(sum(r.wallclock_ms for r in self.steps))


def maybe_update_ig(state: PhaseState, rho_n, btilde_prev, rho_guess):
    """Truncated append + rebuild when the guess misses ``rho^n`` by > eps_up."""
    err = float(np.linalg.norm(rho_guess - rho_n))
    if not err > state.eps_up:
        return False, err
    state.ig.append(rho_n, btilde_prev, truncate=True)
    state.ig.rebuild()
    return True, err


def maybe_update_pc(state: PhaseState, drho_true, db_col, drho_pred, ig_updated):
    if drho_pred is None:
        err = float("inf")
    else:
        err = float(np.linalg.norm(drho_pred - drho_true))
    if not (ig_updated or err > state.eps_up):
        return False, err
    state.pc.append(drho_true, db_col, truncate=True)
    state.pc.rebuild()
    return True, err


def _base_acceleration(config: SolverConfig, problem, dsa_system):
    if config.base == "dsa":
        return DSA(dsa_system, problem.ops)
    if config.base == "mh":
        return MH(config.mh_snapshots)
    return Acceleration()


def time_march(config: SolverConfig, problem, on_step=None):
    """March ``problem`` (see :func:`rte_accel.scenarios.build_problem`).

    Returns ``(F, rho, metrics)`` with the angular flux and density at the
    final time.
    """
    t_setup = time.perf_counter()
    ops = problem.ops
    n = ops.n_dofs
    dsa_system = None
    if config.base == "dsa":
        dsa_system = assemble_dsa_system(ops.space, problem.xs, ops.dt, eta=config.dsa_eta)
    state = PhaseState(
        config.eps_ig, config.eps_pc, config.eps_up,
        ROM(n, config.eps_ig, config.rank_cap, "initial-guess"),
        ROM(n, config.eps_pc, config.rank_cap, "preconditioner"),
    )
    metrics = RunMetrics(config.mode, problem.scenario_hash)
    metrics.setup_ms = 1e3 * (time.perf_counter() - t_setup)

    F = problem.f0.copy()
    rho = problem.rho0.copy()
    counter = SweepCounter()
    for step in range(1, problem.n_steps + 1):
        t0 = time.perf_counter()
        phase = state.phase if config.uses_rom else 1
        sweeps0 = counter.count
        fallbacks = 0
        predict_ms = 0.0

        btilde = compute_btilde(ops, F, counter)
        guess = rho
        if config.uses_rom and state.flag_ig:
            tp = time.perf_counter()
            pred = state.ig.solve(btilde)
            predict_ms = 1e3 * (time.perf_counter() - tp)
            if pred is None:
                fallbacks += 1
            else:
                guess = pred

        accel = _base_acceleration(config, problem, dsa_system)
        hybrid = None
        if config.uses_rom and state.flag_pc:
            hybrid = accel = Hybrid(state.pc.solve, accel)

        result = si_sa_solve(ops, btilde, guess, accel, config.eps_sisa, config.n_iter, counter)
        if not result.converged:
            raise ConvergenceFailure(
                f"step {step}: no convergence in {config.n_iter} iterations "
                f"(last update {result.final_update_norm:.3e})")
        rho_new = result.rho
        F, _ = recover_angular_flux(ops, rho_new, F, counter)
        fallbacks += result.fallbacks
        if hybrid is not None and hybrid.rom_failed:
            fallbacks += 1

        tr = time.perf_counter()
        upd_ig = upd_pc = False
        err_ig = err_pc = float("nan")
        if config.uses_rom:
            half = result.first_half_iterate
            drho = rho_new - half
            db = half - guess
            if not state.flag_ig:
                state.ig.append(rho_new, btilde)
                if sv_ratio_met(state.ig.svd, state.eps_ig):
                    state.ig.rebuild()
                    state.flag_ig, state.N0 = True, step
            else:
                upd_ig, err_ig = maybe_update_ig(state, rho_new, btilde, guess)
                if not state.flag_pc and phase == 2:
                    state.pc.append(drho, db)
                    if sv_ratio_met(state.pc.svd, state.eps_pc):
                        state.pc.rebuild()
                        state.flag_pc, state.N1 = True, step - state.N0
                elif phase == 3:
                    pred = hybrid.rom_correction if hybrid is not None else None
                    if pred is None and not hybrid.rom_failed:
                        # converged before a correction was needed
                        pred = state.pc.solve(db)
                    upd_pc, err_pc = maybe_update_pc(state, drho, db, pred, upd_ig)
        rom_ms = 1e3 * (time.perf_counter() - tr)

        rho = rho_new
        rec = StepRecord(
            step=step, time=step * ops.dt, phase=phase,
            iterations=result.iterations, sweeps=counter.count - sweeps0,
            wallclock_ms=1e3 * (time.perf_counter() - t0),
            rank_ig=state.ig.rank, rank_pc=state.pc.rank,
            updated_ig=int(upd_ig), updated_pc=int(upd_pc),
            err_ig=err_ig, err_pc=err_pc,
            rom_ms=rom_ms, predict_ms=predict_ms, fallbacks=fallbacks,
        )
        metrics.steps.append(rec)
        if on_step is not None:
            on_step(rec)
    metrics.N0, metrics.N1 = state.N0, state.N1
    return F, rho, metrics
