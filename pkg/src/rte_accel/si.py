"""Source iteration with synthetic acceleration on the density only.

Each iteration performs one transport sweep,

    rho_half = T Sigma_s rho_prev + b~,

stops when ``max|rho_half - rho_prev| < eps``, and otherwise adds the
correction returned by the acceleration strategy.
"""

from dataclasses import dataclass, field

import numpy as np

from .dg import DiscreteOperators
from .dsa import DiffusionSystem, dsa_correct
from .sweep import SweepCounter, apply_T


@dataclass
class SolveResult:
    rho: np.ndarray
    iterations: int
    sweeps: int
    first_half_iterate: np.ndarray
    initial_guess_used: np.ndarray
    first_correction_applied: np.ndarray
    converged: bool
    final_update_norm: float
    fallbacks: int = 0
    update_history: list = field(default_factory=list)


class Acceleration:
    """Base strategy: plain source iteration (no correction)."""

    name = "si"

    def start(self, rho0):
        pass

    def correction(self, l, rho_half, rho_prev):
        return None


class DSA(Acceleration):
    name = "dsa"

    def __init__(self, system: DiffusionSystem, ops: DiscreteOperators):
        self.system = system
        self.ops = ops

    def correction(self, l, rho_half, rho_prev):
        return dsa_correct(self.system, self.ops, rho_half - rho_prev)


class MH(Acceleration):
    """Across-iteration DMD extrapolation of plain source iteration.

    Collects ``snapshots`` unaccelerated iterates, predicts the fixed
    point from the learned linear iteration, then restarts collection from
    the extrapolated density.
    """

    name = "mh"

    def __init__(self, snapshots=4, rank_tol=1e-12):
        if snapshots < 3:
            raise ValueError("the MH predictor needs at least 3 iterates")
        self.snapshots = snapshots
        self.rank_tol = rank_tol
        self.history = []
        self.failures = 0

    def start(self, rho0):
        self.history = [np.array(rho0, copy=True)]

    def correction(self, l, rho_half, rho_prev):
        from .rom import mh_fixed_point_predict

        if not self.history:
            self.history = [np.array(rho_prev, copy=True)]
        self.history.append(np.array(rho_half, copy=True))
        if len(self.history) < self.snapshots:
            return None
        predicted = mh_fixed_point_predict(self.history, self.rank_tol)
        if predicted is None:
            self.failures += 1
            self.history = [self.history[-1]]
            return None
        self.history = [predicted]
        return predicted - rho_half


class Hybrid(Acceleration):
    """ROM correction at the first iteration, ``base`` afterwards.

    ``first`` maps ``rho_half - rho_prev`` to a correction or returns None
    when the reduced solve fails, in which case ``base`` is used instead.
    """

    def __init__(self, first, base: Acceleration):
        self.first = first
        self.base = base
        self.name = f"hybrid-{base.name}"
        self.rom_correction = None
        self.rom_failed = False

    def start(self, rho0):
        self.rom_correction = None
        self.rom_failed = False
        self.base.start(rho0)

    def correction(self, l, rho_half, rho_prev):
        if l == 1:
            delta = self.first(rho_half - rho_prev)
            if delta is not None and np.all(np.isfinite(delta)):
                self.rom_correction = delta
                self.base.start(rho_half + delta)
                return delta
            self.rom_failed = True
        return self.base.correction(l, rho_half, rho_prev)


def si_sa_solve(ops: DiscreteOperators, btilde, rho0, acceleration: Acceleration = None,
                eps=1e-11, n_iter=1000, counter: SweepCounter = None) -> SolveResult:
    if not eps > 0 or n_iter < 1:
        raise ValueError("need eps > 0 and n_iter >= 1")
    acceleration = acceleration or Acceleration()
    counter = counter if counter is not None else SweepCounter()
    rho_prev = np.array(rho0, dtype=float, copy=True)
    acceleration.start(rho_prev)
    first_half = None
    first_corr = np.zeros_like(rho_prev)
    fallbacks = 0
    history = []
    scatter_free = ops.scattering_free
    sweeps0 = counter.count
    for l in range(1, n_iter + 1):
        if scatter_free:
            # T Sigma_s = 0; the sweep still counts
            rho_half = btilde.copy()
            counter.count += 1
        else:
            rho_half = apply_T(ops, ops.sigma_s_apply(rho_prev), counter) + btilde
        if l == 1:
            first_half = rho_half.copy()
        upd = float(np.max(np.abs(rho_half - rho_prev)))
        history.append(upd)
        # without scattering the first half-step is already the solution
        if upd < eps or scatter_free:
            return SolveResult(rho_half, l, counter.count - sweeps0, first_half, np.array(rho0, copy=True),
                               first_corr, True, upd, fallbacks, history)
        delta = acceleration.correction(l, rho_half, rho_prev)
        if delta is None:
            delta = 0.0
        elif not np.all(np.isfinite(delta)):
            fallbacks += 1
            delta = 0.0
        if l == 1:
            first_corr = np.zeros_like(rho_half) + delta
        rho_prev = rho_half + delta
    return SolveResult(rho_half, n_iter, counter.count - sweeps0, first_half, np.array(rho0, copy=True),
                       first_corr, False, upd, fallbacks, history)
