"""Streaming low-rank machinery for the on-the-fly reduced models.

* :class:`IncrementalSVD` -- column-by-column SVD update through a small
  core matrix, with optional truncation and a rank cap.
* :class:`SnapshotStore` -- the paired right-hand-side columns ``B``.
* :func:`dmd_reduced_operator` -- ``A_r = U^T B V S^{-1}``, the data-driven
  surrogate of ``U^T A U`` for ``A R = B``.
* :func:`mh_fixed_point_predict` -- DMD fit of the iteration-to-iteration
  map inside one time step and its geometric-series fixed point.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class DataError(ValueError):
    pass


class ReductionError(ArithmeticError):
    pass


SPAN_TOL = 1e-12
ORTHO_TOL = 1e-12


class IncrementalSVD:
    """Thin SVD ``R ~ U diag(s) V^T`` of a matrix streamed by columns.

    Parameters
    ----------
    n_rows : int
        Length of every column.
    trunc_tol : float
        Relative cutoff used by truncating appends: directions with
        ``s_k / sum(s) < trunc_tol`` are dropped.
    rank_cap : int or None
        Upper bound on the rank after a truncating append.
    """

    def __init__(self, n_rows, trunc_tol=0.0, rank_cap=None):
        self.n_rows = int(n_rows)
        self.trunc_tol = float(trunc_tol)
        self.rank_cap = rank_cap
        self.U = np.zeros((self.n_rows, 0))
        self.s = np.zeros(0)
        self.V = np.zeros((0, 0))
        self.m = 0
        self.truncated = False
        self.last_in_span = False
        self.reorthogonalizations = 0

    @property
    def rank(self):
        return self.s.size

    def append(self, column, truncate=False):
        col = np.asarray(column, dtype=float).ravel()
        if col.size != self.n_rows:
            raise DataError(f"column length {col.size} != {self.n_rows}")
        if not np.all(np.isfinite(col)):
            raise DataError("non-finite snapshot column")
        r = self.rank
        cnorm = np.linalg.norm(col)
        # V gains a row for the new column in every branch
        V_ext = np.zeros((self.m + 1, r + 1))
        V_ext[: self.m, :r] = self.V
        V_ext[self.m, r] = 1.0
        self.m += 1

        if cnorm == 0.0:
            self.V = V_ext[:, :r]
            self.last_in_span = True
            return self

        coef = self.U.T @ col
        p = col - self.U @ coef
        # second Gram-Schmidt pass
        c2 = self.U.T @ p
        coef += c2
        p -= self.U @ c2
        pnorm = np.linalg.norm(p)

        if pnorm <= SPAN_TOL * cnorm:
            # new column lies in span(U): r x (r+1) core, rank unchanged
            core = np.zeros((r, r + 1))
            core[:, :r] = np.diag(self.s)
            core[:, r] = coef
            Uc, sc, Vct = np.linalg.svd(core, full_matrices=False)
            self.U = self.U @ Uc
            self.s = sc
            self.V = V_ext @ Vct.T
            self.last_in_span = True
        else:
            q = p / pnorm
            core = np.zeros((r + 1, r + 1))
            core[:r, :r] = np.diag(self.s)
            core[:r, r] = coef
            core[r, r] = pnorm
            Uc, sc, Vct = np.linalg.svd(core)
            self.U = np.hstack([self.U, q[:, None]]) @ Uc
            self.s = sc
            self.V = V_ext @ Vct.T
            self.last_in_span = False

        self._drop_zeros()
        if truncate:
            self._truncate()
        self._reorthogonalize()
        return self

    def _drop_zeros(self):
        keep = self.s > 0
        if not np.all(keep):
            self.U, self.s, self.V = self.U[:, keep], self.s[keep], self.V[:, keep]

    def _truncate(self):
        if self.rank == 0:
            return
        ratio = self.s / self.s.sum()
        keep = int(np.count_nonzero(ratio >= self.trunc_tol))
        if self.rank_cap is not None:
            keep = min(keep, int(self.rank_cap))
        keep = max(keep, 1)
        if keep < self.rank:
            self.truncated = True
            self.U, self.s, self.V = self.U[:, :keep], self.s[:keep], self.V[:, :keep]

    def trim(self, rel=1e-14):
        """Drop directions with ``s_k < rel * s_1``; returns how many went."""
        if self.rank == 0:
            return 0
        keep = max(int(np.count_nonzero(self.s >= rel * self.s[0])), 1)
        dropped = self.rank - keep
        if dropped:
            self.truncated = True
            self.U, self.s, self.V = self.U[:, :keep], self.s[:keep], self.V[:, :keep]
        return dropped

    def orthogonality_error(self):
        r = self.rank
        eye = np.eye(r)
        eu = np.max(np.abs(self.U.T @ self.U - eye)) if r else 0.0
        ev = np.max(np.abs(self.V.T @ self.V - eye)) if r else 0.0
        return eu, ev

    def _reorthogonalize(self):
        eu, ev = self.orthogonality_error()
        if max(eu, ev) <= ORTHO_TOL:
            return
        Qu, Ru = np.linalg.qr(self.U)
        Qv, Rv = np.linalg.qr(self.V)
        Uc, sc, Vct = np.linalg.svd((Ru * self.s) @ Rv.T)
        self.U = Qu @ Uc
        self.s = sc
        self.V = Qv @ Vct.T
        self.reorthogonalizations += 1

    def ratio(self):
        """Smallest retained singular value over the sum of all of them."""
        if self.rank == 0:
            return 1.0
        return float(self.s[-1] / self.s.sum())

    def reconstruct(self):
        return (self.U * self.s) @ self.V.T


def sv_ratio_met(state: IncrementalSVD, eps) -> bool:
    """Stopping rule ``s_last / sum(s) <= eps``.

    An append that added no new direction (the column was already in the
    span) counts as a zero ratio.
    """
    if state.m < 1:
        return False
    if state.last_in_span:
        return True
    return state.ratio() <= eps


class SnapshotStore:
    """Right-hand-side columns, order preserving, in a growable buffer."""

    def __init__(self, n_rows, capacity=32):
        self._buf = np.empty((int(n_rows), capacity))
        self.m = 0

    def append(self, column):
        if self.m == self._buf.shape[1]:
            grown = np.empty((self._buf.shape[0], 2 * self._buf.shape[1]))
            grown[:, : self.m] = self._buf[:, : self.m]
            self._buf = grown
        self._buf[:, self.m] = column
        self.m += 1

    @property
    def B(self):
        return self._buf[:, : self.m]


@dataclass
class ReducedSystem:
    U: np.ndarray
    A_r: np.ndarray
    lu: tuple
    role: str
    condition: float = field(default=np.nan)

    @property
    def rank(self):
        return self.A_r.shape[0]


def dmd_reduced_operator(state: IncrementalSVD, store: SnapshotStore, role="initial-guess") -> ReducedSystem:
    if state.rank < 1:
        raise ReductionError("empty basis")
    if store.m != state.m:
        raise ReductionError(f"snapshot count mismatch: {store.m} rhs vs {state.m} solutions")
    if state.s[-1] < 1e-14 * state.s[0]:
        raise ReductionError("singular values below 1e-14 * s_1 must be truncated first")
    A_r = (state.U.T @ store.B) @ (state.V / state.s)
    if not np.all(np.isfinite(A_r)):
        raise ReductionError("non-finite reduced operator")
    lu = sla.lu_factor(A_r, check_finite=False)
    cond = np.linalg.cond(A_r) if A_r.size else np.nan
    return ReducedSystem(state.U.copy(), A_r, lu, role, cond)


def reduced_solve(rs: ReducedSystem, rhs):
    """``U c`` with ``A_r c = U^T rhs``; None if the reduced solve fails."""
    if np.any(np.diag(rs.lu[0]) == 0.0):
        return None
    c = sla.lu_solve(rs.lu, rs.U.T @ rhs, check_finite=False)
    if not np.all(np.isfinite(c)):
        return None
    return rs.U @ c


def mh_fixed_point_predict(iterates, rank_tol=1e-12):
    """Fixed-point estimate from a run of unaccelerated iterates.

    With differences ``d_k = x_k - x_{k-1}``, a DMD operator ``W`` is fit to
    ``d_k -> d_{k+1}`` on the POD basis ``U`` of the leading differences.
    The remaining iterations are then summed as a geometric series,
    ``x_m + U (I - W)^{-1} W U^T d_m``. Returns None when the learned
    iteration does not contract or ``I - W`` is singular.
    """
    X = np.column_stack([np.asarray(x, dtype=float).ravel() for x in iterates])
    if X.shape[1] < 3:
        raise ValueError("need at least three iterates")
    d = np.diff(X, axis=1)
    last = X[:, -1]
    dm = d[:, -1]
    scale = np.max(np.abs(d))
    if scale == 0.0:
        return last.copy()
    left, right = d[:, :-1], d[:, 1:]
    U, s, Vt = np.linalg.svd(left, full_matrices=False)
    keep = s > rank_tol * s[0]
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    W = U.T @ right @ Vt.T / s
    eig = np.linalg.eigvals(W)
    if not np.all(np.isfinite(eig)) or np.max(np.abs(eig)) >= 1.0:
        return None
    try:
        step = np.linalg.solve(np.eye(W.shape[0]) - W, W @ (U.T @ dm))
    except np.linalg.LinAlgError:
        return None
    pred = last + U @ step
    if not np.all(np.isfinite(pred)):
        return None
    return pred
