"""Matrix-free transport sweeps.

For each angle the cells are visited in upwind order, so the block lower
triangular system ``(M/dt + D_j + Sigma_t) f_j = rhs`` is solved in a
single pass, one dense ``b x b`` block per cell.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .dg import DiscreteOperators, RectMesh


class OrderingError(ValueError):
    pass


class SingularBlockError(ArithmeticError):
    pass


def sweep_ordering(mesh: RectMesh, direction):
    """Cells in an order where every upwind neighbour comes first."""
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    if np.any(direction[: mesh.dim] == 0.0):
        raise OrderingError("direction has a zero component along a sweep axis")
    ii = np.arange(mesh.nx)
    if direction[0] < 0:
        ii = ii[::-1]
    jj = np.arange(mesh.ny)
    if mesh.dim == 2 and direction[1] < 0:
        jj = jj[::-1]
    return (ii[None, :] + mesh.nx * jj[:, None]).ravel()


@numba.njit(cache=True)
def _lu_factor(A, piv):
    n = A.shape[0]
    for k in range(n):
        p = k
        amax = abs(A[k, k])
        for i in range(k + 1, n):
            if abs(A[i, k]) > amax:
                amax = abs(A[i, k])
                p = i
        piv[k] = p
        if amax == 0.0:
            return False
        if p != k:
            for c in range(n):
                tmp = A[k, c]
                A[k, c] = A[p, c]
                A[p, c] = tmp
        inv = 1.0 / A[k, k]
        for i in range(k + 1, n):
            A[i, k] *= inv
            f = A[i, k]
            for c in range(k + 1, n):
                A[i, c] -= f * A[k, c]
    return True


@numba.njit(cache=True)
def _lu_solve(LU, piv, x):
    n = LU.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
    for i in range(n):
        s = x[i]
        for c in range(i):
            s -= LU[i, c] * x[c]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for c in range(i + 1, n):
            s -= LU[i, c] * x[c]
        x[i] = s / LU[i, i]


@numba.njit(cache=True)
def _factor_all(local_adv, sigma_t_blocks, inv_dt, lu, piv):
    n_ang, b = local_adv.shape[0], local_adv.shape[1]
    n_cells = sigma_t_blocks.shape[0]
    ok = True
    for j in range(n_ang):
        for c in range(n_cells):
            for r in range(b):
                for s in range(b):
                    lu[j, c, r, s] = local_adv[j, r, s] + sigma_t_blocks[c, r, s]
                lu[j, c, r, r] += inv_dt
            if not _lu_factor(lu[j, c], piv[j, c]):
                ok = False
    return ok


@numba.njit(cache=True)
def _sweep_one(rhs, nx, ny, b, sx, sy, lu, piv, cx, cy, out):
    r = np.empty(b)
    for jj in range(ny):
        j = jj if sy > 0 else ny - 1 - jj
        for ii in range(nx):
            i = ii if sx > 0 else nx - 1 - ii
            c = i + nx * j
            base = c * b
            for a in range(b):
                r[a] = rhs[base + a]
            if ii > 0:
                nb = (c - sx) * b
                for a in range(b):
                    s = 0.0
                    for q in range(b):
                        s += cx[a, q] * out[nb + q]
                    r[a] += s
            if jj > 0:
                nb = (c - sy * nx) * b
                for a in range(b):
                    s = 0.0
                    for q in range(b):
                        s += cy[a, q] * out[nb + q]
                    r[a] += s
            _lu_solve(lu[c], piv[c], r)
            for a in range(b):
                out[base + a] = r[a]


@numba.njit(cache=True)
def _sweep_angles(rhs, rhs_row, weights, nx, ny, b, signs, lu, piv, cx, cy, store, F, acc):
    """Sweep every angle. ``rhs[rhs_row[j]]`` is angle j's right-hand side.

    Accumulates ``sum_j w_j f_j`` into ``acc`` in ascending angle order and,
    if ``store``, keeps each ``f_j`` in ``F[j]``.
    """
    n_ang = weights.shape[0]
    n = rhs.shape[1]
    f = np.empty(n)
    for k in range(n):
        acc[k] = 0.0
    for j in range(n_ang):
        _sweep_one(rhs[rhs_row[j]], nx, ny, b, signs[j, 0], signs[j, 1],
                   lu[j], piv[j], cx[j], cy[j], f)
        w = weights[j]
        for k in range(n):
            acc[k] += w * f[k]
        if store:
            for k in range(n):
                F[j, k] = f[k]


@dataclass
class SweepCounter:
    """Counts full transport sweeps (one pass over all angles)."""

    count: int = 0


def factor_blocks(ops: DiscreteOperators):
    n_ang, b = ops.n_angles, ops.space.b
    n_cells = ops.space.mesh.n_cells
    lu = np.empty((n_ang, n_cells, b, b))
    piv = np.empty((n_ang, n_cells, b), dtype=np.int64)
    if not _factor_all(ops.local_adv, ops.sigma_t_blocks, 1.0 / ops.dt, lu, piv):
        raise SingularBlockError("singular local transport block")
    return lu, piv


def _run(ops: DiscreteOperators, rhs, rhs_row, store, counter=None):
    lu, piv = ops.factors
    mesh = ops.space.mesh
    n = ops.n_dofs
    rhs = np.ascontiguousarray(rhs, dtype=float).reshape(-1, n)
    F = np.empty((ops.n_angles, n)) if store else np.empty((1, 1))
    acc = np.empty(n)
    _sweep_angles(rhs, np.ascontiguousarray(rhs_row, dtype=np.int64), np.asarray(ops.quad.weights),
                  mesh.nx, mesh.ny, ops.space.b, ops.signs, lu, piv,
                  ops.couple_x, ops.couple_y, store, F, acc)
    if counter is not None:
        counter.count += 1
    return acc, (F if store else None)


def sweep_solve(ops: DiscreteOperators, j, rhs):
    """Solve ``(M/dt + D_j + Sigma_t) f = rhs`` for one angle."""
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if rhs.shape != (ops.n_dofs,) or not np.all(np.isfinite(rhs)):
        raise ValueError("rhs must be a finite vector of length n_dofs")
    lu, piv = ops.factors
    mesh = ops.space.mesh
    out = np.empty(ops.n_dofs)
    _sweep_one(rhs, mesh.nx, mesh.ny, ops.space.b, ops.signs[j, 0], ops.signs[j, 1],
               lu[j], piv[j], ops.couple_x[j], ops.couple_y[j], out)
    return out


def apply_T(ops: DiscreteOperators, y, counter=None):
    """``T y = sum_j w_j (M/dt + D_j + Sigma_t)^{-1} y``."""
    acc, _ = _run(ops, y, np.zeros(ops.n_angles), False, counter)
    return acc


def compute_btilde(ops: DiscreteOperators, f_prev, counter=None):
    """``b~ = sum_j w_j H_j^{-1} (M f_j^{n-1} / dt + G~_j)``."""
    rhs = np.asarray(f_prev) / ops.dt + ops.source[None, :] + ops.inflow
    acc, _ = _run(ops, rhs, np.arange(ops.n_angles), False, counter)
    return acc


def recover_angular_flux(ops: DiscreteOperators, rho, f_prev, counter=None):
    """Angular flux of the converged step; returns ``(F, sum_j w_j f_j)``."""
    rhs = ops.sigma_s_apply(rho)[None, :] + np.asarray(f_prev) / ops.dt + ops.source[None, :] + ops.inflow
    acc, F = _run(ops, rhs, np.arange(ops.n_angles), True, counter)
    return F, acc
