"""Diffusion synthetic acceleration.

The correction system is a symmetric interior penalty DG discretization of

    -div(D grad u) + (sigma_a + 1/dt) u,    D = 1 / (3 max(sigma_t, sigma_floor))

on the same Q^K space as the transport unknowns, solved by Jacobi
preconditioned conjugate gradients.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dg import CrossSections, DGSpace, DiscreteOperators, tensor

SIGMA_FLOOR = 1e-8


class AssemblyError(ArithmeticError):
    pass


@dataclass
class CGInfo:
    iterations: int
    relres: float
    converged: bool
    cycle_relres: list = field(default_factory=list)


@dataclass
class DiffusionSystem:
    matrix: sp.csr_matrix
    eta: float
    boundary: str
    tol: float = 1e-12
    maxiter: int = 2000
    restart: int = 500
    last_info: CGInfo = None

    @property
    def diag(self):
        return self.matrix.diagonal()


def _diffusion_coefficient(sigma_t):
    return 1.0 / (3.0 * np.maximum(sigma_t, SIGMA_FLOOR))


def _face_blocks_1d(ax, D_m, D_p, kappa):
    """1D SIP blocks for a face with the normal pointing from minus to plus.

    Returns the 2x2 nested list ``B[P][Q]`` (test cell P, trial cell Q).
    """
    t = (ax.trace_hi, ax.trace_lo)  # minus cell sees its high end
    d = (ax.dtrace_hi, ax.dtrace_lo)
    # diffusivity-weighted average {D u'}: both sides enter with D_m D_p / (D_m + D_p)
    Dw = D_m * D_p / (D_m + D_p)
    s = (1.0, -1.0)
    out = [[None, None], [None, None]]
    for P in range(2):
        for Q in range(2):
            out[P][Q] = (
                -s[P] * Dw * np.outer(t[P], d[Q])
                - s[Q] * Dw * np.outer(d[P], t[Q])
                + kappa * s[P] * s[Q] * np.outer(t[P], t[Q])
            )
    return out


def assemble_dsa_system(space: DGSpace, xs: CrossSections, dt, eta=4.0, boundary="robin",
                        penalty_floor=1.0 / 3.0, boundary_floor=0.25, tol=1e-12, maxiter=2000) -> DiffusionSystem:
    """SIP-DG diffusion operator for the DSA correction.

    ``boundary="robin"`` (default) adds the penalty-only term
    ``max(kappa, boundary_floor) int u v`` on the domain boundary, a
    Marshak-type vacuum condition; ``"dirichlet"`` is the symmetric Nitsche
    treatment of ``u = 0``. ``penalty_floor`` bounds the interior penalty
    from below so optically thick cells still see a consistent jump term.
    A plain ``eta K^2 D / h`` penalty with Dirichlet data diverges once the
    cells are several mean free paths thick.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if boundary not in ("robin", "dirichlet"):
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    mesh = space.mesh
    b = space.b
    K2 = max(space.K, 1) ** 2
    D_pts = _diffusion_coefficient(xs.sigma_t)
    react = xs.sigma_a + 1.0 / dt
    D_cell = (D_pts * space.quad_weights).sum(axis=1) / space.quad_weights.sum()

    # volume: int D grad phi_a . grad phi_b + int react phi_a phi_b
    grads = _quad_gradients(space)
    W = space.quad_weights
    vol = space.weighted_mass(react)
    for g in grads:
        vol += np.einsum("cq,qa,qb->cab", D_pts * W, g, g)

    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(b), np.arange(b), indexing="ij")

    def put(r, c, blk):
        rows.append(r * b + ii.ravel())
        cols.append(c * b + jj.ravel())
        vals.append(blk.ravel())

    for c in range(mesh.n_cells):
        put(c, c, vol[c])

    K1 = space.K + 1
    eye = np.eye(K1)
    for minus, plus, axis in mesh.interior_faces:
        ax = space.axes[axis]
        Dm, Dp = D_cell[minus], D_cell[plus]
        D_face = 2.0 * Dm * Dp / (Dm + Dp)
        kappa = max(eta * K2 * D_face / mesh.h[axis], penalty_floor)
        blk = _face_blocks_1d(ax, Dm, Dp, kappa)
        cells = (minus, plus)
        for P in range(2):
            for Q in range(2):
                m = blk[P][Q]
                if space.dim == 2:
                    m = tensor(m, eye) if axis == 0 else tensor(eye, m)
                put(cells[P], cells[Q], m)

    for cell, axis, side in mesh.boundary_faces:
        ax = space.axes[axis]
        t = ax.trace_lo if side < 0 else ax.trace_hi
        dn = side * (ax.dtrace_lo if side < 0 else ax.dtrace_hi)  # outward normal derivative
        Dc = D_cell[cell]
        kappa = eta * K2 * Dc / mesh.h[axis]
        if boundary == "robin":
            m = max(kappa, boundary_floor) * np.outer(t, t)
        else:
            m = kappa * np.outer(t, t) - Dc * (np.outer(t, dn) + np.outer(dn, t))
        if space.dim == 2:
            m = tensor(m, eye) if axis == 0 else tensor(eye, m)
        put(cell, cell, m)

    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_dofs, space.n_dofs),
    )
    A.sum_duplicates()
    return DiffusionSystem(A, eta, boundary, tol=tol, maxiter=maxiter)


def _quad_gradients(space: DGSpace):
    """Physical gradient components of the basis at quadrature points."""
    if space.dim == 1:
        return [space.axes[0].derivs]
    ax, ay = space.axes
    gx = np.einsum("xk,yl->yxlk", ax.derivs, ay.values).reshape(space.nq, space.b)
    gy = np.einsum("xk,yl->yxlk", ax.values, ay.derivs).reshape(space.nq, space.b)
    return [gx, gy]


def pcg(A, rhs, tol=1e-12, maxiter=2000, restart=500, x0=None):
    """Jacobi preconditioned CG with restarts.

    Each restart cycle hands on its smallest-residual iterate, so the
    relative residuals reported per cycle never increase. Raises
    ``AssemblyError`` if a non-positive curvature direction shows up.
    """
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), CGInfo(0, 0.0, True, [0.0])
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    it = 0
    cycles = []
    r = rhs - A @ x
    best_x, best_res = x.copy(), np.linalg.norm(r) / bnorm
    while it < maxiter and best_res > tol:
        x = best_x.copy()
        r = rhs - A @ x
        z = dinv * r
        p = z.copy()
        rz = r @ z
        for _ in range(min(restart, maxiter - it)):
            Ap = A @ p
            curv = p @ Ap
            if not curv > 0:
                if np.linalg.norm(p) == 0:
                    break
                raise AssemblyError("CG breakdown: operator is not positive definite")
            alpha = rz / curv
            x += alpha * p
            r -= alpha * Ap
            it += 1
            res = np.linalg.norm(r) / bnorm
            if res < best_res:
                best_res, best_x = res, x.copy()
            if res <= tol:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        cycles.append(best_res)
    return best_x, CGInfo(it, best_res, best_res <= tol, cycles)


def dsa_correct(system: DiffusionSystem, ops: DiscreteOperators, residual):
    """Solve ``C d = Sigma_s (rho_half - rho_prev)``."""
    rhs = ops.sigma_s_apply(residual)
    x, info = pcg(system.matrix, rhs, system.tol, system.maxiter, system.restart)
    system.last_info = info
    return x
