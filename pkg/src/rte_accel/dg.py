"""Uniform rectangular meshes, the Q^K upwind DG space and the discrete
operators of the per-angle system ``(M/dt + D_j + Sigma_t) f_j = rhs``.

Conventions
-----------
* cells are numbered ``c = i + nx * j`` (x fastest); 1D meshes have ``ny = 1``
* local basis index ``a = kx + (K + 1) * ky`` (x fastest)
* global dof ``c * b + a`` with ``b = (K + 1) ** d``
* the basis is orthonormal on every cell, so the mass matrix is the identity
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .quadrature import AngularQuadrature, legendre_nodes


class ConfigurationError(ValueError):
    pass


class InvalidCrossSectionError(ValueError):
    pass


@dataclass(frozen=True)
class RectMesh:
    """Uniform rectangular mesh in one or two dimensions."""

    bounds: tuple
    cells: tuple

    def __post_init__(self):
        if len(self.bounds) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ConfigurationError("mesh must be 1D or 2D with one (lo, hi) pair per axis")
        for (lo, hi), n in zip(self.bounds, self.cells):
            if not int(n) == n or n <= 0:
                raise ConfigurationError(f"cell count must be a positive integer, got {n}")
            if not hi > lo:
                raise ConfigurationError(f"inverted or empty bounds ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def nx(self) -> int:
        return int(self.cells[0])

    @property
    def ny(self) -> int:
        return int(self.cells[1]) if self.dim == 2 else 1

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def h(self) -> tuple:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.cells))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.h))

    def cell_index(self, i, j=0):
        return i + self.nx * j

    def cell_ij(self, c):
        return c % self.nx, c // self.nx

    def cell_lower(self):
        """Lower-left corner of every cell, shape ``(n_cells, dim)``."""
        c = np.arange(self.n_cells)
        i, j = self.cell_ij(c)
        out = np.empty((self.n_cells, self.dim))
        out[:, 0] = self.bounds[0][0] + i * self.h[0]
        if self.dim == 2:
            out[:, 1] = self.bounds[1][0] + j * self.h[1]
        return out

    def cell_centers(self):
        return self.cell_lower() + 0.5 * np.asarray(self.h)

    @cached_property
    def interior_faces(self):
        """``(n, 3)`` int array of ``(minus cell, plus cell, axis)``; the
        normal points from minus to plus along ``axis``."""
        faces = []
        for j in range(self.ny):
            for i in range(self.nx - 1):
                faces.append((self.cell_index(i, j), self.cell_index(i + 1, j), 0))
        if self.dim == 2:
            for j in range(self.ny - 1):
                for i in range(self.nx):
                    faces.append((self.cell_index(i, j), self.cell_index(i, j + 1), 1))
        return np.array(faces, dtype=np.int64).reshape(-1, 3)

    @cached_property
    def boundary_faces(self):
        """``(n, 3)`` int array of ``(cell, axis, side)`` with side -1 for the
        low end of the axis and +1 for the high end."""
        faces = []
        for j in range(self.ny):
            faces.append((self.cell_index(0, j), 0, -1))
            faces.append((self.cell_index(self.nx - 1, j), 0, 1))
        if self.dim == 2:
            for i in range(self.nx):
                faces.append((self.cell_index(i, 0), 1, -1))
                faces.append((self.cell_index(i, self.ny - 1), 1, 1))
        return np.array(faces, dtype=np.int64).reshape(-1, 3)


def build_mesh(bounds, cells) -> RectMesh:
    """``bounds`` is ``(lo, hi)`` or a sequence of them; ``cells`` an int or
    a matching sequence of ints."""
    if np.isscalar(cells):
        cells = (cells,)
        bounds = (tuple(bounds),)
    return RectMesh(tuple(tuple(float(v) for v in b) for b in bounds), tuple(int(n) for n in cells))


@dataclass(frozen=True)
class AxisBasis:
    """Orthonormal Legendre basis on one cell of width ``h``."""

    K: int
    h: float
    points: np.ndarray  # reference Gauss points in [0, 1]
    weights: np.ndarray  # physical weights, sum to h
    values: np.ndarray  # (nq, K+1)
    derivs: np.ndarray  # (nq, K+1), physical derivative
    trace_lo: np.ndarray  # (K+1,)
    trace_hi: np.ndarray
    dtrace_lo: np.ndarray
    dtrace_hi: np.ndarray

    @property
    def stiffness(self):
        """``S[k, l] = int phi_k' phi_l``."""
        return self.derivs.T @ (self.weights[:, None] * self.values)


def _legendre_table(K, xi):
    """P_k(xi) and P_k'(xi) for k = 0..K."""
    P = np.zeros((xi.size, K + 1))
    dP = np.zeros((xi.size, K + 1))
    for k in range(K + 1):
        c = np.zeros(K + 1)
        c[k] = 1.0
        P[:, k] = np.polynomial.legendre.legval(xi, c)
        dP[:, k] = np.polynomial.legendre.legval(xi, np.polynomial.legendre.legder(c))
    return P, dP


def axis_basis(K, h, nq=None) -> AxisBasis:
    nq = K + 2 if nq is None else nq
    xi, w = legendre_nodes(nq)
    scale = np.sqrt((2 * np.arange(K + 1) + 1) / h)
    P, dP = _legendre_table(K, xi)
    Pe, dPe = _legendre_table(K, np.array([-1.0, 1.0]))
    return AxisBasis(
        K=K,
        h=h,
        points=0.5 * (xi + 1.0),
        weights=0.5 * h * w,
        values=P * scale,
        derivs=dP * scale * (2.0 / h),
        trace_lo=Pe[0] * scale,
        trace_hi=Pe[1] * scale,
        dtrace_lo=dPe[0] * scale * (2.0 / h),
        dtrace_hi=dPe[1] * scale * (2.0 / h),
    )


def tensor(x_part, y_part):
    """Local matrix of ``x_part (x) y_part`` in the x-fastest local ordering."""
    return np.kron(y_part, x_part)


@dataclass(frozen=True)
class DGSpace:
    mesh: RectMesh
    K: int
    axes: tuple = field(repr=False)

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def b(self) -> int:
        return (self.K + 1) ** self.dim

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_cells * self.b

    @property
    def nq(self) -> int:
        """Quadrature points per cell."""
        return self.axes[0].points.size ** self.dim

    @cached_property
    def quad_values(self):
        """Basis values at the cell quadrature points, ``(nq, b)``."""
        if self.dim == 1:
            return self.axes[0].values
        vx, vy = self.axes[0].values, self.axes[1].values
        # q = qx + nqx * qy, a = kx + (K+1) * ky
        return np.einsum("xk,yl->yxlk", vx, vy).reshape(self.nq, self.b)

    @cached_property
    def quad_weights(self):
        if self.dim == 1:
            return self.axes[0].weights
        return np.outer(self.axes[1].weights, self.axes[0].weights).ravel()

    @cached_property
    def quad_points(self):
        """Physical quadrature points, ``(n_cells, nq, dim)``."""
        lower = self.mesh.cell_lower()
        if self.dim == 1:
            ref = (self.axes[0].points * self.mesh.h[0])[:, None]
        else:
            px = self.axes[0].points * self.mesh.h[0]
            py = self.axes[1].points * self.mesh.h[1]
            X, Y = np.meshgrid(px, py)
            ref = np.stack([X.ravel(), Y.ravel()], axis=1)
        return lower[:, None, :] + ref[None, :, :]

    def evaluate_at_quad(self, fn):
        """Evaluate ``fn(x)`` or ``fn(x, y)`` at all quadrature points."""
        pts = self.quad_points
        args = [pts[..., k] for k in range(self.dim)]
        return np.broadcast_to(np.asarray(fn(*args), dtype=float), pts.shape[:2]).copy()

    def weighted_mass(self, values):
        """Cell blocks ``int v phi_a phi_b`` from point values ``(n_cells, nq)``."""
        Phi = self.quad_values
        return np.einsum("cq,qa,qb->cab", values * self.quad_weights, Phi, Phi)


def build_dg_space(mesh: RectMesh, K: int) -> DGSpace:
    if K < 0:
        raise ConfigurationError(f"polynomial degree must be >= 0, got {K}")
    axes = tuple(axis_basis(K, h) for h in mesh.h)
    return DGSpace(mesh, int(K), axes)


def project_to_dg(space: DGSpace, fn, nq=None):
    """Cellwise L2 projection of ``fn(x[, y])``.

    Uses the assembly quadrature unless ``nq`` asks for a finer rule.
    """
    if nq is not None and nq != space.K + 2:
        space = DGSpace(space.mesh, space.K, tuple(axis_basis(space.K, h, nq) for h in space.mesh.h))
    vals = space.evaluate_at_quad(fn)
    coeffs = (vals * space.quad_weights) @ space.quad_values
    return coeffs.ravel()


def cell_averages(space: DGSpace, coeffs):
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (space.n_dofs,):
        raise ValueError(f"expected {space.n_dofs} coefficients, got shape {coeffs.shape}")
    # only the constant mode has nonzero mean; phi_0 = 1/sqrt(|cell|)
    return coeffs.reshape(-1, space.b)[:, 0] / np.sqrt(space.mesh.cell_measure)


@dataclass
class CrossSections:
    """sigma_s and sigma_t sampled at the cell quadrature points."""

    sigma_s: np.ndarray
    sigma_t: np.ndarray

    def __post_init__(self):
        if self.sigma_s.shape != self.sigma_t.shape:
            raise InvalidCrossSectionError("sigma_s and sigma_t shapes differ")
        if np.any(self.sigma_s < 0) or np.any(self.sigma_t < self.sigma_s):
            raise InvalidCrossSectionError("cross sections must satisfy sigma_t >= sigma_s >= 0")

    @property
    def sigma_a(self):
        return self.sigma_t - self.sigma_s

    @classmethod
    def from_functions(cls, space: DGSpace, sigma_s, sigma_a):
        s = space.evaluate_at_quad(sigma_s)
        a = space.evaluate_at_quad(sigma_a)
        if np.any(a < 0):
            raise InvalidCrossSectionError("negative absorption cross section")
        return cls(s, s + a)


@dataclass
class DiscreteOperators:
    """Everything needed to apply and invert ``M/dt + D_j + Sigma_t``.

    The advection operator is kept matrix free: on a uniform mesh every
    cell shares the same volume/outflow block ``local_adv[j]`` and the same
    upwind coupling blocks ``couple_x[j]``, ``couple_y[j]`` (moved to the
    right-hand side during a sweep).
    """

    space: DGSpace
    quad: AngularQuadrature
    dt: float
    sigma_s_blocks: np.ndarray  # (n_cells, b, b)
    sigma_t_blocks: np.ndarray
    source: np.ndarray  # G, (n_dofs,)
    inflow: np.ndarray  # g_j^bc, (n_angles, n_dofs)
    local_adv: np.ndarray  # (n_angles, b, b)
    couple_x: np.ndarray
    couple_y: np.ndarray
    signs: np.ndarray  # (n_angles, 2) int
    scattering_free: bool = False
    _factors: tuple = field(default=None, repr=False)

    @property
    def n_dofs(self):
        return self.space.n_dofs

    @property
    def n_angles(self):
        return self.quad.count

    @property
    def mass_diag(self):
        return np.ones(self.n_dofs)

    def sigma_s_apply(self, v):
        b = self.space.b
        return np.einsum("cab,cb->ca", self.sigma_s_blocks, v.reshape(-1, b)).ravel()

    def sigma_t_apply(self, v):
        b = self.space.b
        return np.einsum("cab,cb->ca", self.sigma_t_blocks, v.reshape(-1, b)).ravel()

    def source_tilde(self, j):
        return self.source + self.inflow[j]

    def cell_block(self, j, c):
        b = self.space.b
        return np.eye(b) / self.dt + self.local_adv[j] + self.sigma_t_blocks[c]

    @property
    def factors(self):
        """Cached LU factors of every (angle, cell) block."""
        if self._factors is None:
            from .sweep import factor_blocks

            self._factors = factor_blocks(self)
        return self._factors


def _advection_blocks(space: DGSpace, direction):
    """Local volume+outflow block and upwind coupling blocks for one angle."""
    K1 = space.K + 1
    eye = np.eye(K1)
    local = np.zeros((space.b, space.b))
    couples = []
    signs = []
    for axis in range(space.dim):
        ax = space.axes[axis]
        u = float(direction[axis])
        if u == 0.0:
            raise ConfigurationError("direction has a zero component along a sweep axis")
        if u > 0:
            t_in, t_out = ax.trace_lo, ax.trace_hi
        else:
            t_in, t_out = ax.trace_hi, ax.trace_lo
        vol = -u * ax.stiffness
        out = abs(u) * np.outer(t_out, t_out)
        cpl = abs(u) * np.outer(t_in, t_out)
        if space.dim == 1:
            local += vol + out
            couples.append(cpl)
        elif axis == 0:
            local += tensor(vol + out, eye)
            couples.append(tensor(cpl, eye))
        else:
            local += tensor(eye, vol + out)
            couples.append(tensor(eye, cpl))
        signs.append(1 if u > 0 else -1)
    while len(couples) < 2:
        couples.append(np.zeros((space.b, space.b)))
        signs.append(1)
    return local, couples[0], couples[1], signs


def _face_basis(space: DGSpace, axis, side):
    """Traces of the local basis on a boundary face.

    Returns ``(values (nqf, b), weights (nqf,), offsets (nqf, dim))`` where
    offsets are face quadrature points relative to the cell's lower corner.
    """
    ax = space.axes[axis]
    trace = ax.trace_lo if side < 0 else ax.trace_hi
    pos = 0.0 if side < 0 else space.mesh.h[axis]
    if space.dim == 1:
        return trace[None, :], np.ones(1), np.array([[pos]])
    other = space.axes[1 - axis]
    opos = other.points * space.mesh.h[1 - axis]
    if axis == 0:
        vals = np.einsum("k,ql->qlk", trace, other.values).reshape(-1, space.b)
        offs = np.stack([np.full_like(opos, pos), opos], axis=1)
    else:
        vals = np.einsum("qk,l->qlk", other.values, trace).reshape(-1, space.b)
        offs = np.stack([opos, np.full_like(opos, pos)], axis=1)
    return vals, other.weights, offs


def inflow_vectors(space: DGSpace, quad: AngularQuadrature, inflow_fn):
    """``g_j^bc[k] = -int_{inflow faces} g phi_k (v_j . n)``."""
    out = np.zeros((quad.count, space.n_dofs))
    if inflow_fn is None:
        return out
    b = space.b
    lower = space.mesh.cell_lower()
    for cell, axis, side in space.mesh.boundary_faces:
        vals, w, offs = _face_basis(space, axis, side)
        pts = lower[cell] + offs
        g = np.asarray(inflow_fn(*[pts[:, k] for k in range(space.dim)]), dtype=float)
        g = np.broadcast_to(g, w.shape)
        proj = (g * w) @ vals  # int g phi_k over the face
        vn = quad.directions[:, axis] * side  # v . n, outward normal
        incoming = vn < 0
        out[incoming, cell * b:(cell + 1) * b] += -vn[incoming, None] * proj[None, :]
    return out


def assemble_operators(space: DGSpace, quad: AngularQuadrature, xs: CrossSections,
                       source_fn=None, inflow_fn=None, dt=1.0) -> DiscreteOperators:
    if not dt > 0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    if xs.sigma_s.shape != (space.mesh.n_cells, space.nq):
        raise InvalidCrossSectionError("cross sections are not sampled on this space")
    if np.any(xs.sigma_t < xs.sigma_s) or np.any(xs.sigma_s < 0):
        raise InvalidCrossSectionError("cross sections must satisfy sigma_t >= sigma_s >= 0")
    if quad.dim < space.dim:
        raise ConfigurationError("quadrature dimension smaller than mesh dimension")

    n = quad.count
    b = space.b
    local = np.empty((n, b, b))
    cx = np.empty((n, b, b))
    cy = np.empty((n, b, b))
    signs = np.empty((n, 2), dtype=np.int64)
    for j in range(n):
        local[j], cx[j], cy[j], signs[j] = _advection_blocks(space, quad.directions[j])

    if source_fn is None:
        source = np.zeros(space.n_dofs)
    else:
        source = project_to_dg(space, source_fn)
    return DiscreteOperators(
        space=space,
        quad=quad,
        dt=float(dt),
        sigma_s_blocks=space.weighted_mass(xs.sigma_s),
        sigma_t_blocks=space.weighted_mass(xs.sigma_t),
        source=source,
        inflow=inflow_vectors(space, quad, inflow_fn),
        local_adv=local,
        couple_x=cx,
        couple_y=cy,
        signs=signs,
        scattering_free=not np.any(xs.sigma_s),
    )


def advection_matrix(ops: DiscreteOperators, j):
    """Explicit sparse ``D_j`` (debug/oracle path)."""
    space = ops.space
    mesh = space.mesh
    b = space.b
    blocks = {}
    for c in range(mesh.n_cells):
        blocks[(c, c)] = ops.local_adv[j].copy()
    sx, sy = ops.signs[j]
    for minus, plus, axis in mesh.interior_faces:
        s = sx if axis == 0 else sy
        cpl = ops.couple_x[j] if axis == 0 else ops.couple_y[j]
        down, up = (plus, minus) if s > 0 else (minus, plus)
        # the coupling sits on the rhs of the sweep, so D carries its negative
        blocks[(down, up)] = -cpl
    return _from_blocks(blocks, mesh.n_cells, b)


def transport_matrix(ops: DiscreteOperators, j):
    """Explicit sparse ``M/dt + D_j + Sigma_t`` (debug/oracle path)."""
    n = ops.space.mesh.n_cells
    b = ops.space.b
    diag = sp.block_diag(list(ops.sigma_t_blocks), format="csr") + sp.identity(n * b) / ops.dt
    return (advection_matrix(ops, j) + diag).tocsr()


def sigma_s_matrix(ops: DiscreteOperators):
    return sp.block_diag(list(ops.sigma_s_blocks), format="csr")


def _from_blocks(blocks, n_cells, b):
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(b), np.arange(b), indexing="ij")
    for (r, c), blk in blocks.items():
        rows.append(r * b + ii.ravel())
        cols.append(c * b + jj.ravel())
        vals.append(blk.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_cells * b, n_cells * b),
    )
