"""Angular quadrature rules for slab and X-Y geometry.

Weights are normalized so that they sum to one, i.e. the quadrature
approximates the normalized angular average ``(1/4pi) int f dv`` (or
``1/2 int_{-1}^{1} f dv`` in slab geometry).
"""

from dataclasses import dataclass

import numpy as np


class InvalidQuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class AngularQuadrature:
    """Discrete ordinates and normalized weights.

    ``directions`` has shape ``(count, dim)`` with ``dim == 1`` for the
    slab and ``dim == 3`` for rules on the unit sphere.
    """

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.directions.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def count(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def moment(self, values):
        """Weighted sum over the leading (angle) axis."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _legendre_pair(n, x):
    """Return ``(P_n(x), P_{n-1}(x))`` by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(2, n + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    return p, p_prev


def legendre_nodes(n, tol=1e-15, maxiter=100):
    """Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.

    Weights sum to 2. Nodes are returned in ascending order.
    """
    if n < 1:
        raise InvalidQuadratureError("need at least one node")
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(maxiter):
        p, p_prev = _legendre_pair(n, x)
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= tol:
            break
    p, p_prev = _legendre_pair(n, x)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # symmetrize: removes last-bit asymmetry from the Newton iteration
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return x, w


def gauss_legendre_1d(n: int) -> AngularQuadrature:
    """Slab-geometry rule: ``n`` Gauss-Legendre points, weights halved."""
    if n < 2 or n % 2:
        raise InvalidQuadratureError(f"slab quadrature needs an even n >= 2, got {n}")
    x, w = legendre_nodes(n)
    return AngularQuadrature(x.reshape(-1, 1), 0.5 * w)


def chebyshev_legendre(n_phi: int, n_z: int) -> AngularQuadrature:
    """Chebyshev (azimuth) x Gauss-Legendre (polar cosine) product rule.

    Linear index ``j = j2 * n_phi + j1`` (zero based), azimuth fastest.
    """
    if n_phi < 3 or n_z < 2:
        raise InvalidQuadratureError(f"CL({n_phi},{n_z}) needs n_phi >= 3 and n_z >= 2")
    if n_phi % 4 == 2:
        # (2j-1)pi/n_phi would hit pi/2: a direction with no x component
        raise InvalidQuadratureError(f"n_phi = {n_phi} puts an azimuthal node on an axis")
    phi = (2 * np.arange(1, n_phi + 1) - 1) * np.pi / n_phi
    vz, wz = legendre_nodes(n_z)
    wz = 0.5 * wz
    wphi = np.full(n_phi, 1.0 / n_phi)

    sin_t = np.sqrt(1.0 - vz * vz)
    dirs = np.empty((n_z * n_phi, 3))
    dirs[:, 0] = (np.cos(phi)[None, :] * sin_t[:, None]).ravel()
    dirs[:, 1] = (np.sin(phi)[None, :] * sin_t[:, None]).ravel()
    dirs[:, 2] = np.repeat(vz, n_phi)
    weights = (wz[:, None] * wphi[None, :]).ravel()
    if np.any(np.abs(dirs[:, :2]) < 1e-14):
        raise InvalidQuadratureError(f"CL({n_phi},{n_z}) has a direction along an axis")
    return AngularQuadrature(dirs, weights)
