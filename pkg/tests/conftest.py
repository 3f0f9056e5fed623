import numpy as np
import pytest

from rte_accel.dg import CrossSections, assemble_operators, build_dg_space, build_mesh, sigma_s_matrix, transport_matrix
from rte_accel.quadrature import chebyshev_legendre, gauss_legendre_1d
from rte_accel.sweep import compute_btilde

VERDICTS = []


def slab_ops(cells=8, n_angles=2, K=1, sigma_s=0.5, sigma_a=0.5, dt=0.7, length=1.0, inflow=1.0, source=0.0):
    mesh = build_mesh((0.0, length), cells)
    space = build_dg_space(mesh, K)
    xs = CrossSections.from_functions(space, lambda x: sigma_s + 0 * x, lambda x: sigma_a + 0 * x)
    src = None if source == 0.0 else (lambda x: source + 0 * x)
    inf = None if inflow == 0.0 else (lambda x: inflow + 0 * x)
    return assemble_operators(space, gauss_legendre_1d(n_angles), xs, src, inf, dt=dt)


def square_ops(n=4, quad=(4, 2), K=1, dt=0.3, inflow=1.0):
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), (n, n))
    space = build_dg_space(mesh, K)
    xs = CrossSections.from_functions(space, lambda x, y: 1.0 + x * y, lambda x, y: 0.2 + 0 * x)
    inf = None if inflow == 0.0 else (lambda x, y: inflow + 0 * x)
    return assemble_operators(space, chebyshev_legendre(*quad), xs, lambda x, y: np.exp(-x - y), inf, dt=dt)


def dense_T(ops):
    """Dense ``T = sum_j w_j H_j^{-1}`` from the assembled per-angle systems."""
    n = ops.n_dofs
    T = np.zeros((n, n))
    for j, w in enumerate(ops.quad.weights):
        T += w * np.linalg.inv(transport_matrix(ops, j).toarray())
    return T


def thick_slab():
    """Homogeneous sigma_s = 100 slab on [0, 10], 100 cells, GL(6), dt = 10, inflow 5 on the left."""
    space = build_dg_space(build_mesh((0.0, 10.0), 100), 1)
    xs = CrossSections.from_functions(space, lambda x: 100 + 0 * x, lambda x: 0 * x)
    ops = assemble_operators(space, gauss_legendre_1d(6), xs, None, lambda x: 5.0 + 0 * x, dt=10.0)
    return ops, xs, compute_btilde(ops, np.zeros((6, space.n_dofs)))


def dense_A(ops):
    return np.eye(ops.n_dofs) - dense_T(ops) @ sigma_s_matrix(ops).toarray()


@pytest.fixture
def slab():
    return slab_ops()


@pytest.fixture
def square():
    return square_ops()


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
