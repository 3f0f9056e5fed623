"""Benchmark catalog and the flat key-value config format.

A :class:`Scenario` holds only scalar parameters; the cross sections,
sources, inflow and initial data are looked up by ``name``. That keeps the
config round trip exact and leaves the field definitions in one place.

two_material_1d
    [0, 11], absorber (sigma_a=1) on [0, 1], sigma_s=100 elsewhere,
    isotropic inflow 5 at x=0.
gaussian_source_2d
    [-1, 1]^2, pure scatterer with constant ``sigma_s``, source
    (10/pi) exp(-100 r^2).
variable_scattering_2d
    [-1, 1]^2, no absorption or source, sigma_s rising from 0.1 at the
    centre towards 100 near r=1 and equal to 1 outside the unit disk (the
    jump at r=1 is kept as given), Gaussian initial pulse with zeta=1e-2.
lattice_2d
    [0, 5]^2, unit absorber blocks (sigma_a=100) with lower-left corners
    (1,1), (1,3), (3,1), (3,3), sigma_s=1 elsewhere, unit source on
    [2, 3]^2.
"""

import configparser
import hashlib
import io
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .dg import CrossSections, assemble_operators, build_dg_space, build_mesh, project_to_dg
from .quadrature import chebyshev_legendre, gauss_legendre_1d


class UnknownScenarioError(KeyError):
    def __str__(self):
        return f"unknown scenario {self.args[0]!r}; valid names: {', '.join(CATALOG)}"


@dataclass(frozen=True)
class Scenario:
    name: str
    bounds: tuple
    cells: tuple
    quad: tuple
    t_final: float
    degree: int = 1
    dt: float = None
    cfl: float = None
    sigma_s: float = None
    eps_sisa: float = None
    eps_ig: float = None
    eps_pc: float = None
    eps_up: float = None

    def __post_init__(self):
        if self.name not in CATALOG:
            raise UnknownScenarioError(self.name)
        if len(self.bounds) != len(self.cells):
            raise ValueError("bounds and cells disagree on the dimension")
        if (self.dt is None) == (self.cfl is None):
            raise ValueError("give exactly one of dt and cfl")
        if not self.time_step > 0:
            raise ValueError("time step must be positive")
        if not self.t_final >= self.time_step:
            raise ValueError("t_final must be at least one time step")

    @property
    def dim(self):
        return len(self.cells)

    @property
    def h(self):
        return (self.bounds[0][1] - self.bounds[0][0]) / self.cells[0]

    @property
    def time_step(self):
        return float(self.dt) if self.dt is not None else float(self.cfl) * self.h

    @property
    def n_steps(self):
        # the last step may overshoot t_final by less than one dt
        return int(math.ceil(self.t_final / self.time_step - 1e-9))

    def tolerances(self):
        return {k: getattr(self, k) for k in ("eps_sisa", "eps_ig", "eps_pc", "eps_up")
                if getattr(self, k) is not None}

    def to_config(self):
        cp = configparser.ConfigParser()
        cp["scenario"] = {k: _fmt(v) for k, v in asdict(self).items() if v is not None}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_config(cls, text):
        cp = configparser.ConfigParser()
        cp.read_string(text)
        return cls(**parse_section(cp["scenario"]))

    def digest(self):
        return hashlib.sha256(self.to_config().encode()).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(_fmt(x) for x in v)
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_section(section):
    types = {f.name for f in fields(Scenario)}
    out = {}
    for key, raw in section.items():
        if key not in types:
            raise ValueError(f"unknown scenario key {key!r}")
        if key == "name":
            out[key] = raw
        elif key == "bounds":
            out[key] = tuple(tuple(float(x) for x in part.split(",")) for part in raw.split(";"))
        elif key in ("cells", "quad"):
            out[key] = tuple(int(x) for x in raw.split(","))
        elif key == "degree":
            out[key] = int(raw)
        else:
            out[key] = float(raw)
    return out


def _two_material(sc):
    return dict(
        sigma_s=lambda x: np.where(x < 1.0, 0.0, 100.0),
        sigma_a=lambda x: np.where(x < 1.0, 1.0, 0.0),
        inflow=lambda x: np.where(x < 5.5, 5.0, 0.0),
    )


def _gaussian_source(sc):
    s = 1.0 if sc.sigma_s is None else sc.sigma_s
    return dict(
        sigma_s=lambda x, y: np.full_like(x, s),
        sigma_a=lambda x, y: np.zeros_like(x),
        source=lambda x, y: 10.0 / np.pi * np.exp(-100.0 * (x * x + y * y)),
    )


def variable_sigma_s(x, y):
    c = np.sqrt(x * x + y * y)
    r2 = math.sqrt(2.0)
    inner = 99.9 * c**4 * (c + r2) ** 2 * (c - r2) ** 2 + 0.1
    return np.where(c < 1.0, inner, 1.0)


def _variable_scattering(sc):
    zeta = 1e-2
    return dict(
        sigma_s=variable_sigma_s,
        sigma_a=lambda x, y: np.zeros_like(x),
        initial=lambda x, y: np.exp(-(x * x + y * y) / (4 * zeta**2)) / (4 * np.pi * zeta**2),
    )


LATTICE_ABSORBERS = ((1.0, 1.0), (1.0, 3.0), (3.0, 1.0), (3.0, 3.0))


def lattice_absorber(x, y):
    hit = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for x0, y0 in LATTICE_ABSORBERS:
        hit |= (x > x0) & (x < x0 + 1) & (y > y0) & (y < y0 + 1)
    return hit


def _lattice(sc):
    return dict(
        sigma_s=lambda x, y: np.where(lattice_absorber(x, y), 0.0, 1.0),
        sigma_a=lambda x, y: np.where(lattice_absorber(x, y), 100.0, 0.0),
        source=lambda x, y: np.where((np.abs(x - 2.5) < 0.5) & (np.abs(y - 2.5) < 0.5), 1.0, 0.0),
    )


CATALOG = {
    "two_material_1d": (
        dict(bounds=((0.0, 11.0),), cells=(110,), quad=(6,), dt=10.0, t_final=1000.0),
        _two_material,
    ),
    "gaussian_source_2d": (
        dict(bounds=((-1.0, 1.0), (-1.0, 1.0)), cells=(81, 81), quad=(40, 6), cfl=1.0,
             t_final=2.5, sigma_s=1.0, eps_sisa=1e-12),
        _gaussian_source,
    ),
    "variable_scattering_2d": (
        dict(bounds=((-1.0, 1.0), (-1.0, 1.0)), cells=(81, 81), quad=(40, 6), cfl=1.0, t_final=2.5),
        _variable_scattering,
    ),
    "lattice_2d": (
        dict(bounds=((0.0, 5.0), (0.0, 5.0)), cells=(80, 80), quad=(40, 6), dt=1.0 / 16, t_final=5.0,
             eps_ig=1e-6, eps_pc=1e-6, eps_up=1e-6),
        _lattice,
    ),
}


def scenario_catalog(name, **overrides) -> Scenario:
    """Catalog entry ``name`` with ``overrides`` applied.

    Setting ``dt`` drops the catalog CFL and vice versa; ``nx``/``ny`` are
    accepted as shorthands for ``cells``.
    """
    if name not in CATALOG:
        raise UnknownScenarioError(name)
    params = dict(CATALOG[name][0])
    nx, ny = overrides.pop("nx", None), overrides.pop("ny", None)
    if nx is not None or ny is not None:
        cells = list(params["cells"])
        if nx is not None:
            cells[0] = int(nx)
        if ny is not None:
            if len(cells) < 2:
                raise ValueError(f"{name} is one-dimensional; --ny does not apply")
            cells[1] = int(ny)
        elif len(cells) == 2 and nx is not None:
            cells[1] = int(nx)
        params["cells"] = tuple(cells)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "dt" in overrides:
        params.pop("cfl", None)
    if "cfl" in overrides:
        params.pop("dt", None)
    params.update(overrides)
    return Scenario(name=name, **params)


@dataclass
class Problem:
    scenario: Scenario
    space: object
    quad: object
    xs: CrossSections
    ops: object
    f0: np.ndarray
    rho0: np.ndarray
    n_steps: int
    scenario_hash: str


def build_quadrature(rule):
    if len(rule) == 1:
        return gauss_legendre_1d(rule[0])
    return chebyshev_legendre(*rule)


def build_problem(sc: Scenario) -> Problem:
    fns = CATALOG[sc.name][1](sc)
    mesh = build_mesh(sc.bounds, sc.cells)
    space = build_dg_space(mesh, sc.degree)
    quad = build_quadrature(sc.quad)
    xs = CrossSections.from_functions(space, fns["sigma_s"], fns["sigma_a"])
    ops = assemble_operators(space, quad, xs, fns.get("source"), fns.get("inflow"), dt=sc.time_step)
    initial = fns.get("initial")
    rho0 = np.zeros(space.n_dofs) if initial is None else project_to_dg(space, initial)
    # isotropic initial data: every angle carries the density itself
    f0 = np.tile(rho0, (quad.count, 1))
    rho0 = quad.weights @ f0
    return Problem(sc, space, quad, xs, ops, f0, rho0, sc.n_steps, sc.digest())


def with_overrides(sc: Scenario, **kw) -> Scenario:
    return replace(sc, **kw)
