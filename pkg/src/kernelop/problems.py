"""
Benchmark boundary-value problems and their exact-solution test families.

Each problem bundles the region-tagged operator, the box domain, default
sample counts and hyperparameters, and a family of manufactured solutions
``u_k`` with exact partial derivatives.  Data for a member are
``h = P u_k`` on the samples: the source term inside, ``u_k`` itself on the
boundary and initial slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from numpy.polynomial import polynomial as P

from .errors import ConfigurationError
from .kernel import GaussianKernel, MultiIndex, as_index, as_points
from .operators import (
    DifferentiableFunction,
    OperatorTerm,
    PdeOperator,
    ProductWindow,
    apply_to_function,
)
from .sampling import BoxDomain, LabeledSampleSet, sample_problem_points


class SymbolicFamily:
    """Closed-form parametric family ``u(x; p)``.

    Partials are differentiated symbolically once per multi-index and compiled
    with ``lambdify``; members only bind parameter values.
    """

    def __init__(self, expr: sp.Expr, coords: Sequence[sp.Symbol], params: Sequence[sp.Symbol]):
        self.expr = expr
        self.coords = tuple(coords)
        self.params = tuple(params)
        self._compiled: Dict[MultiIndex, Callable] = {}

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def compiled(self, alpha: MultiIndex) -> Callable:
        fn = self._compiled.get(alpha)
        if fn is None:
            expr = self.expr
            for sym, n in zip(self.coords, alpha):
                if n:
                    expr = sp.diff(expr, sym, n)
            fn = sp.lambdify(self.coords + self.params, expr, modules="numpy")
            self._compiled[alpha] = fn
        return fn

    def member(self, *values: float) -> "SymbolicFunction":
        if len(values) != len(self.params):
            raise ConfigurationError("wrong number of family parameters")
        return SymbolicFunction(self, tuple(float(v) for v in values))


class SymbolicFunction(DifferentiableFunction):
    def __init__(self, family: SymbolicFamily, values: Tuple[float, ...]):
        self.family = family
        self.values = values
        self.dimension = family.dimension

    def partial(self, alpha, X) -> np.ndarray:
        X = as_points(X, self.dimension)
        alpha = as_index(alpha, self.dimension)
        out = self.family.compiled(alpha)(*X.T, *self.values)
        return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()


@lru_cache(maxsize=None)
def _tanh_derivative_poly(n: int) -> np.ndarray:
    # d^n/dz^n tanh(z) as a polynomial in t = tanh(z): p_{n+1} = p_n'(t) (1 - t^2)
    coeffs = np.array([0.0, 1.0])
    for _ in range(n):
        coeffs = P.polymul(P.polyder(coeffs), [1.0, 0.0, -1.0])
    return coeffs


class TanhNetwork(DifferentiableFunction):
    """Two-layer network ``u(x) = sum_m w_m tanh(v_m . x + b_m)``."""

    def __init__(self, outer, inner, bias):
        self.outer = np.asarray(outer, dtype=float)
        self.inner = np.asarray(inner, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.dimension = self.inner.shape[1]

    @classmethod
    def random(cls, dimension: int, width: int, rng: np.random.Generator) -> "TanhNetwork":
        outer = rng.standard_normal(width)
        inner = rng.standard_normal((width, dimension))
        bias = rng.standard_normal(width)
        return cls(outer, inner, bias)

    def partial(self, alpha, X) -> np.ndarray:
        X = as_points(X, self.dimension)
        alpha = as_index(alpha, self.dimension)
        t = np.tanh(X @ self.inner.T + self.bias)
        dt = P.polyval(t, _tanh_derivative_poly(alpha.order()))
        chain = np.prod(self.inner ** np.array(alpha), axis=1)
        return dt @ (self.outer * chain)


class SineProduct(DifferentiableFunction):
    """Laplacian eigenfunction ``prod_l sin(pi k_l x_l)`` on the unit cube."""

    def __init__(self, modes):
        self.modes = np.asarray(modes, dtype=float)
        self.dimension = self.modes.size

    @property
    def eigenvalue(self) -> float:
        return float(np.pi**2 * np.sum(self.modes**2))

    def partial(self, alpha, X) -> np.ndarray:
        X = as_points(X, self.dimension)
        alpha = as_index(alpha, self.dimension)
        out = np.ones(X.shape[0])
        for axis, n in enumerate(alpha):
            w = np.pi * self.modes[axis]
            out *= w**n * np.sin(w * X[:, axis] + n * np.pi / 2)
        return out


@dataclass(frozen=True)
class TestFamily:
    """``size`` manufactured solutions produced by ``generator(k, seed)``."""

    __test__ = False  # not a pytest class

    size: int
    generator: Callable[[int, int], DifferentiableFunction]

    def member(self, k: int, seed: int = 0) -> DifferentiableFunction:
        return self.generator(k, seed)

    def members(self, seed: int = 0, count: Optional[int] = None):
        count = self.size if count is None else count
        return [self.generator(k, seed) for k in range(count)]


@dataclass(frozen=True)
class ProblemDefaults:
    n_interior: int
    n_boundary: int
    n_initial: int
    bandwidth: float
    lam: float


@dataclass(frozen=True)
class PdeProblem:
    name: str
    operator: PdeOperator
    domain: BoxDomain
    defaults: ProblemDefaults
    family: TestFamily
    coefficients: Dict[str, Callable] = field(default_factory=dict)
    grid_points_per_axis: int = 101
    grid_max_points: Optional[int] = None

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def kernel(self, bandwidth: Optional[float] = None) -> GaussianKernel:
        eta = self.defaults.bandwidth if bandwidth is None else bandwidth
        return GaussianKernel(eta, self.dimension, max(3, self.operator.order))

    def sample(
        self,
        seed: int,
        n_interior: Optional[int] = None,
        n_boundary: Optional[int] = None,
        n_initial: Optional[int] = None,
    ) -> LabeledSampleSet:
        dft = self.defaults
        return sample_problem_points(
            self.domain,
            dft.n_interior if n_interior is None else n_interior,
            dft.n_boundary if n_boundary is None else n_boundary,
            dft.n_initial if n_initial is None else n_initial,
            seed,
        )

    def eval_grid(self, seed: int = 0) -> np.ndarray:
        """Uniform tensor grid over the closed box, optionally subsampled."""
        axes = [
            np.linspace(lo, hi, self.grid_points_per_axis)
            for lo, hi in zip(self.domain.lower, self.domain.upper)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        if self.grid_max_points is not None and grid.shape[0] > self.grid_max_points:
            rng = np.random.default_rng(seed)
            grid = grid[np.sort(rng.choice(grid.shape[0], self.grid_max_points, replace=False))]
        return grid

    def forcing(self, u: DifferentiableFunction, samples: LabeledSampleSet) -> np.ndarray:
        return forcing_from_solution(self, u, samples)


def forcing_from_solution(
    problem: PdeProblem, u: DifferentiableFunction, samples: LabeledSampleSet
) -> np.ndarray:
    """Exact data vector ``h(X_i) = (P u)(X_i)`` for a manufactured solution."""
    return apply_to_function(problem.operator, u, samples.points, samples.regions)


# ----------------------------------------------------------------------
# Darcy flow  -div(a grad u) = f on (0,1)^2


def _a2(X):
    return np.exp(X[:, 0] + X[:, 1])


def _a3(X):
    parity = (np.floor(4 * X[:, 0]) + np.floor(4 * X[:, 1])).astype(int) % 2
    return np.where(parity == 0, 1.0, 10.0)


def _darcy_member(k: int, seed: int) -> TanhNetwork:
    # member k of trial seed s is network number k + 50 s of one sequence,
    # so the base family (s = 0) draws network k from seed k
    return TanhNetwork.random(2, 16, np.random.default_rng(k + 50 * seed))


def make_darcy(permeability: str) -> PdeProblem:
    """Divergence form expanded as ``-a lap u - grad a . grad u``."""
    d = 2
    xx, yy = MultiIndex.unit(d, 0, 2), MultiIndex.unit(d, 1, 2)
    dx, dy = MultiIndex.unit(d, 0), MultiIndex.unit(d, 1)
    if permeability == "a1":
        coeff = {"a": lambda X: np.ones(X.shape[0])}
        terms = [OperatorTerm(-1.0, xx), OperatorTerm(-1.0, yy)]
    elif permeability == "a2":
        coeff = {"a": _a2}
        neg = lambda X: -_a2(X)
        # grad a2 = a2 * (1, 1)
        terms = [OperatorTerm(neg, xx), OperatorTerm(neg, yy), OperatorTerm(neg, dx), OperatorTerm(neg, dy)]
    elif permeability == "a3":
        coeff = {"a": _a3}
        neg = lambda X: -_a3(X)
        # piecewise constant: grad a3 = 0 away from the jump set
        terms = [OperatorTerm(neg, xx), OperatorTerm(neg, yy)]
    else:
        raise ConfigurationError(f"unknown permeability {permeability!r}")
    return PdeProblem(
        name=f"darcy-{permeability}",
        operator=PdeOperator(tuple(terms), d, f"darcy-{permeability}"),
        domain=BoxDomain.unit(d),
        defaults=ProblemDefaults(2500, 1500, 0, 1.0, 5e-5),
        family=TestFamily(50, _darcy_member),
        coefficients=coeff,
    )


# ----------------------------------------------------------------------
# Helmholtz  -u'' - omega^2 u = f on (0,1), u(0) = -0.1, u(1) = 0.1

_x = sp.Symbol("x", real=True)
_y = sp.Symbol("y", real=True)
_t = sp.Symbol("t", real=True)


@lru_cache(maxsize=None)
def _helmholtz_family() -> SymbolicFamily:
    w, phi = sp.symbols("w phi", real=True)
    expr = sp.Rational(-1, 10) + sp.Rational(1, 5) * _x + _x * (1 - _x) * sp.sin(w * _x + phi)
    return SymbolicFamily(expr, (_x,), (w, phi))


def make_helmholtz(omega: float) -> PdeProblem:
    if not omega > 0:
        raise ConfigurationError("omega must be positive")
    family = _helmholtz_family()

    def member(k: int, seed: int) -> SymbolicFunction:
        rng = np.random.default_rng([seed, k])
        phi = rng.uniform(0.0, 2 * np.pi)
        omega_k = omega * (0.7 + 0.6 * rng.uniform())
        return family.member(omega_k, phi)

    terms = (OperatorTerm(-1.0, (2,)), OperatorTerm(-float(omega) ** 2, (0,)))
    bandwidth = 0.1 if omega <= 50 else 0.01
    name = f"helmholtz-{omega:g}"
    return PdeProblem(
        name=name,
        operator=PdeOperator(terms, 1, name),
        domain=BoxDomain.unit(1),
        defaults=ProblemDefaults(980, 20, 0, bandwidth, 1e-7),
        family=TestFamily(100, member),
    )


# ----------------------------------------------------------------------
# Schroedinger  -lap u + V u = f on (0,1)^2, u = 0 on the boundary

HEXAGON_HEIGHT = 1000.0


def hexagon_potential(X) -> np.ndarray:
    X = as_points(X, 2)
    a = np.abs(X[:, 0] - 0.5)
    b = np.abs(X[:, 1] - 0.5)
    inside = np.maximum(a, 0.5 * a + np.sqrt(3.0) / 2.0 * b) <= 0.2
    return np.where(inside, HEXAGON_HEIGHT, 0.0)


@lru_cache(maxsize=None)
def _schrodinger_family() -> SymbolicFamily:
    m, n, p1, p2 = sp.symbols("m n phi1 phi2", real=True)
    pi = sp.pi
    expr = (
        sp.Rational(3, 2)
        * _x * (1 - _x) * _y * (1 - _y)
        * (
            sp.sin(2 * pi * m * _x + p1) * sp.sin(2 * pi * n * _y + p2)
            + sp.Rational(1, 2) * sp.cos(2 * pi * (m + n) * _x + p1)
            + sp.Rational(7, 20) * sp.sin(2 * pi * (m * _x + n * _y) + p2)
        )
    )
    return SymbolicFamily(expr, (_x, _y), (m, n, p1, p2))


def _grid_member(family: SymbolicFamily, k: int, with_phi2: bool):
    i, j = divmod(k, 10)
    m = (i % 4) + 1
    second = (j % 4) + 1
    phi1 = 2 * np.pi * i / 10
    if with_phi2:
        return family.member(m, second, phi1, 2 * np.pi * j / 10)
    return family.member(m, second, phi1)


def make_schrodinger() -> PdeProblem:
    family = _schrodinger_family()
    d = 2
    terms = (
        OperatorTerm(-1.0, MultiIndex.unit(d, 0, 2)),
        OperatorTerm(-1.0, MultiIndex.unit(d, 1, 2)),
        OperatorTerm(hexagon_potential, MultiIndex.zero(d)),
    )
    return PdeProblem(
        name="schrodinger",
        operator=PdeOperator(terms, d, "schrodinger"),
        domain=BoxDomain.unit(d),
        defaults=ProblemDefaults(1200, 800, 0, 0.08, 3e-3),
        family=TestFamily(100, lambda k, seed: _grid_member(family, k, True)),
        coefficients={"V": hexagon_potential},
    )


# ----------------------------------------------------------------------
# Heat  u_t - 0.1 u_xx = f on [0,1] x [0,1], coordinates (x, t)

HEAT_DIFFUSIVITY = 0.1


@lru_cache(maxsize=None)
def _heat_family() -> SymbolicFamily:
    m, r, p1 = sp.symbols("m r phi1", real=True)
    pi = sp.pi
    expr = (
        sp.Rational(6, 5)
        * _x * (1 - _x)
        * (
            sp.sin(2 * pi * m * _x + p1) * sp.exp(-r * _t)
            + sp.Rational(3, 10) * sp.sin(2 * pi * (m + 1) * _x) * sp.exp(-(r + 1) * _t)
        )
    )
    return SymbolicFamily(expr, (_x, _t), (m, r, p1))


def make_heat() -> PdeProblem:
    family = _heat_family()
    d = 2
    terms = (
        OperatorTerm(1.0, MultiIndex.unit(d, 1, 1)),
        OperatorTerm(-HEAT_DIFFUSIVITY, MultiIndex.unit(d, 0, 2)),
    )
    return PdeProblem(
        name="heat",
        operator=PdeOperator(terms, d, "heat"),
        domain=BoxDomain.unit(d, time_axis=1),
        defaults=ProblemDefaults(1800, 1800, 1400, 0.08, 1e-5),
        family=TestFamily(100, lambda k, seed: _grid_member(family, k, False)),
    )


# ----------------------------------------------------------------------
# Poisson  -lap u = f on (0,1)^3, u = 0 on the boundary

POISSON3D_KMAX = 4


def poisson3d_modes(count: int, seed: int) -> np.ndarray:
    """``count`` distinct modes drawn from ``{1..kmax}^3``."""
    grid = np.stack(
        np.meshgrid(*[np.arange(1, POISSON3D_KMAX + 1)] * 3, indexing="ij"), axis=-1
    ).reshape(-1, 3)
    rng = np.random.default_rng(seed)
    return grid[rng.choice(grid.shape[0], count, replace=False)]


def make_poisson3d() -> PdeProblem:
    def member(k: int, seed: int) -> SineProduct:
        return SineProduct(poisson3d_modes(50, seed)[k])

    return PdeProblem(
        name="poisson3d",
        operator=PdeOperator.negative_laplacian(3),
        domain=BoxDomain.unit(3),
        defaults=ProblemDefaults(20000, 0, 0, 0.2, 1e-8),
        family=TestFamily(50, member),
        grid_points_per_axis=41,
        grid_max_points=20000,
    )


def poisson3d_window() -> ProductWindow:
    return ProductWindow((0.0,) * 3, (1.0,) * 3)


def make_poisson1d() -> PdeProblem:
    """``-u'' = f`` on (0,1) with the single member ``sin(pi x)``."""
    return PdeProblem(
        name="poisson1d",
        operator=PdeOperator.negative_laplacian(1),
        domain=BoxDomain.unit(1),
        defaults=ProblemDefaults(270, 30, 0, 0.2, 1e-10),
        family=TestFamily(1, lambda k, seed: SineProduct([1.0])),
    )


PROBLEMS: Dict[str, Callable[[], PdeProblem]] = {
    "darcy-a1": lambda: make_darcy("a1"),
    "darcy-a2": lambda: make_darcy("a2"),
    "darcy-a3": lambda: make_darcy("a3"),
    "helmholtz-20": lambda: make_helmholtz(20.0),
    "helmholtz-200": lambda: make_helmholtz(200.0),
    "schrodinger": make_schrodinger,
    "heat": make_heat,
    "poisson3d": make_poisson3d,
    "poisson1d": make_poisson1d,
}


def get_problem(name: str) -> PdeProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {', '.join(sorted(PROBLEMS))}"
        ) from None
