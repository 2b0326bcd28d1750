"""
Region-tagged linear differential operators.

A boundary-value problem ``L u = f`` in ``D``, ``u = g`` on the boundary is
handled as a single operator ``P`` acting as ``L`` on interior points and as
the identity on boundary (and initial-time) points.  Sample points carry a
:class:`Region` tag, and the operator acts according to that tag.

Coefficient functions are vectorized: they take an ``(n, d)`` array of points
and return ``n`` values.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from enum import IntEnum
from math import comb
from typing import Callable, Dict, Iterator, Union

import numpy as np

from .errors import CapabilityError, ShapeError
from .kernel import GaussianKernel, MultiIndex, as_index, as_points

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray]]

#: Rows per block in the matrix routines; bounds temporary memory.
CHUNK_ROWS = 512


class Region(IntEnum):
    INTERIOR = 0
    BOUNDARY = 1
    INITIAL = 2

    @classmethod
    def parse(cls, value) -> "Region":
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


def as_regions(regions, n: int) -> np.ndarray:
    if isinstance(regions, (Region, int, str)):
        regions = [regions] * n
    out = np.array([Region.parse(r) for r in regions], dtype=np.uint8)
    if out.shape != (n,):
        raise ShapeError(f"expected {n} region tags, got {out.shape[0]}")
    return out


@dataclass(frozen=True)
class OperatorTerm:
    """One summand ``phi_alpha(x) * d^alpha u(x)``."""

    coefficient: Coefficient
    index: MultiIndex

    def __post_init__(self):
        object.__setattr__(self, "index", MultiIndex(self.index))

    def values(self, X: np.ndarray) -> np.ndarray:
        if callable(self.coefficient):
            out = np.asarray(self.coefficient(X), dtype=float)
            return np.broadcast_to(out, (X.shape[0],)).copy()
        return np.full(X.shape[0], float(self.coefficient))


@dataclass(frozen=True)
class PdeOperator:
    """Interior differential operator ``sum_alpha phi_alpha d^alpha``.

    On boundary and initial points the operator is the identity, whatever
    the interior terms are.
    """

    terms: tuple
    dimension: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if len(term.index) != self.dimension:
                raise ShapeError(
                    f"term index {tuple(term.index)} does not match dimension {self.dimension}"
                )

    @property
    def order(self) -> int:
        return max((t.index.order() for t in self.terms), default=0)

    @classmethod
    def identity(cls, dimension: int) -> "PdeOperator":
        return cls((OperatorTerm(1.0, MultiIndex.zero(dimension)),), dimension, "identity")

    @classmethod
    def negative_laplacian(cls, dimension: int) -> "PdeOperator":
        terms = [OperatorTerm(-1.0, MultiIndex.unit(dimension, i, 2)) for i in range(dimension)]
        return cls(tuple(terms), dimension, "-laplacian")

    def check_capability(self, kernel: GaussianKernel) -> None:
        if kernel.dimension != self.dimension:
            raise ShapeError("operator and kernel dimensions differ")
        if self.order > kernel.max_order:
            raise CapabilityError(
                f"operator order {self.order} exceeds kernel capability {kernel.max_order}"
            )

    def region_weights(self, X: np.ndarray, regions: np.ndarray) -> Dict[MultiIndex, np.ndarray]:
        """Per-row weight of each derivative index, honouring region tags.

        Interior rows get ``phi_alpha(x)``; other rows get weight 1 on the
        zero index and 0 elsewhere.
        """
        interior = regions == Region.INTERIOR
        zero = MultiIndex.zero(self.dimension)
        weights: Dict[MultiIndex, np.ndarray] = {}
        if interior.any():
            Xi = X[interior]
            for term in self.terms:
                w = weights.setdefault(term.index, np.zeros(X.shape[0]))
                w[interior] += term.values(Xi)
        if (~interior).any():
            w = weights.setdefault(zero, np.zeros(X.shape[0]))
            w[~interior] = 1.0
        return {k: v for k, v in weights.items() if np.any(v != 0.0)}


class DifferentiableFunction(abc.ABC):
    """A function with exact partial derivatives, evaluated on point arrays."""

    dimension: int

    @abc.abstractmethod
    def partial(self, alpha, X) -> np.ndarray:
        """``d^alpha u`` at each row of ``X``."""

    def value(self, X) -> np.ndarray:
        return self.partial(MultiIndex.zero(self.dimension), X)

    def __call__(self, X) -> np.ndarray:
        return self.value(X)


class ProductWindow(DifferentiableFunction):
    """``rho(x) = prod_l (x_l - a_l)(b_l - x_l)``, vanishing on the box faces."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.dimension = self.lower.size

    def _factor(self, n: int, t, a, b):
        if n == 0:
            return (t - a) * (b - t)
        if n == 1:
            return (a + b) - 2.0 * t
        if n == 2:
            return np.full_like(t, -2.0)
        return np.zeros_like(t)

    def partial(self, alpha, X) -> np.ndarray:
        X = as_points(X, self.dimension)
        alpha = as_index(alpha, self.dimension)
        out = np.ones(X.shape[0])
        for axis, n in enumerate(alpha):
            out *= self._factor(n, X[:, axis], self.lower[axis], self.upper[axis])
        return out


def _chunks(n: int, size: int = CHUNK_ROWS) -> Iterator[slice]:
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def apply_to_function(op: PdeOperator, u: DifferentiableFunction, X, regions) -> np.ndarray:
    """``(P u)(x)`` at each row: the PDE operator inside, ``u`` elsewhere."""
    X = as_points(X, op.dimension)
    regions = as_regions(regions, X.shape[0])
    out = np.zeros(X.shape[0])
    for alpha, w in op.region_weights(X, regions).items():
        mask = w != 0.0
        out[mask] += w[mask] * u.partial(alpha, X[mask])
    return out


def apply_first_matrix(op: PdeOperator, kernel: GaussianKernel, X, regions, Y) -> np.ndarray:
    """Matrix of ``P^{(1,0)} K(X_i, Y_j)``: operator on the first argument."""
    op.check_capability(kernel)
    X = as_points(X, op.dimension)
    Y = as_points(Y, op.dimension)
    regions = as_regions(regions, X.shape[0])
    weights = op.region_weights(X, regions)
    zero = MultiIndex.zero(op.dimension)
    out = np.zeros((X.shape[0], Y.shape[0]))
    for rows in _chunks(X.shape[0]):
        pw = kernel.pairwise(X[rows], Y)
        block = out[rows]
        for alpha, w in weights.items():
            block += w[rows][:, None] * pw.deriv(alpha, zero)
    return out


def apply_both_matrix(
    op: PdeOperator, kernel: GaussianKernel, X, regions_x, Y, regions_y
) -> np.ndarray:
    """Matrix of ``P^{(1,1)} K(X_i, Y_j)``: operator on both arguments."""
    op.check_capability(kernel)
    X = as_points(X, op.dimension)
    Y = as_points(Y, op.dimension)
    wx = op.region_weights(X, as_regions(regions_x, X.shape[0]))
    wy = op.region_weights(Y, as_regions(regions_y, Y.shape[0]))
    out = np.zeros((X.shape[0], Y.shape[0]))
    for rows in _chunks(X.shape[0]):
        out[rows] = apply_both_block(kernel, X[rows], {a: w[rows] for a, w in wx.items()}, Y, wy)
    return out


def apply_both_block(kernel, X, wx, Y, wy) -> np.ndarray:
    pw = kernel.pairwise(X, Y)
    out = np.zeros(pw.shape)
    for alpha, a in wx.items():
        if not a.any():
            continue
        inner = np.zeros(pw.shape)
        for beta, b in wy.items():
            inner += pw.deriv(alpha, beta) * b[None, :]
        out += a[:, None] * inner
    return out


def apply_first(op: PdeOperator, kernel: GaussianKernel, x, region_x, y) -> float:
    return float(apply_first_matrix(op, kernel, _point(x, op), [region_x], _point(y, op))[0, 0])


def apply_both(op: PdeOperator, kernel: GaussianKernel, x_i, region_i, x_j, region_j) -> float:
    return float(
        apply_both_matrix(op, kernel, _point(x_i, op), [region_i], _point(x_j, op), [region_j])[0, 0]
    )


def _point(x, op: PdeOperator) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (op.dimension,):
        raise ShapeError(f"expected a point of dimension {op.dimension}, got shape {x.shape}")
    return x.reshape(1, -1)


def _sub_indices(alpha: MultiIndex) -> Iterator[MultiIndex]:
    grids = np.meshgrid(*[np.arange(a + 1) for a in alpha], indexing="ij")
    for gamma in zip(*(g.ravel() for g in grids)):
        yield MultiIndex(gamma)


def leibniz_windowed_matrix(
    window: DifferentiableFunction, kernel: GaussianKernel, alpha, X, Z
) -> np.ndarray:
    """``d^alpha_x [rho(x) K(z_j, x)]`` for rows ``x = X_i`` and columns ``z_j``.

    General Leibniz rule; the kernel derivative sits on its second argument,
    which by symmetry equals a first-argument derivative of ``K(x, z)``.
    """
    d = kernel.dimension
    alpha = as_index(alpha, d)
    X = as_points(X, d)
    Z = as_points(Z, d)
    zero = MultiIndex.zero(d)
    out = np.zeros((X.shape[0], Z.shape[0]))
    for rows in _chunks(X.shape[0]):
        pw = kernel.pairwise(X[rows], Z)
        block = out[rows]
        for gamma in _sub_indices(alpha):
            weight = np.prod([comb(a, g) for a, g in zip(alpha, gamma)])
            rho = window.partial(gamma, X[rows])
            if not rho.any():
                continue
            block += (weight * rho)[:, None] * pw.deriv(alpha.minus(gamma), zero)
    return out


def leibniz_windowed_partial(
    window: DifferentiableFunction, kernel: GaussianKernel, alpha, x, z
) -> float:
    d = kernel.dimension
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, d)
    z = np.atleast_1d(np.asarray(z, dtype=float)).reshape(1, d)
    return float(leibniz_windowed_matrix(window, kernel, alpha, x, z)[0, 0])
