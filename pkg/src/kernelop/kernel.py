"""
Gaussian kernel and its exact mixed partial derivatives.

The kernel is ``K(x, y) = exp(-|x - y|^2 / eta^2)``.  Because it depends on
``r = x - y`` only and factorizes over coordinates, every mixed partial

    d^alpha_x d^beta_y K(x, y)

reduces to a product of one-dimensional factors

    d^n/dr^n exp(-(r/eta)^2) = eta^-n (-1)^n H_n(r/eta) exp(-(r/eta)^2)

with ``H_n`` the physicists' Hermite polynomials and ``n = alpha_i + beta_i``
per coordinate, together with the sign ``(-1)^|beta|`` from the chain rule in
the second argument.  All matrix routines work on whole blocks of point pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapabilityError, ConfigurationError, ShapeError

#: Scaled distance |x - y| / eta beyond which the kernel and all derivatives
#: are returned as exact zeros.
UNDERFLOW_CUTOFF = 40.0


class MultiIndex(tuple):
    """Exponent tuple ``alpha`` selecting the partial derivative ``d^alpha``."""

    def __new__(cls, exponents: Iterable[int]) -> "MultiIndex":
        values = tuple(int(e) for e in exponents)
        if any(e < 0 for e in values):
            raise ConfigurationError(f"negative exponent in multi-index {values}")
        return super().__new__(cls, values)

    @classmethod
    def zero(cls, dimension: int) -> "MultiIndex":
        return cls((0,) * dimension)

    @classmethod
    def unit(cls, dimension: int, axis: int, times: int = 1) -> "MultiIndex":
        exps = [0] * dimension
        exps[axis] = times
        return cls(exps)

    @property
    def dimension(self) -> int:
        return len(self)

    def order(self) -> int:
        return sum(self)

    def plus(self, other: Sequence[int]) -> "MultiIndex":
        return MultiIndex(a + b for a, b in zip(self, other))

    def minus(self, other: Sequence[int]) -> "MultiIndex":
        return MultiIndex(a - b for a, b in zip(self, other))

    def is_zero(self) -> bool:
        return not any(self)

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"


def as_index(alpha, dimension: int) -> MultiIndex:
    idx = alpha if isinstance(alpha, MultiIndex) else MultiIndex(alpha)
    if len(idx) != dimension:
        raise ShapeError(f"multi-index {tuple(idx)} does not have dimension {dimension}")
    return idx


def hermite_step(k: int, t, h, h_prev):
    """``H_{k+1}(t)`` from ``H_k`` and ``H_{k-1}``; shared by every Hermite path."""
    return 2.0 * t * h - 2.0 * k * h_prev


def hermite(n: int, t):
    """Physicists' Hermite polynomial ``H_n(t)`` by three-term recursion.

    Works elementwise on arrays.
    """
    if n < 0:
        raise ConfigurationError("Hermite degree must be non-negative")
    t = np.asarray(t, dtype=float)
    h_prev = np.ones_like(t)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * t
    for k in range(1, n):
        h_prev, h = h, hermite_step(k, t, h, h_prev)
    return h if h.ndim else float(h)


def as_points(X, dimension: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        # a flat array is a list of scalars in 1D and a single point otherwise
        X = X.reshape(-1, 1) if dimension == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != dimension:
        raise ShapeError(f"expected points of dimension {dimension}, got shape {np.shape(X)}")
    return X


def _as_point(x, dimension: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dimension,):
        raise ShapeError(f"expected a point of dimension {dimension}, got shape {x.shape}")
    return x.reshape(1, dimension)


@dataclass(frozen=True)
class GaussianKernel:
    """Isotropic Gaussian kernel with bandwidth ``eta`` on R^d.

    Parameters
    ----------
    bandwidth : float
        Length scale ``eta > 0``.
    dimension : int
        Ambient dimension ``d``.
    max_order : int
        Largest derivative order allowed on each argument.
    """

    bandwidth: float
    dimension: int
    max_order: int = 3

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigurationError("bandwidth must be positive")
        if self.dimension < 1:
            raise ConfigurationError("dimension must be at least 1")
        if self.max_order < 0:
            raise ConfigurationError("max_order must be non-negative")

    def eval(self, x, y) -> float:
        x = _as_point(x, self.dimension)
        y = _as_point(y, self.dimension)
        return float(self.matrix(x, y)[0, 0])

    def deriv(self, alpha, beta, x, y) -> float:
        """``d^alpha_x d^beta_y K(x, y)`` at a single pair of points."""
        x = _as_point(x, self.dimension)
        y = _as_point(y, self.dimension)
        return float(self.deriv_matrix(alpha, beta, x, y)[0, 0])

    def matrix(self, X, Y) -> np.ndarray:
        return self.pairwise(X, Y).deriv(None, None)

    def deriv_matrix(self, alpha, beta, X, Y) -> np.ndarray:
        return self.pairwise(X, Y).deriv(alpha, beta)

    def pairwise(self, X, Y) -> "PairwiseDerivatives":
        return PairwiseDerivatives(self, X, Y)

    def check_order(self, alpha: MultiIndex) -> None:
        if alpha.order() > self.max_order:
            raise CapabilityError(
                f"derivative order {alpha.order()} exceeds kernel capability {self.max_order}"
            )


class PairwiseDerivatives:
    """Kernel derivatives between two point blocks sharing Hermite factors.

    The scaled differences and the Hermite values per coordinate are cached,
    so evaluating many ``(alpha, beta)`` combinations on one block costs one
    exponential plus a few multiplications per combination.
    """

    def __init__(self, kernel: GaussianKernel, X, Y):
        d = kernel.dimension
        self.kernel = kernel
        X = as_points(X, d)
        Y = as_points(Y, d)
        eta = kernel.bandwidth
        self.shape = (X.shape[0], Y.shape[0])
        self._t = [(X[:, i][:, None] - Y[:, i][None, :]) / eta for i in range(d)]
        r2 = np.zeros(self.shape)
        for t in self._t:
            r2 += t * t
        base = np.exp(-r2)
        base[r2 > UNDERFLOW_CUTOFF**2] = 0.0
        self.base = base
        self._hermite = [[np.ones(self.shape), 2.0 * t] for t in self._t]

    def _h(self, axis: int, n: int) -> np.ndarray:
        table = self._hermite[axis]
        t = self._t[axis]
        while len(table) <= n:
            k = len(table) - 1
            table.append(hermite_step(k, t, table[k], table[k - 1]))
        return table[n]

    def deriv(self, alpha, beta) -> np.ndarray:
        d = self.kernel.dimension
        alpha = MultiIndex.zero(d) if alpha is None else as_index(alpha, d)
        beta = MultiIndex.zero(d) if beta is None else as_index(beta, d)
        self.kernel.check_order(alpha)
        self.kernel.check_order(beta)
        total = alpha.plus(beta)
        if total.is_zero():
            return self.base.copy()
        out = self.base.copy()
        for axis, n in enumerate(total):
            if n:
                out *= self._h(axis, n)
        # each derivative in the first argument contributes a factor -1/eta
        scale = (-1.0) ** alpha.order() * self.kernel.bandwidth ** (-total.order())
        out *= scale
        return out
