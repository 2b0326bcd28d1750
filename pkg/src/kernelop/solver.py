"""
Dense physics-informed kernel ridge regression.

For samples ``X_N`` with region tags and data ``Y_N = h(X_N)`` the estimator is

    u(x) = sum_i c_i P^{(1,0)} K(X_i, x),   (G + lam N I) c = Y_N,

where ``G = P^{(1,1)} K(X_N, X_N)`` is the generalized Gram matrix.  The
factorization of ``G + lam N I`` does not depend on ``h``, so a fitted
:class:`SolutionOperator` maps any new data vector to a solution, either
through :meth:`SolutionOperator.apply` or through the precomputed kernel
basis ``psi = (G + lam N I)^{-1} P^{(1,0)} K(X_N, .)``.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, NumericalError, ShapeError
from .kernel import GaussianKernel, as_points
from .operators import CHUNK_ROWS, PdeOperator, apply_both_block, apply_first_matrix
from .sampling import LabeledSampleSet

logger = logging.getLogger(__name__)

#: Successive jitter multipliers tried when a Cholesky factorization fails.
JITTER_STEPS = 7


@dataclass(frozen=True)
class GeneralizedGram:
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SolverConfig:
    """Regularization ``lam`` (multiplied by ``N`` in the solve) and jitter."""

    lam: float
    jitter_start: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError("regularization parameter must be positive")


def assemble_gram(
    kernel: GaussianKernel, op: PdeOperator, samples: LabeledSampleSet
) -> GeneralizedGram:
    """Upper triangle by row blocks, mirrored so that ``G`` is exactly symmetric."""
    op.check_capability(kernel)
    X = samples.points
    n = X.shape[0]
    weights = op.region_weights(X, samples.regions)
    G = np.zeros((n, n))
    for start in range(0, n, CHUNK_ROWS):
        stop = min(start + CHUNK_ROWS, n)
        rows = slice(start, stop)
        block = apply_both_block(
            kernel,
            X[rows],
            {a: w[rows] for a, w in weights.items()},
            X[start:],
            {a: w[start:] for a, w in weights.items()},
        )
        diag = block[:, : stop - start]
        diag[...] = np.triu(diag) + np.triu(diag, 1).T
        G[rows, start:] = block
        G[stop:, rows] = block[:, stop - start :].T
    return GeneralizedGram(G)


def cholesky_with_jitter(A: np.ndarray, base_jitter: float, jitter_start: float = 0.0):
    """Cholesky factor of ``A + jitter I``, escalating ``jitter`` on failure.

    Returns ``(factor, jitter)`` where ``factor`` is scipy's ``cho_factor``
    pair.  The ladder is ``jitter_start`` then ``base_jitter * 10**k`` for
    ``k = 0..6``.
    """
    ladder = [jitter_start] + [base_jitter * 10.0**k for k in range(JITTER_STEPS)]
    diag = np.diag_indices_from(A)
    last_error = None
    for jitter in ladder:
        M = A.copy()
        if jitter:
            M[diag] += jitter
        try:
            return linalg.cho_factor(M, lower=False, overwrite_a=True, check_finite=False), jitter
        except linalg.LinAlgError as exc:
            last_error = exc
            logger.warning("Cholesky failed with jitter %.3e; escalating", jitter)
    d = np.diag(A)
    raise NumericalError(
        f"factorization failed after jitter {ladder[-1]:.3e} "
        f"(diagonal range [{d.min():.3e}, {d.max():.3e}]): {last_error}"
    )


@dataclass
class SolutionOperator:
    """Fitted empirical solution operator ``h(X_N) -> u``."""

    samples: LabeledSampleSet
    operator: PdeOperator
    kernel: GaussianKernel
    factor: tuple
    lam: float
    jitter: float = 0.0

    @property
    def size(self) -> int:
        return len(self.samples)

    def apply(self, h_values) -> np.ndarray:
        """Coefficients ``(G + lam N I)^{-1} h`` (columns handled independently)."""
        h = np.asarray(h_values, dtype=float)
        if h.shape[0] != self.size:
            raise ShapeError(f"expected {self.size} data values, got {h.shape[0]}")
        return linalg.cho_solve(self.factor, h, check_finite=False)

    def feature_matrix(self, queries) -> np.ndarray:
        """``P^{(1,0)} K(X_N, Q)`` with shape ``(N, M)``."""
        Q = as_points(queries, self.kernel.dimension)
        return apply_first_matrix(
            self.operator, self.kernel, self.samples.points, self.samples.regions, Q
        )

    def evaluate(self, coeffs, queries, chunk: int = 2048) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.size:
            raise ShapeError(f"expected {self.size} coefficients, got {coeffs.shape[0]}")
        Q = as_points(queries, self.kernel.dimension)
        out = np.zeros((Q.shape[0],) + coeffs.shape[1:])
        for start in range(0, Q.shape[0], chunk):
            rows = slice(start, start + chunk)
            out[rows] = self.feature_matrix(Q[rows]).T @ coeffs
        return out

    def kernel_basis(self, queries) -> np.ndarray:
        """``(M, N)`` matrix whose column ``i`` is ``psi_i`` at the queries."""
        Q = as_points(queries, self.kernel.dimension)
        if Q.shape[0] == 0:
            return np.zeros((0, self.size))
        return linalg.cho_solve(self.factor, self.feature_matrix(Q), check_finite=False).T

    def solve(self, h_values, queries) -> np.ndarray:
        return self.evaluate(self.apply(h_values), queries)

    def system_matrix_times(self, gram: GeneralizedGram, coeffs) -> np.ndarray:
        """``(G + lam N I) c`` for residual checks."""
        return gram.matrix @ coeffs + self.lam * self.size * np.asarray(coeffs)

    # ------------------------------------------------------------------
    # binary layout (little-endian):
    #   magic b"KOPS", u32 version,
    #   u64 N, u32 d, u32 s, u32 max_order, f64 eta, f64 lam, f64 jitter,
    #   f64[N*d] points (row-major), u8[N] region tags,
    #   f64[N(N+1)/2] upper Cholesky factor packed row by row.
    _MAGIC = b"KOPS"
    _VERSION = 1

    def save(self, path) -> None:
        n, d = self.samples.points.shape
        U, lower = self.factor
        if lower:
            U = U.T
        packed = U[np.triu_indices(n)]
        header = struct.pack(
            "<4sIQIIIddd",
            self._MAGIC,
            self._VERSION,
            n,
            d,
            self.operator.order,
            self.kernel.max_order,
            self.kernel.bandwidth,
            self.lam,
            self.jitter,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.samples.points.astype("<f8").tobytes())
            fh.write(self.samples.regions.astype(np.uint8).tobytes())
            fh.write(packed.astype("<f8").tobytes())

    @classmethod
    def load(cls, path, operator: PdeOperator) -> "SolutionOperator":
        """Restore a saved operator; coefficient functions are not serialized,
        so the caller passes the same :class:`PdeOperator` back in."""
        size = struct.calcsize("<4sIQIIIddd")
        with open(path, "rb") as fh:
            magic, version, n, d, s, max_order, eta, lam, jitter = struct.unpack(
                "<4sIQIIIddd", fh.read(size)
            )
            if magic != cls._MAGIC or version != cls._VERSION:
                raise ConfigurationError(f"{path} is not a saved solution operator")
            points = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
            regions = np.frombuffer(fh.read(n), dtype=np.uint8).copy()
            packed = np.frombuffer(fh.read(8 * n * (n + 1) // 2), dtype="<f8")
        if operator.dimension != d or operator.order != s:
            raise ConfigurationError("operator does not match the saved dimension/order")
        U = np.zeros((n, n))
        U[np.triu_indices(n)] = packed
        kernel = GaussianKernel(eta, d, max_order)
        return cls(LabeledSampleSet(points, regions), operator, kernel, (U, False), lam, jitter)


def fit(
    gram: GeneralizedGram,
    samples: LabeledSampleSet,
    config: SolverConfig,
    kernel: GaussianKernel,
    op: PdeOperator,
) -> SolutionOperator:
    """Factor ``G + lam N I``; the jitter actually used is kept on the result."""
    n = gram.size
    if len(samples) != n:
        raise ShapeError("Gram size and sample count differ")
    if n == 0:
        raise ConfigurationError("cannot fit with zero samples")
    A = gram.matrix.copy()
    A[np.diag_indices(n)] += config.lam * n
    base = 1e-12 * np.trace(gram.matrix) / n
    factor, jitter = cholesky_with_jitter(A, base, config.jitter_start)
    return SolutionOperator(samples, op, kernel, factor, config.lam, jitter)


def fit_operator(
    kernel: GaussianKernel, op: PdeOperator, samples: LabeledSampleSet, lam: float
) -> SolutionOperator:
    """Assemble and fit in one call."""
    return fit(assemble_gram(kernel, op, samples), samples, SolverConfig(lam), kernel, op)


def export_matrix_csv(matrix: np.ndarray, path) -> None:
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", fmt="%.17g")


def solution_derivative(solop: SolutionOperator, coeffs, alpha, queries) -> np.ndarray:
    """``d^alpha u`` of the fitted solution, for residual diagnostics."""
    from .kernel import as_index

    d = solop.kernel.dimension
    alpha = as_index(alpha, d)
    Q = as_points(queries, d)
    X = solop.samples.points
    weights = solop.operator.region_weights(X, solop.samples.regions)
    kernel = GaussianKernel(solop.kernel.bandwidth, d, max(solop.kernel.max_order, alpha.order()))
    pw = kernel.pairwise(X, Q)
    phi = np.zeros(pw.shape)
    for a, w in weights.items():
        phi += w[:, None] * pw.deriv(a, alpha)
    return phi.T @ np.asarray(coeffs, dtype=float)
