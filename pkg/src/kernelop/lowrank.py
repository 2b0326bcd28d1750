"""
Online low-rank kernel regression.

The solution is restricted to ``L`` basis functions ``b_j`` anchored at
centers ``z_j`` and fitted by ridge least squares on the PDE residual,

    (A^T A + lam I) c = A^T Y,    A[i, j] = (P b_j)(X_i),

with the normal matrix accumulated over streamed batches of rows so that no
``N``-sized buffer is needed.  Two bases are available:

``operator``
    ``b_j(x) = P^{(1,0)} K(z_j, x)``, the operator applied to the kernel at
    the (region-tagged) center.
``windowed``
    ``b_j(x) = rho(x) K(z_j, x)`` with a window ``rho`` vanishing on the
    boundary, so homogeneous Dirichlet data hold exactly.

Reduction order
---------------
Rows are reduced into the normal matrix in fixed groups of
``reduction_rows`` consecutive rows, counted from the first row ever seen;
rows of a batch that do not complete a group wait in a small buffer.  The
sequence of floating-point additions is therefore the same for every way of
splitting the stream into batches, and the accumulated normal matrix and
right-hand side are bitwise independent of the batch size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, ShapeError
from .kernel import GaussianKernel, as_points
from .operators import (
    DifferentiableFunction,
    PdeOperator,
    Region,
    apply_both_matrix,
    apply_first_matrix,
    leibniz_windowed_matrix,
)
from .sampling import LabeledSampleSet
from .solver import cholesky_with_jitter

OPERATOR = "operator"
WINDOWED = "windowed"
PER_TARGET = "per-target"
OPERATOR_MAP = "operator-map"


@dataclass
class LowRankModel:
    """Streaming normal-equation accumulator for the low-rank estimator.

    Parameters
    ----------
    centers : LabeledSampleSet
        Centers ``Z_L``; region tags matter only in ``operator`` mode.
    kernel, operator
        Kernel and region-tagged PDE operator.
    lam : float
        Ridge added as ``lam * I`` to the normal matrix (not scaled by ``N``).
    mode : {"operator", "windowed"}
    window : DifferentiableFunction, optional
        Required in windowed mode.
    target : {"per-target", "operator-map"}
        Per-target mode accumulates ``A^T y`` only; operator-map mode also
        keeps ``A^T`` (``L x N``) so that :meth:`finalize` returns ``W`` with
        ``c = W h(X_N)`` for any data.
    """

    centers: LabeledSampleSet
    kernel: GaussianKernel
    operator: PdeOperator
    lam: float
    mode: str = OPERATOR
    window: Optional[DifferentiableFunction] = None
    target: str = PER_TARGET
    reduction_rows: int = 500
    boundary_check: Optional[np.ndarray] = None
    rows_seen: int = 0
    jitter: float = 0.0
    _normal: np.ndarray = field(init=False, repr=False)
    _rhs: np.ndarray = field(init=False, repr=False)
    _pending_A: List[np.ndarray] = field(init=False, repr=False, default_factory=list)
    _pending_y: List[np.ndarray] = field(init=False, repr=False, default_factory=list)
    _design_T: List[np.ndarray] = field(init=False, repr=False, default_factory=list)

    def __post_init__(self):
        if not self.lam >= 0:
            raise ConfigurationError("ridge parameter must be non-negative")
        if self.mode not in (OPERATOR, WINDOWED):
            raise ConfigurationError(f"unknown basis mode {self.mode!r}")
        if self.target not in (PER_TARGET, OPERATOR_MAP):
            raise ConfigurationError(f"unknown target mode {self.target!r}")
        if self.centers.dimension != self.kernel.dimension:
            raise ShapeError("centers and kernel dimensions differ")
        self.operator.check_capability(self.kernel)
        if self.mode == WINDOWED:
            if self.window is None:
                raise ConfigurationError("windowed mode needs a window function")
            if self.boundary_check is not None and len(self.boundary_check):
                rho = self.window.value(self.boundary_check)
                if np.max(np.abs(rho)) > 1e-14:
                    raise ConfigurationError("window does not vanish on the boundary")
        L = self.size
        self._normal = self.lam * np.eye(L)
        self._rhs = None

    @property
    def size(self) -> int:
        return len(self.centers)

    # -- design -----------------------------------------------------------

    def design_block(self, batch: LabeledSampleSet) -> np.ndarray:
        """``A[i, j] = (P b_j)(X_i)`` for the rows of ``batch``."""
        if batch.dimension != self.kernel.dimension:
            raise ShapeError("batch and centers dimensions differ")
        q, L = len(batch), self.size
        if q == 0:
            return np.zeros((0, L))
        Z = self.centers.points
        if self.mode == OPERATOR:
            return apply_both_matrix(
                self.operator, self.kernel, batch.points, batch.regions, Z, self.centers.regions
            )
        X = batch.points
        A = np.zeros((q, L))
        weights = self.operator.region_weights(X, batch.regions)
        for alpha, w in weights.items():
            rows = np.flatnonzero(w)
            if rows.size:
                A[rows] += w[rows, None] * leibniz_windowed_matrix(
                    self.window, self.kernel, alpha, X[rows], Z
                )
        return A

    def basis_matrix(self, queries) -> np.ndarray:
        """``b_j(x)`` at the queries, shape ``(M, L)``."""
        Q = as_points(queries, self.kernel.dimension)
        Z = self.centers.points
        if self.mode == OPERATOR:
            return apply_first_matrix(self.operator, self.kernel, Z, self.centers.regions, Q).T
        return self.window.value(Q)[:, None] * self.kernel.matrix(Q, Z)

    # -- accumulation -----------------------------------------------------

    def accumulate(self, block, y=None) -> "LowRankModel":
        block = np.asarray(block, dtype=float)
        q = block.shape[0]
        if block.ndim != 2 or block.shape[1] != self.size:
            raise ShapeError(f"design block must have {self.size} columns")
        if y is None:
            if self.target == PER_TARGET:
                raise ShapeError("per-target mode needs observations for every batch")
            y = np.zeros(q)
        y = np.asarray(y, dtype=float)
        if y.ndim not in (1, 2) or y.shape[0] != q:
            raise ShapeError("observation count does not match the design block")
        if q == 0:
            return self
        if self._rhs is None:
            self._rhs = np.zeros((self.size,) + y.shape[1:])
        elif self._rhs.shape[1:] != y.shape[1:]:
            raise ShapeError("observations change shape between batches")
        if self.target == OPERATOR_MAP:
            self._design_T.append(block.T.copy())
        self._pending_A.append(block)
        self._pending_y.append(y)
        self.rows_seen += q
        self._reduce(final=False)
        return self

    def partial_fit(self, batch: LabeledSampleSet, y=None) -> "LowRankModel":
        if y is None and batch.values is not None:
            y = batch.values
        return self.accumulate(self.design_block(batch), y)

    def _reduce(self, final: bool) -> None:
        if not self._pending_A:
            return
        A = np.concatenate(self._pending_A) if len(self._pending_A) > 1 else self._pending_A[0]
        y = np.concatenate(self._pending_y) if len(self._pending_y) > 1 else self._pending_y[0]
        m = self.reduction_rows
        full = (A.shape[0] // m) * m
        stop = A.shape[0] if final else full
        for start in range(0, stop, m):
            Ab = A[start : start + m]
            self._normal += Ab.T @ Ab
            self._rhs += Ab.T @ y[start : start + m]
        self._pending_A = [A[stop:]] if stop < A.shape[0] else []
        self._pending_y = [y[stop:]] if stop < A.shape[0] else []

    def flush(self) -> None:
        self._reduce(final=True)

    @property
    def normal(self) -> np.ndarray:
        self.flush()
        return self._normal

    @property
    def rhs(self) -> np.ndarray:
        """``A^T Y``; one column per target when observations are 2-D."""
        self.flush()
        return np.zeros(self.size) if self._rhs is None else self._rhs

    @property
    def design_transpose(self) -> np.ndarray:
        """``A_N^T`` built blockwise (operator-map mode only)."""
        if self.target != OPERATOR_MAP:
            raise ConfigurationError("the design is only stored in operator-map mode")
        if not self._design_T:
            return np.zeros((self.size, 0))
        return np.concatenate(self._design_T, axis=1)

    # -- solve ------------------------------------------------------------

    def _factor(self):
        if self.rows_seen == 0:
            raise ConfigurationError("no batches accumulated")
        G = self.normal
        base = 1e-12 * np.trace(G) / max(self.size, 1)
        factor, self.jitter = cholesky_with_jitter(G, base)
        return factor

    def finalize(self) -> np.ndarray:
        """Coefficients ``c`` (per-target) or the map ``W`` (operator-map)."""
        factor = self._factor()
        if self.target == OPERATOR_MAP:
            return linalg.cho_solve(factor, self.design_transpose, check_finite=False)
        return linalg.cho_solve(factor, self.rhs, check_finite=False)

    def solve_coefficients(self) -> np.ndarray:
        """Per-target coefficients from the accumulated right-hand side."""
        return linalg.cho_solve(self._factor(), self.rhs, check_finite=False)

    def evaluate(self, coeffs, queries, chunk: int = 4096) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.size:
            raise ShapeError(f"expected {self.size} coefficients")
        Q = as_points(queries, self.kernel.dimension)
        out = np.zeros((Q.shape[0],) + coeffs.shape[1:])
        for start in range(0, Q.shape[0], chunk):
            rows = slice(start, start + chunk)
            out[rows] = self.basis_matrix(Q[rows]) @ coeffs
        return out

    # -- checkpoint -------------------------------------------------------
    # little-endian layout:
    #   magic b"KOLR", u32 version, u32 L, u32 d, u8 mode (0 operator,
    #   1 windowed), u32 targets T, u64 rows_seen, f64 lam, f64 eta,
    #   f64[L*d] centers, u8[L] center tags, f64[L*L] normal, f64[L*T] rhs
    #   (row-major; T = 0 marks a single 1-D right-hand side of length L).
    # Pending rows are reduced before writing.
    _MAGIC = b"KOLR"
    _HEADER = "<4sIIIBIQdd"

    def save_checkpoint(self, path) -> None:
        self.flush()
        L, d = self.centers.points.shape
        header = struct.pack(
            self._HEADER,
            self._MAGIC,
            1,
            L,
            d,
            0 if self.mode == OPERATOR else 1,
            0 if self.rhs.ndim == 1 else self.rhs.shape[1],
            self.rows_seen,
            self.lam,
            self.kernel.bandwidth,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.centers.points.astype("<f8").tobytes())
            fh.write(self.centers.regions.astype(np.uint8).tobytes())
            fh.write(self._normal.astype("<f8").tobytes())
            fh.write(self.rhs.astype("<f8").tobytes())

    @classmethod
    def load_checkpoint(
        cls, path, operator: PdeOperator, window: Optional[DifferentiableFunction] = None, **kwargs
    ) -> "LowRankModel":
        size = struct.calcsize(cls._HEADER)
        with open(path, "rb") as fh:
            magic, version, L, d, mode, targets, rows_seen, lam, eta = struct.unpack(
                cls._HEADER, fh.read(size)
            )
            if magic != cls._MAGIC or version != 1:
                raise ConfigurationError(f"{path} is not a low-rank checkpoint")
            centers = np.frombuffer(fh.read(8 * L * d), dtype="<f8").reshape(L, d).copy()
            tags = np.frombuffer(fh.read(L), dtype=np.uint8).copy()
            normal = np.frombuffer(fh.read(8 * L * L), dtype="<f8").reshape(L, L).copy()
            width = max(targets, 1)
            rhs = np.frombuffer(fh.read(8 * L * width), dtype="<f8").copy()
            rhs = rhs.reshape(L, targets) if targets else rhs
        model = cls(
            LabeledSampleSet(centers, tags),
            GaussianKernel(eta, d, max(3, operator.order)),
            operator,
            lam,
            mode=OPERATOR if mode == 0 else WINDOWED,
            window=window,
            **kwargs,
        )
        model._normal = normal
        model._rhs = rhs
        model.rows_seen = rows_seen
        return model


def select_centers(
    samples: LabeledSampleSet, count: int, seed: Optional[int] = None
) -> LabeledSampleSet:
    """First ``count`` interior samples, or a uniform subset if ``seed`` is given."""
    interior = np.flatnonzero(samples.regions == Region.INTERIOR)
    if count > interior.size:
        raise ConfigurationError(f"only {interior.size} interior samples for {count} centers")
    if seed is None:
        chosen = interior[:count]
    else:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(interior, count, replace=False))
    return LabeledSampleSet(samples.points[chosen], samples.regions[chosen])


def stream_fit(
    model: LowRankModel, samples: LabeledSampleSet, y, batch_size: int
) -> LowRankModel:
    """Feed ``samples`` to ``model`` in consecutive batches of ``batch_size`` rows."""
    if batch_size < 1:
        raise ConfigurationError("batch size must be positive")
    y = None if y is None else np.asarray(y, dtype=float)
    for start in range(0, len(samples), batch_size):
        idx = slice(start, start + batch_size)
        model.accumulate(model.design_block(samples.subset(idx)), None if y is None else y[idx])
    return model


def stream_fit_shards(model: LowRankModel, paths, batch_size: Optional[int] = None) -> LowRankModel:
    """Accumulate CSV shards written by :meth:`LabeledSampleSet.to_csv`.

    Shards are read one at a time in the given order and must carry values.
    Each shard is one batch unless ``batch_size`` splits it further; the
    fixed-group reduction makes the result independent of that choice.
    """
    for path in paths:
        shard = LabeledSampleSet.from_csv(path)
        if len(shard) and shard.values is None:
            raise ConfigurationError(f"shard {path} has no values column")
        stream_fit(model, shard, shard.values, batch_size or max(len(shard), 1))
    return model
