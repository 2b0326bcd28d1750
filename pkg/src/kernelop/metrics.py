"""
Error metrics, trial aggregation, regularization schedules and rate fits.

Norms are discrete: the relative errors are taken over whatever evaluation
grid the caller supplies.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ShapeError


class UndefinedMetricError(ConfigurationError):
    """The reference solution has zero norm."""


def relative_errors(pred, truth) -> Tuple[float, float]:
    """``(|pred - truth|_2 / |truth|_2, |pred - truth|_inf / |truth|_inf)``."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeError("prediction and truth differ in shape")
    diff = pred - truth
    n2 = np.linalg.norm(truth)
    ninf = np.max(np.abs(truth)) if truth.size else 0.0
    if n2 == 0 or ninf == 0:
        raise UndefinedMetricError("relative error undefined for a zero reference")
    return float(np.linalg.norm(diff) / n2), float(np.max(np.abs(diff)) / ninf)


def relative_errors_columns(pred, truth) -> Tuple[np.ndarray, np.ndarray]:
    """Column-wise :func:`relative_errors` for ``(M, K)`` arrays."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeError("prediction and truth differ in shape")
    n2 = np.linalg.norm(truth, axis=0)
    ninf = np.max(np.abs(truth), axis=0)
    if np.any(n2 == 0) or np.any(ninf == 0):
        raise UndefinedMetricError("relative error undefined for a zero reference")
    diff = pred - truth
    return np.linalg.norm(diff, axis=0) / n2, np.max(np.abs(diff), axis=0) / ninf


def lambda_schedule(alpha: float, c: float, n: int) -> float:
    """Data-dependent regularization ``c * n**(-alpha)`` with ``0 < alpha < 1/2``."""
    if not 0.0 < alpha < 0.5:
        raise ConfigurationError("schedule exponent must lie in (0, 1/2)")
    if not c > 0:
        raise ConfigurationError("schedule constant must be positive")
    if n < 1:
        raise ConfigurationError("sample size must be positive")
    return c * float(n) ** (-alpha)


def fit_rate(sample_sizes: Sequence[float], mean_errors: Sequence[float]):
    """Least-squares fit of ``log err = a - beta log N``.

    Returns ``(beta, intercept, r_squared)``; ``r_squared`` is 1 when the
    errors are constant or lie exactly on a power law.
    """
    n = np.asarray(sample_sizes, dtype=float)
    e = np.asarray(mean_errors, dtype=float)
    if n.shape != e.shape or n.size < 3:
        raise ConfigurationError("need at least three (N, error) pairs")
    if np.any(e <= 0) or np.any(n <= 0):
        raise ConfigurationError("sample sizes and errors must be positive")
    x, y = np.log(n), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    beta = -float(slope)
    return (0.0 if beta == 0 else beta), float(intercept), r2


@dataclass
class ErrorReport:
    per_function: List[Tuple[float, float]] = field(default_factory=list)
    wall_time_seconds: float = 0.0
    n_samples: Optional[int] = None
    trial: int = 0

    @property
    def mean_l2(self) -> float:
        return float(np.mean([e[0] for e in self.per_function])) if self.per_function else math.nan

    @property
    def mean_linf(self) -> float:
        return float(np.mean([e[1] for e in self.per_function])) if self.per_function else math.nan

    def table_line(self, label: str) -> str:
        return (
            f"{label} | cost {self.wall_time_seconds:.3f} s | "
            f"rel L2 {self.mean_l2:.3e} | rel Linf {self.mean_linf:.3e}"
        )

    def write_errors_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "rel_l2", "rel_linf"])
            for k, (l2, linf) in enumerate(self.per_function):
                w.writerow([k, repr(l2), repr(linf)])

    def write_summary_csv(self, path) -> None:
        # wall time is printed, not written, so that reruns give identical files
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["M", "N", "mean_l2", "mean_linf"])
            w.writerow([len(self.per_function), self.n_samples, repr(self.mean_l2), repr(self.mean_linf)])


@dataclass
class ConvergenceStudy:
    sample_sizes: List[int]
    trials: Dict[int, List[ErrorReport]]
    mean_l2: List[float]
    se_l2: List[Optional[float]]
    mean_linf: List[float]
    se_linf: List[Optional[float]]
    beta_l2: Optional[float] = None
    beta_linf: Optional[float] = None
    r2_l2: Optional[float] = None
    r2_linf: Optional[float] = None
    schedule: Optional[dict] = None

    def write_trials_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "trial", "rel_l2", "rel_linf", "wall_time"])
            for n in self.sample_sizes:
                for rep in self.trials[n]:
                    w.writerow([n, rep.trial, repr(rep.mean_l2), repr(rep.mean_linf),
                                repr(rep.wall_time_seconds)])

    def write_summary_csv(self, path) -> None:
        def fmt(v):
            return "" if v is None else repr(v)

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "mean_l2", "se_l2", "mean_linf", "se_linf"])
            for i, n in enumerate(self.sample_sizes):
                w.writerow([n, repr(self.mean_l2[i]), fmt(self.se_l2[i]),
                            repr(self.mean_linf[i]), fmt(self.se_linf[i])])

    def slopes_json(self) -> str:
        payload = {
            "beta_l2": self.beta_l2,
            "beta_linf": self.beta_linf,
            "r2_l2": self.r2_l2,
            "r2_linf": self.r2_linf,
            "schedule": self.schedule,
        }
        return json.dumps(payload, sort_keys=True)


def _standard_error(values: Sequence[float]) -> Optional[float]:
    if len(values) < 2:
        return None
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def aggregate_trials(reports: Sequence[ErrorReport], schedule: Optional[dict] = None) -> ConvergenceStudy:
    """Per-``N`` mean and standard error over trials; slopes fit on the means."""
    by_n: Dict[int, List[ErrorReport]] = defaultdict(list)
    for rep in reports:
        if rep.n_samples is None:
            raise ConfigurationError("every report needs its sample size")
        by_n[rep.n_samples].append(rep)
    sizes = sorted(by_n)
    mean_l2, se_l2, mean_linf, se_linf = [], [], [], []
    for n in sizes:
        l2 = sorted(r.mean_l2 for r in by_n[n])
        linf = sorted(r.mean_linf for r in by_n[n])
        mean_l2.append(float(np.mean(l2)))
        mean_linf.append(float(np.mean(linf)))
        se_l2.append(_standard_error(l2))
        se_linf.append(_standard_error(linf))
    study = ConvergenceStudy(sizes, dict(by_n), mean_l2, se_l2, mean_linf, se_linf,
                             schedule=schedule)
    if len(sizes) >= 3:
        study.beta_l2, _, study.r2_l2 = fit_rate(sizes, mean_l2)
        study.beta_linf, _, study.r2_linf = fit_rate(sizes, mean_linf)
    return study
