"""
Benchmark and convergence-study drivers.

Configs are flat ``key = value`` files; any key left unset falls back to the
problem's defaults.  Wall time covers fitting plus evaluating the whole test
family on the evaluation grid; sampling and building the exact solutions are
not timed.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError
from .lowrank import OPERATOR, WINDOWED, LowRankModel, select_centers, stream_fit
from .metrics import (
    ConvergenceStudy,
    ErrorReport,
    aggregate_trials,
    lambda_schedule,
    relative_errors_columns,
)
from .operators import ProductWindow
from .problems import PdeProblem, get_problem
from .solver import fit_operator

logger = logging.getLogger(__name__)

#: Problems that run through the low-rank path unless ``centers`` is overridden.
LOWRANK_DEFAULTS = {"poisson3d": (1500, 2000, WINDOWED)}


@dataclass
class ExperimentConfig:
    problem: str = "helmholtz-20"
    n_interior: Optional[int] = None
    n_boundary: Optional[int] = None
    n_initial: Optional[int] = None
    bandwidth: Optional[float] = None
    lam: Optional[float] = None
    schedule_alpha: Optional[float] = None
    schedule_c: Optional[float] = None
    family_size: Optional[int] = None
    seed: int = 0
    trials: int = 1
    centers: Optional[int] = None
    batch_size: Optional[int] = None
    basis: Optional[str] = None
    center_seed: Optional[int] = None
    sizes: List[int] = field(default_factory=list)
    synthetic_rate: Optional[float] = None
    out: str = "results"

    # -- parsing ---------------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs) -> "ExperimentConfig":
        cfg = cls()
        for key, value in pairs:
            cfg.set(key, value)
        return cfg

    def set(self, key: str, value: str) -> None:
        key = key.strip().replace("-", "_")
        names = {f.name: f for f in dataclasses.fields(self)}
        if key not in names:
            raise ConfigurationError(f"unknown config key {key!r}")
        value = value.strip()
        current = names[key].type
        if key == "sizes" and value.lower() in ("", "none"):
            self.sizes = []
            return
        if value.lower() in ("", "none", "default"):
            if key in ("problem", "out", "seed", "trials", "sizes"):
                raise ConfigurationError(f"{key} cannot be unset")
            setattr(self, key, None)
            return
        try:
            if key == "sizes":
                parsed = [int(float(v)) for v in value.replace(";", ",").split(",") if v.strip()]
            elif key in ("problem", "out", "basis"):
                parsed = value
            elif "int" in str(current):
                parsed = int(float(value))
            else:
                parsed = float(value)
        except ValueError:
            raise ConfigurationError(f"bad value {value!r} for {key}") from None
        setattr(self, key, parsed)

    @staticmethod
    def read_pairs(path) -> list:
        pairs = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value.strip()))
        return pairs

    # -- resolution ------------------------------------------------------

    def resolved(self, problem: Optional[PdeProblem] = None) -> "ExperimentConfig":
        """Copy with every problem-dependent default filled in."""
        problem = problem or get_problem(self.problem)
        dft = problem.defaults
        out = dataclasses.replace(self, sizes=list(self.sizes))
        out.n_interior = dft.n_interior if out.n_interior is None else out.n_interior
        out.n_boundary = dft.n_boundary if out.n_boundary is None else out.n_boundary
        out.n_initial = dft.n_initial if out.n_initial is None else out.n_initial
        out.bandwidth = dft.bandwidth if out.bandwidth is None else out.bandwidth
        if out.schedule_alpha is None and out.lam is None:
            out.lam = dft.lam
        if out.schedule_alpha is not None and out.schedule_c is None:
            raise ConfigurationError("schedule_alpha needs schedule_c")
        out.family_size = problem.family.size if out.family_size is None else out.family_size
        lr = LOWRANK_DEFAULTS.get(problem.name)
        if lr is not None:
            out.centers = lr[0] if out.centers is None else out.centers
            out.batch_size = lr[1] if out.batch_size is None else out.batch_size
            out.basis = lr[2] if out.basis is None else out.basis
        if out.centers is not None:
            out.batch_size = 2000 if out.batch_size is None else out.batch_size
            out.basis = OPERATOR if out.basis is None else out.basis
            if out.basis not in (OPERATOR, WINDOWED):
                raise ConfigurationError(f"unknown basis {out.basis!r}")
        if out.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        return out

    def regularization(self, n: int) -> float:
        if self.schedule_alpha is not None:
            return lambda_schedule(self.schedule_alpha, self.schedule_c, n)
        return self.lam

    def dump(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {'none' if v is None else v}")
        return "\n".join(lines) + "\n"


def _trial_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def run_benchmark(
    cfg: ExperimentConfig,
    problem: Optional[PdeProblem] = None,
    n_interior: Optional[int] = None,
    trial: int = 0,
) -> ErrorReport:
    """Fit once, then solve every family member on the evaluation grid."""
    problem = problem or get_problem(cfg.problem)
    cfg = cfg.resolved(problem)
    n_int = cfg.n_interior if n_interior is None else n_interior
    report = ErrorReport(trial=trial)
    n = n_int + cfg.n_boundary + cfg.n_initial
    report.n_samples = n
    if cfg.synthetic_rate is not None:
        # harness self-test: plant error = N^(-rate) without solving anything
        err = float(n) ** (-cfg.synthetic_rate)
        report.per_function = [(err, err)]
        return report
    sample_seed = cfg.seed if trial == 0 and n_interior is None else _trial_seed(cfg.seed, trial, n_int)
    samples = problem.sample(sample_seed, n_int, cfg.n_boundary, cfg.n_initial)
    members = problem.family.members(seed=cfg.seed, count=cfg.family_size)
    if not members:
        return report
    grid = problem.eval_grid(cfg.seed)
    H = np.stack([problem.forcing(u, samples) for u in members], axis=1)
    truth = np.stack([u.value(grid) for u in members], axis=1)
    lam = cfg.regularization(n)
    kernel = problem.kernel(cfg.bandwidth)

    start = time.perf_counter()
    if cfg.centers is None:
        solop = fit_operator(kernel, problem.operator, samples, lam)
        pred = solop.evaluate(solop.apply(H), grid)
    else:
        window = None
        if cfg.basis == WINDOWED:
            window = ProductWindow(problem.domain.lower, problem.domain.upper)
        model = LowRankModel(
            select_centers(samples, cfg.centers, cfg.center_seed),
            kernel,
            problem.operator,
            lam,
            mode=cfg.basis,
            window=window,
        )
        stream_fit(model, samples, H, cfg.batch_size)
        pred = model.evaluate(model.finalize(), grid)
    report.wall_time_seconds = time.perf_counter() - start

    l2, linf = relative_errors_columns(pred, truth)
    report.per_function = list(zip(l2.tolist(), linf.tolist()))
    return report


def run_convergence(cfg: ExperimentConfig, progress=None) -> ConvergenceStudy:
    """Benchmark every ``(N, trial)`` pair and fit the decay rates."""
    problem = get_problem(cfg.problem)
    cfg = cfg.resolved(problem)
    if len(cfg.sizes) < 1:
        raise ConfigurationError("convergence study needs a list of sizes")
    reports = []
    for n in cfg.sizes:
        for trial in range(cfg.trials):
            rep = run_benchmark(cfg, problem, n_interior=n, trial=trial)
            rep.n_samples = n
            reports.append(rep)
            if progress is not None:
                progress(n, trial, rep)
    schedule = (
        {"alpha": cfg.schedule_alpha, "c": cfg.schedule_c}
        if cfg.schedule_alpha is not None
        else {"lam": cfg.lam}
    )
    return aggregate_trials(reports, schedule)
