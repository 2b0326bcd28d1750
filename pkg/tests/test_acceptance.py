"""
Acceptance criteria 1-12, each at its stated tolerance and runtime bound.

Every test records one ``[PASS]``/``[FAIL]`` line; the lines are also
repeated in pytest's terminal summary.  Run standalone with

    python3 tests/test_acceptance.py
"""

import sys
import time

import numpy as np
import pytest

from kernelop.checks import gram_psd_suite, kernel_fd_suite, krr_reduction_suite, lowrank_dense_suite
from kernelop.experiments import ExperimentConfig, run_benchmark, run_convergence
from kernelop.lowrank import WINDOWED, LowRankModel, select_centers, stream_fit
from kernelop.metrics import relative_errors
from kernelop.problems import SineProduct, get_problem, poisson3d_window
from kernelop.solver import fit_operator

RESULTS = {}


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    RESULTS[number] = line
    print(line)
    return passed


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def benchmark(name: str, **overrides):
    cfg = ExperimentConfig(problem=name)
    for key, value in overrides.items():
        cfg.set(key, str(value))
    return run_benchmark(cfg)


def test_c01_kernel_derivative_oracle():
    with Timer() as t:
        r = kernel_fd_suite()
    ok = r.passed and t.seconds < 5.0
    assert record(1, "kernel derivatives vs finite differences", ok,
                  f"{r.detail}, {len(r.failures)} failing configs, {t.seconds:.2f} s (< 5 s)"), r.failures


def test_c02_gram_psd():
    r = gram_psd_suite(configs=50, max_n=200)
    assert record(2, "generalized Gram PSD and symmetric", r.passed, r.detail), r.failures


def test_c03_krr_reduction():
    r = krr_reduction_suite(datasets=20)
    assert record(3, "identity operator reduces to KRR", r.passed, f"{r.detail} (<= 1e-12)"), r.failures


def test_c04_manufactured_poisson_1d():
    problem = get_problem("poisson1d")
    with Timer() as t:
        samples = problem.sample(0, 270, 30, 0)
        u = SineProduct([1.0])
        solop = fit_operator(problem.kernel(0.2), problem.operator, samples, 1e-10)
        grid = problem.eval_grid()
        pred = solop.solve(problem.forcing(u, samples), grid)
    err = relative_errors(pred, u.value(grid))[0]
    ok = err <= 1e-3 and t.seconds < 2.0
    assert record(4, "manufactured 1D Poisson", ok, f"rel L2 {err:.2e} (<= 1e-3), {t.seconds:.2f} s (< 2 s)")


def test_c05_helmholtz_20():
    with Timer() as t:
        rep = benchmark("helmholtz-20")
    ok = rep.mean_l2 <= 1.5e-2 and len(rep.per_function) == 100 and t.seconds < 60
    assert record(5, "Helmholtz omega=20", ok,
                  f"mean rel L2 {rep.mean_l2:.3e} (<= 1.5e-2), M={len(rep.per_function)}, {t.seconds:.1f} s (< 60 s)")


def test_c06_helmholtz_200():
    with Timer() as t:
        rep = benchmark("helmholtz-200")
    ok = rep.mean_l2 <= 1e-2 and t.seconds < 60
    assert record(6, "Helmholtz omega=200", ok,
                  f"mean rel L2 {rep.mean_l2:.3e} (<= 1e-2), {t.seconds:.1f} s (< 60 s)")


def test_c07_darcy():
    errors = {}
    with Timer() as t:
        for case in ("a1", "a2", "a3"):
            rep = benchmark(f"darcy-{case}")
            assert len(rep.per_function) == 50 and rep.n_samples == 4000
            errors[case] = rep.mean_l2
    ok = all(e <= 2e-2 for e in errors.values()) and t.seconds < 600
    detail = ", ".join(f"{k} {v:.3e}" for k, v in errors.items())
    assert record(7, "Darcy a1/a2/a3", ok, f"mean rel L2 {detail} (each <= 2e-2), {t.seconds:.1f} s (< 600 s)")


def test_c08_heat_and_schrodinger():
    with Timer() as t:
        heat = benchmark("heat")
        schr = benchmark("schrodinger")
    ok = heat.mean_l2 <= 1e-2 and schr.mean_l2 <= 1.5e-1 and t.seconds < 900
    assert record(8, "heat and Schroedinger", ok,
                  f"heat {heat.mean_l2:.3e} (<= 1e-2), Schroedinger {schr.mean_l2:.3e} (<= 1.5e-1), "
                  f"{t.seconds:.1f} s (< 900 s)")


def test_c09_lowrank_dense_limit():
    r = lowrank_dense_suite(n=100, lam=1e-12)
    ok = r["dense_residual"] <= 1e-6 and r["lowrank_residual"] <= 1e-6 and r["agreement"] <= 1e-4
    assert record(9, "low-rank/dense agreement", ok,
                  f"residuals dense {r['dense_residual']:.2e} low-rank {r['lowrank_residual']:.2e} (<= 1e-6), "
                  f"prediction difference {r['agreement']:.2e} (<= 1e-4)")


def test_c10_batch_invariance():
    problem = get_problem("poisson3d")
    samples = problem.sample(0, 20_000, 0, 0)
    H = np.stack([problem.forcing(u, samples) for u in problem.family.members()], axis=1)
    centers = select_centers(samples, 1000)
    outputs = {}
    for q in (500, 2000, 20_000):
        model = LowRankModel(centers, problem.kernel(0.2), problem.operator, problem.defaults.lam,
                             mode=WINDOWED, window=poisson3d_window())
        stream_fit(model, samples, H, q)
        outputs[q] = model.finalize()
    ref = outputs[20_000]
    diffs = {q: float(np.linalg.norm(c - ref) / np.linalg.norm(ref)) for q, c in outputs.items()}
    ok = max(diffs.values()) <= 1e-9
    assert record(10, "batch-partition invariance", ok,
                  "max relative difference " + f"{max(diffs.values()):.2e} over q in {{500, 2000, 20000}} (<= 1e-9)")


def test_c11_desk_scale_convergence():
    cfg = ExperimentConfig.from_pairs([
        ("problem", "poisson3d"),
        ("sizes", "10000,20000,40000,80000"),
        ("trials", "5"),
        ("centers", "1500"),
        ("batch_size", "2000"),
        ("bandwidth", "0.2"),
        ("schedule_alpha", "0.4"),
        ("schedule_c", "1e-7"),
    ])
    with Timer() as t:
        study = run_convergence(cfg)
    means = study.mean_l2
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    ok = decreasing and study.beta_l2 >= 0.3 and t.seconds < 1800
    curve = ", ".join(f"{n}: {m:.3e}" for n, m in zip(study.sample_sizes, means))
    assert record(11, "desk-scale convergence", ok,
                  f"mean rel L2 [{curve}], strictly decreasing {decreasing}, beta {study.beta_l2:.3f} (>= 0.3), "
                  f"{t.seconds:.0f} s (< 1800 s)")


def test_c12_operator_reuse():
    problem = get_problem("helmholtz-20")
    samples = problem.sample(0)
    kernel = problem.kernel()
    solop = fit_operator(kernel, problem.operator, samples, problem.defaults.lam)
    grid = problem.eval_grid()
    H = np.stack([problem.forcing(u, samples) for u in problem.family.members(seed=1)], axis=1)

    with Timer() as reuse:
        basis = solop.kernel_basis(grid)
        via_basis = basis @ H
    per_input = solop.evaluate(solop.apply(H), grid)
    rel = float(np.linalg.norm(via_basis - per_input) / np.linalg.norm(per_input))

    with Timer() as refit:
        for k in range(H.shape[1]):
            fresh = fit_operator(kernel, problem.operator, samples, problem.defaults.lam)
            fresh.evaluate(fresh.apply(H[:, k]), grid)
    speedup = refit.seconds / reuse.seconds
    ok = rel <= 1e-10 and speedup >= 10
    assert record(12, "operator reuse through the kernel basis", ok,
                  f"relative difference {rel:.2e} (<= 1e-10), speedup {speedup:.0f}x over refitting (>= 10x)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
