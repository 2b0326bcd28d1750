"""
Self-check suites run by ``kernelop selfcheck`` and by the acceptance tests.

Each suite returns a :class:`CheckResult`.  The oracles here are independent
of the code under test: kernel derivatives are compared with nested central
finite differences of ``exp(-|x - y|^2 / eta^2)`` computed in extended
precision, and the ridge reduction is compared with a plain dense solve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import List

import numpy as np

from .kernel import GaussianKernel, MultiIndex
from .lowrank import OPERATOR, LowRankModel, stream_fit
from .operators import PdeOperator, Region, apply_both_matrix, apply_to_function
from .problems import SineProduct, make_darcy, make_heat, make_helmholtz
from .sampling import LabeledSampleSet
from .solver import SolverConfig, assemble_gram, fit, fit_operator


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    failures: List[str] = field(default_factory=list)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


# ----------------------------------------------------------------------
# kernel derivatives against finite differences

FD_RELATIVE = 1e-5
FD_ABSOLUTE = 1e-10
FD_STEP = 0.05  # initial step as a fraction of eta


def _kernel_ld(x, y, eta):
    """Gaussian kernel in extended precision; rows of ``x`` pair with rows of ``y``."""
    r2 = np.sum((x - y) ** 2, axis=1)
    return np.exp(-r2 / (eta * eta))


def _central_stencil(n: int):
    """Offsets (in steps) and weights of the n-fold nested central difference."""
    return [(n / 2.0 - k, (-1) ** k * comb(n, k)) for k in range(n + 1)]


def _nested_difference(x, y, eta, alpha, beta, h):
    x = x.astype(np.longdouble)
    y = y.astype(np.longdouble)
    d = x.shape[1]
    orders = list(alpha) + list(beta)
    stencils = [_central_stencil(n) for n in orders]
    total = np.zeros(x.shape[0], dtype=np.longdouble)
    for combo in itertools.product(*stencils):
        shift = np.array([off for off, _ in combo], dtype=np.longdouble) * h
        weight = np.prod([w for _, w in combo])
        total += weight * _kernel_ld(x + shift[:d], y + shift[d:], eta)
    return total / h ** sum(orders)


def finite_difference_derivative(x, y, eta, alpha, beta):
    """Richardson-extrapolated nested central difference of the kernel.

    Three step sizes ``h, h/2, h/4`` cancel the ``h^2`` and ``h^4`` error
    terms of the symmetric stencil.
    """
    h = np.longdouble(FD_STEP) * np.longdouble(eta)
    d1 = _nested_difference(x, y, eta, alpha, beta, h)
    d2 = _nested_difference(x, y, eta, alpha, beta, h / 2)
    d4 = _nested_difference(x, y, eta, alpha, beta, h / 4)
    r1 = (4 * d2 - d1) / 3
    r2 = (4 * d4 - d2) / 3
    return ((16 * r2 - r1) / 15).astype(float)


def _indices(d: int, total: int):
    for orders in itertools.product(range(total + 1), repeat=2 * d):
        if sum(orders) <= total:
            yield MultiIndex(orders[:d]), MultiIndex(orders[d:])


def kernel_fd_suite(
    dims=(1, 2, 3), bandwidths=(0.05, 0.1, 1.0), pairs: int = 100, max_total: int = 4, seed: int = 0
) -> CheckResult:
    """Analytic ``d^alpha_x d^beta_y K`` against finite differences.

    Points are drawn so that ``|x - y| / eta`` is of order one, where the
    derivatives are far from negligible.  A value passes when it is within
    ``FD_RELATIVE`` relative error, or within ``FD_ABSOLUTE`` on the
    dimensionless scale ``eta^|alpha+beta| * derivative`` (near zeros).
    """
    rng = np.random.default_rng(seed)
    failures = []
    checked = 0
    worst = 0.0
    for d in dims:
        for eta in bandwidths:
            kernel = GaussianKernel(eta, d, max_order=max_total)
            x = rng.uniform(0.0, 1.0, size=(pairs, d))
            y = x + eta * rng.uniform(-1.5, 1.5, size=(pairs, d))
            pw = kernel.pairwise(x, y)
            for alpha, beta in _indices(d, max_total):
                analytic = np.diagonal(pw.deriv(alpha, beta))
                numeric = finite_difference_derivative(x, y, eta, alpha, beta)
                scale = eta ** (-(alpha.order() + beta.order()))
                err = np.abs(analytic - numeric)
                ok = (err <= FD_RELATIVE * np.abs(numeric)) | (err <= FD_ABSOLUTE * scale)
                checked += analytic.size
                rel = err / np.maximum(np.abs(numeric), FD_ABSOLUTE * scale / FD_RELATIVE)
                worst = max(worst, float(rel.max()))
                if not ok.all():
                    failures.append(
                        f"d={d} eta={eta} alpha={tuple(alpha)} beta={tuple(beta)}: "
                        f"{int((~ok).sum())} of {ok.size} pairs off"
                    )
    return CheckResult(
        "kernel-derivatives",
        not failures,
        f"{checked} values, worst scaled error {worst:.2e}",
        failures,
    )


# ----------------------------------------------------------------------
# Gram matrix symmetry and positive semidefiniteness

GRAM_OPERATORS = ("identity", "laplacian", "helmholtz", "darcy-a2", "heat")


def _random_operator(kind: str, rng):
    if kind == "identity":
        return PdeOperator.identity(int(rng.integers(1, 4)))
    if kind == "laplacian":
        return PdeOperator.negative_laplacian(int(rng.integers(1, 4)))
    if kind == "helmholtz":
        return make_helmholtz(float(rng.uniform(1.0, 30.0))).operator
    if kind == "darcy-a2":
        return make_darcy("a2").operator
    return make_heat().operator


def _random_samples(d: int, n: int, rng) -> LabeledSampleSet:
    points = rng.uniform(0.0, 1.0, size=(n, d))
    regions = rng.choice([Region.INTERIOR, Region.BOUNDARY, Region.INITIAL], size=n, p=[0.7, 0.2, 0.1])
    return LabeledSampleSet(points, regions.astype(np.uint8))


def gram_psd_suite(configs: int = 50, max_n: int = 200, seed: int = 1) -> CheckResult:
    """``min eig G >= -1e-8 |G|_2`` and ``max |G - G^T| <= 1e-10 max |G|``."""
    rng = np.random.default_rng(seed)
    failures = []
    worst_eig = 0.0
    for i in range(configs):
        kind = GRAM_OPERATORS[i % len(GRAM_OPERATORS)]
        op = _random_operator(kind, rng)
        n = int(rng.integers(2, max_n + 1))
        eta = float(rng.choice([0.1, 0.3, 1.0]))
        samples = _random_samples(op.dimension, n, rng)
        G = assemble_gram(GaussianKernel(eta, op.dimension), op, samples).matrix
        eig = np.linalg.eigvalsh(G)
        norm = max(abs(eig[0]), abs(eig[-1]))
        asym = np.max(np.abs(G - G.T))
        ratio = eig[0] / norm if norm > 0 else 0.0
        worst_eig = min(worst_eig, ratio)
        if eig[0] < -1e-8 * norm or asym > 1e-10 * np.max(np.abs(G)):
            failures.append(f"config {i} ({kind}, N={n}, eta={eta}): min eig/|G| {ratio:.2e}, asym {asym:.2e}")
    return CheckResult("gram-psd", not failures, f"{configs} configs, worst min-eig ratio {worst_eig:.2e}", failures)


# ----------------------------------------------------------------------
# identity operator reduces to kernel ridge regression


def krr_reduction_suite(datasets: int = 20, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for i in range(datasets):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(5, 120))
        eta = float(rng.uniform(0.1, 0.6))
        lam = float(10.0 ** rng.uniform(-3, -1))
        X = rng.uniform(0.0, 1.0, size=(n, d))
        Y = rng.normal(size=n)
        kernel = GaussianKernel(eta, d)
        samples = LabeledSampleSet(X, np.zeros(n, dtype=np.uint8))
        coeffs = fit_operator(kernel, PdeOperator.identity(d), samples, lam).apply(Y)
        direct = np.linalg.solve(kernel.matrix(X, X) + lam * n * np.eye(n), Y)
        rel = np.linalg.norm(coeffs - direct) / np.linalg.norm(direct)
        worst = max(worst, float(rel))
        if rel > 1e-12:
            failures.append(f"dataset {i}: relative difference {rel:.2e}")
    return CheckResult("krr-reduction", not failures, f"worst relative difference {worst:.2e}", failures)


# ----------------------------------------------------------------------
# low-rank model with centers = samples agrees with the dense solver


def separated_poisson_samples(n: int = 100, seed: int = 3) -> LabeledSampleSet:
    """Jittered uniform 1D points: ``n - 2`` interior plus both endpoints."""
    rng = np.random.default_rng(seed)
    m = n - 2
    spacing = 1.0 / (m + 1)
    interior = spacing * (np.arange(1, m + 1) + rng.uniform(-0.1, 0.1, size=m))
    points = np.concatenate([interior, [0.0, 1.0]])[:, None]
    regions = np.array([Region.INTERIOR] * m + [Region.BOUNDARY] * 2, dtype=np.uint8)
    return LabeledSampleSet(points, regions)


def lowrank_dense_suite(n: int = 100, eta_over_spacing: float = 0.4, lam: float = 1e-12) -> dict:
    """Run both solvers on the same points and report residuals and agreement."""
    samples = separated_poisson_samples(n)
    op = PdeOperator.negative_laplacian(1)
    kernel = GaussianKernel(eta_over_spacing / (n - 1), 1)
    Y = apply_to_function(op, SineProduct([1.0]), samples.points, samples.regions)
    grid = np.linspace(0.0, 1.0, 101)

    gram = assemble_gram(kernel, op, samples)
    dense = fit(gram, samples, SolverConfig(lam), kernel, op)
    c_dense = dense.apply(Y)
    dense_res = np.linalg.norm(gram.matrix @ c_dense - Y) / np.linalg.norm(Y)
    dense_pred = dense.evaluate(c_dense, grid)

    model = LowRankModel(samples, kernel, op, lam, mode=OPERATOR)
    stream_fit(model, samples, Y, batch_size=n)
    c_low = model.finalize()
    A = model.design_block(samples)
    low_res = np.linalg.norm(A @ c_low - Y) / np.linalg.norm(Y)
    low_pred = model.evaluate(c_low, grid)

    agree = np.linalg.norm(low_pred - dense_pred) / np.linalg.norm(dense_pred)
    return {"dense_residual": float(dense_res), "lowrank_residual": float(low_res), "agreement": float(agree)}


def lowrank_dense_check() -> CheckResult:
    r = lowrank_dense_suite()
    ok = r["dense_residual"] <= 1e-6 and r["lowrank_residual"] <= 1e-6 and r["agreement"] <= 1e-4
    detail = (
        f"residuals {r['dense_residual']:.2e} / {r['lowrank_residual']:.2e}, "
        f"prediction difference {r['agreement']:.2e}"
    )
    return CheckResult("lowrank-dense", ok, detail)


def gram_entry_check(seed: int = 4) -> CheckResult:
    """Blocked assembly equals the unblocked two-sided application."""
    rng = np.random.default_rng(seed)
    op = make_darcy("a2").operator
    samples = _random_samples(2, 700, rng)
    kernel = GaussianKernel(0.5, 2)
    G = assemble_gram(kernel, op, samples).matrix
    H = apply_both_matrix(op, kernel, samples.points, samples.regions, samples.points, samples.regions)
    diff = float(np.max(np.abs(G - H)) / np.max(np.abs(H)))
    return CheckResult("gram-blocks", diff <= 1e-12, f"max relative difference {diff:.2e}")


def run_selfcheck() -> List[CheckResult]:
    return [
        kernel_fd_suite(),
        gram_psd_suite(),
        krr_reduction_suite(),
        lowrank_dense_check(),
        gram_entry_check(),
    ]


__all__ = [
    "CheckResult",
    "finite_difference_derivative",
    "gram_entry_check",
    "gram_psd_suite",
    "kernel_fd_suite",
    "krr_reduction_suite",
    "lowrank_dense_check",
    "lowrank_dense_suite",
    "run_selfcheck",
    "separated_poisson_samples",
]
