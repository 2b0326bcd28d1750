import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelop.errors import ConfigurationError, ShapeError
from kernelop.metrics import (
    ErrorReport,
    UndefinedMetricError,
    aggregate_trials,
    fit_rate,
    lambda_schedule,
    relative_errors,
    relative_errors_columns,
)


def test_relative_error_examples():
    truth = np.array([1.0, -2.0, 0.5, 3.0])
    assert relative_errors(truth, truth) == (0.0, 0.0)
    l2, linf = relative_errors(1.01 * truth, truth)
    assert l2 == pytest.approx(0.01, rel=1e-12) and linf == pytest.approx(0.01, rel=1e-12)
    spike = truth.copy()
    spike[0] += np.max(np.abs(truth))
    l2, linf = relative_errors(spike, truth)
    assert linf == pytest.approx(1.0)
    assert l2 == pytest.approx(np.max(np.abs(truth)) / np.linalg.norm(truth))


def test_relative_error_failures():
    with pytest.raises(UndefinedMetricError):
        relative_errors([1.0], [0.0])
    with pytest.raises(ShapeError):
        relative_errors([1.0, 2.0], [1.0])


@given(
    st.lists(st.floats(-10, 10), min_size=3, max_size=20),
    st.floats(0.01, 100),
    st.booleans(),
    st.integers(0, 2**32 - 1),
)
def test_scale_invariance(values, c, negate, seed):
    truth = np.array(values)
    if np.max(np.abs(truth)) < 1e-3:
        truth = truth + 1.0
    c = -c if negate else c
    pred = truth + np.random.default_rng(seed).normal(scale=0.1, size=truth.size)
    a = relative_errors(pred, truth)
    b = relative_errors(c * pred, c * truth)
    assert b[0] == pytest.approx(a[0], rel=1e-12, abs=1e-15)
    assert b[1] == pytest.approx(a[1], rel=1e-12, abs=1e-15)


def test_columns_match_scalar(rng):
    T = rng.normal(size=(30, 4))
    P = T + 0.01 * rng.normal(size=(30, 4))
    l2, linf = relative_errors_columns(P, T)
    for k in range(4):
        assert (l2[k], linf[k]) == pytest.approx(relative_errors(P[:, k], T[:, k]))


def test_schedule_examples():
    assert lambda_schedule(0.4, 1e-7, 10_000) == pytest.approx(2.512e-9, rel=1e-3)
    assert lambda_schedule(0.3, 2.0, 1) == 2.0
    assert lambda_schedule(0.25, 1.0, 200) / lambda_schedule(0.25, 1.0, 100) == pytest.approx(2**-0.25)
    for bad in (0.0, 0.5, 0.7):
        with pytest.raises(ConfigurationError):
            lambda_schedule(bad, 1.0, 10)


@pytest.mark.parametrize("beta", [0.25, 0.5, 1.0])
def test_fit_rate_recovers_planted(beta):
    n = np.array([1e3, 2e3, 4e3, 8e3, 1.6e4])
    b, a, r2 = fit_rate(n, 3.0 * n**-beta)
    assert b == pytest.approx(beta, abs=1e-10)
    assert a == pytest.approx(np.log(3.0), abs=1e-9)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_constant_and_errors():
    assert fit_rate([1, 2, 3], [0.5, 0.5, 0.5])[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigurationError):
        fit_rate([1, 2], [1, 2])


def _rep(n, trial, err):
    return ErrorReport([(err, 2 * err)], 0.0, n, trial)


def test_aggregate_examples():
    single = aggregate_trials([_rep(10, 0, 0.1), _rep(20, 0, 0.05), _rep(40, 0, 0.025)])
    assert single.se_l2 == [None, None, None]
    assert single.beta_l2 == pytest.approx(1.0)
    same = aggregate_trials([_rep(10, 0, 0.1), _rep(10, 1, 0.1)])
    assert same.se_l2 == [0.0]
    pair = aggregate_trials([_rep(10, 0, 1.0), _rep(10, 1, 3.0)])
    assert pair.mean_l2 == [2.0]
    assert pair.se_l2[0] == pytest.approx(1.0)


@given(st.permutations(list(range(9))))
def test_aggregate_permutation_invariant(order):
    errs = [0.3, 0.11, 0.2, 0.07, 0.05, 0.09, 0.013, 0.04, 0.021]
    reports = [_rep(10 * 2 ** (i // 3), i % 3, errs[i]) for i in range(9)]
    base = aggregate_trials(reports)
    perm = aggregate_trials([reports[i] for i in order])
    assert perm.mean_l2 == base.mean_l2
    assert perm.se_l2 == base.se_l2
    assert perm.beta_l2 == base.beta_l2


def test_exports(tmp_path):
    study = aggregate_trials([_rep(n, t, 1.0 / n + t * 1e-4) for n in (10, 20, 40) for t in range(2)],
                             {"alpha": 0.4, "c": 1e-7})
    study.write_trials_csv(tmp_path / "t.csv")
    study.write_summary_csv(tmp_path / "s.csv")
    t = (tmp_path / "t.csv").read_text()
    assert t.splitlines()[0] == "N,trial,rel_l2,rel_linf,wall_time"
    assert len(t.splitlines()) == 7
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "N,mean_l2,se_l2,mean_linf,se_linf"
    slopes = json.loads(study.slopes_json())
    assert set(slopes) >= {"beta_l2", "beta_linf"}
    assert "\n" not in study.slopes_json()
    rep = ErrorReport([(0.1, 0.2), (0.3, 0.4)], 1.5, 100)
    assert rep.mean_l2 == pytest.approx(0.2) and rep.mean_linf == pytest.approx(0.3)
    assert "rel L2 2.000e-01" in rep.table_line("x")
