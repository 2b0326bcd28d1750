import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelop.checks import lowrank_dense_suite
from kernelop.errors import ConfigurationError, ShapeError
from kernelop.kernel import GaussianKernel
from kernelop.lowrank import (
    OPERATOR,
    OPERATOR_MAP,
    WINDOWED,
    LowRankModel,
    select_centers,
    stream_fit,
    stream_fit_shards,
)
from kernelop.operators import PdeOperator, ProductWindow, Region
from kernelop.problems import SineProduct, forcing_from_solution, get_problem
from kernelop.sampling import BoxDomain, LabeledSampleSet, sample_boundary, sample_problem_points
from kernelop.solver import assemble_gram

LAP2 = PdeOperator.negative_laplacian(2)
WIN2 = ProductWindow((0.0, 0.0), (1.0, 1.0))


def square_data(n=500, n_bnd=0, seed=0):
    problem = get_problem("darcy-a1")
    s = sample_problem_points(BoxDomain.unit(2), n, n_bnd, 0, seed)
    y = forcing_from_solution(problem, SineProduct([1.0, 2.0]), s)
    return s, y


def model(mode=OPERATOR, L=50, lam=1e-6, target="per-target", seed=0):
    s, _ = square_data(seed=seed)
    return LowRankModel(
        select_centers(s, L), GaussianKernel(0.3, 2), LAP2, lam,
        mode=mode, window=WIN2 if mode == WINDOWED else None, target=target,
    )


def test_design_examples():
    s = sample_problem_points(BoxDomain.unit(1), 20, 2, 0, 1)
    op = PdeOperator.negative_laplacian(1)
    k = GaussianKernel(0.3, 1)
    m = LowRankModel(s, k, op, 1e-8)
    assert np.allclose(m.design_block(s), assemble_gram(k, op, s).matrix, rtol=0, atol=1e-12)
    w = model(WINDOWED)
    bnd = sample_boundary(BoxDomain.unit(2), 30, 2)
    assert np.all(w.design_block(bnd) == 0.0)
    assert w.design_block(bnd.subset(slice(0, 0))).shape == (0, 50)


def test_empty_accumulate_is_noop():
    m = model()
    before = m.normal.copy()
    m.accumulate(np.zeros((0, 50)), np.zeros(0))
    assert m.rows_seen == 0
    assert np.array_equal(m.normal, before)


def test_half_batches_and_dense_oracle():
    s, y = square_data()
    a, b = model(lam=0.0), model(lam=0.0)
    stream_fit(a, s, y, 500)
    stream_fit(b, s, y, 250)
    assert np.allclose(a.normal, b.normal, rtol=1e-10, atol=0)
    assert np.allclose(a.rhs, b.rhs, rtol=1e-10, atol=0)
    A = a.design_block(s)
    assert np.max(np.abs(a.normal - A.T @ A)) <= 1e-10 * np.max(np.abs(A.T @ A))
    assert a.rows_seen == 500


def test_scalar_finalize():
    centers = LabeledSampleSet([[0.5]], [Region.INTERIOR])
    m = LowRankModel(centers, GaussianKernel(1.0, 1), PdeOperator.identity(1), 0.3)
    m.accumulate(np.array([[2.0]]), np.array([5.0]))
    assert m.finalize()[0] == pytest.approx(2.0 * 5.0 / (4.0 + 0.3), rel=1e-15)
    z = LowRankModel(centers, GaussianKernel(1.0, 1), PdeOperator.identity(1), 0.3)
    z.accumulate(np.array([[2.0]]), np.array([0.0]))
    assert z.finalize()[0] == 0.0


def test_operator_map_matches_per_target():
    s, y = square_data()
    pt = model()
    om = model(target=OPERATOR_MAP)
    stream_fit(pt, s, y, 128)
    stream_fit(om, s, None, 128)
    W = om.finalize()
    assert W.shape == (50, 500)
    c = pt.finalize()
    assert np.allclose(W @ y, c, rtol=1e-9, atol=1e-12 * np.max(np.abs(c)))


def test_evaluate_zero_and_boundary():
    s, y = square_data()
    m = model(WINDOWED)
    stream_fit(m, s, y, 200)
    c = m.finalize()
    assert np.all(m.evaluate(np.zeros(50), s.points[:5]) == 0.0)
    bnd = sample_boundary(BoxDomain.unit(2), 1000, 9)
    assert np.max(np.abs(m.evaluate(c, bnd.points))) == 0.0


def test_windowed_checks_boundary():
    bad = ProductWindow((0.0, 0.0), (2.0, 1.0))
    bnd = sample_boundary(BoxDomain.unit(2), 50, 1)
    s, _ = square_data()
    with pytest.raises(ConfigurationError):
        LowRankModel(select_centers(s, 10), GaussianKernel(0.3, 2), LAP2, 1e-6,
                     mode=WINDOWED, window=bad, boundary_check=bnd.points)
    with pytest.raises(ConfigurationError):
        LowRankModel(select_centers(s, 10), GaussianKernel(0.3, 2), LAP2, 1e-6, mode=WINDOWED)


@given(st.lists(st.integers(1, 200), min_size=1, max_size=8))
def test_batch_partition_invariance(sizes):
    s, y = square_data(n=700, n_bnd=60)
    ref = model()
    stream_fit(ref, s, y, len(s))
    m = model()
    start = 0
    for q in sizes + [len(s)]:
        stop = min(start + q, len(s))
        m.partial_fit(s.subset(slice(start, stop)), y[start:stop])
        start = stop
        if start == len(s):
            break
    assert m.rows_seen == len(s)
    scale = np.max(np.abs(ref.normal))
    assert np.max(np.abs(m.normal - ref.normal)) <= 1e-9 * scale
    assert np.max(np.abs(m.normal - m.normal.T)) <= 1e-10 * scale
    c_ref = ref.finalize()
    assert np.linalg.norm(m.finalize() - c_ref) <= 1e-9 * np.linalg.norm(c_ref)


def test_checkpoint_resume(tmp_path):
    s, y = square_data()
    full = model()
    stream_fit(full, s, y, 100)
    part = model()
    stream_fit(part, s.subset(slice(0, 300)), y[:300], 100)
    path = tmp_path / "ck.bin"
    part.save_checkpoint(path)
    resumed = LowRankModel.load_checkpoint(path, LAP2)
    stream_fit(resumed, s.subset(slice(300, 500)), y[300:], 100)
    assert resumed.rows_seen == 500
    assert np.allclose(resumed.normal, full.normal, rtol=1e-12, atol=0)
    assert np.allclose(resumed.finalize(), full.finalize(), rtol=1e-9)


def test_multi_target_columns():
    s, y = square_data()
    Y = np.stack([y, 2 * y], axis=1)
    m = model()
    stream_fit(m, s, Y, 100)
    C = m.finalize()
    assert C.shape == (50, 2)
    assert np.allclose(C[:, 1], 2 * C[:, 0], rtol=1e-12)


def test_shards(tmp_path):
    s, y = square_data()
    sv = s.with_values(y)
    paths = []
    for i, sl in enumerate([slice(0, 170), slice(170, 333), slice(333, 500)]):
        p = tmp_path / f"shard{i}.csv"
        sv.subset(sl).to_csv(p)
        paths.append(p)
    a = model()
    stream_fit_shards(a, paths)
    b = model()
    stream_fit(b, s, y, 500)
    assert np.allclose(a.finalize(), b.finalize(), rtol=1e-12)
    s.to_csv(tmp_path / "novalues.csv")
    with pytest.raises(ConfigurationError):
        stream_fit_shards(model(), [tmp_path / "novalues.csv"])


def test_errors():
    m = model()
    with pytest.raises(ConfigurationError):
        m.finalize()
    with pytest.raises(ShapeError):
        m.accumulate(np.zeros((3, 49)), np.zeros(3))
    with pytest.raises(ShapeError):
        m.accumulate(np.zeros((3, 50)))
    s, _ = square_data()
    with pytest.raises(ConfigurationError):
        select_centers(s, 10_000)
    picked = select_centers(s, 20, seed=5)
    assert len(picked) == 20 and np.all(picked.regions == Region.INTERIOR)


def test_dense_limit():
    r = lowrank_dense_suite()
    assert r["dense_residual"] <= 1e-6
    assert r["lowrank_residual"] <= 1e-6
    assert r["agreement"] <= 1e-4
