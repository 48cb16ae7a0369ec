import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from upfn.bandwidth import GeometricNet, MultiBandwidth, v_norm
from upfn.errors import CapacityError, CoverageError
from upfn.field import (EvalGrid, FieldOperator, FieldSimulator, LatticeGeometry,
                        abs_normal_moment, discrete_lp_moment, evaluate_field, exact_covariance,
                        exact_lp_moment, grid_volumes, holder_sides, lp_norm, noise_batch,
                        read_samples, sample_noise, write_samples)
from upfn.kernel import get_kernel

NET = GeometricNet(math.exp(-2))
EPAN = get_kernel("epanechnikov")
B = 0.5


@pytest.fixture(scope="module")
def h_const():
    return MultiBandwidth.constant(1, B, 1, NET, name="const")


@pytest.fixture(scope="module")
def geom(h_const):
    return LatticeGeometry.covering(B, EPAN.a * h_const.h_max(), h_const.h_min() / 64, 1)


def test_noise_determinism_and_moments(geom):
    a = sample_noise(geom, 7, 0)
    b = sample_noise(geom, 7, 0)
    c = sample_noise(geom, 7, 1)
    assert np.array_equal(a.increments, b.increments)
    n = geom.size
    za = a.increments / geom.delta ** 0.5
    zc = c.increments / geom.delta ** 0.5
    assert not np.array_equal(za, zc)
    assert abs(np.corrcoef(za, zc)[0, 1]) < 3 / math.sqrt(n)
    assert abs(za.mean()) < 5 / math.sqrt(n)
    assert abs(np.var(a.increments) / geom.delta - 1) < 5 / math.sqrt(n) * math.sqrt(2)


def test_noise_batch_matches_single(geom):
    batch = noise_batch(geom, 3, [4, 9])
    assert np.array_equal(batch[1], sample_noise(geom, 3, 9).increments)


def test_capacity_error():
    with pytest.raises(CapacityError):
        LatticeGeometry.covering(1.0, 0.1, 1e-4, 2)


def test_linearity(h_const, geom):
    grid = EvalGrid(B, 64)
    noise = sample_noise(geom, 1, 0)
    op = FieldOperator(EPAN, h_const, geom, grid)
    assert np.all(op.apply(np.zeros(geom.shape)) == 0)
    x1 = op.apply(noise.increments)
    assert np.array_equal(op.apply(2 * noise.increments), 2 * x1)
    other = sample_noise(geom, 1, 1).increments
    assert_allclose(op.apply(noise.increments + other), x1 + op.apply(other), rtol=1e-12,
                    atol=1e-12)
    fs = evaluate_field(EPAN, [h_const, h_const], noise, grid)
    assert fs.values.shape == (1, 2, 64)
    assert np.array_equal(fs.values[0, 0], x1)


def test_coverage_error(h_const):
    small = LatticeGeometry((-0.5,), 1e-3, (1000,))
    with pytest.raises(CoverageError):
        FieldOperator(EPAN, h_const, small, EvalGrid(B, 32))


def test_pointwise_variance(h_const):
    grid = EvalGrid(B, 32)
    sim = FieldSimulator(EPAN, [h_const], grid)
    v = sim.sample(11, range(5000))[:, 0, :]
    target = EPAN.norm(2) ** 2 / h_const.h_max()
    var = np.mean(v ** 2, axis=0)
    se = target * math.sqrt(2 / 5000)
    assert np.all(np.abs(var - target) <= 0.02 * target + 4 * se)


def test_gaussianity_proxy(h_const):
    grid = EvalGrid(B, 5)
    sim = FieldSimulator(EPAN, [h_const], grid)
    v = sim.sample(5, range(10_000))[:, 0, :]
    kurt = np.mean(v ** 4, axis=0) / np.mean(v ** 2, axis=0) ** 2
    assert np.all(np.abs(kurt - 3) < 0.3)


def test_lp_norm_examples():
    assert lp_norm(np.zeros(10), 0.1, 2) == 0
    g = EvalGrid(1.0, 100)
    assert_allclose(lp_norm(np.ones(100), g.cell_volume, 2), math.sqrt(2), rtol=1e-13)


def test_lp_norm_holder_l1_l2(h_const):
    grid = EvalGrid(B, 64)
    sim = FieldSimulator(EPAN, [h_const], grid)
    v = sim.sample(2, range(200))
    n1 = lp_norm(v, grid.cell_volume, 1)
    n2 = lp_norm(v, grid.cell_volume, 2)
    assert np.all(n1 <= n2 * (2 * B) ** 0.5 * (1 + 1e-12))


def test_exact_covariance_examples(h_const):
    hv = h_const.h_max()
    assert_allclose(exact_covariance(EPAN, h_const, [0.1], [0.1]), 0.6 / hv, rtol=1e-10)
    assert exact_covariance(EPAN, h_const, [-0.3], [-0.3 + 2.01 * hv]) == 0.0
    x, y = [0.05], [0.05 + 0.7 * hv]
    assert_allclose(exact_covariance(EPAN, h_const, x, y), exact_covariance(EPAN, h_const, y, x),
                    rtol=1e-13)


def test_exact_covariance_closed_form(h_const):
    # triangle, constant h, shift u h: int (1-|t|)(1-|t-u|) dt = 2/3 - u^2 + u^3/2 for u in [0,1]
    tri = get_kernel("triangle")
    hv = h_const.h_max()
    for u in (0.0, 0.3, 0.8):
        expected = (2 / 3 - u ** 2 + u ** 3 / 2) / hv
        got = exact_covariance(tri, h_const, [0.0], [u * hv])
        assert_allclose(got, expected, rtol=1e-10)


def test_exact_covariance_generic_matches_product():
    K = get_kernel("epanechnikov", 2)
    h = MultiBandwidth.constant((1, 2), B, 2, NET)
    x, y = np.array([0.01, -0.02]), np.array([0.03, 0.0])
    assert_allclose(exact_covariance(K.as_generic(), h, x, y), exact_covariance(K, h, x, y),
                    rtol=1e-4)


def test_covariance_monte_carlo_piecewise():
    h = MultiBandwidth.from_intervals([0.0], [1, 2], B, NET)
    grid = EvalGrid(B, 64)
    sim = FieldSimulator(EPAN, [h], grid)
    v = sim.sample(21, range(3000))[:, 0, :]
    for i, j in [(30, 30), (31, 33), (20, 22), (45, 46)]:
        prod = v[:, i] * v[:, j]
        exact = exact_covariance(EPAN, h, grid.points()[i], grid.points()[j])
        assert abs(prod.mean() - exact) <= 5 * prod.std() / math.sqrt(len(prod)) + 0.02 * abs(exact)


def test_exact_lp_moment_examples(h_const):
    hv = h_const.h_max()
    assert_allclose(exact_lp_moment(EPAN, h_const, 2), 0.6 / hv, rtol=1e-8)
    assert_allclose(abs_normal_moment(1), math.sqrt(2 / math.pi), rtol=1e-15)
    assert_allclose(exact_lp_moment(EPAN, h_const, 1),
                    math.sqrt(2 / math.pi) * EPAN.norm(2) * v_norm(h_const, 1), rtol=1e-13)
    assert_allclose([abs_normal_moment(m) for m in (2, 3, 4)],
                    [1.0, 2 * math.sqrt(2 / math.pi), 3.0], rtol=1e-13)


def test_lp_moment_monte_carlo_two_boxes():
    h = MultiBandwidth.from_intervals([0.0], [1, 2], B, NET)
    grid = EvalGrid(B, 256)
    sim = FieldSimulator(EPAN, [h], grid)
    n = lp_norm(sim.sample(8, range(2000)), grid.cell_volume, 3)[:, 0] ** 3
    assert_allclose(discrete_lp_moment(EPAN, h, grid, 3), exact_lp_moment(EPAN, h, 3), rtol=1e-12)
    se = n.std() / math.sqrt(len(n))
    # discretization bias of the lattice is O(delta L / h), well under 1%
    assert abs(n.mean() - exact_lp_moment(EPAN, h, 3)) <= 3 * se + 0.01 * n.mean()


def test_pathwise_holder():
    h = MultiBandwidth.from_intervals([-0.2, 0.25], [0, 2, 1], B, NET)
    grid = EvalGrid(B, 200)
    sim = FieldSimulator(EPAN, [h], grid)
    v = sim.sample(4, range(100))[:, 0, :]
    V = grid_volumes(h, grid)
    for r in (3, 4, 5):
        lhs, rhs = holder_sides(v, V, grid.cell_volume, 2.0, r)
        assert np.all(lhs <= rhs * (1 + 1e-10))


def test_separable_matches_generic_operator():
    K = get_kernel("epanechnikov", 2)
    h = MultiBandwidth.from_grid(np.array([[[1, 1], [2, 1]], [[1, 2], [2, 2]]]), B, NET)
    grid = EvalGrid(B, 12, 2)
    geom = LatticeGeometry.covering(B, K.a * h.h_max(), h.h_min() / 8, 2)
    Z = noise_batch(geom, 0, [0, 1])
    a = FieldOperator(K, h, geom, grid)
    b = FieldOperator(K.as_generic(), h, geom, grid)
    assert a.mode == "separable" and b.mode == "sparse"
    assert_allclose(a.apply(Z), b.apply(Z), rtol=1e-12, atol=1e-12)


def test_dump_roundtrip(tmp_path, h_const):
    grid = EvalGrid(B, 16)
    fs = FieldSimulator(EPAN, [h_const], grid).field_sample(1, range(3))
    write_samples(tmp_path / "x.bin", fs)
    raw = (tmp_path / "x.bin").read_bytes()
    assert raw[:4] == b"UPFN"
    dims, vals = read_samples(tmp_path / "x.bin")
    assert dims == (16,) and np.array_equal(vals, fs.values)
