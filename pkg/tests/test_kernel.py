import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from upfn.errors import DomainError, InvalidKernelError, StructureMismatchError
from upfn.kernel import (Kernel, build_w_kernel, check_assumptions, epanechnikov, get_kernel,
                         kernel_norm, load_tabulated, quartic, triangle, w_ell)


@pytest.fixture(scope="module")
def tri():
    return get_kernel("triangle")


def test_triangle_norms(tri):
    assert_allclose(kernel_norm(tri, 1), 1.0, rtol=1e-6)
    assert_allclose(kernel_norm(tri, 2), math.sqrt(2 / 3), rtol=1e-6)
    assert_allclose(kernel_norm(tri, 4), 0.4 ** 0.25, rtol=1e-6)
    assert_allclose(kernel_norm(tri, math.inf), 1.0, rtol=1e-12)


def test_epanechnikov_and_quartic_closed_forms():
    assert_allclose(kernel_norm(get_kernel("epanechnikov"), 2) ** 2, 0.6, rtol=1e-6)
    # int (15/16)^2 (1 - t^2)^4 dt = (225/256) * 256/315
    assert_allclose(kernel_norm(get_kernel("quartic"), 2) ** 2, 225 / 315, rtol=1e-6)


def test_assumption_a1(tri):
    rep = check_assumptions(tri, "A1")
    assert rep.passed
    assert_allclose(rep.lipschitz_estimate, 1.0, rtol=1e-3)
    low = Kernel.product(triangle, 1.0, 0.5)
    assert not check_assumptions(low, "A1").passed


def test_support_violation_detected():
    wide = Kernel(lambda t: np.maximum(1 - np.abs(np.asarray(t)[..., 0]) / 2, 0), 1.0, 1.0)
    assert not check_assumptions(wide, "A1").support_ok


def test_a2_needs_derivatives(tri):
    with pytest.raises(StructureMismatchError):
        check_assumptions(tri, "A2")
    rep = check_assumptions(get_kernel("quartic"), "A2")
    assert rep.passed and not rep.approximate


def test_a3_product_factorization():
    K = get_kernel("epanechnikov", 2)
    assert check_assumptions(K, "A3").passed
    with pytest.raises(StructureMismatchError):
        check_assumptions(K.as_generic(), "A3")


def test_w_ell_pointwise():
    y = np.linspace(-3, 3, 301)
    assert_allclose(w_ell(quartic, 1)(y), quartic(y))
    assert_allclose(w_ell(quartic, 2)(y), 2 * quartic(y) - 0.5 * quartic(y / 2), atol=1e-15)
    with pytest.raises(DomainError):
        w_ell(quartic, 0)


def test_w_ell_integral_and_a1():
    K3 = build_w_kernel(quartic, 3)
    assert K3.a == 3.0
    assert_allclose(K3.integral(), 1.0, atol=1e-8)
    assert check_assumptions(get_kernel("w_ell:quartic:2"), "A1").passed


def test_w_ell_linearity():
    y = np.linspace(-4, 4, 101)
    combo = lambda t: 2.0 * quartic(t) - 0.7 * epanechnikov(t)  # noqa: E731
    lhs = w_ell(combo, 3)(y)
    rhs = 2.0 * w_ell(quartic, 3)(y) - 0.7 * w_ell(epanechnikov, 3)(y)
    assert_allclose(lhs, rhs, atol=1e-14)


@pytest.mark.parametrize("c", [2.0, -3.0])
@pytest.mark.parametrize("m", [1.0, 2.0, 3.5, math.inf])
def test_norm_scaling(tri, c, m):
    assert_allclose(kernel_norm(tri.scaled(c), m), abs(c) * kernel_norm(tri, m), rtol=1e-6)


@pytest.mark.parametrize("m", [1.0, 2.0, 3.0])
def test_product_factorization(m):
    K = get_kernel("epanechnikov", 2)
    assert_allclose(K.norm(m), K.univariate_norm(m) ** 2, rtol=1e-12)
    assert_allclose(K.as_generic().norm(m), K.univariate_norm(m) ** 2, rtol=1e-5)


def test_support_restricted_quadrature(tri):
    # integrating over a larger box adds only zeros
    wide = Kernel(tri.evaluator, 2.0, 1.0)
    assert_allclose(kernel_norm(wide, 2), kernel_norm(tri, 2), rtol=1e-5)


def test_nonfinite_rejected():
    with pytest.raises(InvalidKernelError):
        Kernel(lambda t: np.full(np.shape(t)[:-1], np.nan), 1.0, 1.0)


def test_deriv_norm_sup():
    # d = 1: C(K) = ||K||_1
    assert_allclose(get_kernel("quartic").deriv_norm_sup(), 1.0, rtol=1e-6)


def test_tabulated_kernel(tmp_path):
    t = np.linspace(-1, 1, 2001)
    path = tmp_path / "k.csv"
    np.savetxt(path, np.column_stack([t, triangle(t)]), delimiter=",")
    K = get_kernel(f"csv:{path}")
    assert_allclose(K.norm(2), math.sqrt(2 / 3), rtol=1e-5)
    f, a, L = load_tabulated(path)
    assert a == pytest.approx(1.0) and L == pytest.approx(1.0, rel=1e-6)
