import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from upfn.bandwidth import GeometricNet, MultiBandwidth, log_v_norm
from upfn.errors import DomainError, MissingConstantError, NotInClassError
from upfn.field import abs_normal_moment
from upfn.kernel import get_kernel
from upfn.upper_functions import (Constants, LambdaTable, UpperFnConfig, combined_psi,
                                  constants_report, default_table, psi, psi_eps, psi_star,
                                  scale_lambda, surface_area, theorem_bound)

HBAR = math.exp(-2)
NET = GeometricNet(HBAR)
TRI = get_kernel("triangle")
EPAN = get_kernel("epanechnikov")
# golden value of C_2(2) for the triangle kernel, tau = 1/2, p = q = 1, L = 5, lambda* = 1
C2_GOLDEN = 23028.47365952553


def _cfg(**kw):
    base = dict(p=1, q=1, tau=0.5, L_class=5.0, A=1e4, lambda_star=1.0, lambda_d_star=1.0)
    base.update(kw)
    return UpperFnConfig(**base)


def _random_bandwidth(rng, d=1, boxes=4, s_max=5):
    if d == 1:
        breaks = np.sort(rng.uniform(-0.5, 0.5, boxes - 1))
        s = rng.integers(1, s_max + 1, size=boxes)
        return MultiBandwidth.from_intervals(breaks, s, 0.5, NET)
    s_grid = rng.integers(1, s_max + 1, size=(3, 3, d))
    return MultiBandwidth.from_grid(s_grid, 0.5, NET)


def _norm(f, lo, hi, m):
    return integrate.quad(lambda x: abs(f(x)) ** m, lo, hi, points=[0.0], epsabs=0,
                          epsrel=1e-13, limit=200)[0] ** (1 / m)


def tri(x):
    return max(0.0, 1.0 - abs(x))


# ---------------------------------------------------------------- C1, C3, psi_eps
def test_C1_triangle_example():
    c = Constants(_cfg(), TRI)
    n2 = math.sqrt(2 / 3)
    expected = 2 + 2 * math.sqrt(2) * (math.sqrt(math.pi)
                                       + n2 * (math.sqrt(abs(math.log(2 * n2))) + 1))
    # kernel norms come from a gated midpoint rule (relative error ~1e-7)
    assert_allclose(c.C1, expected, rtol=1e-6)
    assert_allclose(c.C1, 10.94, atol=0.005)


def test_C1_q_and_d_scaling():
    c1 = Constants(_cfg(), TRI).C1
    c3 = Constants(_cfg(q=3), TRI).C1
    assert_allclose(c3 - c1, 4.0, rtol=1e-12)
    K2 = get_kernel("triangle", 2)
    a = Constants(_cfg(), TRI)
    b = Constants(_cfg(d=2), K2)
    br1 = a.C1 - 2
    # only the sqrt(2d) factor moves if the norms are held fixed
    n2_1, n2_2 = TRI.norm(2), K2.norm(2)
    expected = 2 * math.sqrt(4) * (math.sqrt(math.pi) + n2_2 * (
        math.sqrt(abs(math.log(4 * 0.5 * K2.L * n2_2))) + 1))
    assert_allclose(b.C1 - 2, expected, rtol=1e-12)
    fixed = 2 * math.sqrt(4) * (math.sqrt(math.pi) + n2_1 * (
        math.sqrt(abs(math.log(4 * 0.5 * TRI.L * n2_1))) + 1))
    assert_allclose(fixed / br1, math.sqrt(2), rtol=1e-12)


def test_C3_closed_forms():
    n2 = TRI.norm(2)
    # p = q = 2: integral of exp(-z/(8 n^2)) is 8 n^2
    c = Constants(_cfg(p=2, q=2), TRI)
    assert_allclose(c.C3, 2 ** 0.5 * (16 * n2 ** 2) ** 0.5, rtol=1e-12)
    assert_allclose(n2, math.sqrt(2 / 3), rtol=1e-6)
    assert_allclose(c.C3_quadrature, c.C3, rtol=1e-8)
    # p = q = 1: Gaussian integral n sqrt(2 pi)
    c = Constants(_cfg(), TRI)
    assert_allclose(c.C3, 2 * (2 * n2 * math.sqrt(2 * math.pi)), rtol=1e-12)
    assert_allclose(c.C3_quadrature, c.C3, rtol=1e-8)


@pytest.mark.parametrize("p,q", [(1, 1), (1.5, 4), (2, 3), (3, 2), (1, 7)])
def test_C3_closed_form_matches_quadrature(p, q):
    c = Constants(_cfg(p=p, q=q), EPAN)
    assert_allclose(c.C3_quadrature, c.C3, rtol=1e-8)


def test_C3_increases_with_kernel_norm():
    from upfn.kernel import Kernel

    doubled = Kernel.product(lambda x: 2 * np.maximum(0.0, 1 - np.abs(x)), 1.0, 2.0,
                             name="2tri")
    assert Constants(_cfg(), doubled).C3 > Constants(_cfg(), TRI).C3


def test_psi_eps_constant_bandwidth():
    cfg = _cfg(p=2, q=2)
    c = Constants(cfg, EPAN)
    for s in (1, 3):
        h = MultiBandwidth.constant(s, 0.5, 1, NET)
        hv = NET.value(s)
        expected = c.C1 * math.sqrt(abs(math.log(cfg.eps)) + abs(math.log(hv))) * hv ** -0.5
        assert_allclose(psi_eps(h, cfg, EPAN), expected * (2 * 0.5) ** 0.5, rtol=1e-12)
    cfg_b = _cfg(p=3, q=2, b=1.5)
    h = MultiBandwidth.constant(2, 1.5, 1, NET)
    hv = NET.value(2)
    expected = (Constants(cfg_b, EPAN).C1 * math.sqrt(abs(math.log(cfg_b.eps)) + abs(math.log(hv)))
                * hv ** -0.5 * 3.0 ** (1 / 3))
    assert_allclose(psi_eps(h, cfg_b, EPAN), expected, rtol=1e-12)


def test_psi_eps_two_boxes_and_eps_monotone():
    cfg = _cfg(p=2)
    h = MultiBandwidth.from_intervals([0.1], [1, 4], 0.5, NET)
    c1 = Constants(cfg, EPAN).C1
    terms = 0.0
    for s, length in ((1, 0.6), (4, 0.4)):
        v = NET.value(s)
        terms += abs(math.log(cfg.eps * v)) * v ** -1 * length
    assert_allclose(psi_eps(h, cfg, EPAN), c1 * math.sqrt(terms), rtol=1e-12)
    vals = [psi_eps(h, cfg.replace(eps=e), EPAN) for e in (math.exp(-3), math.exp(-5), 1e-8)]
    assert vals[0] < vals[1] < vals[2]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.floats(1.0, 4.0))
def test_psi_eps_lower_bound(seed, p):
    rng = np.random.default_rng(seed)
    h = _random_bandwidth(rng)
    cfg = _cfg(p=p)
    c1 = Constants(cfg, EPAN).C1
    lower = c1 * math.sqrt(abs(math.log(cfg.eps))) * math.exp(log_v_norm(h, p))
    assert psi_eps(h, cfg, EPAN) >= lower


# ---------------------------------------------------------------- C2
def test_C2_golden_value_independent_recomputation():
    cfg = _cfg()
    c = Constants(cfg, TRI)
    r, tau, L = 2, 0.5, 5.0
    mu = 1 / (1 - (1 - tau) / r)
    assert_allclose(mu, 4 / 3)
    n1 = _norm(tri, -1, 1, 1)
    s = _norm(tri, -1, 1, 2 * mu / (3 * mu - 2))
    assert_allclose(s, (6 / 7) ** 0.75, rtol=1e-10)
    R = max(0.5 * s, n1 + 2 * (5 * (4 * 1.0 * 2) ** mu + 4 * (2 * n1) ** mu / (2 - mu)) ** (1 / mu))
    # C_mu with lambda* = 1: brute force over a dense omega grid on each side of 1/2
    term = lambda w: R ** (1 / (2 * w)) / abs(1 - 1 / (2 * w))  # noqa: E731
    w1 = np.linspace(1 / mu - 0.5, 0.5, 40_001)[:-1]
    w2 = np.linspace(0.5, 1.0, 40_001)[1:]
    cmu = 4 * math.sqrt(2) * (min(term(w) for w in w1) + min(term(w) for w in w2))
    ct = cmu + 4 * (math.sqrt(2 * math.e ** r) + math.sqrt(8 * math.pi)) * s
    k = (r + tau - 1) / (1 - tau)
    integral = integrate.quad(lambda u: (u + ct) ** k * math.exp(-u * u / (2 * s)), 0, math.inf,
                              epsabs=0, epsrel=1e-12, limit=200)[0]
    chat = (r / (1 - tau) * integral) ** ((1 - tau) / r)
    cls = L ** (1 / r) + L ** (tau / r) * (1 - math.exp(-tau / 4)) ** ((tau - 1) / r)
    tail = math.e ** r * math.sqrt(2 * 2) * (r * math.sqrt(math.e)) * _norm(tri, -1, 1, 1)
    expected = cls * (ct + chat) + tail
    got = c.C2(r)
    assert_allclose(got["R_mu"], R, rtol=1e-10)
    assert_allclose(got["C_mu"], cmu, rtol=1e-6)
    assert_allclose(got["C_hat_mu"], chat, rtol=1e-6)
    assert_allclose(got["C2"], expected, rtol=1e-6)
    assert_allclose(got["C2"], C2_GOLDEN, rtol=1e-9)


def test_C2_diverges_and_increases_in_L():
    c = Constants(_cfg(), TRI)
    vals = [c.C2(r)["C2"] for r in range(2, 30)]
    assert all(b > a for a, b in zip(vals[5:], vals[6:]))
    assert vals[-1] > 1e10
    Ls = [1.0, 2.0, 5.0, 50.0]
    byL = [Constants(_cfg(L_class=L), TRI).C2(3)["C2"] for L in Ls]
    assert all(b > a for a, b in zip(byL, byL[1:]))


def test_C2_lower_bound_is_valid_and_increasing():
    c = Constants(_cfg(), TRI)
    lows = [c.C2_lower(r) for r in range(2, 60)]
    assert all(b > a for a, b in zip(lows, lows[1:]))
    assert all(c.C2_lower(r) <= c.C2(r)["C2"] for r in range(2, 60))


def test_C2_needs_lambda_range():
    tbl = LambdaTable("omega_mu", ((0.6, 1.0), (0.6, 2.0), (0.9, 1.0), (0.9, 2.0)), (1.0,) * 4)
    with pytest.raises(MissingConstantError):
        Constants(_cfg(lambda_star=tbl), TRI).C2(2)


def test_cmu_variants_differ():
    a = Constants(_cfg(), TRI).C_mu(2)
    b = Constants(_cfg(cmu_variant="multiplicative"), TRI).C_mu(2)
    assert b["C_mu"] < a["C_mu"]
    assert a["grid_gap"] < 1e-3


def test_default_tables_load_and_flag():
    for name in ("lambda_star", "lambda_d_star"):
        t = default_table(name)
        assert t is not None
        assert "calibrated" in t.provenance
        assert t.domain_length == 3.0
    c = Constants(UpperFnConfig(p=1, q=1, tau=0.5, L_class=5.0), TRI)
    assert c.C2(2)["C2"] > 0
    prov = c.provenance()
    assert "calibrated" in prov["lambda_star"]
    # a kernel with a different support radius is flagged
    prov_q = Constants(UpperFnConfig(p=1, q=1, tau=0.5, L_class=5.0), get_kernel("quartic")).provenance()
    assert "calibrated" in prov_q["lambda_star"]


def test_lambda_scaling_relation():
    assert_allclose(scale_lambda(0.3, 2.0, 1, 0.75), 0.3 * 2 ** (1 / 0.75))
    assert_allclose(scale_lambda(0.3, 1.0, 2, 0.6), 0.3)


# ---------------------------------------------------------------- C4, C5, sigma
def test_C4_truncation_at_p1():
    c = Constants(_cfg(), TRI)
    ser = c.C4_series()
    assert ser.last_index <= 6
    first = math.exp(-math.e ** 2)
    assert_allclose(first, 6.18e-4, rtol=1e-3)
    # recompute the truncated sum directly
    terms = [math.exp(-math.e ** r) * ((r * math.sqrt(math.e))
                                        * _norm(tri, -1, 1, 2 * r / (r + 2))) ** 0.5
             for r in range(2, 12)]
    assert_allclose(ser.value, math.fsum(terms), rtol=1e-9)
    expected = abs_normal_moment(2) * math.sqrt(math.pi / 2) * math.fsum(terms)
    assert_allclose(c.C4, expected, rtol=1e-9)


def test_C5_series_and_sigma():
    c = Constants(_cfg(), TRI)
    ser = c.C5_series()
    terms = [math.fsum(math.exp(-(2 ** l) * math.e ** r) for l in range(1, 40))
             for r in range(2, 5)]
    # positive terms, so partial sums increase; the r = d + 1, l = 1 term dominates
    assert all(t > 0 for t in terms)
    assert terms[0] > 0.99 * math.fsum(terms)
    assert_allclose(ser.value, math.fsum(terms), rtol=1e-9)
    # p = 1: the (2b) factor drops out
    s1 = Constants(_cfg(b=2.0), TRI).sigma_star
    s2 = Constants(_cfg(b=0.5), TRI).sigma_star
    assert_allclose(s1, s2, rtol=1e-14)
    expected = math.sqrt(4 * 1.0 * 1.0 * 1.0 * 2 * 5 ** 0.5)
    assert_allclose(s2, expected, rtol=1e-12)
    # q = 1 removes the sigma power in C5
    assert_allclose(c.C5, math.sqrt(8 * math.pi) * abs_normal_moment(2) * ser.value, rtol=1e-12)


# ---------------------------------------------------------------- C2*
def test_gamma_r_and_radial_integrals():
    c = Constants(_cfg(), TRI)
    assert_allclose(c.gamma_r(2), 0.75)
    assert_allclose(c.alpha_r(2), 0.75)
    S = surface_area(1)
    assert S == 2.0
    assert_allclose(S / (1 - 0.75), 8.0)
    assert_allclose(S / 0.75, 2 / 0.75)
    inside = integrate.quad(lambda z: abs(z) ** -0.75, -1, 1, points=[0.0])[0]
    outside = 2 * integrate.quad(lambda z: z ** -1.75, 1, np.inf)[0]
    assert_allclose(inside, 8.0, rtol=1e-6)
    assert_allclose(outside, 2 / 0.75, rtol=1e-6)
    for r in (2, 3, 7):
        assert_allclose(c.T_star_quadrature(r), c.T_star(r), rtol=1e-6)
    for d in (2, 3):
        assert_allclose(surface_area(d), {2: 2 * math.pi, 3: 4 * math.pi}[d])


def test_C2_star_increases_for_large_r():
    c = Constants(_cfg(), TRI)
    vals = [c.C2_star(r)["C2_star"] for r in range(2, 40)]
    assert all(b > a for a, b in zip(vals[10:], vals[11:]))
    assert all(c.C2_star_lower(r) <= c.C2_star(r)["C2_star"] for r in range(2, 40))
    with pytest.raises(DomainError):
        c.C2_star(1)


# ---------------------------------------------------------------- psi, psi*
def test_psi_constant_bandwidth():
    cfg = _cfg()
    c = Constants(cfg, TRI)
    s = 2
    h = MultiBandwidth.constant(s, 0.5, 1, NET)
    hv = NET.value(s)
    res = psi(h, cfg, TRI, c, r_max=200, exhaustive=True)
    table = [c.C2(r)["C2"] for r in range(2, 201)]
    assert_allclose(res.value, hv ** -0.5 * min(table), rtol=1e-12)


@pytest.mark.filterwarnings("ignore:parameter relation")
def test_psi_early_termination_matches_exhaustive():
    cfg = _cfg(A=1e6)
    c = Constants(cfg, TRI)
    rng = np.random.default_rng(5)
    for _ in range(20):
        h = _random_bandwidth(rng)
        fast = psi(h, cfg, TRI, c)
        full = psi(h, cfg, TRI, c, r_max=200, exhaustive=True)
        assert fast.terminated_early
        assert fast.value == full.value
        assert fast.r_star == full.r_star


@pytest.mark.filterwarnings("ignore:parameter relation")
def test_psi_larger_A_never_increases():
    rng = np.random.default_rng(2)
    for _ in range(5):
        h = _random_bandwidth(rng, s_max=8)
        vals = []
        for A in (60.0, 1e3, 1e6):
            try:
                vals.append(psi(h, _cfg(A=A), TRI).value)
            except NotInClassError:
                vals.append(math.inf)
        assert vals[0] >= vals[1] >= vals[2]


def test_psi_outside_class_raises():
    h = MultiBandwidth.constant(30, 0.5, 1, NET)
    with pytest.warns(UserWarning):
        with pytest.raises(NotInClassError):
            psi(h, _cfg(A=HBAR ** -0.5), TRI)


def test_psi_star_constant_and_two_box():
    cfg = _cfg()
    c = Constants(cfg, TRI)
    h = MultiBandwidth.constant(3, 0.5, 1, NET)
    hv = NET.value(3)
    res = psi_star(h, cfg, TRI, c, r_max=200, exhaustive=True)
    expected = min(c.C2_star(r)["C2_star"] * hv ** -0.5 for r in range(2, 201))
    assert_allclose(res.value, expected, rtol=1e-12)
    h2 = MultiBandwidth.from_intervals([0.0], [1, 3], 0.5, NET)
    res2 = psi_star(h2, cfg, TRI, c, r_max=60, exhaustive=True)
    direct = min(c.C2_star(r)["C2_star"]
                 * (0.5 * NET.value(1) ** (-(1 + 1 / r) / 2)
                    + 0.5 * NET.value(3) ** (-(1 + 1 / r) / 2)) ** (1 / (1 + 1 / r))
                 for r in range(2, 61))
    assert_allclose(res2.value, direct, rtol=1e-12)


def test_psi_star_early_termination_matches_exhaustive():
    cfg = _cfg(p=1.5, q=2)
    c = Constants(cfg, TRI)
    rng = np.random.default_rng(9)
    for _ in range(20):
        h = _random_bandwidth(rng, s_max=10)
        fast = psi_star(h, cfg, TRI, c)
        full = psi_star(h, cfg, TRI, c, r_max=200, exhaustive=True)
        assert fast.value == full.value and fast.r_star == full.r_star


def test_psi_star_contract_errors():
    K2 = get_kernel("triangle", 2)
    h = MultiBandwidth.from_grid(np.array([[[1, 2]]]), 0.5, NET)
    with pytest.raises(DomainError):
        psi_star(h, _cfg(d=2), K2)
    with pytest.raises(DomainError):
        psi_star(MultiBandwidth.constant(1, 0.5, 1, NET), _cfg(p=3), TRI)


# ---------------------------------------------------------------- combined
@pytest.mark.filterwarnings("ignore:parameter relation")
def test_combined_branches():
    h = MultiBandwidth.constant(2, 0.5, 1, NET)
    # moderate eps: psi_eps is far below psi
    out = combined_psi(h, _cfg(eps=math.exp(-4), A=1e6), TRI)
    assert out.branch == "psi_eps"
    assert out.components["psi"] > out.components["psi_eps"]
    # tiny eps inflates psi_eps until psi* wins
    won = combined_psi(h, _cfg(eps=1e-300), TRI, "psi_star")
    assert won.branch == "psi_star"
    assert won.value < won.components["psi_eps"]
    # h outside B(A): psi is unavailable and psi_eps is returned with a flag
    out = combined_psi(MultiBandwidth.constant(30, 0.5, 1, NET), _cfg(A=HBAR ** -0.5), TRI)
    assert out.branch == "psi_eps" and out.flags


@pytest.mark.filterwarnings("ignore:parameter relation")
def test_combined_is_minimum():
    rng = np.random.default_rng(3)
    cfg = _cfg(A=1e6)
    c = Constants(cfg, TRI)
    for _ in range(50):
        h = _random_bandwidth(rng)
        for kind in ("psi", "psi_star"):
            out = combined_psi(h, cfg, TRI, kind, c)
            finite = [v for v in out.components.values() if v is not None]
            assert out.value == min(finite)


# ---------------------------------------------------------------- bounds
def test_theorem_bounds():
    cfg = _cfg(eps=math.exp(-4))
    c = Constants(cfg, TRI)
    assert_allclose(theorem_bound("T1", cfg, TRI, c)["value"], c.C3 * math.exp(-4))
    assert_allclose(theorem_bound("Cor1", cfg, TRI, c)["value"], (c.C3 + c.C4) * math.exp(-4))
    assert_allclose(theorem_bound("Cor2", cfg, TRI, c)["value"], (c.C3 + c.C5) * math.exp(-4))
    t3 = [theorem_bound("T3", cfg.replace(hbar=hb), TRI) for hb in (HBAR, 0.1, 0.05)]
    assert t3[0]["value"] < t3[1]["value"] < t3[2]["value"]
    assert t3[0]["variant"] > t3[1]["variant"] > t3[2]["variant"]
    with pytest.raises(DomainError):
        theorem_bound("T9", cfg, TRI, c)


def test_T2_decay_along_eps_driven_parameters():
    # hbar = exp(-sqrt g), A = exp(g^2), g = |ln eps|: eps^{-1} times the bound tends to 0
    scaled = []
    for g in (400.0, 1e3, 4e3, 1e4):
        # the T2 bound does not involve eps itself, which would underflow here
        cfg = _cfg(hbar=math.exp(-math.sqrt(g)), log_A=g * g, A=None)
        scaled.append(theorem_bound("T2", cfg, TRI)["log_value"] + g)
    assert all(b < a for a, b in zip(scaled, scaled[1:]))
    assert scaled[-1] < -1e9


# ---------------------------------------------------------------- report
def test_report_deterministic_and_converged():
    cfg = _cfg()
    a = constants_report(cfg, TRI).to_json(sort_keys=True)
    b = constants_report(cfg, TRI).to_json(sort_keys=True)
    assert a == b
    base = constants_report(cfg, TRI)
    tight = constants_report(cfg.replace(quad_rel_tol=1e-13, series_tol=1e-11, omega_grid=128), TRI)
    for key in ("C1", "C3", "C3_quadrature", "C4", "sigma_star", "C5"):
        assert_allclose(getattr(tight, key), getattr(base, key), rtol=1e-6)
    for x, y in zip(base.C2_table, tight.C2_table):
        assert_allclose(y["C2"], x["C2"], rtol=1e-6)
    for x, y in zip(base.C2_star_table, tight.C2_star_table):
        assert_allclose(y["C2_star"], x["C2_star"], rtol=1e-6)
    for row in base.C2_table:
        assert all(np.isfinite(v) and v > 0 for k, v in row.items() if k != "omega_grid_gap")
