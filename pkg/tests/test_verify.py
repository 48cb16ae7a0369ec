import json
import math

import numpy as np
import pytest

from upfn.bandwidth import GeometricNet, MultiBandwidth
from upfn.errors import HypothesisError
from upfn.field import exact_lp_moment
from upfn.kernel import get_kernel
from upfn.upper_functions import UpperFnConfig
from upfn.verify import (Scenario, default_pairs, exceedance_curve, monotone_collection_check,
                         oracle_suite, run_scenario, validate)

CFG = UpperFnConfig(p=2, q=2, eps=math.exp(-4))
NET = GeometricNet(CFG.hbar)


def _consts(levels, cfg=CFG):
    net = GeometricNet(cfg.hbar)
    return [MultiBandwidth.constant(s, cfg.b, cfg.d, net, name=f"s{s}") for s in levels]


def _scenario(**kw):
    base = dict(kernel="epanechnikov", bandwidths=_consts([1, 2, 3]), cfg=CFG, replicates=200,
                grid_n=128)
    base.update(kw)
    return Scenario(**base)


def test_report_is_deterministic():
    sc = _scenario(oracles=("moment", "holder"))
    a = run_scenario(sc).to_json()
    b = run_scenario(sc).to_json()
    assert a == b
    assert "runtime" not in json.loads(a)


def test_constant_bandwidth_envelope():
    # a constant envelope at twice the L_p moment scale is essentially never exceeded
    K = get_kernel("epanechnikov")
    hs = _consts([1, 2, 3])
    env = [2 * exact_lp_moment(K, h, CFG.p) ** (1 / CFG.p) for h in hs]
    sc = _scenario(bandwidths=hs, replicates=400, upper_functions=(),
                   envelopes={"twice_moment": env}, envelope_bounds={"twice_moment": 1.0})
    res = run_scenario(sc).results["twice_moment"]
    assert res.zero_fraction >= 0.99
    assert res.tightness_max < 1.0


def test_psi_eps_bound_holds_with_margin():
    rep = run_scenario(_scenario())
    r = rep.results["psi_eps"]
    assert r.bound_name == "T1"
    assert r.passed and r.E_hat <= r.bound
    assert r.margin == r.bound - r.E_hat
    assert rep.passed


def test_monotone_in_collection():
    # adding bandwidths inside the original range keeps the lattice and can
    # only raise the per-replicate sup-deficit
    hs = _consts([1, 3])
    sc = _scenario(bandwidths=hs, replicates=100, delta=hs[-1].h_min() / 64)
    small, big = monotone_collection_check(sc, _consts([2]))
    assert np.all(big >= small)


def _half_moment_scenario(replicates):
    K = get_kernel("epanechnikov")
    hs = _consts([1, 2])
    env = [exact_lp_moment(K, h, CFG.p) ** (1 / CFG.p) for h in hs]
    return _scenario(bandwidths=hs, replicates=replicates, upper_functions=(),
                     envelopes={"moment": env}, envelope_bounds={"moment": math.inf})


def test_estimate_stable_between_n_and_4n():
    a = run_scenario(_half_moment_scenario(150)).results["moment"]
    b = run_scenario(_half_moment_scenario(600)).results["moment"]
    assert a.E_hat > 0 and b.E_hat > 0
    assert abs(a.E_hat - b.E_hat) <= 3 * math.hypot(a.standard_error, b.standard_error)
    assert b.standard_error < a.standard_error


def test_exceedance_curve():
    sc = _scenario(bandwidths=_consts([2]), replicates=5000, upper_functions=())
    levels = np.concatenate([np.linspace(0.0, 12.0, 61), [1e6]])
    curve = exceedance_curve(sc, 0, levels)
    emp = curve["empirical"]
    assert emp[0] == 1.0
    assert emp[-1] == 0.0
    assert np.all(np.diff(emp) <= 0)
    assert np.all(curve["reference"] <= 1.0)
    # Gaussian concentration above the empirical mean
    assert np.all(emp <= curve["reference"] * (1 + 3 * curve["se"]))


def test_oracle_suite_defaults():
    sc = _scenario(replicates=400, upper_functions=())
    res = oracle_suite(sc)
    assert set(res) == {"moment", "covariance", "holder"}
    assert len(res["covariance"].details["pairs"]) == 10
    assert all(r.passed for r in res.values()), {k: v.details for k, v in res.items()}


def test_default_pairs_include_diagonal():
    pairs = default_pairs(128, 64)
    assert pairs[0] == (64, 64)
    assert all(0 <= j < 128 for _, j in pairs)


def test_hypothesis_errors():
    with pytest.raises(HypothesisError):
        run_scenario(_scenario(upper_functions=("psi",)))        # no L_class, A
    with pytest.raises(HypothesisError):
        run_scenario(_scenario(upper_functions=("psi_star",)))   # epanechnikov lacks A2
    cfg3 = CFG.replace(p=3.0)
    with pytest.raises(HypothesisError):
        run_scenario(_scenario(kernel="quartic", cfg=cfg3, bandwidths=_consts([1], cfg3),
                               upper_functions=("psi_star",)))
    with pytest.raises(HypothesisError):
        run_scenario(_scenario(bandwidths=_consts([1 + k % 3 for k in range(65)])))
    with pytest.raises(HypothesisError):
        run_scenario(_scenario(grid_n=512))
    other = UpperFnConfig(p=2, q=2, b=0.25)
    with pytest.raises(HypothesisError):
        run_scenario(_scenario(bandwidths=_consts([1], other)))
    cls = CFG.replace(L_class=5.0, A=1e4)
    K = get_kernel("quartic").as_generic()
    with pytest.raises(HypothesisError):
        validate(_scenario(kernel="quartic", cfg=cls, upper_functions=("psi",)), K)


def test_strict_relation():
    cls = CFG.replace(L_class=5.0, A=1e4)
    sc = _scenario(kernel="quartic", cfg=cls, replicates=20, upper_functions=("psi",))
    rep = run_scenario(sc)
    assert rep.hypotheses["relation"]["holds"] is False
    assert rep.notes
    sc.strict = True
    with pytest.raises(HypothesisError):
        run_scenario(sc)


def test_scenario_json_round_trip(tmp_path):
    data = {
        "name": "demo", "kernel": "epanechnikov", "replicates": 50, "grid_n": 64,
        "config": {"p": 2, "q": 2, "eps": math.exp(-4)},
        "bandwidths": [{"type": "constant", "s": 1},
                       {"type": "intervals", "breaks": [0.0], "s": [1, 2]}],
        "oracles": ["moment"],
    }
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(data))
    sc = Scenario.from_json(path)
    assert [h.name for h in sc.bandwidths] == ["h0", "h1"]
    rep = run_scenario(sc)
    out = rep.write(tmp_path / "out")
    assert json.loads((out / "report.json").read_text()) == json.loads(rep.to_json())
    assert (out / "results.csv").read_text().startswith("upper_function,")
    assert "total" in json.loads((out / "runtime.json").read_text())
