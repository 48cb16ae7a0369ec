"""Scenario-driven Monte Carlo checks of the upper-function inequalities.

A :class:`Scenario` fixes a kernel, a finite bandwidth collection, an
:class:`~upfn.upper_functions.UpperFnConfig`, the Monte Carlo budget and the
oracle checks to run.  :func:`run_scenario` simulates the fields on a shared
noise lattice, evaluates

    E_hat = mean over replicates of (sup_h [||xi_h||_p - Psi(h)]_+)^q

for every requested upper function, compares it with the matching moment
bound, and attaches the oracle results.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bandwidth import GeometricNet, MultiBandwidth, check_param_relation
from .errors import (DomainError, HypothesisError, NotInClassError, StructureMismatchError,
                     UpfnError)
from .field import (EvalGrid, FieldSimulator, abs_normal_moment, exact_covariance,
                    exact_lp_moment, grid_volumes, holder_sides, lp_norm)
from .kernel import Kernel, check_assumptions, get_kernel
from .upper_functions import (Constants, LambdaTable, UpperFnConfig, combined_psi, psi,
                              psi_eps, psi_star, theorem_bound)

UPPER_FUNCTIONS = ("psi_eps", "psi", "psi_star", "Psi", "Psi_star")
ORACLES = ("moment", "covariance", "holder")
BOUND_FOR = {"psi_eps": "T1", "psi": "T2", "psi_star": "T3", "Psi": "Cor1", "Psi_star": "Cor2"}

MAX_BANDWIDTHS = 64
MAX_REPLICATES = 10_000
MAX_GRID = {1: 256, 2: 256}


@dataclass
class Tolerances:
    moment_se: float = 3.0          # |MC - exact| <= moment_se * SE
    moment_rel: float = 0.05        # and <= moment_rel * exact
    covariance_se: float = 5.0
    holder_rtol: float = 1e-10
    holder_orders: int = 5          # r = floor(p) + 1, ..., floor(p) + holder_orders


@dataclass
class Scenario:
    """Declarative verification scenario.

    ``envelopes`` optionally maps a label to explicit upper-function values,
    one per bandwidth, checked against ``envelope_bounds[label]``.
    """

    kernel: str
    bandwidths: List[MultiBandwidth]
    cfg: UpperFnConfig
    replicates: int = 200
    delta: Optional[float] = None
    grid_n: int = 256
    seed: int = 0
    upper_functions: Tuple[str, ...] = ("psi_eps",)
    oracles: Tuple[str, ...] = ()
    covariance_pairs: Optional[List[Tuple[int, int]]] = None
    covariance_bandwidth: int = 0
    moment_bandwidth: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    envelopes: Dict[str, List[float]] = field(default_factory=dict)
    envelope_bounds: Dict[str, float] = field(default_factory=dict)
    strict: bool = False
    name: str = "scenario"

    def __post_init__(self):
        self.upper_functions = tuple(self.upper_functions)
        self.oracles = tuple(self.oracles)
        if isinstance(self.tolerances, dict):
            self.tolerances = Tolerances(**self.tolerances)

    # -- JSON
    @classmethod
    def from_dict(cls, data: Dict, base_dir: Optional[Path] = None) -> "Scenario":
        data = dict(data)
        base_dir = Path(base_dir) if base_dir else Path(".")
        cfg_data = dict(data.pop("config", {}))
        for key in ("lambda_star", "lambda_d_star"):
            v = cfg_data.get(key)
            if isinstance(v, str):
                cfg_data[key] = LambdaTable.from_csv(base_dir / v)
        cfg = UpperFnConfig(**cfg_data)
        net = GeometricNet(cfg.hbar)
        hs = [_bandwidth_from_dict(h, cfg.b, cfg.d, net, base_dir, k)
              for k, h in enumerate(data.pop("bandwidths"))]
        if "covariance_pairs" in data and data["covariance_pairs"] is not None:
            data["covariance_pairs"] = [tuple(p) for p in data["covariance_pairs"]]
        return cls(bandwidths=hs, cfg=cfg, **data)

    @classmethod
    def from_json(cls, path) -> "Scenario":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def describe(self) -> Dict:
        cfg = {}
        for k in self.cfg.__dataclass_fields__:
            v = getattr(self.cfg, k)
            cfg[k] = (f"table({v.kind}, {v.provenance})" if isinstance(v, LambdaTable) else v)
        return {
            "name": self.name, "kernel": self.kernel, "config": cfg,
            "bandwidths": [{"name": h.name or f"h{k}", "boxes": int(h.s.shape[0]),
                            "s_min": int(h.s.min()), "s_max": int(h.s.max())}
                           for k, h in enumerate(self.bandwidths)],
            "replicates": self.replicates, "delta": self.delta, "grid_n": self.grid_n,
            "seed": self.seed, "upper_functions": list(self.upper_functions),
            "oracles": list(self.oracles), "covariance_pairs": self.covariance_pairs,
            "tolerances": asdict(self.tolerances), "strict": self.strict,
            "envelope_bounds": dict(self.envelope_bounds),
        }


def _bandwidth_from_dict(spec: Dict, b: float, d: int, net: GeometricNet, base_dir: Path,
                         k: int) -> MultiBandwidth:
    kind = spec.get("type", "constant")
    name = spec.get("name", f"h{k}")
    if kind == "constant":
        return MultiBandwidth.constant(spec["s"], b, d, net, name=name)
    if kind == "intervals":
        return MultiBandwidth.from_intervals(spec["breaks"], spec["s"], b, net, name=name)
    if kind == "grid":
        return MultiBandwidth.from_grid(np.asarray(spec["s"]), b, net, name=name)
    if kind == "csv":
        return MultiBandwidth.from_csv(base_dir / spec["path"], b, net)
    raise DomainError(f"unknown bandwidth type {kind!r}")


# ---------------------------------------------------------------------- report types
@dataclass
class UpperFunctionResult:
    name: str
    bound_name: str
    E_hat: float
    standard_error: float
    bound: float
    passed: bool
    margin: float
    zero_fraction: float
    tightness_mean: float
    tightness_max: float
    psi_values: List[float]
    bound_details: Dict[str, object] = field(default_factory=dict)


@dataclass
class OracleResult:
    name: str
    passed: bool
    details: Dict[str, object] = field(default_factory=dict)


@dataclass
class VerificationReport:
    scenario: Dict
    results: Dict[str, UpperFunctionResult]
    oracles: Dict[str, OracleResult]
    hypotheses: Dict[str, Dict[str, object]]
    provenance: Dict[str, str]
    notes: List[str] = field(default_factory=list)
    runtime: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (all(r.passed for r in self.results.values())
                and all(o.passed for o in self.oracles.values()))

    def to_dict(self, include_runtime: bool = False) -> Dict:
        out = asdict(self)
        out["passed"] = self.passed
        if not include_runtime:
            out.pop("runtime")
        return out

    def to_json(self, include_runtime: bool = False, **kw) -> str:
        return json.dumps(_plain(self.to_dict(include_runtime)), sort_keys=True, **kw)

    def write(self, out_dir) -> Path:
        """``report.json`` (deterministic), ``runtime.json`` and ``results.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(indent=2))
        (out / "runtime.json").write_text(json.dumps(self.runtime, indent=2))
        lines = ["upper_function,bound_name,E_hat,standard_error,bound,passed,margin,"
                 "zero_fraction,tightness_mean,tightness_max"]
        for r in self.results.values():
            lines.append(f"{r.name},{r.bound_name},{r.E_hat!r},{r.standard_error!r},{r.bound!r},"
                         f"{r.passed},{r.margin!r},{r.zero_fraction!r},{r.tightness_mean!r},"
                         f"{r.tightness_max!r}")
        (out / "results.csv").write_text("\n".join(lines) + "\n")
        return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------- validation
def validate(sc: Scenario, K: Kernel) -> Dict[str, Dict[str, object]]:
    """Check caps and theorem hypotheses; raise :class:`HypothesisError` on failure.

    The parameter relation needed by ``psi`` is recorded (and enforced only
    when ``sc.strict``)."""
    cfg = sc.cfg
    if cfg.d not in (1, 2):
        raise HypothesisError("dimension", "d must be 1 or 2")
    if not (1 <= len(sc.bandwidths) <= MAX_BANDWIDTHS):
        raise HypothesisError("collection size", f"need 1..{MAX_BANDWIDTHS} bandwidths")
    if not (1 <= sc.replicates <= MAX_REPLICATES):
        raise HypothesisError("replicates", f"need 1..{MAX_REPLICATES}")
    if sc.grid_n > MAX_GRID[cfg.d]:
        raise HypothesisError("evaluation grid", f"at most {MAX_GRID[cfg.d]} points per axis")
    for name in sc.upper_functions:
        if name not in UPPER_FUNCTIONS:
            raise HypothesisError("upper function", f"unknown {name!r}")
    for name in sc.oracles:
        if name not in ORACLES:
            raise HypothesisError("oracle", f"unknown {name!r}")
    for h in sc.bandwidths:
        if h.d != cfg.d or not math.isclose(h.b, cfg.b) or not math.isclose(h.net.hbar, cfg.hbar):
            raise HypothesisError("shared (b, d, hbar)", f"bandwidth {h.name!r} differs")
    if K.d != cfg.d:
        raise HypothesisError("kernel dimension", f"kernel has d={K.d}")
    hyp: Dict[str, Dict[str, object]] = {}
    a1 = check_assumptions(K, "A1")
    hyp["A1"] = {"holds": bool(a1), "estimate": a1.lipschitz_estimate, "L": K.L}
    if not a1:
        raise HypothesisError("Lipschitz kernel (A1)",
                              f"Lipschitz estimate {a1.lipschitz_estimate:.4g} > {K.L:.4g}")
    wants = set(sc.upper_functions)
    if wants & {"psi", "Psi"}:
        if not K.is_product:
            raise HypothesisError("product kernel (A3)", "psi needs a product kernel")
        a3 = check_assumptions(K, "A3")
        hyp["A3"] = {"holds": bool(a3), "estimate": a3.lipschitz_estimate}
        if not a3:
            raise HypothesisError("product kernel (A3)", "kernel does not factorise")
        if cfg.L_class is None or cfg.log_A is None:
            raise HypothesisError("class parameters", "psi needs L_class and A")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rel = check_param_relation(cfg.hbar, None, cfg.tau, cfg.d, log_A=cfg.log_A)
        hyp["relation"] = {"holds": rel.holds, "lhs": rel.lhs, "rhs": rel.rhs,
                           "degenerate": rel.degenerate}
        if sc.strict and not rel:
            raise HypothesisError("parameter relation",
                                  f"d lnln A = {rel.lhs:.4g} > {rel.rhs:.4g}")
    if wants & {"psi_star", "Psi_star"}:
        if not (1 <= cfg.p <= 2):
            raise HypothesisError("p in [1, 2]", f"p = {cfg.p}")
        if not all(h.isotropic for h in sc.bandwidths):
            raise HypothesisError("isotropic bandwidths", "psi* needs isotropic h")
        try:
            a2 = check_assumptions(K, "A2")
        except StructureMismatchError as exc:
            raise HypothesisError("Lipschitz derivatives (A2)", str(exc)) from exc
        hyp["A2"] = {"holds": bool(a2), "estimate": a2.lipschitz_estimate, "approximate": a2.approximate}
        if not a2:
            raise HypothesisError("Lipschitz derivatives (A2)",
                                  f"estimate {a2.lipschitz_estimate:.4g} > {K.L:.4g}")
    for label, vals in sc.envelopes.items():
        if len(vals) != len(sc.bandwidths):
            raise HypothesisError("envelope", f"{label!r} needs one value per bandwidth")
        if label not in sc.envelope_bounds:
            raise HypothesisError("envelope", f"{label!r} has no bound")
    return hyp


# ---------------------------------------------------------------------- core
def upper_function_values(name: str, sc: Scenario, K: Kernel, const: Constants) -> List[float]:
    """``Psi(h)`` for every bandwidth of the collection."""
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for h in sc.bandwidths:
            if name == "psi_eps":
                out.append(psi_eps(h, sc.cfg, K, const))
            elif name == "psi":
                out.append(psi(h, sc.cfg, K, const).value)
            elif name == "psi_star":
                out.append(psi_star(h, sc.cfg, K, const).value)
            elif name == "Psi":
                out.append(combined_psi(h, sc.cfg, K, "psi", const).value)
            elif name == "Psi_star":
                out.append(combined_psi(h, sc.cfg, K, "psi_star", const).value)
            else:
                raise HypothesisError("upper function", f"unknown {name!r}")
    return [float(v) for v in out]


def _simulator(sc: Scenario, K: Kernel) -> FieldSimulator:
    grid = EvalGrid(sc.cfg.b, sc.grid_n, sc.cfg.d)
    return FieldSimulator(K, sc.bandwidths, grid, sc.delta)


def sample_norms(sc: Scenario, K: Kernel, sim: Optional[FieldSimulator] = None,
                 keep: Sequence[str] = ()) -> Dict[str, np.ndarray]:
    """``||xi_h||_p`` for every replicate and bandwidth, plus whatever the oracles
    in ``keep`` need, computed batch by batch in replicate order."""
    sim = sim or _simulator(sc, K)
    grid = sim.grid
    p = sc.cfg.p
    R, H = sc.replicates, len(sc.bandwidths)
    norms = np.empty((R, H))
    out: Dict[str, np.ndarray] = {"norms": norms}
    tol = sc.tolerances
    if "holder" in keep:
        Vs = [grid_volumes(h, grid) for h in sc.bandwidths]
        rs = list(range(int(math.floor(p)) + 1, int(math.floor(p)) + 1 + tol.holder_orders))
        violations = np.zeros((H, len(rs)), dtype=np.int64)
        worst = np.full((H, len(rs)), -np.inf)
    if "moment" in keep:
        out["moment_pp"] = np.empty(R)
    if "covariance" in keep:
        pairs = sc.covariance_pairs or []
        out["cov_products"] = np.empty((R, len(pairs)))
    step = sim.batch
    for start in range(0, R, step):
        reps = list(range(start, min(R, start + step)))
        vals = sim.sample(sc.seed, reps)
        norms[start:start + len(reps)] = lp_norm(vals, grid.cell_volume, p)
        if "moment" in keep:
            k = sc.moment_bandwidth
            out["moment_pp"][start:start + len(reps)] = (
                grid.cell_volume * np.sum(np.abs(vals[:, k]) ** p, axis=-1))
        if "covariance" in keep and pairs:
            v = vals[:, sc.covariance_bandwidth]
            i = np.array([a for a, _ in pairs])
            j = np.array([b for _, b in pairs])
            out["cov_products"][start:start + len(reps)] = v[:, i] * v[:, j]
        if "holder" in keep:
            for k in range(H):
                for m, r in enumerate(rs):
                    lhs, rhs = holder_sides(vals[:, k], Vs[k], grid.cell_volume, p, r)
                    rel = (lhs - rhs) / np.maximum(rhs, 1e-300)
                    violations[k, m] += int(np.sum(rel > tol.holder_rtol))
                    worst[k, m] = max(worst[k, m], float(rel.max()))
    if "holder" in keep:
        out["holder_violations"] = violations
        out["holder_worst"] = worst
        out["holder_orders"] = np.asarray(rs)
    return out


def _summarise(name: str, bound_name: str, norms: np.ndarray, psi_vals: Sequence[float],
               q: float, bound: float, details: Dict) -> UpperFunctionResult:
    pv = np.asarray(psi_vals, dtype=float)
    deficit = np.max(np.maximum(norms - pv[None, :], 0.0), axis=1)
    powered = deficit ** q
    n = len(powered)
    E = math.fsum(powered.tolist()) / n
    se = float(np.std(powered, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    with np.errstate(divide="ignore"):      # a zero envelope has infinite tightness
        ratio = np.max(norms / pv[None, :], axis=1)
    return UpperFunctionResult(
        name=name, bound_name=bound_name, E_hat=E, standard_error=se, bound=bound,
        passed=bool(E <= bound), margin=bound - E, zero_fraction=float(np.mean(deficit == 0.0)),
        tightness_mean=math.fsum(ratio.tolist()) / n, tightness_max=float(ratio.max()),
        psi_values=[float(v) for v in pv], bound_details=details)


def moment_oracle(sc: Scenario, K: Kernel, moment_pp: np.ndarray) -> OracleResult:
    """Mean of ``||xi_h||_p^p`` against ``E|N|^p ||K||_2^p ||V_h^{-1/2}||_p^p``."""
    h = sc.bandwidths[sc.moment_bandwidth]
    p = sc.cfg.p
    exact = exact_lp_moment(K, h, p)
    n = len(moment_pp)
    mc = math.fsum(moment_pp.tolist()) / n
    se = float(np.std(moment_pp, ddof=1) / math.sqrt(n))
    tol = sc.tolerances
    within_se = abs(mc - exact) <= tol.moment_se * se
    within_rel = abs(mc - exact) <= tol.moment_rel * exact
    return OracleResult("moment", bool(within_se and within_rel),
                        {"mc": mc, "exact": exact, "se": se, "z": (mc - exact) / se,
                         "relative_error": (mc - exact) / exact, "within_se": bool(within_se),
                         "within_rel": bool(within_rel),
                         "bandwidth": h.name or f"h{sc.moment_bandwidth}"})


def covariance_oracle(sc: Scenario, K: Kernel, products: np.ndarray,
                      grid: EvalGrid) -> OracleResult:
    """Empirical ``E xi(x) xi(y)`` (known zero mean) against the exact covariance."""
    h = sc.bandwidths[sc.covariance_bandwidth]
    pts = grid.points()
    rows = []
    ok = True
    n = products.shape[0]
    for m, (i, j) in enumerate(sc.covariance_pairs or []):
        exact = exact_covariance(K, h, pts[i], pts[j])
        col = products[:, m]
        mc = math.fsum(col.tolist()) / n
        se = float(np.std(col, ddof=1) / math.sqrt(n))
        z = (mc - exact) / se if se > 0 else (0.0 if mc == exact else math.inf)
        good = abs(z) <= sc.tolerances.covariance_se
        ok = ok and good
        rows.append({"i": int(i), "j": int(j), "x": pts[i].tolist(), "y": pts[j].tolist(),
                     "exact": exact, "mc": mc, "se": se, "z": z, "passed": bool(good)})
    return OracleResult("covariance", bool(ok),
                        {"pairs": rows, "bandwidth": h.name or f"h{sc.covariance_bandwidth}"})


def holder_oracle(sc: Scenario, data: Dict[str, np.ndarray]) -> OracleResult:
    v = data["holder_violations"]
    return OracleResult("holder", bool(v.sum() == 0),
                        {"violations": int(v.sum()), "orders": data["holder_orders"].tolist(),
                         "worst_relative_excess": float(np.max(data["holder_worst"])),
                         "rtol": sc.tolerances.holder_rtol,
                         "checks": int(v.size * sc.replicates)})


def run_scenario(sc: Scenario) -> VerificationReport:
    """Simulate, evaluate every requested upper function and oracle, and report."""
    t0 = time.perf_counter()
    K = get_kernel(sc.kernel, sc.cfg.d)
    hyp = validate(sc, K)
    const = Constants(sc.cfg, K)
    notes = []
    if "relation" in hyp and not hyp["relation"]["holds"]:
        notes.append("parameter relation does not hold; psi is reported without its guarantee")
    t1 = time.perf_counter()
    psi_tables = {}
    for name in sc.upper_functions:
        try:
            psi_tables[name] = upper_function_values(name, sc, K, const)
        except NotInClassError as exc:
            raise HypothesisError("bandwidth class B(A)", str(exc)) from exc
    t2 = time.perf_counter()
    sim = _simulator(sc, K)
    data = sample_norms(sc, K, sim, keep=sc.oracles)
    t3 = time.perf_counter()
    results = {}
    q = sc.cfg.q
    for name in sc.upper_functions:
        bd = theorem_bound(BOUND_FOR[name], sc.cfg, K, const)
        details = {k: v for k, v in bd.items()}
        results[name] = _summarise(name, BOUND_FOR[name], data["norms"], psi_tables[name], q,
                                   float(bd["value"]), details)
    for label, vals in sc.envelopes.items():
        results[label] = _summarise(label, "given", data["norms"], vals, q,
                                    float(sc.envelope_bounds[label]), {})
    oracles = {}
    if "moment" in sc.oracles:
        oracles["moment"] = moment_oracle(sc, K, data["moment_pp"])
    if "covariance" in sc.oracles:
        oracles["covariance"] = covariance_oracle(sc, K, data["cov_products"], sim.grid)
    if "holder" in sc.oracles:
        oracles["holder"] = holder_oracle(sc, data)
    prov = const.provenance() if {"psi", "Psi", "psi_star", "Psi_star"} & set(sc.upper_functions) else {}
    t4 = time.perf_counter()
    return VerificationReport(
        scenario=sc.describe(), results=results, oracles=oracles, hypotheses=hyp,
        provenance=prov, notes=notes,
        runtime={"validate": t1 - t0, "upper_functions": t2 - t1, "simulate": t3 - t2,
                 "summarise": t4 - t3, "total": t4 - t0,
                 "lattice_cells": float(sim.geometry.size), "delta": sim.delta})


def oracle_suite(sc: Scenario) -> Dict[str, OracleResult]:
    """Run only the oracle checks of ``sc`` (all three when none are listed)."""
    oracles = sc.oracles or ORACLES
    if "covariance" in oracles and not sc.covariance_pairs:
        n = sc.grid_n ** sc.cfg.d
        mid = n // 2
        sc = _replace(sc, covariance_pairs=default_pairs(n, mid))
    sc = _replace(sc, upper_functions=(), oracles=tuple(oracles))
    return run_scenario(sc).oracles


def default_pairs(n_points: int, centre: int, count: int = 10) -> List[Tuple[int, int]]:
    """``count`` index pairs around ``centre``: the diagonal plus growing lags."""
    lags = [0, 1, 2, 4, 8, 16, 24, 32, 48, 64][:count]
    return [(centre, min(n_points - 1, centre + lag)) for lag in lags]


def _replace(sc: Scenario, **kw) -> Scenario:
    data = {f: getattr(sc, f) for f in sc.__dataclass_fields__}
    data.update(kw)
    return Scenario(**data)


def exceedance_curve(sc: Scenario, h_index: int, levels: Sequence[float],
                     norms: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
    """Empirical ``P{||xi_h||_p >= u}`` with its binomial standard error and the
    Gaussian-concentration reference ``exp(-(u - mean)_+^2 / (2 sigma^2))``,
    ``sigma^2 = sup_x ||K||_2^2 / V_h(x)``; the reference is 1 below the mean."""
    K = get_kernel(sc.kernel, sc.cfg.d)
    if norms is None:
        norms = sample_norms(sc, K)["norms"]
    col = np.asarray(norms)[:, h_index]
    u = np.asarray(levels, dtype=float)
    n = len(col)
    emp = np.array([np.count_nonzero(col >= x) / n for x in u])
    se = np.sqrt(emp * (1 - emp) / n)
    h = sc.bandwidths[h_index]
    sigma2 = K.norm(2) ** 2 * h.max_inv_sqrt_v() ** 2
    mean = math.fsum(col.tolist()) / n
    excess = np.maximum(u - mean, 0.0)
    ref = np.exp(-excess ** 2 / (2 * sigma2))
    return {"u": u, "empirical": emp, "se": se, "reference": ref, "mean": np.asarray(mean),
            "sigma2": np.asarray(sigma2)}


def monotone_collection_check(sc: Scenario, extra: Sequence[MultiBandwidth],
                              psi_name: str = "psi_eps") -> Tuple[np.ndarray, np.ndarray]:
    """Per-replicate sup-deficits for ``H`` and ``H + extra`` on the same noise."""
    K = get_kernel(sc.kernel, sc.cfg.d)
    const = Constants(sc.cfg, K)
    big = _replace(sc, bandwidths=list(sc.bandwidths) + list(extra))
    small_sim = _simulator(sc, K)
    big_sim = _simulator(big, K)
    if (small_sim.geometry != big_sim.geometry):
        raise DomainError("the extra bandwidths change the noise lattice; fix delta and "
                          "keep their supports inside the original reach")
    out = []
    for s, sim in ((sc, small_sim), (big, big_sim)):
        vals = upper_function_values(psi_name, s, K, const)
        norms = sample_norms(s, K, sim)["norms"]
        out.append(np.max(np.maximum(norms - np.asarray(vals)[None, :], 0.0), axis=1))
    return out[0], out[1]


def abs_moment(p: float) -> float:
    """``E|N|^p`` for a standard normal ``N``."""
    return abs_normal_moment(p)


__all__ = ["Scenario", "Tolerances", "VerificationReport", "UpperFunctionResult",
           "OracleResult", "run_scenario", "oracle_suite", "exceedance_curve",
           "monotone_collection_check", "validate", "upper_function_values", "sample_norms",
           "default_pairs", "UpfnError"]
