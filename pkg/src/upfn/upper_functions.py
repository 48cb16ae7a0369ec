"""Upper functions psi_eps, psi, psi* and the constants that enter them.

All constants are computed from the kernel norms, the class parameters and
two families of entropy constants (``lambda*(omega, mu)`` for the
anisotropic bound and ``lambda_d*(r)`` for the isotropic one).  The entropy
constants have no closed form; they come from calibration tables produced
by :mod:`upfn.entropy` (flagged ``calibrated``) or from user overrides.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln

from .bandwidth import ClassParams, MultiBandwidth, log_v_norm, r_A, check_param_relation
from .errors import DomainError, MissingConstantError, NotInClassError, StructureMismatchError
from .field import abs_normal_moment
from .kernel import Kernel

E_MINUS_2 = math.exp(-2.0)


# ---------------------------------------------------------------------- lambda tables
def scale_lambda(lam_unit: float, R: float, k: int, gamma: float) -> float:
    """Entropy constant of the radius-``R`` ball from the unit-ball value:
    ``lambda(R) = R^{k/gamma} lambda(1)``."""
    return R ** (k / gamma) * lam_unit


@dataclass(frozen=True)
class LambdaTable:
    """Tabulated entropy constants.

    ``kind`` is ``"omega_mu"`` (keys ``omega``, ``mu``; bilinear interpolation
    on a rectangular grid), ``"gamma"`` (keys ``d``, ``gamma``; linear in
    ``gamma`` for each ``d``) or ``"r"`` (exact integer keys ``r``).
    """

    kind: str
    keys: Tuple[Tuple[float, ...], ...]
    values: Tuple[float, ...]
    provenance: str = "override"
    domain_length: Optional[float] = None

    @classmethod
    def from_csv(cls, path, provenance: Optional[str] = None) -> "LambdaTable":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                if row[0].startswith("#"):
                    key, _, val = row[0].lstrip("# ").partition("=")
                    meta[key.strip()] = val.strip()
                    continue
                rows.append(row)
        header = [c.strip() for c in rows[0]]
        body = np.asarray(rows[1:], dtype=float)
        if header[:2] == ["omega", "mu"]:
            kind = "omega_mu"
        elif header[:2] == ["d", "gamma"]:
            kind = "gamma"
        elif header[0] == "r":
            kind = "r"
        else:
            raise ValueError(f"unrecognised lambda table header {header}")
        nk = 1 if kind == "r" else 2
        keys = tuple(tuple(map(float, r[:nk])) for r in body)
        vals = tuple(float(v) for v in body[:, nk])
        dl = float(meta["domain_length"]) if "domain_length" in meta else None
        return cls(kind, keys, vals, provenance or meta.get("provenance", "override"), dl)

    def to_csv(self, path, header_extra: Optional[Dict[str, str]] = None):
        cols = {"omega_mu": ["omega", "mu"], "gamma": ["d", "gamma"], "r": ["r"]}[self.kind]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"# provenance={self.provenance}"])
            if self.domain_length is not None:
                w.writerow([f"# domain_length={self.domain_length!r}"])
            for k, v in (header_extra or {}).items():
                w.writerow([f"# {k}={v}"])
            w.writerow(cols + ["value"])
            for key, val in zip(self.keys, self.values):
                w.writerow([repr(k) for k in key] + [repr(val)])

    # -- lookups
    @property
    def _grid(self):
        om = np.unique([k[0] for k in self.keys])
        mu = np.unique([k[1] for k in self.keys])
        vals = np.full((len(om), len(mu)), np.nan)
        for (o, m), v in zip(self.keys, self.values):
            vals[np.searchsorted(om, o), np.searchsorted(mu, m)] = v
        return om, mu, vals

    def omega_range(self, mu: float) -> Tuple[float, float]:
        """Range of ``omega`` where the table has finite entries bracketing ``mu``."""
        om, mus, vals = self._grid
        j = np.searchsorted(mus, mu)
        cols = [c for c in (j - 1, j) if 0 <= c < len(mus)]
        ok = np.all(np.isfinite(vals[:, cols]), axis=1)
        if not ok.any():
            raise MissingConstantError(f"no lambda*(omega, {mu}) entries")
        return float(om[ok].min()), float(om[ok].max())

    def lambda_star(self, omega: float, mu: float) -> float:
        if self.kind != "omega_mu":
            raise MissingConstantError("table does not hold lambda*(omega, mu)")
        om, mus, vals = self._grid
        if not (om[0] <= omega <= om[-1] and mus[0] <= mu <= mus[-1]):
            raise MissingConstantError(f"lambda*({omega:.4g}, {mu:.4g}) outside the table")
        v = float(RegularGridInterpolator((om, mus), vals)([[omega, mu]])[0])
        if not math.isfinite(v):
            raise MissingConstantError(f"lambda*({omega:.4g}, {mu:.4g}) not tabulated")
        return v

    def lambda_d_star(self, d: int, gamma: float, r: int) -> float:
        if self.kind == "r":
            for key, v in zip(self.keys, self.values):
                if int(key[0]) == r:
                    return v
            raise MissingConstantError(f"lambda_d*({r}) not in table")
        if self.kind != "gamma":
            raise MissingConstantError("table does not hold lambda_d*")
        pts = sorted((k[1], v) for k, v in zip(self.keys, self.values) if int(k[0]) == d)
        if not pts:
            raise MissingConstantError(f"no lambda_d* entries for d={d}")
        g = np.array([p[0] for p in pts])
        v = np.array([p[1] for p in pts])
        if not (g[0] <= gamma <= g[-1]):
            raise MissingConstantError(f"lambda_{d}*(gamma={gamma:.4g}) outside the table")
        return float(np.interp(gamma, g, v))


LambdaSpec = Union[None, float, LambdaTable]


@lru_cache(maxsize=None)
def default_table(name: str) -> Optional[LambdaTable]:
    """Packaged calibration table (``lambda_star`` or ``lambda_d_star``), if shipped."""
    try:
        ref = resources.files("upfn") / "data" / f"{name}.csv"
        if not ref.is_file():
            return None
        with resources.as_file(ref) as path:
            return LambdaTable.from_csv(path)
    except (FileNotFoundError, ModuleNotFoundError):
        return None


# ---------------------------------------------------------------------- config
@dataclass(frozen=True)
class UpperFnConfig:
    """Parameters for every upper function and constant.

    ``A`` may be given through ``log_A`` when it overflows a float.
    ``c_d`` defaults to ``2 * 5^{d/2}``.  ``cmu_variant`` selects between the
    integral-consistent C_mu (``"integral"``, default) and the alternative
    multiplicative form (``"multiplicative"``).
    """

    p: float = 2.0
    q: float = 2.0
    eps: float = math.exp(-4)
    b: float = 0.5
    d: int = 1
    hbar: float = E_MINUS_2
    tau: float = 0.5
    L_class: Optional[float] = None
    A: Optional[float] = None
    log_A: Optional[float] = None
    lambda_star: LambdaSpec = None
    lambda_d_star: LambdaSpec = None
    c_d: Optional[float] = None
    C_tilde: float = 1.0
    quad_rel_tol: float = 1e-12
    series_tol: float = 1e-10
    omega_grid: int = 64
    r_cap: int = 10_000
    cmu_variant: str = "integral"

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise DomainError("need p >= 1 and q >= 1")
        if not (0 < self.eps < E_MINUS_2 * (1 + 1e-12)):
            raise DomainError("eps must lie in (0, e^-2)")
        if not (0 < self.hbar <= E_MINUS_2 * (1 + 1e-12)):
            raise DomainError("hbar must lie in (0, e^-2]")
        if not (0 < self.tau < 1):
            raise DomainError("tau must lie in (0, 1)")
        if self.b <= 0 or self.d < 1:
            raise DomainError("need b > 0 and d >= 1")
        if self.A is not None and self.log_A is None:
            object.__setattr__(self, "log_A", math.log(self.A))
        elif self.log_A is not None and self.A is None:
            object.__setattr__(self, "A", math.exp(self.log_A) if self.log_A < 700 else math.inf)
        if self.cmu_variant not in ("integral", "multiplicative"):
            raise DomainError("cmu_variant must be 'integral' or 'multiplicative'")

    @property
    def q_tilde(self) -> float:
        return max(self.q / self.p, 1.0)

    @property
    def c_d_value(self) -> float:
        return self.c_d if self.c_d is not None else 2.0 * 5.0 ** (self.d / 2)

    @property
    def volume(self) -> float:
        return (2 * self.b) ** self.d

    def class_params(self) -> ClassParams:
        if self.L_class is None or self.log_A is None:
            raise DomainError("psi needs L_class and A")
        return ClassParams(self.tau, self.L_class, self.A, self.p, self.d, self.hbar,
                           log_A=self.log_A)

    def replace(self, **kw) -> "UpperFnConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "A" in kw and "log_A" not in kw:
            data["log_A"] = None
        if "log_A" in kw and "A" not in kw:
            data["A"] = None
        data.update(kw)
        return UpperFnConfig(**data)


# ---------------------------------------------------------------------- helpers
def _univariate_norm(K: Kernel, m: float) -> float:
    if not K.is_product:
        raise StructureMismatchError("this constant needs a product kernel")
    return K.univariate_norm(m)


def _log_sum(terms: List[float]) -> float:
    m = max(terms)
    return m + math.log(math.fsum(math.exp(t - m) for t in terms))


@dataclass
class SeriesResult:
    value: float
    last_index: int
    terms: int


def _series(log_term, start: int, tol: float, max_terms: int = 10_000) -> SeriesResult:
    """Sum of positive, eventually super-exponentially decaying terms given by
    their logarithms; stops once a term falls below ``tol`` times the partial sum."""
    logs = []
    k = start
    while True:
        lt = log_term(k)
        logs.append(lt)
        if len(logs) > 1 and lt < math.log(tol) + _log_sum(logs[:-1]):
            break
        if len(logs) >= max_terms:
            raise RuntimeError("series did not reach the truncation tolerance")
        k += 1
    return SeriesResult(math.exp(_log_sum(logs)), k, len(logs))


def surface_area(d: int) -> float:
    """Area of the unit sphere in ``R^d`` (2 when d = 1)."""
    return 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2)


def _minimize_1d(fun, lo: float, hi: float, n: int) -> Tuple[float, float, float]:
    """Minimum of ``fun`` on the closed interval [lo, hi]: grid of ``n + 1``
    points followed by bounded Brent refinement.  Returns (value, argmin,
    value found on the grid of ``2 n + 1`` points)."""
    def safe(x):
        v = fun(x)
        return v if math.isfinite(v) else math.inf

    def grid_min(k):
        xs = np.linspace(lo, hi, k + 1)
        vs = [safe(x) for x in xs]
        i = int(np.argmin(vs))
        return vs[i], xs[i], xs
    v1, x1, xs = grid_min(n)
    v2, _, _ = grid_min(2 * n)
    i = int(np.searchsorted(xs, x1))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]
    best_v, best_x = v1, x1
    if b > a:
        res = optimize.minimize_scalar(safe, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, abs(b))})
        if res.fun < best_v:
            best_v, best_x = float(res.fun), float(res.x)
    return best_v, best_x, v2


# ---------------------------------------------------------------------- constants
class Constants:
    """Lazily computed constants for one configuration and kernel."""

    def __init__(self, cfg: UpperFnConfig, K: Kernel):
        if K.d != cfg.d:
            raise DomainError("kernel dimension differs from the configuration")
        self.cfg, self.K = cfg, K
        self._cache: Dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    # -- lambda lookups
    def _lambda_spec(self, which: str) -> Tuple[LambdaSpec, str]:
        spec = getattr(self.cfg, which)
        if spec is None:
            table = default_table(which)
            if table is None:
                raise MissingConstantError(f"{which} not supplied and no packaged table")
            return table, table.provenance
        if isinstance(spec, LambdaTable):
            return spec, spec.provenance
        return float(spec), "override"

    def lambda_star(self, omega: float, mu: float) -> float:
        spec, _ = self._lambda_spec("lambda_star")
        if isinstance(spec, LambdaTable):
            return spec.lambda_star(omega, mu)
        return spec

    def lambda_d_star(self, r: int) -> float:
        spec, _ = self._lambda_spec("lambda_d_star")
        if isinstance(spec, LambdaTable):
            return spec.lambda_d_star(self.cfg.d, self.gamma_r(r), r)
        return spec

    def provenance(self) -> Dict[str, str]:
        out = {}
        for which in ("lambda_star", "lambda_d_star"):
            try:
                spec, prov = self._lambda_spec(which)
                if isinstance(spec, LambdaTable) and spec.domain_length is not None:
                    want = 2 * (self.K.a + self.cfg.b)
                    if not math.isclose(spec.domain_length, want, rel_tol=1e-9):
                        prov += f"; table domain length {spec.domain_length:g}, needed {want:g}"
                out[which] = prov
            except MissingConstantError:
                out[which] = "missing"
        out["c_d"] = "override" if self.cfg.c_d is not None else "default 2*5^(d/2)"
        out["C_tilde"] = f"configured {self.cfg.C_tilde}"
        return out

    # -- constants of psi_eps
    @property
    def C1(self) -> float:
        c, K = self.cfg, self.K
        n2 = K.norm(2)
        inner = math.sqrt(abs(math.log(4 * c.b * K.L * n2))) + 1.0
        return 2 * max(c.q, c.p) + 2 * math.sqrt(2 * c.d) * (math.sqrt(math.pi) + n2 * inner)

    def _c3_integral_closed(self) -> float:
        c = self.cfg
        s = 8 * self.K.norm(2) ** 2
        k = c.p * c.q_tilde / 2
        return math.exp(math.log(c.p / 2) + gammaln(k) + k * math.log(s))

    def _c3_integral_quad(self) -> float:
        c = self.cfg
        s = 8 * self.K.norm(2) ** 2
        qt = c.q_tilde
        f = lambda z: z ** (qt - 1) * math.exp(-z ** (2 / c.p) / s)  # noqa: E731
        # split at the mode-scale so the adaptive rule sees the bulk
        scale = s ** (c.p / 2)
        edges = [0.0, scale, 10 * scale, 100 * scale]
        total = 0.0
        for a0, a1 in zip(edges[:-1], edges[1:]):
            total += integrate.quad(f, a0, a1, epsabs=0.0, epsrel=c.quad_rel_tol, limit=500)[0]
        total += integrate.quad(f, edges[-1], math.inf, epsabs=0.0,
                                epsrel=c.quad_rel_tol, limit=500)[0]
        return total

    def _c3_from(self, integral: float) -> float:
        c = self.cfg
        return 2 ** (c.d / c.p) * (2 * c.q_tilde * integral) ** (1 / (c.p * c.q_tilde))

    @property
    def C3(self) -> float:
        return self._memo("C3", lambda: self._c3_from(self._c3_integral_closed()))

    @property
    def C3_quadrature(self) -> float:
        return self._memo("C3q", lambda: self._c3_from(self._c3_integral_quad()))

    # -- anisotropic constants
    def mu(self, r: int) -> float:
        return 1.0 / (1.0 - (1.0 - self.cfg.tau) / r)

    def R_mu(self, r: int) -> float:
        mu = self.mu(r)
        K, n1 = self.K, _univariate_norm(self.K, 1)
        first = 0.5 * _univariate_norm(K, 2 * mu / (3 * mu - 2))
        inner = 5 * (4 * K.L * (K.a + 1)) ** mu + 4 * (2 * n1) ** mu / (2 - mu)
        return max(first, n1 + 2 * inner ** (1 / mu))

    def C_mu(self, r: int) -> Dict[str, float]:
        return self._memo(("Cmu", r), lambda: self._c_mu(r))

    def _c_mu(self, r: int) -> Dict[str, float]:
        c, K = self.cfg, self.K
        mu = self.mu(r)
        R = self.R_mu(r)
        lo, hi = 1 / mu - 0.5, 1.0
        spec, _ = self._lambda_spec("lambda_star")
        if isinstance(spec, LambdaTable):
            t_lo, t_hi = spec.omega_range(mu)
            lo, hi = max(lo, t_lo), min(hi, t_hi)
            if not (lo < 0.5 < hi):
                raise MissingConstantError(f"lambda* table does not straddle omega = 1/2 at mu={mu:.4g}")
        integral = c.cmu_variant == "integral"

        def term(omega):
            lam = self.lambda_star(omega, mu)
            fac = abs(1.0 - 1.0 / (2 * omega))
            if fac == 0:
                return math.inf if integral else 0.0
            weight = 1.0 / fac if integral else fac
            return math.sqrt(lam) * weight * R ** (1 / (2 * omega))

        v2, w2, v2g = _minimize_1d(term, 0.5, hi, c.omega_grid)
        v1, w1, v1g = _minimize_1d(term, lo, 0.5, c.omega_grid)
        pref = 4 * math.sqrt(2) * _univariate_norm(K, 2) ** (c.d - 1)
        value = pref * (v1 + v2)
        gate = abs((v1g + v2g) - (v1 + v2)) / (v1 + v2) if (v1 + v2) > 0 else 0.0
        return {"C_mu": value, "omega1": w1, "omega2": w2, "mu": mu, "R_mu": R,
                "grid_gap": gate}

    def C_tilde_mu(self, r: int) -> float:
        c, K = self.cfg, self.K
        mu = self.mu(r)
        s = _univariate_norm(K, 2) ** (c.d - 1) * _univariate_norm(K, 2 * mu / (3 * mu - 2))
        return self.C_mu(r)["C_mu"] + 4 ** c.d * (math.sqrt(2 * math.exp(r)) + math.sqrt(8 * math.pi)) * s

    def C_hat_mu(self, r: int) -> float:
        return self._memo(("Chat", r), lambda: self._c_hat(r))

    def _c_hat(self, r: int) -> float:
        c, K = self.cfg, self.K
        tau = c.tau
        mu = self.mu(r)
        s = _univariate_norm(K, 2) ** (c.d - 1) * _univariate_norm(K, 2 * mu / (3 * mu - 2))
        Ct = self.C_tilde_mu(r)
        k = (r + tau - 1) / (1 - tau)
        ustar = 0.5 * (-Ct + math.sqrt(Ct * Ct + 4 * k * s))
        ustar = max(ustar, 0.0)
        logf = lambda u: k * math.log(u + Ct) - u * u / (2 * s)  # noqa: E731
        peak = logf(ustar)
        g = lambda u: math.exp(logf(u) - peak)  # noqa: E731
        width = 1.0 / math.sqrt(k / (ustar + Ct) ** 2 + 1 / s)
        top = ustar + 60 * math.sqrt(s) + 60 * width
        pieces = [0.0] + [p for p in (ustar - 10 * width, ustar, ustar + 10 * width) if p > 0] + [top]
        pieces = sorted(set(pieces))
        total = math.fsum(integrate.quad(g, a0, a1, epsabs=0.0, epsrel=c.quad_rel_tol, limit=500)[0]
                          for a0, a1 in zip(pieces[:-1], pieces[1:]))
        log_int = peak + math.log(total)
        return math.exp((1 - tau) / r * (math.log(r / (1 - tau)) + log_int))

    def C2(self, r: int) -> Dict[str, float]:
        return self._memo(("C2", r), lambda: self._c2(r))

    def _c2(self, r: int) -> Dict[str, float]:
        c, K = self.cfg, self.K
        if r < math.floor(c.p) + 1:
            raise DomainError(f"r must be >= floor(p) + 1 = {math.floor(c.p) + 1}")
        if c.L_class is None:
            raise DomainError("C_2 needs L_class")
        L, tau = c.L_class, c.tau
        vol = max(1.0, (2 * c.b) ** (c.d - 1))
        cls = L ** (1 / r) + L ** (tau / r) * (1 - math.exp(-tau * c.p / 4)) ** ((tau - 1) / r)
        cmu = self.C_mu(r)
        ct = self.C_tilde_mu(r)
        ch = self.C_hat_mu(r)
        tail = (math.exp(r) * math.sqrt(2 * (1 + c.q)) * (r * math.sqrt(math.e)) ** c.d
                * _univariate_norm(K, 2 * r / (r + 2)) ** c.d)
        value = vol * cls * (ct + ch) + tail
        return {"r": r, "C2": value, "R_mu": cmu["R_mu"], "C_mu": cmu["C_mu"],
                "omega1": cmu["omega1"], "omega2": cmu["omega2"], "mu": cmu["mu"],
                "C_tilde_mu": ct, "C_hat_mu": ch, "tail": tail,
                "omega_grid_gap": cmu["grid_gap"]}

    def C2_lower(self, r: int) -> float:
        """Lower bound for ``C_2(r)`` valid for every ``r`` and increasing in ``r``."""
        c, K = self.cfg, self.K
        n1 = _univariate_norm(K, 1) * min(1.0, (2 * K.a) ** -0.5)
        return (math.exp(r) * math.sqrt(2 * (1 + c.q)) * (r * math.sqrt(math.e)) ** c.d
                * n1 ** c.d)

    @property
    def gamma_q1(self) -> float:
        return abs_normal_moment(self.cfg.q + 1)

    def C4_series(self) -> SeriesResult:
        return self._memo("C4", self._c4_series)

    def _c4_series(self) -> SeriesResult:
        c, K = self.cfg, self.K

        def log_term(r):
            return (-math.exp(r) + c.q / 2 * c.d * (math.log(r) + 0.5
                    + math.log(_univariate_norm(K, 2 * r / (r + 2)))))
        return _series(log_term, int(math.floor(c.p)) + 1, c.series_tol)

    @property
    def C4(self) -> float:
        c = self.cfg
        s = self.C4_series().value
        pre = self.gamma_q1 * math.sqrt(math.pi / 2) * max(1.0, (2 * c.b) ** (c.q * c.d))
        return (pre * s) ** (1 / c.q)

    # -- isotropic constants
    @property
    def sigma_star(self) -> float:
        c, K = self.cfg, self.K
        return (math.sqrt(2 ** (c.d + 1) * K.a ** c.d * K.norm(math.inf) * K.norm(1) * c.c_d_value)
                * (2 * c.b) ** (c.d * (c.p - 1) / c.p))

    def C5_series(self) -> SeriesResult:
        return self._memo("C5", self._c5_series)

    def _c5_series(self) -> SeriesResult:
        c = self.cfg
        tol = c.series_tol

        def log_term(r):
            inner = [-(2.0 ** l) * math.exp(r) for l in range(1, 64)]
            return _log_sum(inner)

        return _series(log_term, c.d + 1, tol)

    @property
    def C5(self) -> float:
        c = self.cfg
        pre = (math.sqrt(8 * math.pi) * self.sigma_star ** (c.q - 1) * self.gamma_q1) ** (1 / c.q)
        return pre * self.C5_series().value

    def gamma_r(self, r: int) -> float:
        c = self.cfg
        return c.d / 2 + c.d / (2 * c.p * r)

    def alpha_r(self, r: int) -> float:
        g = self.gamma_r(r)
        a = g - math.floor(g)
        if not (0.0 < a < 1.0):
            raise DomainError(f"gamma_r = {g} is an integer; the radial integrals diverge")
        return a

    def T_star(self, r: int) -> float:
        c, K = self.cfg, self.K
        alpha = self.alpha_r(r)
        S = surface_area(c.d)
        return 2.0 ** (-c.d + 1) * (K.L * (K.a + 2) ** c.d * S / (1 - alpha)
                                   + K.deriv_norm_sup() * S / alpha)

    def T_star_quadrature(self, r: int) -> float:
        """Same as :meth:`T_star` with the radial integrals done numerically."""
        c, K = self.cfg, self.K
        alpha = self.alpha_r(r)
        S = surface_area(c.d)
        inside = integrate.quad(lambda x: x ** (-alpha), 0, 1, epsabs=0.0, epsrel=1e-12,
                                limit=500)[0]
        # substitute rho = 1/x on the exterior: int_1^inf rho^{-1-alpha} = int_0^1 x^{alpha-1}
        outside = integrate.quad(lambda x: x ** (alpha - 1), 0, 1, epsabs=0.0, epsrel=1e-12,
                                 limit=500)[0]
        return 2.0 ** (-c.d + 1) * (K.L * (K.a + 2) ** c.d * S * inside
                                   + K.deriv_norm_sup() * S * outside)

    def T(self, r: int) -> float:
        c, K = self.cfg, self.K
        return max(self.sigma_star / 2,
                   (c.d / 2 + 1) ** c.d * self.T_star(r) + K.norm(1) * (2 * c.b) ** (1 / c.p))

    def C2_star(self, r: int) -> Dict[str, float]:
        return self._memo(("C2s", r), lambda: self._c2_star(r))

    def _c2_star(self, r: int) -> Dict[str, float]:
        c = self.cfg
        if r <= c.d:
            raise DomainError("r must exceed d")
        g = self.gamma_r(r)
        lam = self.lambda_d_star(r)
        T = self.T(r)
        ss = self.sigma_star
        value = (8 * math.sqrt(2 * lam) * T ** (c.d / (2 * g)) * (ss / 2) ** (1 / (2 * c.p * r))
                 + 4 * math.sqrt(c.q * math.exp(r)) * ss)
        return {"r": r, "C2_star": value, "gamma_r": g, "alpha": self.alpha_r(r),
                "T": T, "T_star": self.T_star(r), "lambda_d_star": lam}

    def C2_star_lower(self, r: int) -> float:
        return 4 * math.sqrt(self.cfg.q * math.exp(r)) * self.sigma_star


# ---------------------------------------------------------------------- report
@dataclass
class ConstantsReport:
    config: Dict
    kernel: str
    kernel_norms: Dict[str, float]
    C1: float
    C3: float
    C3_quadrature: float
    C4: float
    C4_last_r: int
    sigma_star: float
    C5: Optional[float]
    C5_last_r: Optional[int]
    gamma_q1: float
    C2_table: List[Dict[str, float]] = field(default_factory=list)
    C2_star_table: List[Dict[str, float]] = field(default_factory=list)
    provenance: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def _config_dict(cfg: UpperFnConfig) -> Dict:
    out = {}
    for k in cfg.__dataclass_fields__:
        v = getattr(cfg, k)
        if isinstance(v, LambdaTable):
            v = f"table({v.kind}, {len(v.values)} entries, {v.provenance})"
        out[k] = v
    return out


def constants_report(cfg: UpperFnConfig, K: Kernel, r_values=None,
                     r_star_values=None) -> ConstantsReport:
    """Compute every constant; ``C_2`` and ``C_2*`` are tabulated on the given ``r``."""
    const = Constants(cfg, K)
    notes = []
    if r_values is None:
        r0 = int(math.floor(cfg.p)) + 1
        r_values = range(r0, r0 + 8)
    if r_star_values is None:
        r_star_values = range(cfg.d + 1, cfg.d + 9)
    c2 = []
    if K.is_product and cfg.L_class is not None:
        for r in r_values:
            try:
                c2.append(const.C2(r))
            except MissingConstantError as exc:
                notes.append(f"C2({r}) unavailable: {exc}")
    c2s = []
    for r in r_star_values:
        try:
            c2s.append(const.C2_star(r))
        except (MissingConstantError, DomainError, StructureMismatchError) as exc:
            notes.append(f"C2*({r}) unavailable: {exc}")
    try:
        c5, c5r = const.C5, const.C5_series().last_index
    except StructureMismatchError as exc:  # pragma: no cover - C5 needs no structure
        c5, c5r = None, None
        notes.append(str(exc))
    for a, b in zip(c2[:-1], c2[1:]):
        if b["C2"] <= a["C2"]:
            notes.append(f"C2 not increasing between r={a['r']} and r={b['r']}")
    norms = {"L1": K.norm(1), "L2": K.norm(2), "Linf": K.norm(math.inf)}
    if K.is_product:
        norms.update({"uni_L1": K.univariate_norm(1), "uni_L2": K.univariate_norm(2)})
    return ConstantsReport(
        config=_config_dict(cfg), kernel=K.name, kernel_norms=norms,
        C1=const.C1, C3=const.C3, C3_quadrature=const.C3_quadrature,
        C4=const.C4 if K.is_product else float("nan"),
        C4_last_r=const.C4_series().last_index if K.is_product else -1,
        sigma_star=const.sigma_star, C5=c5, C5_last_r=c5r, gamma_q1=const.gamma_q1,
        C2_table=c2, C2_star_table=c2s, provenance=const.provenance(), notes=notes)


# ---------------------------------------------------------------------- upper functions
def psi_eps(h: MultiBandwidth, cfg: UpperFnConfig, K: Kernel,
            const: Optional[Constants] = None) -> float:
    """``C_1 (sum_s |ln(eps V_s)|^{p/2} V_s^{-p/2} nu(Lambda_s))^{1/p}``."""
    const = const or Constants(cfg, K)
    _, meas = h.levels()
    logv = h.log_v_levels()
    p = cfg.p
    le = math.log(cfg.eps)
    lnabs = np.abs(le + logv)
    logs = p / 2 * np.log(lnabs) - p / 2 * logv + np.log(meas)
    from scipy.special import logsumexp
    return const.C1 * math.exp(float(logsumexp(logs)) / p)


@dataclass
class PsiResult:
    value: float
    r_star: Optional[int]
    r_first: int
    r_last: int
    terminated_early: bool
    values: Dict[int, float] = field(default_factory=dict)


def psi(h: MultiBandwidth, cfg: UpperFnConfig, K: Kernel, const: Optional[Constants] = None,
        r_max: Optional[int] = None, exhaustive: bool = False) -> PsiResult:
    """``inf_{r >= r_A(h)} C_2(r) ||V_h^{-1/2}||_{rp/(r-p)}``.

    The scan stops as soon as a lower bound of every later term, increasing
    in ``r``, exceeds the best value found.  ``exhaustive=True`` scans up to
    ``r_max`` without early termination (used as an oracle).
    """
    const = const or Constants(cfg, K)
    if not K.is_product:
        raise StructureMismatchError("psi needs a product kernel")
    cp = cfg.class_params()
    rel = check_param_relation(cfg.hbar, None, cfg.tau, cfg.d, log_A=cfg.log_A)
    if not rel:
        import warnings
        warnings.warn(f"parameter relation fails ({rel.lhs:.4g} > {rel.rhs:.4g})", stacklevel=2)
    r0 = r_A(h, cp, cfg.r_cap)
    if r0 is None:
        raise NotInClassError("bandwidth is not in B(A)")
    r_max = r_max or cfg.r_cap
    p = cfg.p
    floor_norm = h.min_inv_sqrt_v() * min(1.0, (2 * cfg.b) ** (cfg.d / p))
    best, arg = math.inf, None
    vals = {}
    r = r0
    early = False
    while r <= r_max:
        if not exhaustive and const.C2_lower(r) * floor_norm >= best:
            early = True
            break
        v = const.C2(r)["C2"] * math.exp(log_v_norm(h, r * p / (r - p)))
        vals[r] = v
        if v < best:
            best, arg = v, r
        r += 1
    return PsiResult(best, arg, r0, r - 1, early, vals)


def psi_star(h: MultiBandwidth, cfg: UpperFnConfig, K: Kernel, const: Optional[Constants] = None,
             r_max: Optional[int] = None, exhaustive: bool = False) -> PsiResult:
    """``inf_{r > d} C_2*(r) ||h^{-d/2}||_{p + 1/r}`` for isotropic ``h`` and ``p <= 2``."""
    const = const or Constants(cfg, K)
    if not h.isotropic:
        raise DomainError("psi* needs an isotropic bandwidth")
    if not (1 <= cfg.p <= 2):
        raise DomainError("psi* needs p in [1, 2]")
    r_max = r_max or cfg.r_cap
    floor_norm = h.min_inv_sqrt_v() * min(1.0, (2 * cfg.b) ** (cfg.d / cfg.p))
    best, arg = math.inf, None
    vals = {}
    r = cfg.d + 1
    early = False
    while r <= r_max:
        if not exhaustive and const.C2_star_lower(r) * floor_norm >= best:
            early = True
            break
        v = const.C2_star(r)["C2_star"] * math.exp(log_v_norm(h, cfg.p + 1 / r))
        vals[r] = v
        if v < best:
            best, arg = v, r
        r += 1
    return PsiResult(best, arg, cfg.d + 1, r - 1, early, vals)


@dataclass
class CombinedPsi:
    value: float
    branch: str                  # which component attained the minimum
    components: Dict[str, Optional[float]]
    flags: List[str] = field(default_factory=list)


def combined_psi(h: MultiBandwidth, cfg: UpperFnConfig, K: Kernel, kind: str = "psi",
                 const: Optional[Constants] = None) -> CombinedPsi:
    """``psi_eps(h) ^ psi(h)`` (``kind="psi"``) or ``psi_eps(h) ^ psi*(h)`` (``kind="psi_star"``).

    When the second component is not available (``h`` outside ``B(A)``, a
    non-isotropic ``h``, a missing entropy constant) ``psi_eps`` is returned
    with a flag naming the reason.
    """
    const = const or Constants(cfg, K)
    pe = psi_eps(h, cfg, K, const)
    comps: Dict[str, Optional[float]] = {"psi_eps": pe, kind: None}
    flags = []
    try:
        other = (psi if kind == "psi" else psi_star)(h, cfg, K, const).value
        comps[kind] = other
    except (NotInClassError, DomainError, MissingConstantError, StructureMismatchError) as exc:
        flags.append(f"{kind} unavailable: {exc}")
        return CombinedPsi(pe, "psi_eps", comps, flags)
    if other < pe:
        return CombinedPsi(other, kind, comps, flags)
    return CombinedPsi(pe, "psi_eps", comps, flags)


def theorem_bound(which: str, cfg: UpperFnConfig, K: Kernel,
                  const: Optional[Constants] = None) -> Dict[str, float]:
    """Right-hand side of the moment bound for ``which`` in
    ``{"T1", "T2", "T3", "Cor1", "Cor2"}``.

    ``T3`` returns the bound as stated (``value``) and the variant with the
    exponent sign reversed (``variant``); both are labeled.
    """
    const = const or Constants(cfg, K)
    q, eps = cfg.q, cfg.eps
    if which == "T1":
        return {"value": (const.C3 * eps) ** q}
    if which == "T2":
        if cfg.log_A is None:
            raise DomainError("T2 needs A")
        log_b = (math.log(const.C4) + cfg.log_A
                 - math.exp(2 * math.sqrt(2 * cfg.d * abs(math.log(cfg.hbar)))))
        return {"value": math.exp(q * log_b) if q * log_b < 700 else math.inf, "log_value": q * log_b}
    if which == "T3":
        hd = cfg.hbar ** (-cfg.d)
        log_v = q * (math.log(const.C5) + hd)
        return {"value": math.exp(log_v) if log_v < 700 else math.inf, "log_value": log_v,
                "variant": math.exp(q * (math.log(const.C5) - hd)),
                "label_value": "as stated: (C5 exp(hbar^-d))^q",
                "label_variant": "sign-reversed exponent: (C5 exp(-hbar^-d))^q"}
    if which == "Cor1":
        return {"value": ((const.C3 + const.C4) * eps) ** q}
    if which == "Cor2":
        return {"value": ((const.C3 + const.C5) * eps) ** q}
    raise DomainError(f"unknown bound {which!r}")
