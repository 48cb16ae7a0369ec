"""Covering numbers, Dudley integrals and entropy-constant calibration.

Function classes are represented by finite clouds of tabulated functions
with the L2 metric of a quadrature rule.  All entropy figures derived from
finite clouds are heuristic lower bounds for the entropy of the infinite
class and are labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .errors import DomainError, InsufficientResolutionError
from .kernel import Kernel

HEURISTIC = "lower-bound heuristic"
PER_DECADE = 32
EXACT_MAX_POINTS = 12


# ---------------------------------------------------------------------- clouds
@dataclass
class FunctionCloud:
    """Functions ``values[i]`` tabulated at common nodes with quadrature ``weights``."""

    values: np.ndarray
    weights: np.ndarray
    descriptor: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=float),
                                       self.values.shape[1:]).copy()
        self._dist = None
        self._greedy = None

    def __len__(self):
        return self.values.shape[0]

    def gram(self) -> np.ndarray:
        x = self.values * np.sqrt(self.weights)
        return x @ x.T

    def distances(self) -> np.ndarray:
        """Pairwise L2 distances (symmetric, zero diagonal)."""
        if self._dist is None:
            x = self.values * np.sqrt(self.weights)
            sq = np.sum(x * x, axis=1)
            d2 = sq[:, None] + sq[None, :] - 2 * (x @ x.T)
            np.fill_diagonal(d2, 0.0)
            d = np.sqrt(np.clip(d2, 0.0, None))
            # recompute small entries directly to avoid cancellation
            small = d < 1e-6 * max(1.0, float(np.sqrt(sq.max())))
            for i, j in zip(*np.nonzero(np.triu(small, 1))):
                d[i, j] = d[j, i] = float(np.sqrt(np.sum(self.weights * (self.values[i] - self.values[j]) ** 2)))
            self._dist = d
        return self._dist

    def scaled(self, c: float) -> "FunctionCloud":
        return FunctionCloud(c * self.values, self.weights, dict(self.descriptor, scale=c))

    def prefix(self, n: int) -> "FunctionCloud":
        return FunctionCloud(self.values[:n], self.weights, dict(self.descriptor))


# ---------------------------------------------------------------------- covering
def farthest_point_radii(D: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Farthest-point traversal from index 0 (ties to the lowest index).

    Returns ``(order, radii)`` where ``radii[k - 1]`` is the covering radius of
    the first ``k`` centres; radii are nonincreasing and end at 0.
    """
    n = D.shape[0]
    order = [0]
    dist = D[0].copy()
    radii = []
    for _ in range(1, n):
        radii.append(float(dist.max()))
        nxt = int(np.argmax(dist))       # first maximum = lowest index
        order.append(nxt)
        dist = np.minimum(dist, D[nxt])
    radii.append(float(dist.max()))
    return np.asarray(order), np.asarray(radii)


def enclosing_radius(G: np.ndarray, idx: Sequence[int]) -> float:
    """Radius of a ball containing the members ``idx`` of a cloud with Gram
    matrix ``G``, centred at the solution of the minimum-enclosing-ball dual
    ``max_a a.diag(G) - a'Ga`` over the simplex.  The ball is always
    feasible, and its radius is the minimum up to solver tolerance.  The dual
    is solved on the Gram matrix centred at the members' mean and scaled to
    unit diagonal maximum, so the result is equivariant under scaling."""
    idx = list(idx)
    m = len(idx)
    if m <= 1:
        return 0.0
    g = G[np.ix_(idx, idx)]
    diag = np.diag(g).copy()
    if m == 2:
        return 0.5 * math.sqrt(max(diag[0] + diag[1] - 2 * g[0, 1], 0.0))
    # centre and rescale: the optimal weights do not change
    g = g - g.mean(axis=0)[None, :] - g.mean(axis=1)[:, None] + g.mean()
    scale = float(np.diag(g).max())
    if scale <= 0:
        return 0.0
    g = g / scale
    diag = np.diag(g).copy()
    ones = np.ones(m)
    res = optimize.minimize(lambda a: a @ g @ a - a @ diag, np.full(m, 1.0 / m),
                            jac=lambda a: 2 * g @ a - diag, method="SLSQP",
                            bounds=[(0.0, 1.0)] * m,
                            constraints=[{"type": "eq", "fun": lambda a: a.sum() - 1.0,
                                          "jac": lambda a: ones}],
                            options={"ftol": 1e-15, "maxiter": 500})
    a = np.clip(res.x, 0.0, None)
    a /= a.sum()
    d2 = diag - 2 * g @ a + a @ g @ a
    return math.sqrt(max(float(d2.max()), 0.0) * scale)


def greedy_cover_radii(cloud: FunctionCloud) -> np.ndarray:
    """``R_k``: the largest enclosing radius of the clusters formed by the
    first ``k`` farthest-point centres (nearest-centre assignment, ties to the
    earlier centre), made nonincreasing by a running minimum."""
    if getattr(cloud, "_greedy", None) is None:
        D, G = cloud.distances(), cloud.gram()
        order, _ = farthest_point_radii(D)
        n = len(cloud)
        R = np.empty(n)
        for k in range(1, n + 1):
            lab = np.argmin(D[order[:k]], axis=0)
            R[k - 1] = max(enclosing_radius(G, np.flatnonzero(lab == j)) for j in range(k))
        cloud._greedy = np.minimum.accumulate(R)
    return cloud._greedy


def _within(r, delta):
    return r <= delta * (1 + 1e-9)


def exact_covering_number(cloud: FunctionCloud, delta: float) -> int:
    """Minimum number of closed L2 balls of radius ``delta`` covering the
    cloud (exhaustive set cover over all subsets, at most 12 functions)."""
    n = len(cloud)
    if n > EXACT_MAX_POINTS:
        raise DomainError(f"exact covering supports at most {EXACT_MAX_POINTS} functions")
    D, G = cloud.distances(), cloud.gram()
    full = (1 << n) - 1
    feasible = np.zeros(1 << n, dtype=bool)
    feasible[0] = True
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << low)
        # subsets of a ball fit in the ball
        if not feasible[rest]:
            continue
        idx = [i for i in range(n) if mask >> i & 1]
        if not all(_within(D[low, j], 2 * delta) for j in idx):
            continue
        sub = D[np.ix_(idx, idx)]
        feasible[mask] = _within(sub.max(axis=1).min(), delta) or _within(enclosing_radius(G, idx), delta)
    maximal = [m for m in range(1, full + 1) if feasible[m]
               and not any(feasible[m | (1 << j)] for j in range(n) if not m >> j & 1)]
    for k in range(1, n + 1):
        for combo in combinations(maximal, k):
            acc = 0
            for m in combo:
                acc |= m
            if acc == full:
                return k
    return n


def covering_number(cloud: FunctionCloud, delta: float, method: str = "greedy") -> int:
    """Covering number of the cloud by closed L2 balls of radius ``delta``.

    ``"greedy"``: farthest-point clustering, an upper bound on the minimum.
    ``"exact"``: exhaustive minimum for clouds of at most 12 functions.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    if method == "exact":
        return exact_covering_number(cloud, delta)
    R = greedy_cover_radii(cloud)
    return int(np.argmax(_within(R, delta))) + 1


def leader_counts(D: np.ndarray, deltas: Sequence[float]) -> np.ndarray:
    """Leader clustering in index order: a function opens a new ball when it is
    farther than ``delta`` from every existing leader.  Centres sit at cloud
    members, which keeps the cost linear per scale on large clouds.  The
    count for a prefix of the cloud never exceeds the count for the whole
    cloud.  A cover at a smaller radius also covers at a larger one, so each
    count is replaced by the minimum over all radii not above it; the result
    is nonincreasing in ``delta`` for any order of ``deltas``."""
    deltas = np.asarray(deltas, dtype=float)
    out = np.empty(len(deltas), dtype=np.int64)
    n = D.shape[0]
    for k, delta in enumerate(deltas):
        leaders = [0]
        mind = D[0].copy()
        for i in range(1, n):
            if mind[i] > delta:
                leaders.append(i)
                mind = np.minimum(mind, D[i])
        out[k] = len(leaders)
    order = np.argsort(deltas, kind="stable")
    out[order] = np.minimum.accumulate(out[order])
    return out


def log_delta_grid(top: float, bottom: float, per_decade: int = PER_DECADE) -> np.ndarray:
    """Log-spaced grid ``top * 10^{-i/per_decade}`` down to ``bottom`` (decreasing)."""
    if not (0 < bottom < top):
        return np.asarray([top])
    n = int(math.floor(per_decade * math.log10(top / bottom))) + 1
    return top * 10.0 ** (-np.arange(n) / per_decade)


@dataclass
class DudleyResult:
    value: float
    delta_min: float
    sigma_top: float
    method: str


def dudley_integral(cloud: FunctionCloud, sigma_top: float, method: str = "exact",
                    per_decade: int = PER_DECADE) -> DudleyResult:
    """``4 sqrt(2) int_0^{sigma_top/2} sqrt(ln N(delta)) d delta`` with greedy ``N``.

    ``delta_min`` is the smallest positive greedy cover radius, the
    resolution of the cloud: below it every member is its own ball and
    ``N`` equals the cloud size, so that piece is integrated exactly.
    ``method="exact"`` integrates the step function ``N`` exactly above it;
    ``method="grid"`` uses a midpoint rule on a log-spaced grid.
    """
    if sigma_top <= 0:
        raise DomainError("sigma_top must be positive")
    radii = greedy_cover_radii(cloud)
    pos = radii[radii > 0]
    if pos.size == 0:
        return DudleyResult(0.0, 0.0, sigma_top, method)
    dmin = float(pos.min())
    top = sigma_top / 2
    n_sat = int(np.argmax(radii <= 0)) + 1 if np.any(radii <= 0) else len(radii)
    total = math.sqrt(math.log(n_sat)) * min(dmin, top)
    if top > dmin:
        if method == "exact":
            upper = math.inf
            for k, rk in enumerate(radii, start=1):
                lo, hi = max(rk, dmin), min(upper, top)
                if hi > lo and k > 1:
                    total += math.sqrt(math.log(k)) * (hi - lo)
                upper = rk
                if rk <= dmin:
                    break
        elif method == "grid":
            edges = np.unique(np.concatenate([[dmin], log_delta_grid(top, dmin, per_decade), [top]]))
            mids = np.sqrt(edges[:-1] * edges[1:])
            counts = np.array([int(np.argmax(radii <= g)) + 1 for g in mids])
            total += float(np.sum(np.sqrt(np.log(counts)) * np.diff(edges)))
        else:
            raise DomainError(f"unknown method {method!r}")
    return DudleyResult(4 * math.sqrt(2) * total, dmin, sigma_top, method)


# ---------------------------------------------------------------------- SS norm
def ss_norm(values: np.ndarray, lo: float, hi: float, gamma: float, m: float) -> float:
    """Discrete Sobolev-Slobodetskii norm of a function tabulated at the cell
    centres of a uniform grid on ``[lo, hi]`` (one dimension).

    Off-diagonal cell pairs use the midpoint rule; each diagonal cell is
    replaced by the exact integral of the local linear model,
    ``2 h^{beta+2} / ((beta+1)(beta+2)) |F'|^m`` with ``beta = m - 1 - m alpha``.
    Derivatives of order ``floor(gamma)`` are taken by finite differences.
    """
    if gamma <= 0 or float(gamma).is_integer():
        raise DomainError("gamma must be positive and not an integer")
    F = np.asarray(values, dtype=float)
    n = F.shape[-1]
    h = (hi - lo) / n
    lp = (h * np.sum(np.abs(F) ** m, axis=-1)) ** (1 / m)
    order = int(math.floor(gamma))
    alpha = gamma - order
    G = F
    for _ in range(order):
        G = np.gradient(G, h, axis=-1)
    x = lo + (np.arange(n) + 0.5) * h
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, 1.0)
    kern = dist ** (-(1 + m * alpha))
    np.fill_diagonal(kern, 0.0)
    diff = np.abs(G[..., :, None] - G[..., None, :]) ** m
    off = h * h * np.sum(diff * kern, axis=(-1, -2))
    beta = m - 1 - m * alpha
    slope = np.abs(np.gradient(G, h, axis=-1))
    diag = 2 * h ** (beta + 2) / ((beta + 1) * (beta + 2)) * np.sum(slope ** m, axis=-1)
    semi = (off + diag) ** (1 / m)
    return lp + semi


def ss_norm_converged(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, gamma: float,
                      m: float, n0: int = 64, n_max: int = 4096, rtol: float = 0.02):
    """Refine the grid until two consecutive ``ss_norm`` values agree within ``rtol``."""
    n = n0
    prev = None
    while n <= n_max:
        x = lo + (np.arange(n) + 0.5) * (hi - lo) / n
        cur = float(ss_norm(f(x), lo, hi, gamma, m))
        if prev is not None and abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur, n
        prev = cur
        n *= 2
    raise DomainError("ss_norm did not converge under grid refinement")


# ---------------------------------------------------------------------- samplers
def _bump(u: np.ndarray) -> np.ndarray:
    """Smooth bump ``sin(pi u)^2`` on [0, 1], zero outside."""
    out = np.sin(np.pi * u) ** 2
    return np.where((u >= 0) & (u <= 1), out, 0.0)


def sample_ss_ball(gamma: float, m: float, domain: Tuple[float, float], budget: int,
                   seed: int = 0, n_grid: int = 256, levels: Optional[int] = None,
                   R: float = 1.0) -> FunctionCloud:
    """Random multiscale bump expansions rescaled onto the sphere of radius
    ``R`` of the Sobolev-Slobodetskii space on ``domain`` (one dimension).

    Function ``i`` is ``sum_j 2^{-j gamma} sum_k g_{ijk} phi(2^j u - k)`` with
    i.i.d. standard normal ``g``, ``u`` the position in the domain rescaled
    to [0, 1], and ``phi`` a smooth bump; it is then divided by its
    ``ss_norm``.  The first ``n`` functions do not depend on ``budget``.
    """
    lo, hi = domain
    if levels is None:
        levels = max(1, int(math.log2(n_grid)) - 2)
    rng = np.random.Generator(np.random.Philox(key=[seed, 0xE17]))
    x = lo + (np.arange(n_grid) + 0.5) * (hi - lo) / n_grid
    u = (x - lo) / (hi - lo)
    blocks = []
    for j in range(levels):
        nb = 2 ** j
        blocks.append(2.0 ** (-j * gamma) * _bump(nb * u[None, :] - np.arange(nb)[:, None]))
    basis = np.concatenate(blocks, axis=0)           # (n_basis, n_grid)
    coef = rng.standard_normal((budget, basis.shape[0]))
    F = coef @ basis
    norms = np.array([ss_norm(row, lo, hi, gamma, m) for row in F])
    F = R * F / norms[:, None]
    w = np.full(n_grid, (hi - lo) / n_grid)
    return FunctionCloud(F, w, {"class": "ss_ball", "gamma": gamma, "m": m, "domain": domain,
                                "R": R, "levels": levels, "seed": seed})


def sample_q_class(K: Kernel, hs: float, r: int, budget: int, b: float = 0.5, seed: int = 0,
                   n_grid: int = 256, pieces: int = 64) -> FunctionCloud:
    """Functions ``Q(t) = int h^{-1/2} K((t - x)/h) l(x) dx`` on (-b - a h, b + a h)
    with ``l`` random step functions on (-b, b) normalised in ``L_q``, ``1/q = 1 - 1/r``."""
    if not K.is_product:
        raise DomainError("the convolution class needs a product kernel")
    q = r / (r - 1)
    rng = np.random.Generator(np.random.Philox(key=[seed, 0xC1A]))
    lo, hi = -b - K.a * hs, b + K.a * hs
    t = lo + (np.arange(n_grid) + 0.5) * (hi - lo) / n_grid
    dx = 2 * b / pieces
    # exact cell integrals would need K's antiderivative; use a fine midpoint rule
    sub = 16
    fine = -b + (np.arange(pieces * sub) + 0.5) * (dx / sub)
    kern = K.univariate((t[:, None] - fine[None, :]) / hs) * hs ** -0.5 * (dx / sub)
    kern = kern.reshape(n_grid, pieces, sub).sum(axis=2)          # (n_grid, pieces)
    levels = rng.standard_normal((budget, pieces))
    levels /= (dx * np.sum(np.abs(levels) ** q, axis=1, keepdims=True)) ** (1 / q)
    F = levels @ kern.T
    w = np.full(n_grid, (hi - lo) / n_grid)
    return FunctionCloud(F, w, {"class": "q_class", "h": hs, "r": r, "q": q, "seed": seed})


# ---------------------------------------------------------------------- estimators
@dataclass
class LambdaEstimate:
    value: float
    deltas: np.ndarray
    counts: np.ndarray
    budget: int
    flag: str = HEURISTIC
    argmax_delta: float = float("nan")


def entropy_profile(cloud: FunctionCloud, top: Optional[float] = None,
                    per_decade: int = PER_DECADE, decades: float = 4.0):
    """Leader-clustering counts on a log grid of ``decades`` decades below ``top``
    (default: the cloud diameter).  Returns ``(deltas, counts)``."""
    if top is None:
        top = float(cloud.distances().max()) or 1.0
    deltas = log_delta_grid(top, top * 10.0 ** (-decades), per_decade)
    counts = leader_counts(cloud.distances(), deltas)
    return deltas, counts


def estimate_lambda_star(gamma: float, m: float, domain: Tuple[float, float], budget: int,
                         k: int = 1, R: float = 1.0, seed: int = 0, n_grid: int = 256,
                         cloud: Optional[FunctionCloud] = None,
                         per_decade: int = PER_DECADE) -> LambdaEstimate:
    """``sup_{delta in (0, R]} delta^{k/gamma} ln N(delta)`` over a sampled
    cloud in the radius-``R`` Sobolev-Slobodetskii ball; a calibration value,
    labeled as a heuristic lower bound."""
    if gamma <= k / m - k / 2:
        raise DomainError("need gamma > k/m - k/2")
    if k != 1:
        raise DomainError("the sampler covers one-dimensional domains")
    if cloud is None:
        cloud = sample_ss_ball(gamma, m, domain, budget, seed=seed, n_grid=n_grid, R=R)
    if len(cloud) == 1:
        return LambdaEstimate(0.0, np.asarray([R]), np.asarray([1]), 1)
    deltas, counts = entropy_profile(cloud, R, per_decade)
    vals = deltas ** (k / gamma) * np.log(counts)
    i = int(np.argmax(vals))
    return LambdaEstimate(float(vals[i]), deltas, counts, len(cloud), HEURISTIC, float(deltas[i]))


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    n_points: int
    target: Optional[float] = None
    passed: Optional[bool] = None


def fit_entropy_slope(deltas: np.ndarray, counts: np.ndarray, budget: int,
                      saturation: float = 0.25, min_count: int = 3) -> SlopeFit:
    """Least-squares slope of ``ln ln N(delta)`` against ``ln(1/delta)``.

    Scales where ``N`` is below ``min_count`` (no entropy yet) or above
    ``saturation * budget`` (the finite sample is exhausted) are dropped.
    """
    deltas = np.asarray(deltas, dtype=float)
    counts = np.asarray(counts)
    use = (counts >= min_count) & (counts <= saturation * budget)
    if use.sum() < 4:
        raise InsufficientResolutionError(f"only {int(use.sum())} usable scales")
    x = np.log(1 / deltas[use])
    y = np.log(np.log(counts[use]))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return SlopeFit(float(coef[0]), float(coef[1]), resid, int(use.sum()))


def check_entropy_scaling(kind: str, params: Dict) -> SlopeFit:
    """Fit the entropy exponent of a sampled class and compare with the target.

    ``kind="ss"``: params ``gamma, m, domain, budget`` (target ``1/gamma``,
    pass iff within ``tolerance``, default 25%, on either side).
    ``kind="q"``: params ``K, h, r, omega, budget`` (target ``1/omega``, one
    sided: pass iff slope <= 1.25 / omega).
    ``kind="singleton"``: slope 0, passes.
    """
    if kind == "singleton":
        return SlopeFit(0.0, 0.0, 0.0, 0, 0.0, True)
    seed = params.get("seed", 0)
    budget = params["budget"]
    if kind == "ss":
        gamma = params["gamma"]
        cloud = sample_ss_ball(gamma, params["m"], params.get("domain", (0.0, 1.0)), budget,
                               seed=seed, n_grid=params.get("n_grid", 256),
                               levels=params.get("levels"))
        target = 1 / gamma
        tol = params.get("tolerance", 0.25)
    elif kind == "q":
        cloud = sample_q_class(params["K"], params["h"], params["r"], budget, seed=seed,
                               b=params.get("b", 0.5), n_grid=params.get("n_grid", 256))
        target = 1 / params["omega"]
        tol = None
    else:
        raise DomainError(f"unknown class {kind!r}")
    D = cloud.distances()
    top = float(D.max())
    deltas, counts = entropy_profile(cloud, top, params.get("per_decade", PER_DECADE),
                                      params.get("decades", 4.0))
    fit = fit_entropy_slope(deltas, counts, budget, params.get("saturation", 0.25))
    fit.target = target
    if tol is None:
        fit.passed = fit.slope <= 1.25 * target
    else:
        fit.passed = abs(fit.slope - target) <= tol * target
    return fit


# ---------------------------------------------------------------------- calibration
# grids of the packaged tables; omega is refined just below 1/2 so that the
# interval (1/mu - 1/2, 1/2) stays covered for mu down to 1.01
DEFAULT_OMEGAS = tuple([0.2, 0.25, 0.3, 0.35] + [round(0.4 + 0.01 * k, 2) for k in range(10)]
                       + [0.495] + [round(0.5 + 0.05 * k, 2) for k in range(10)] + [0.98])
DEFAULT_MUS = (1.0, 1.01, 1.02, 1.03, 1.05, 1.07, 1.09, 1.1, 1.125, 1.15, 1.2, 1.25, 4 / 3,
               1.5, 1.75, 2.0, 2.5, 3.0, 4.0)
DEFAULT_GAMMAS = tuple([round(0.52 + 0.04 * k, 2) for k in range(12)] + [0.98])
DEFAULT_DOMAIN_LENGTH = 3.0


def calibrate_lambda_star_table(domain_length: float = DEFAULT_DOMAIN_LENGTH,
                                omegas: Sequence[float] = DEFAULT_OMEGAS,
                                mus: Sequence[float] = DEFAULT_MUS, budget: int = 512,
                                seed: int = 0, n_grid: int = 128):
    """``lambda*(omega, mu)`` on a grid; entries violating ``omega > 1/mu - 1/2`` are NaN."""
    from .upper_functions import LambdaTable

    keys, vals = [], []
    dom = (-domain_length / 2, domain_length / 2)
    for om in omegas:
        for mu in mus:
            keys.append((float(om), float(mu)))
            if om <= 1 / mu - 0.5:
                vals.append(float("nan"))
                continue
            est = estimate_lambda_star(om, mu, dom, budget, seed=seed, n_grid=n_grid)
            vals.append(est.value)
    return LambdaTable("omega_mu", tuple(keys), tuple(vals), f"calibrated, not proved ({HEURISTIC})",
                       domain_length)


def calibrate_lambda_d_star_table(domain_length: float = DEFAULT_DOMAIN_LENGTH,
                                  gammas: Sequence[float] = DEFAULT_GAMMAS, budget: int = 512, seed: int = 0, n_grid: int = 128):
    """``lambda_1*`` as a function of ``gamma`` (``m = 1``, ``d = 1``)."""
    from .upper_functions import LambdaTable

    keys, vals = [], []
    dom = (-domain_length / 2, domain_length / 2)
    for g in gammas:
        keys.append((1.0, float(g)))
        vals.append(estimate_lambda_star(g, 1.0, dom, budget, seed=seed, n_grid=n_grid).value)
    return LambdaTable("gamma", tuple(keys), tuple(vals), f"calibrated, not proved ({HEURISTIC})",
                       domain_length)
