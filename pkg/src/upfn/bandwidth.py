"""Multi-bandwidths on the geometric net, bandwidth-class functionals and the
Nikolskii-driven bandwidth selector.

A :class:`MultiBandwidth` is piecewise constant on a finite box partition of
``(-b, b)^d``; every functional of the level-set decomposition is then a
finite sum and is computed exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import logsumexp

from .errors import DomainError
from .kernel import Kernel

E_MINUS_2 = math.exp(-2.0)
DEFAULT_S_MAX = 40
DEFAULT_R_CAP = 10_000


@dataclass(frozen=True)
class GeometricNet:
    """Values ``hbar * exp(-s)``, ``s = 0, ..., s_max``."""

    hbar: float
    s_max: int = DEFAULT_S_MAX

    def __post_init__(self):
        if not (0.0 < self.hbar <= E_MINUS_2 * (1 + 1e-12)):
            raise DomainError(f"net base must lie in (0, e^-2], got {self.hbar}")
        if self.s_max < 0:
            raise DomainError("s_max must be nonnegative")

    def value(self, s):
        return self.hbar * np.exp(-np.asarray(s, dtype=float))

    @property
    def log_hbar(self) -> float:
        return math.log(self.hbar)


class MultiBandwidth:
    """Piecewise-constant ``h(x) = (hbar e^{-s_1(x)}, ..., hbar e^{-s_d(x)})``.

    Parameters
    ----------
    lo, hi : arrays of shape (n_boxes, d)
        Box corners; the boxes must tile ``(-b, b)^d``.
    s : integer array of shape (n_boxes, d)
        Net index of each coordinate on each box.
    """

    def __init__(self, lo, hi, s, b: float, net: GeometricNet, *, validate: bool = True,
                 grid_shape: Optional[Tuple[int, ...]] = None, name: str = ""):
        self.lo = np.atleast_2d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_2d(np.asarray(hi, dtype=float))
        s = np.asarray(s)
        if s.ndim == 1:
            s = s[:, None] if self.lo.shape[1] == 1 else s[None, :]
        self.s = s.astype(np.int64)
        self.b = float(b)
        self.net = net
        self.d = self.lo.shape[1]
        self.grid_shape = grid_shape
        self.name = name
        if self.hi.shape != self.lo.shape or self.s.shape != self.lo.shape:
            raise DomainError("lo, hi and s must share the shape (n_boxes, d)")
        if validate:
            self._validate()
        self._levels = None

    # ---------------------------------------------------------------- builders
    @classmethod
    def constant(cls, s, b: float, d: int, net: GeometricNet, name: str = ""):
        s = np.broadcast_to(np.asarray(s, dtype=np.int64), (d,))
        return cls(np.full((1, d), -b), np.full((1, d), b), s[None, :], b, net,
                   grid_shape=(1,) * d, name=name)

    @classmethod
    def from_intervals(cls, breaks: Sequence[float], s: Sequence[int], b: float,
                       net: GeometricNet, name: str = ""):
        """One-dimensional bandwidth; ``breaks`` are the interior cut points."""
        edges = np.concatenate([[-b], np.asarray(breaks, dtype=float), [b]])
        s = np.asarray(s, dtype=np.int64)
        if len(s) != len(edges) - 1:
            raise DomainError("need one index per interval")
        return cls(edges[:-1, None], edges[1:, None], s[:, None], b, net, name=name)

    @classmethod
    def from_grid(cls, s_grid, b: float, net: GeometricNet, name: str = ""):
        """Bandwidth constant on the cells of a uniform grid.

        ``s_grid`` has shape ``(n_1, ..., n_d, d)`` (or ``(n,)`` when d = 1).
        """
        s_grid = np.asarray(s_grid, dtype=np.int64)
        if s_grid.ndim == 1:
            s_grid = s_grid[:, None]
        d = s_grid.shape[-1]
        shape = s_grid.shape[:-1]
        if len(shape) != d:
            raise DomainError("grid rank must equal d")
        axes = [np.linspace(-b, b, n + 1) for n in shape]
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in shape], indexing="ij"),
                       axis=-1).reshape(-1, d)
        lo = np.stack([axes[j][idx[:, j]] for j in range(d)], axis=1)
        hi = np.stack([axes[j][idx[:, j] + 1] for j in range(d)], axis=1)
        return cls(lo, hi, s_grid.reshape(-1, d), b, net, validate=False,
                   grid_shape=tuple(shape), name=name)

    # ---------------------------------------------------------------- checks
    def _validate(self):
        b, d = self.b, self.d
        if np.any(self.hi <= self.lo):
            raise DomainError("every box must have positive side lengths")
        if np.any(self.lo < -b * (1 + 1e-12)) or np.any(self.hi > b * (1 + 1e-12)):
            raise DomainError("boxes must lie inside (-b, b)^d")
        if np.any(self.s < 0) or np.any(self.s > self.net.s_max):
            raise DomainError(f"net indices must lie in [0, {self.net.s_max}]")
        total = float(np.sum(self.volumes))
        if not math.isclose(total, (2 * b) ** d, rel_tol=1e-12):
            raise DomainError(f"box volumes sum to {total}, expected {(2 * b) ** d}")
        n = len(self.lo)
        if 1 < n <= 4096:
            for start in range(0, n, 256):
                lo, hi = self.lo[start:start + 256, None, :], self.hi[start:start + 256, None, :]
                side = np.minimum(hi, self.hi[None]) - np.maximum(lo, self.lo[None])
                inter = np.prod(np.clip(side, 0.0, None), axis=-1)
                rows = np.arange(inter.shape[0])
                inter[rows, start + rows] = 0.0
                if np.any(inter > 1e-12 * (2 * b) ** d):
                    raise DomainError("boxes overlap")

    # ---------------------------------------------------------------- geometry
    @property
    def volumes(self) -> np.ndarray:
        return np.prod(self.hi - self.lo, axis=1)

    @property
    def isotropic(self) -> bool:
        return bool(np.all(self.s == self.s[:, :1]))

    def levels(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct multi-indices ``s`` (sorted) and the measures of their level sets."""
        if self._levels is None:
            uniq, inv = np.unique(self.s, axis=0, return_inverse=True)
            meas = np.bincount(inv.ravel(), weights=self.volumes, minlength=len(uniq))
            self._levels = (uniq, meas)
        return self._levels

    def log_v_levels(self) -> np.ndarray:
        """``ln V_s`` for each level returned by :meth:`levels`."""
        uniq, _ = self.levels()
        return self.d * self.net.log_hbar - uniq.sum(axis=1).astype(float)

    def index_at(self, x) -> np.ndarray:
        """Net multi-index at each point of ``x`` (shape (n, d))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            x = x.reshape(-1, self.d)
        if self.grid_shape is not None:
            idx = []
            for j, n in enumerate(self.grid_shape):
                k = np.floor((x[:, j] + self.b) / (2 * self.b) * n).astype(np.int64)
                idx.append(np.clip(k, 0, n - 1))
            flat = np.ravel_multi_index(tuple(idx), self.grid_shape)
            return self.s[flat]
        out = np.empty((len(x), self.d), dtype=np.int64)
        found = np.zeros(len(x), dtype=bool)
        for start in range(0, len(x), 4096):
            xs = x[start:start + 4096, None, :]
            inside = np.all((xs >= self.lo[None]) & (xs < self.hi[None]), axis=-1)
            # points on the upper face b belong to the last box touching it
            edge = np.all((xs >= self.lo[None]) & (xs <= self.hi[None]), axis=-1)
            inside = np.where(inside.any(axis=1, keepdims=True), inside, edge)
            hit = inside.argmax(axis=1)
            ok = inside.any(axis=1)
            out[start:start + 4096] = self.s[hit]
            found[start:start + 4096] = ok
        if not np.all(found):
            raise DomainError("points outside (-b, b)^d")
        return out

    def values_at(self, x) -> np.ndarray:
        """``h(x)`` of shape (n, d)."""
        return self.net.value(self.index_at(x))

    def min_inv_sqrt_v(self) -> float:
        """``min over the domain of V_h^{-1/2}``."""
        return float(np.exp(-0.5 * np.max(self.log_v_levels())))

    def max_inv_sqrt_v(self) -> float:
        return float(np.exp(-0.5 * np.min(self.log_v_levels())))

    def h_min(self) -> float:
        return float(self.net.value(self.s.max()))

    def h_max(self) -> float:
        return float(self.net.value(self.s.min()))

    # ---------------------------------------------------------------- io
    def to_csv(self, path):
        d = self.d
        header = ([f"box_min_{j + 1}" for j in range(d)] + [f"box_max_{j + 1}" for j in range(d)]
                  + [f"s_{j + 1}" for j in range(d)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for lo, hi, s in zip(self.lo, self.hi, self.s):
                w.writerow([repr(float(v)) for v in lo] + [repr(float(v)) for v in hi]
                           + [int(v) for v in s])

    @classmethod
    def from_csv(cls, path, b: float, net: GeometricNet, name: str = ""):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], [r for r in rows[1:] if r]
        d = sum(1 for c in header if c.startswith("s_"))
        arr = np.asarray(body, dtype=float)
        return cls(arr[:, :d], arr[:, d:2 * d], arr[:, 2 * d:].astype(np.int64), b, net,
                   name=name)

    def __repr__(self):
        return (f"MultiBandwidth(name={self.name!r}, d={self.d}, b={self.b}, "
                f"boxes={len(self.s)}, levels={len(self.levels()[0])})")


# -------------------------------------------------------------------- parameters
@dataclass(frozen=True)
class ClassParams:
    """Parameters of the class ``H_d(tau, L) cap B(A)`` for the moment order ``p``.

    ``log_A`` may replace ``A`` when ``A`` overflows a float.
    """

    tau: float
    L: float
    A: Optional[float]
    p: float
    d: int = 1
    hbar: float = E_MINUS_2
    log_A: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise DomainError("tau must lie in (0, 1)")
        if self.L <= 0:
            raise DomainError("L must be positive")
        if self.p < 1:
            raise DomainError("p must be >= 1")
        if self.log_A is None:
            if self.A is None:
                raise DomainError("need A or log_A")
            object.__setattr__(self, "log_A", math.log(self.A))
        if self.log_A < -self.d / 2 * math.log(self.hbar) - 1e-12:
            raise DomainError(f"A must be >= hbar^(-d/2) = {self.hbar ** (-self.d / 2)}")

    @property
    def r_min(self) -> int:
        return int(math.floor(self.p)) + 1


@dataclass(frozen=True)
class NikolskiiParams:
    """Anisotropic Nikolskii class parameters and the selector's kernel order."""

    beta: Tuple[float, ...]
    r: Tuple[float, ...]
    L: Tuple[float, ...]
    ell: int = 1
    p: float = 1.0
    C_tilde: float = 1.0
    w: str = "quartic"

    def __post_init__(self):
        beta, r, L = (tuple(float(v) for v in x) for x in (self.beta, self.r, self.L))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "L", L)
        if not (len(beta) == len(r) == len(L)):
            raise DomainError("beta, r and L must have the same length")
        if any(bj <= 0 or bj > self.ell for bj in beta):
            raise DomainError("need 0 < beta_j <= ell")
        if any(rj < 1 or rj > self.p for rj in r):
            raise DomainError("need 1 <= r_j <= p")
        if any(Lj <= 0 for Lj in L):
            raise DomainError("need L_j > 0")

    @property
    def d(self) -> int:
        return len(self.beta)

    @property
    def beta_bar(self) -> float:
        """``beta`` with ``1/beta = sum 1/beta_j``."""
        return 1.0 / sum(1.0 / bj for bj in self.beta)

    @property
    def upsilon(self) -> float:
        """``upsilon`` with ``1/upsilon = sum 1/(r_j beta_j)``."""
        return 1.0 / sum(1.0 / (rj * bj) for rj, bj in zip(self.r, self.beta))

    @property
    def dense_zone(self) -> bool:
        return self.upsilon * (2 + 1 / self.beta_bar) > self.p


# -------------------------------------------------------------------- functionals
def level_set_measure(h: MultiBandwidth, s) -> float:
    """Lebesgue measure of the level set where the net index equals ``s``."""
    s = np.broadcast_to(np.asarray(s, dtype=np.int64), (h.d,))
    mask = np.all(h.s == s[None, :], axis=1)
    return float(np.sum(h.volumes[mask]))


def log_v_norm(h: MultiBandwidth, m: float) -> float:
    """``ln ||V_h^{-1/2}||_m``, evaluated with log-sum-exp."""
    if m < 1:
        raise DomainError("m must be >= 1")
    _, meas = h.levels()
    logv = h.log_v_levels()
    if math.isinf(m):
        return float(-0.5 * np.min(logv))
    return float(logsumexp(-0.5 * m * logv + np.log(meas)) / m)


def v_norm(h: MultiBandwidth, m: float) -> float:
    """``||V_h^{-1/2}||_m = (sum_s V_s^{-m/2} nu(Lambda_s))^{1/m}``."""
    return math.exp(log_v_norm(h, m))


def class_h_functional(h: MultiBandwidth, tau: float) -> float:
    """``sum_s nu(Lambda_s)^tau``; ``h`` is in ``H_d(tau, L)`` iff this is <= L."""
    if not (0.0 < tau < 1.0):
        raise DomainError("tau must lie in (0, 1)")
    _, meas = h.levels()
    return float(np.sum(meas[meas > 0] ** tau))


def r_A(h: MultiBandwidth, cp: ClassParams, r_cap: int = DEFAULT_R_CAP) -> Optional[int]:
    """Smallest ``r >= floor(p) + 1`` with ``||V_h^{-1/2}||_{rp/(r-p)} <= A``.

    Returns ``None`` when no ``r <= r_cap`` qualifies (``h`` not in ``B(A)``
    as far as the scan can tell).
    """
    p = cp.p
    rs = np.arange(cp.r_min, r_cap + 1, dtype=float)
    _, meas = h.levels()
    logv = h.log_v_levels()
    log_meas = np.log(meas)
    log_A = cp.log_A
    for start in range(0, len(rs), 2048):
        r = rs[start:start + 2048]
        m = r * p / (r - p)
        vals = logsumexp(-0.5 * m[:, None] * logv[None, :] + log_meas[None, :], axis=1) / m
        ok = np.nonzero(vals <= log_A * (1 + 1e-15) + 1e-15)[0]
        if ok.size:
            return int(r[ok[0]])
    return None


@dataclass(frozen=True)
class RelationCheck:
    """Outcome of ``d ln ln A <= 2 sqrt(2 (1 - tau) |ln hbar|) - d ln 4``."""

    holds: bool
    lhs: float
    rhs: float
    degenerate: bool = False

    def __bool__(self) -> bool:
        return self.holds


def check_param_relation(hbar: Optional[float], A: Optional[float], tau: float, d: int,
                         log_A: Optional[float] = None,
                         log_hbar: Optional[float] = None) -> RelationCheck:
    """Check the relation between ``hbar``, ``A`` and ``tau`` required for ``psi``.

    ``log_A`` and ``log_hbar`` may be passed instead of ``A`` and ``hbar``
    when those overflow or underflow a float.  When ``A <= e`` the left side
    is undefined or nonpositive; the check is then reported as holding with
    ``degenerate=True`` and a warning.
    """
    lnh = math.log(hbar) if log_hbar is None else float(log_hbar)
    if not lnh <= -2.0 * (1 - 1e-12):
        raise DomainError("hbar must lie in (0, e^-2)")
    lnA = math.log(A) if log_A is None else float(log_A)
    rhs = 2.0 * math.sqrt(2.0 * (1.0 - tau) * abs(lnh)) - d * math.log(4.0)
    if lnA <= 1.0:
        warnings.warn("A <= e: ln ln A is not positive, relation treated as satisfied",
                      stacklevel=2)
        lhs = d * math.log(lnA) if lnA > 0 else -math.inf
        return RelationCheck(True, lhs, rhs, degenerate=True)
    lhs = d * math.log(lnA)
    return RelationCheck(lhs <= rhs, lhs, rhs)


def epsilon_driven_params(eps: float) -> Tuple[float, float]:
    """``(hbar_eps, A_eps) = (exp(-sqrt|ln eps|), exp(ln^2 eps))``."""
    if not (0.0 < eps <= E_MINUS_2 * (1 + 1e-12)):
        raise DomainError("eps must lie in (0, e^-2]")
    le = math.log(eps)
    return math.exp(-math.sqrt(abs(le))), math.exp(le * le)


def s_epsilon_grid(np_: NikolskiiParams, eps: float, hbar: float, j: int) -> int:
    """The integer ``S`` with ``e^{-1} t < hbar e^{-S} <= t``,
    ``t = eps^{2 beta / ((2 beta + 1) beta_j)}`` (``j`` is 0-based)."""
    beta = np_.beta_bar
    log_t = 2 * beta / ((2 * beta + 1) * np_.beta[j]) * math.log(eps)
    x = math.log(hbar) - log_t
    # S >= x; snap to an integer when x is one up to rounding
    S = math.ceil(x - 1e-9 * max(1.0, abs(x)))
    if S < 1:
        raise DomainError(f"eps too large: no positive S_eps({j + 1}) exists "
                          f"(need ln hbar - ln t > 0, got {x:.4g})")
    return int(S)


def nikolskii_class_bound(np_: NikolskiiParams, tau: float, b: float, d: Optional[int] = None) -> float:
    """``sum_j kappa_j^tau (1 - e^{-tau r_j / 2})^{-d} + (2b)^d`` with
    ``kappa_j = (d (e^{beta_j} - e^{beta_j - 1/2}) C_tilde L_j)^{r_j}``."""
    d = np_.d if d is None else d
    total = 0.0
    for bj, rj, Lj in zip(np_.beta, np_.r, np_.L):
        kappa = (d * (math.exp(bj) - math.exp(bj - 0.5)) * np_.C_tilde * Lj) ** rj
        total += kappa ** tau * (1.0 - math.exp(-tau * rj / 2.0)) ** (-d)
    return total + (2.0 * b) ** d


def nikolskii_b_bound(np_: NikolskiiParams, pfrak: Optional[float] = None) -> Tuple[float, float]:
    """Constant ``C`` with ``||V^{-1/2}||_pfrak <= C eps^{-1/(2 beta + 1)}`` for
    selector outputs, and the ``pfrak`` used (default: midpoint of
    ``(p, upsilon (2 + 1/beta))``)."""
    top = np_.upsilon * (2 + 1 / np_.beta_bar)
    if top <= np_.p:
        raise DomainError("outside the dense zone: upsilon (2 + 1/beta) <= p")
    if pfrak is None:
        pfrak = 0.5 * (np_.p + top)
    if not (np_.p < pfrak < top):
        raise DomainError("pfrak must lie in (p, upsilon (2 + 1/beta))")
    d = np_.d
    geom = 1.0 / (1.0 - math.exp(-(top - pfrak)))
    tail = sum((np_.C_tilde * Lj) ** rj for Lj, rj in zip(np_.L, np_.r))
    cp = (2 * math.exp(d / 2)) ** pfrak + (2 * math.exp(d / 2 + 1)) ** pfrak * geom * tail
    return cp ** (1.0 / pfrak), pfrak


# -------------------------------------------------------------------- selector
@dataclass
class GridFunction:
    """Values of ``f`` at the cell centres of an ``n^d`` grid on ``(-b, b)^d``."""

    values: np.ndarray
    b: float

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def spacing(self) -> float:
        return 2 * self.b / self.values.shape[0]

    def axis(self, j: int = 0) -> np.ndarray:
        n = self.values.shape[j]
        return -self.b + (np.arange(n) + 0.5) * (2 * self.b / n)

    def points(self) -> np.ndarray:
        axes = [self.axis(j) for j in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)

    @classmethod
    def sample(cls, f, n: int, b: float, d: int = 1) -> "GridFunction":
        axis = -b + (np.arange(n) + 0.5) * (2 * b / n)
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
        return cls(np.asarray(f(mesh), dtype=float).reshape((n,) * d), b)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.d == 1:
                w.writerow([repr(float(v)) for v in self.axis(0)])
                w.writerow([repr(float(v)) for v in self.values])
            elif self.d == 2:
                w.writerow([""] + [repr(float(v)) for v in self.axis(1)])
                for x0, row in zip(self.axis(0), self.values):
                    w.writerow([repr(float(x0))] + [repr(float(v)) for v in row])
            else:
                raise DomainError("CSV grid dumps support d <= 2")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if rows[0][0] == "":
            x0 = np.asarray([r[0] for r in rows[1:]], dtype=float)
            vals = np.asarray([r[1:] for r in rows[1:]], dtype=float)
            axis = x0
        else:
            axis = np.asarray(rows[0], dtype=float)
            vals = np.asarray(rows[1], dtype=float)
        step = axis[1] - axis[0]
        b = float(axis[-1] + step / 2)
        return cls(vals, b)


@dataclass
class SelectionResult:
    bandwidth: MultiBandwidth
    objective: np.ndarray          # bias + eps V^{-1/2} at the chosen h, per cell
    S: Tuple[int, ...]             # S_eps(j)
    s_max: Tuple[int, ...]         # last candidate index per axis
    halo: np.ndarray               # cells where some candidate's support leaves the domain
    notes: list = field(default_factory=list)


def _kernel_weights(K1, a: float, h: float, dx: float) -> np.ndarray:
    m = int(math.floor(a * h / dx))
    k = np.arange(-m, m + 1)
    return (dx / h) * K1(k * dx / h)


def _bias_table(K: Kernel, f: GridFunction, cand: Sequence[np.ndarray], net: GeometricNet):
    """``|int K_h(t - x) f(t) dt - f(x)|`` for every candidate multi-index (lexicographic)."""
    d, dx = f.d, f.spacing
    grids = np.stack(np.meshgrid(*cand, indexing="ij"), axis=-1).reshape(-1, d)
    out = np.empty((len(grids),) + f.values.shape)
    if K.is_product:
        # separable: smooth along axis 0 for each s_0, then along later axes
        cache = {}

        def smooth(prefix):
            if prefix in cache:
                return cache[prefix]
            if not prefix:
                return f.values
            base = smooth(prefix[:-1])
            j = len(prefix) - 1
            w = _kernel_weights(K.univariate, K.a, float(net.value(prefix[-1])), dx)
            res = correlate1d(base, w, axis=j, mode="constant", cval=0.0)
            cache[prefix] = res
            return res

        for i, s in enumerate(grids):
            out[i] = np.abs(smooth(tuple(int(v) for v in s)) - f.values)
        return grids, out
    from scipy.signal import correlate

    for i, s in enumerate(grids):
        h = net.value(s)
        ms = [int(math.floor(K.a * hj / dx)) for hj in h]
        axes = [np.arange(-mj, mj + 1) * dx / hj for mj, hj in zip(ms, h)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        w = K.evaluator(mesh) * dx ** d / float(np.prod(h))
        conv = correlate(f.values, w, mode="same", method="direct")
        out[i] = np.abs(conv - f.values)
    return grids, out


def nikolskii_select(np_: NikolskiiParams, f: GridFunction, K: Kernel, eps: float,
                     hbar: float, s_max: int = DEFAULT_S_MAX,
                     min_support_cells: float = 4.0) -> SelectionResult:
    """Per-cell ``argmin_h [ |int K_h(t - x) f(t) dt - f(x)| + eps V_h^{-1/2} ]``.

    Candidates are ``s_j = S_eps(j), ..., s_max`` per axis, further cut where
    the kernel support ``a h_j`` spans fewer than ``min_support_cells`` grid
    cells (the discrete convolution no longer resolves the kernel).  The
    bias uses zero extension of ``f`` outside ``(-b, b)^d``.  Ties go to the
    lexicographically smallest ``s``.
    """
    d = f.d
    if d != np_.d or K.d != d:
        raise DomainError("dimensions of f, kernel and Nikolskii parameters differ")
    net = GeometricNet(hbar, s_max)
    dx = f.spacing
    S = tuple(s_epsilon_grid(np_, eps, hbar, j) for j in range(d))
    res_cap = int(math.floor(math.log(hbar * K.a / (min_support_cells * dx)))) if \
        hbar * K.a > min_support_cells * dx else -1
    top = min(s_max, res_cap)
    notes = []
    if res_cap < s_max:
        notes.append(f"candidates truncated at s={top} by grid resolution")
    cand = []
    for j in range(d):
        if top < S[j]:
            raise DomainError(f"empty candidate set on axis {j + 1}: "
                              f"S_eps={S[j]} exceeds last usable index {top}")
        cand.append(np.arange(S[j], top + 1))
    grids, bias = _bias_table(K, f, cand, net)
    pen = eps * np.exp(-0.5 * (d * math.log(hbar) - grids.sum(axis=1)))
    obj = bias + pen.reshape((-1,) + (1,) * d)
    best = np.argmin(obj, axis=0)          # first minimum = lexicographically smallest s
    s_sel = grids[best]                    # shape grid + (d,)
    objective = np.take_along_axis(obj, best[None], axis=0)[0]
    h_big = float(net.value(S).max())
    halo = np.zeros(f.values.shape, dtype=bool)
    for j in range(d):
        x = f.axis(j)
        out = (x - K.a * h_big < -f.b) | (x + K.a * h_big > f.b)
        shape = [1] * d
        shape[j] = -1
        halo |= out.reshape(shape)
    bw = MultiBandwidth.from_grid(s_sel, f.b, net, name="nikolskii")
    return SelectionResult(bw, objective, S, (top,) * d, halo, notes)


def brute_force_select(np_: NikolskiiParams, f: GridFunction, K: Kernel, eps: float,
                       hbar: float, candidates: Sequence[Sequence[int]]) -> np.ndarray:
    """Per-point exhaustive argmin by direct summation (d = 1); test oracle."""
    x = f.axis(0)
    dx = f.spacing
    best = np.empty(len(x), dtype=np.int64)
    for i, xi in enumerate(x):
        vals = []
        for s in candidates:
            h = hbar * math.exp(-s[0])
            conv = sum(dx / h * float(K.univariate((t - xi) / h)) * fv
                       for t, fv in zip(x, f.values) if abs(t - xi) <= K.a * h)
            vals.append(abs(conv - f.values[i]) + eps * h ** -0.5)
        best[i] = candidates[int(np.argmin(vals))][0]
    return best
