"""Compactly supported kernels, their norms and numerical assumption checks.

A kernel is stored as a vectorised evaluator ``K(t)`` taking points of shape
``(..., d)``.  Product kernels additionally carry the univariate factor, and
smooth kernels carry partial-derivative evaluators keyed by multi-index.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from .errors import DomainError, InvalidKernelError, StructureMismatchError

Univariate = Callable[[np.ndarray], np.ndarray]
MultiIndex = Tuple[int, ...]

NORM_REL_TOL = 1e-6
LIPSCHITZ_TOL = 1e-3
PROBE_DENSITY = 1024
_MAX_CELLS_PER_AXIS = {1: 1 << 22, 2: 8192, 3: 256}


def _midpoint_nodes(a: float, n: int) -> np.ndarray:
    return -a + (np.arange(n) + 0.5) * (2.0 * a / n)


class Kernel:
    """Kernel ``K: R^d -> R`` supported in ``[-a, a]^d`` with Lipschitz constant ``L``.

    Parameters
    ----------
    evaluator : callable
        Maps an array of shape ``(..., d)`` to shape ``(...)``.
    support_radius : float
        The ``a`` of ``supp K`` contained in ``[-a, a]^d``.
    lipschitz : float
        Declared Lipschitz constant (for every derivative required by the
        assumption being used).
    dim : int
    univariate : callable, optional
        If given, ``K(t) = prod_j univariate(t_j)`` (product structure).
    univariate_derivs : sequence of callables, optional
        Derivatives of the univariate factor, ``univariate_derivs[k-1]`` being
        the k-th derivative.  Partial derivatives of a product kernel are
        assembled from them.
    derivatives : dict, optional
        Partial-derivative evaluators ``{multi_index: callable}`` for
        non-product smooth kernels.
    quadrature_step : float, optional
        Starting midpoint step per axis, default ``a / 512``.
    """

    def __init__(
        self,
        evaluator: Callable[[np.ndarray], np.ndarray],
        support_radius: float,
        lipschitz: float,
        dim: int = 1,
        *,
        univariate: Optional[Univariate] = None,
        univariate_derivs: Optional[Sequence[Univariate]] = None,
        derivatives: Optional[Dict[MultiIndex, Callable]] = None,
        name: str = "custom",
        quadrature_step: Optional[float] = None,
    ):
        if support_radius <= 0 or lipschitz <= 0:
            raise DomainError("support radius and Lipschitz constant must be positive")
        if dim < 1:
            raise DomainError("dimension must be a positive integer")
        self.evaluator = evaluator
        self.a = float(support_radius)
        self.L = float(lipschitz)
        self.d = int(dim)
        self.univariate = univariate
        self.univariate_derivs = tuple(univariate_derivs or ())
        self._derivatives = dict(derivatives or {})
        self.name = name
        self.quadrature_step = float(quadrature_step) if quadrature_step else self.a / 512
        self._norm_cache: Dict[Tuple[str, float], float] = {}
        self._step_used: Dict[Tuple[str, float], float] = {}
        # eager cache of the norms every constant needs
        for m in (1.0, 2.0, math.inf):
            self.norm(m)
        if self.is_product:
            for m in (1.0, 2.0, math.inf):
                self.univariate_norm(m)

    # ------------------------------------------------------------------ structure
    @classmethod
    def product(cls, univariate: Univariate, support_radius: float, lipschitz: float,
                dim: int = 1, *, univariate_derivs=None, name="custom", quadrature_step=None):
        """Product kernel ``K(t) = prod_j univariate(t_j)``."""

        def evaluator(t):
            t = np.asarray(t, dtype=float)
            out = univariate(t[..., 0])
            for j in range(1, t.shape[-1]):
                out = out * univariate(t[..., j])
            return out

        return cls(evaluator, support_radius, lipschitz, dim, univariate=univariate,
                   univariate_derivs=univariate_derivs, name=name,
                   quadrature_step=quadrature_step)

    @property
    def is_product(self) -> bool:
        return self.univariate is not None

    @property
    def structure(self) -> str:
        if self.is_product:
            return "product"
        if self._derivatives:
            return "smooth"
        return "generic"

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.d == 1 and (t.ndim == 0 or t.shape[-1] != 1):
            t = t[..., None]
        return self.evaluator(t)

    def scaled(self, c: float) -> "Kernel":
        """The kernel ``c * K`` (Lipschitz constant scaled by ``|c|``)."""
        uni = None
        derivs = None
        if self.is_product:
            if self.d != 1:
                # c K is not a product of c^(1/d)-scaled factors when c < 0
                return Kernel(lambda t: c * self.evaluator(t), self.a, abs(c) * self.L,
                              self.d, name=f"{c}*{self.name}",
                              quadrature_step=self.quadrature_step)
            f = self.univariate
            uni = lambda y: c * f(y)  # noqa: E731
            derivs = [(lambda y, g=g: c * g(y)) for g in self.univariate_derivs]
            return Kernel.product(uni, self.a, abs(c) * self.L, 1, univariate_derivs=derivs,
                                  name=f"{c}*{self.name}", quadrature_step=self.quadrature_step)
        scaled_derivs = {n: (lambda t, g=g: c * g(t)) for n, g in self._derivatives.items()}
        return Kernel(lambda t: c * self.evaluator(t), self.a, abs(c) * self.L, self.d,
                      derivatives=scaled_derivs, name=f"{c}*{self.name}",
                      quadrature_step=self.quadrature_step)

    def as_generic(self) -> "Kernel":
        """Same evaluator with the product structure forgotten."""
        return Kernel(self.evaluator, self.a, self.L, self.d, name=f"generic({self.name})",
                      quadrature_step=self.quadrature_step)

    # ------------------------------------------------------------------ derivatives
    def derivative(self, n: MultiIndex, *, numeric: bool = False) -> Tuple[Callable, bool]:
        """Evaluator of ``D^n K`` and whether it is a finite-difference approximation."""
        n = tuple(int(v) for v in n)
        if len(n) != self.d or min(n) < 0:
            raise DomainError(f"multi-index {n} does not match dimension {self.d}")
        if sum(n) == 0:
            return self.evaluator, False
        if n in self._derivatives:
            return self._derivatives[n], False
        if self.is_product and max(n) <= len(self.univariate_derivs):
            factors = [self.univariate if k == 0 else self.univariate_derivs[k - 1] for k in n]

            def deriv(t, factors=factors):
                t = np.asarray(t, dtype=float)
                out = factors[0](t[..., 0])
                for j in range(1, len(factors)):
                    out = out * factors[j](t[..., j])
                return out

            return deriv, False
        if not numeric:
            raise StructureMismatchError(
                f"no derivative evaluator for multi-index {n}; pass numeric=True to use "
                "central finite differences")
        return self._finite_difference(n), True

    def _finite_difference(self, n: MultiIndex) -> Callable:
        step = 1e-5 * self.a
        axis = int(np.argmax(np.asarray(n) > 0))
        lower = list(n)
        lower[axis] -= 1
        inner, _ = self.derivative(tuple(lower), numeric=True)

        def deriv(t):
            t = np.asarray(t, dtype=float)
            e = np.zeros(t.shape[-1])
            e[axis] = step
            return (inner(t + e) - inner(t - e)) / (2.0 * step)

        return deriv

    # ------------------------------------------------------------------ norms
    def norm(self, m: float) -> float:
        """``||K||_m`` (cached).  ``m = inf`` gives the sup over a probe grid."""
        m = _check_exponent(m)
        key = ("K", m)
        if key not in self._norm_cache:
            if self.is_product:
                value = self.univariate_norm(m) ** self.d
                self._step_used[key] = self._step_used[("U", m)]
            else:
                value, step = _gated_norm(self.evaluator, self.a, self.d, m,
                                          self.quadrature_step)
                self._step_used[key] = step
            self._norm_cache[key] = value
        return self._norm_cache[key]

    def univariate_norm(self, m: float) -> float:
        """``||K_1||_m`` of the univariate factor of a product kernel."""
        if not self.is_product:
            raise StructureMismatchError("univariate norm requires a product kernel")
        m = _check_exponent(m)
        key = ("U", m)
        if key not in self._norm_cache:
            f = self.univariate
            value, step = _gated_norm(lambda t: f(t[..., 0]), self.a, 1, m, self.quadrature_step)
            self._norm_cache[key] = value
            self._step_used[key] = step
        return self._norm_cache[key]

    def deriv_norm_sup(self, *, numeric: bool = False) -> float:
        """``C(K) = sup over |n| = floor(d/2) of ||D^n K||_1``."""
        order = self.d // 2
        if order == 0:
            return self.norm(1.0)
        best = 0.0
        for n in _multi_indices(self.d, order):
            g, _ = self.derivative(n, numeric=numeric)
            value, _ = _gated_norm(g, self.a, self.d, 1.0, self.quadrature_step)
            best = max(best, value)
        return best

    def norms_table(self) -> Dict[str, float]:
        return {("inf" if math.isinf(m) else repr(m)): v
                for (kind, m), v in sorted(self._norm_cache.items(), key=lambda kv: str(kv[0]))
                if kind == "K"}

    def integral(self) -> float:
        """``int K`` by midpoint quadrature at the kernel's step."""
        if self.is_product:
            n = int(round(2 * self.a / self.quadrature_step))
            y = _midpoint_nodes(self.a, n)
            return float(np.sum(self.univariate(y)) * (2 * self.a / n)) ** self.d
        n = int(round(2 * self.a / self.quadrature_step))
        return _midpoint_sum(self.evaluator, self.a, self.d, n, lambda v: v)


def _check_exponent(m: float) -> float:
    m = float(m)
    if not (m >= 1.0):
        raise DomainError(f"norm exponent must be >= 1 or inf, got {m}")
    return m


def _multi_indices(d: int, order: int):
    for n in itertools.product(range(order + 1), repeat=d):
        if sum(n) == order:
            yield n


def _midpoint_sum(f: Callable, a: float, d: int, n: int, transform: Callable) -> float:
    x = _midpoint_nodes(a, n)
    h = 2.0 * a / n
    if d == 1:
        return float(np.sum(transform(f(x[:, None])))) * h
    total = 0.0
    rest = np.stack(np.meshgrid(*([x] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    for x0 in x:
        pts = np.concatenate([np.full((rest.shape[0], 1), x0), rest], axis=1)
        total += float(np.sum(transform(f(pts))))
    return total * h ** d


def _sup_abs(f: Callable, a: float, d: int, n: int) -> float:
    x = np.linspace(-a, a, 2 * n + 1)
    if d == 1:
        v = f(x[:, None])
        if not np.all(np.isfinite(v)):
            raise InvalidKernelError("kernel evaluator returned non-finite values")
        return float(np.max(np.abs(v)))
    best = 0.0
    rest = np.stack(np.meshgrid(*([x] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    for x0 in x:
        pts = np.concatenate([np.full((rest.shape[0], 1), x0), rest], axis=1)
        v = f(pts)
        if not np.all(np.isfinite(v)):
            raise InvalidKernelError("kernel evaluator returned non-finite values")
        best = max(best, float(np.max(np.abs(v))))
    return best


def _gated_norm(f: Callable, a: float, d: int, m: float, step: float) -> Tuple[float, float]:
    """Midpoint-rule ``L_m`` norm refined until halving the step moves it by < 1e-6 rel."""
    n = max(2, 2 * int(round(a / step)))
    cap = _MAX_CELLS_PER_AXIS.get(d, 128)
    if math.isinf(m):
        n = min(n, cap // 2) if d > 1 else n
        return _sup_abs(f, a, d, n), 2 * a / n
    transform = lambda v: np.abs(_finite(v)) ** m  # noqa: E731
    prev = _midpoint_sum(f, a, d, n, transform) ** (1.0 / m)
    while True:
        n2 = 2 * n
        cur = _midpoint_sum(f, a, d, n2, transform) ** (1.0 / m)
        if abs(cur - prev) <= NORM_REL_TOL * max(abs(cur), 1e-300) or cur == 0.0:
            return cur, 2 * a / n2
        if n2 >= cap:
            raise InvalidKernelError(
                f"L_{m} norm did not converge under step halving (last change "
                f"{abs(cur - prev) / cur:.2e})")
        n, prev = n2, cur


def _finite(v):
    if not np.all(np.isfinite(v)):
        raise InvalidKernelError("kernel evaluator returned non-finite values")
    return v


def kernel_norm(K: Kernel, m: float) -> float:
    """``(int |K|^m)^(1/m)`` over ``[-a, a]^d`` (sup over a probe grid for ``m = inf``)."""
    return K.norm(m)


# ---------------------------------------------------------------------- assumptions
@dataclass
class AssumptionReport:
    level: str
    passed: bool
    lipschitz_estimate: float
    declared: float
    worst_pair: Tuple[Tuple[float, ...], Tuple[float, ...]]
    support_ok: bool
    approximate: bool = False
    notes: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def _probe_axis(a: float, density: int) -> np.ndarray:
    return np.linspace(-1.25 * a, 1.25 * a, density)


def _grid_lipschitz(g: Callable, a: float, d: int, density: int):
    """Max slope over adjacent probe pairs along every axis, with the worst pair."""
    x = _probe_axis(a, density)
    mesh = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1)
    vals = _finite(np.asarray(g(mesh.reshape(-1, d)), dtype=float)).reshape((density,) * d)
    dx = x[1] - x[0]
    best, pair = 0.0, ((0.0,) * d, (0.0,) * d)
    for axis in range(d):
        slopes = np.abs(np.diff(vals, axis=axis)) / dx
        idx = np.unravel_index(int(np.argmax(slopes)), slopes.shape)
        if slopes[idx] > best:
            best = float(slopes[idx])
            hi = list(idx)
            hi[axis] += 1
            pair = (tuple(float(mesh[idx][k]) for k in range(d)),
                    tuple(float(mesh[tuple(hi)][k]) for k in range(d)))
    outside = np.max(np.abs(mesh), axis=-1) > a * (1 + 1e-12)
    support_ok = bool(np.all(vals[outside] == 0.0))
    return best, pair, support_ok


def check_assumptions(K: Kernel, level: str, *, density: int = PROBE_DENSITY,
                      tol: float = LIPSCHITZ_TOL, numeric: bool = False) -> AssumptionReport:
    """Numerically check kernel Assumption ``A1``, ``A2`` or ``A3``.

    The Lipschitz constant is estimated as the largest finite-difference
    slope between adjacent probe points; the check passes iff the estimate
    is at most ``L * (1 + tol)`` and the kernel vanishes outside
    ``[-a, a]^d`` on the probe grid.
    """
    level = level.upper()
    if K.d > 1:
        density = min(density, 256 if K.d == 2 else 48)
    if level == "A1":
        est, pair, support_ok = _grid_lipschitz(K.evaluator, K.a, K.d, density)
        passed = est <= K.L * (1 + tol) and support_ok
        return AssumptionReport("A1", passed, est, K.L, pair, support_ok)
    if level == "A2":
        order_max = K.d // 2 + 1
        est, pair, support_ok, approx = 0.0, None, True, False
        if not numeric and not K.is_product and not K._derivatives:
            raise StructureMismatchError("assumption A2 needs derivative evaluators")
        for order in range(order_max + 1):
            for n in _multi_indices(K.d, order):
                g, is_fd = K.derivative(n, numeric=numeric)
                approx = approx or is_fd
                e, p, ok = _grid_lipschitz(g, K.a, K.d, density)
                support_ok = support_ok and ok
                if e >= est:
                    est, pair = e, p
        passed = est <= K.L * (1 + tol) and support_ok
        notes = ["finite-difference derivatives"] if approx else []
        return AssumptionReport("A2", passed, est, K.L, pair, support_ok, approx, notes)
    if level == "A3":
        if not K.is_product:
            raise StructureMismatchError("assumption A3 needs a product kernel")
        uni = K.univariate
        est, pair, support_ok = _grid_lipschitz(lambda t: uni(t[..., 0]), K.a, 1, density)
        rng = np.random.default_rng(0)
        probes = rng.uniform(-1.25 * K.a, 1.25 * K.a, size=(512, K.d))
        prod = np.prod(uni(probes), axis=-1)
        factor_ok = bool(np.allclose(K.evaluator(probes), prod, rtol=1e-12, atol=1e-14))
        notes = [] if factor_ok else ["evaluator does not factorise"]
        passed = est <= K.L * (1 + tol) and support_ok and factor_ok
        return AssumptionReport("A3", passed, est, K.L, pair, support_ok, False, notes)
    raise DomainError(f"unknown assumption level {level!r}")


# ---------------------------------------------------------------------- catalog
def triangle(y):
    y = np.asarray(y, dtype=float)
    return np.clip(1.0 - np.abs(y), 0.0, None)


def epanechnikov(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1.0, 0.75 * (1.0 - y * y), 0.0)


def quartic(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1.0, 0.9375 * (1.0 - y * y) ** 2, 0.0)


def _quartic_d1(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1.0, -3.75 * y * (1.0 - y * y), 0.0)


def _quartic_d2(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1.0, -3.75 * (1.0 - 3.0 * y * y), 0.0)


def _epanechnikov_d1(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1.0, -1.5 * y, 0.0)


# (function, support, Lipschitz of every derivative it carries, derivatives)
_BASE = {
    "triangle": (triangle, 1.0, 1.0, ()),
    "epanechnikov": (epanechnikov, 1.0, 1.5, (_epanechnikov_d1,)),
    # sup |K''| = 15/2 (at |y| = 1) bounds the slope of the quartic and of K'
    "quartic": (quartic, 1.0, 7.5, (_quartic_d1, _quartic_d2)),
}


def w_ell(w: Univariate, ell: int) -> Univariate:
    """``w_ell(y) = sum_i binom(ell, i) (-1)^(i+1) w(y / i) / i``."""
    if ell < 1:
        raise DomainError("ell must be a positive integer")
    coef = [(i, comb(ell, i, exact=True) * (-1) ** (i + 1) / i) for i in range(1, ell + 1)]

    def f(y):
        y = np.asarray(y, dtype=float)
        return sum(c * w(y / i) for i, c in coef)

    return f


def _w_ell_derivative(w_deriv: Univariate, ell: int, k: int) -> Univariate:
    # d^k/dy^k of w(y/i)/i is w^(k)(y/i) / i^(k+1)
    coef = [(i, comb(ell, i, exact=True) * (-1) ** (i + 1) / i ** (k + 1))
            for i in range(1, ell + 1)]

    def f(y):
        y = np.asarray(y, dtype=float)
        return sum(c * w_deriv(y / i) for i, c in coef)

    return f


def _scan_lipschitz(g: Univariate, a: float, points: int = 1 << 16) -> float:
    y = np.linspace(-1.05 * a, 1.05 * a, points)
    return float(np.max(np.abs(np.diff(g(y)))) / (y[1] - y[0]))


def build_w_kernel(w: Univariate, ell: int, d: int = 1, *, w_support: float = 1.0,
                   w_derivs: Sequence[Univariate] = (), name: Optional[str] = None,
                   lipschitz: Optional[float] = None, smooth_order: int = 0) -> Kernel:
    """Product kernel with univariate factor ``w_ell`` built from a ``C^1`` bump ``w``.

    The support radius is ``ell * w_support``.  When ``lipschitz`` is not
    given it is taken from a dense slope scan of ``w_ell`` and of its first
    ``smooth_order`` derivatives, inflated by 1e-4 relative.
    """
    if ell < 1:
        raise DomainError("ell must be a positive integer")
    f = w_ell(w, ell)
    derivs = [_w_ell_derivative(g, ell, k + 1) for k, g in enumerate(w_derivs)]
    a = ell * w_support
    if lipschitz is None:
        fns = [f] + derivs[:smooth_order]
        lipschitz = max(_scan_lipschitz(g, a) for g in fns) * (1 + 1e-4)
    return Kernel.product(f, a, lipschitz, d, univariate_derivs=derivs,
                          name=name or f"w_ell:{ell}")


def load_tabulated(path) -> Tuple[Univariate, float, float]:
    """Read a ``t,value`` CSV; returns (linear interpolant, support radius, Lipschitz)."""
    ts, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                ts.append(float(row[0]))
                vs.append(float(row[1]))
            except ValueError:
                continue  # header
    t = np.asarray(ts)
    v = np.asarray(vs)
    order = np.argsort(t)
    t, v = t[order], v[order]
    if not np.all(np.isfinite(v)):
        raise InvalidKernelError("tabulated kernel has non-finite values")
    nz = np.nonzero(v)[0]
    if nz.size == 0:
        raise InvalidKernelError("tabulated kernel is identically zero")
    # linear interpolation between the last nonzero sample and its zero neighbour
    lo = t[max(nz[0] - 1, 0)]
    hi = t[min(nz[-1] + 1, len(t) - 1)]
    a = float(max(abs(lo), abs(hi)))
    lip = float(np.max(np.abs(np.diff(v) / np.diff(t))))
    if v[0] != 0.0 or v[-1] != 0.0:
        lip = max(lip, abs(v[0]) / 1e-12, abs(v[-1]) / 1e-12)

    def f(y):
        return np.interp(np.asarray(y, dtype=float), t, v, left=0.0, right=0.0)

    return f, a, lip


def get_kernel(name: str, d: int = 1) -> Kernel:
    """Kernel from the catalog: ``triangle``, ``epanechnikov``, ``quartic``,
    ``w_ell:<base>:<ell>`` or ``csv:<path>``."""
    return _get_kernel(name, int(d))


@lru_cache(maxsize=64)
def _get_kernel(name: str, d: int) -> Kernel:
    if name in _BASE:
        f, a, lip, derivs = _BASE[name]
        return Kernel.product(f, a, lip, d, univariate_derivs=derivs, name=name)
    if name.startswith("w_ell:"):
        _, base, ell = name.split(":")
        if base not in _BASE:
            raise DomainError(f"unknown base function {base!r}")
        f, a, _, derivs = _BASE[base]
        return build_w_kernel(f, int(ell), d, w_support=a, w_derivs=derivs, name=name)
    if name.startswith("csv:"):
        f, a, lip = load_tabulated(Path(name[4:]))
        return Kernel.product(f, a, lip, d, name=name)
    raise DomainError(f"unknown kernel {name!r}")
