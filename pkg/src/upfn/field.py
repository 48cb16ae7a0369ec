"""Kernel-type Gaussian fields driven by discretized white noise.

The white noise on a box is replaced by independent ``N(0, delta^d)``
increments on a cubic lattice of spacing ``delta``; the field is then the
finite sum

    xi_h(x) = sum_c V_h(x)^{-1} K((t_c - x) / h(x)) Z_c

over lattice cell centres ``t_c``.  One lattice realization is shared by
every bandwidth of a collection, so suprema over the collection are taken on
a common probability space.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, sparse
from scipy.special import gamma as gamma_fn

from .bandwidth import MultiBandwidth, v_norm
from .errors import CapacityError, CoverageError, DomainError
from .kernel import Kernel
from .rng import normals

MAX_CELLS = 1 << 24
MAX_NNZ = 1 << 26
DEFAULT_GRID = 256
DEFAULT_DELTA_RATIO = 64


def abs_normal_moment(p: float) -> float:
    """``E|N(0,1)|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)``."""
    return 2.0 ** (p / 2) * gamma_fn((p + 1) / 2) / math.sqrt(math.pi)


@dataclass(frozen=True)
class EvalGrid:
    """Cell-centre grid with ``n`` points per axis on ``(-b, b)^d``."""

    b: float
    n: int = DEFAULT_GRID
    d: int = 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n ** self.d

    @property
    def step(self) -> float:
        return 2 * self.b / self.n

    @property
    def cell_volume(self) -> float:
        return self.step ** self.d

    def axis(self) -> np.ndarray:
        return -self.b + (np.arange(self.n) + 0.5) * self.step

    def points(self) -> np.ndarray:
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)


@dataclass(frozen=True)
class LatticeGeometry:
    """Cubic lattice ``lo + delta * (k + 1/2)``, ``k`` in ``prod range(shape_j)``."""

    lo: Tuple[float, ...]
    delta: float
    shape: Tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def hi(self) -> Tuple[float, ...]:
        return tuple(l + self.delta * n for l, n in zip(self.lo, self.shape))

    def centres(self, j: int) -> np.ndarray:
        return self.lo[j] + (np.arange(self.shape[j]) + 0.5) * self.delta

    @classmethod
    def covering(cls, b: float, reach: float, delta: float, d: int,
                 cap: int = MAX_CELLS) -> "LatticeGeometry":
        """Smallest symmetric lattice whose box contains ``(-b - reach, b + reach)^d``
        with one spare cell on each side."""
        if delta <= 0:
            raise DomainError("lattice spacing must be positive")
        n = int(math.ceil(2 * (b + reach) / delta)) + 2
        total = float(n) ** d
        if total > cap:
            raise CapacityError(f"lattice needs {total:.3g} cells, cap is {cap}")
        half = n * delta / 2
        return cls((-half,) * d, float(delta), (n,) * d)


@dataclass
class NoiseLattice:
    geometry: LatticeGeometry
    increments: np.ndarray           # shape geometry.shape
    seed: int
    replicate: int

    @property
    def delta(self) -> float:
        return self.geometry.delta


def sample_noise(geometry: LatticeGeometry, seed: int, replicate: int,
                 cap: int = MAX_CELLS) -> NoiseLattice:
    """Independent ``N(0, delta^d)`` increments keyed by (seed, replicate, cell)."""
    if geometry.size > cap:
        raise CapacityError(f"lattice has {geometry.size} cells, cap is {cap}")
    z = normals(seed, replicate, 0, geometry.size) * geometry.delta ** (geometry.d / 2)
    return NoiseLattice(geometry, z.reshape(geometry.shape), seed, replicate)


def noise_batch(geometry: LatticeGeometry, seed: int, replicates: Sequence[int]) -> np.ndarray:
    """Increments for several replicates, shape ``(R,) + geometry.shape``."""
    scale = geometry.delta ** (geometry.d / 2)
    out = np.empty((len(replicates), geometry.size))
    for k, rep in enumerate(replicates):
        out[k] = normals(seed, rep, 0, geometry.size)
    out *= scale
    return out.reshape((len(replicates),) + geometry.shape)


# ---------------------------------------------------------------------- operator
def _axis_matrix(kfun, x: np.ndarray, h: np.ndarray, a: float, geom: LatticeGeometry, j: int):
    """Sparse ``(len(x), n_j)`` matrix of ``h^{-1} k((t_c - x) / h)`` on the support."""
    delta, lo, n = geom.delta, geom.lo[j], geom.shape[j]
    rows, cols, vals = [], [], []
    for hv in np.unique(h):
        sel = np.nonzero(h == hv)[0]
        xs = x[sel]
        m = int(math.ceil(a * hv / delta)) + 1
        centre = np.floor((xs - lo) / delta).astype(np.int64)
        off = np.arange(-m, m + 1)
        idx = centre[:, None] + off[None, :]
        t = lo + (idx + 0.5) * delta
        u = (t - xs[:, None]) / hv
        keep = np.abs(u) <= a
        if np.any(keep & ((idx < 0) | (idx >= n))):
            raise CoverageError("a kernel support leaves the noise lattice")
        w = kfun(u[keep]) / hv
        rows.append(np.broadcast_to(sel[:, None], idx.shape)[keep])
        cols.append(idx[keep])
        vals.append(w)
    rows, cols, vals = (np.concatenate(v) for v in (rows, cols, vals))
    nz = vals != 0
    return sparse.csr_matrix((vals[nz], (rows[nz], cols[nz])), shape=(len(x), n))


def _check_coverage(points: np.ndarray, hvals: np.ndarray, a: float, geom: LatticeGeometry):
    lo = np.asarray(geom.lo)
    hi = np.asarray(geom.hi)
    if np.any(points - a * hvals < lo) or np.any(points + a * hvals > hi):
        raise CoverageError("a kernel support leaves the noise lattice")


class FieldOperator:
    """Linear map from lattice increments to ``xi_h`` on an evaluation grid.

    Product kernels are applied axis by axis for each level set of ``h``
    (no ``d``-dimensional stencil is ever formed); other kernels use one
    sparse matrix over the full stencil.
    """

    def __init__(self, K: Kernel, h: MultiBandwidth, geom: LatticeGeometry, grid: EvalGrid,
                 max_nnz: int = MAX_NNZ):
        if not (K.d == h.d == geom.d == grid.d):
            raise DomainError("kernel, bandwidth, lattice and grid dimensions differ")
        self.K, self.h, self.geom, self.grid = K, h, geom, grid
        pts = grid.points()
        s = h.index_at(pts)
        hv = h.net.value(s)
        _check_coverage(pts, hv, K.a, geom)
        self.d = grid.d
        if self.d == 1 or not K.is_product:
            self.mode = "sparse"
            self._matrix = self._full_matrix(pts, hv, max_nnz)
        else:
            self.mode = "separable"
            self._levels = []
            ax = grid.axis()
            uniq, inv = np.unique(s, axis=0, return_inverse=True)
            inv = inv.ravel()
            for k, sv in enumerate(uniq):
                mask = inv == k
                hk = h.net.value(sv)
                mats = [_axis_matrix(K.univariate, ax, np.full(grid.n, hk[j]), K.a, geom, j)
                        for j in range(self.d)]
                self._levels.append((np.nonzero(mask)[0], mats))

    def _full_matrix(self, pts, hv, max_nnz):
        K, geom = self.K, self.geom
        if self.d == 1:
            uni = K.univariate if K.is_product else (lambda u: K.evaluator(u[:, None]))
            return _axis_matrix(uni, pts[:, 0], hv[:, 0], K.a, geom, 0)
        delta = geom.delta
        rows, cols, vals = [], [], []
        nnz = 0
        keys = np.unique(hv, axis=0, return_inverse=True)
        uniq, inv = keys[0], keys[1].ravel()
        for k, hk in enumerate(uniq):
            sel = np.nonzero(inv == k)[0]
            m = [int(math.ceil(K.a * hj / delta)) + 1 for hj in hk]
            offs = np.stack(np.meshgrid(*[np.arange(-mj, mj + 1) for mj in m], indexing="ij"),
                            axis=-1).reshape(-1, self.d)
            nnz += len(sel) * len(offs)
            if nnz > max_nnz:
                raise CapacityError(f"field operator would exceed {max_nnz} nonzeros")
            for start in range(0, len(sel), max(1, (1 << 22) // len(offs))):
                ss = sel[start:start + max(1, (1 << 22) // len(offs))]
                xs = pts[ss]
                centre = np.floor((xs - np.asarray(geom.lo)) / delta).astype(np.int64)
                idx = centre[:, None, :] + offs[None]
                t = np.asarray(geom.lo) + (idx + 0.5) * delta
                u = (t - xs[:, None, :]) / hk
                w = K.evaluator(u) / float(np.prod(hk))
                keep = w != 0
                flat = np.ravel_multi_index(tuple(idx[keep].T), geom.shape)
                rows.append(np.broadcast_to(ss[:, None], w.shape)[keep])
                cols.append(flat)
                vals.append(w[keep])
        rows, cols, vals = (np.concatenate(v) for v in (rows, cols, vals))
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(pts), geom.size))

    def apply(self, Z: np.ndarray) -> np.ndarray:
        """``Z`` of shape ``(R,) + lattice shape`` (or lattice shape) -> ``(R, n_points)``."""
        Z = np.asarray(Z, dtype=float)
        single = Z.shape == self.geom.shape
        if single:
            Z = Z[None]
        R = Z.shape[0]
        if self.mode == "sparse":
            out = (self._matrix @ Z.reshape(R, -1).T).T
        else:
            out = np.empty((R, self.grid.size))
            for sel, mats in self._levels:
                Y = Z
                for j, A in enumerate(mats):
                    # contract lattice axis j + 1 with A (n_eval x n_lattice)
                    Y = np.moveaxis(Y, j + 1, -1)
                    shp = Y.shape
                    Y = np.asarray((A @ Y.reshape(-1, shp[-1]).T).T)
                    Y = np.moveaxis(Y.reshape(shp[:-1] + (A.shape[0],)), -1, j + 1)
                out[:, sel] = Y.reshape(R, -1)[:, sel]
        return out[0] if single else out

    @property
    def nnz(self) -> int:
        if self.mode == "sparse":
            return int(self._matrix.nnz)
        return sum(sum(A.nnz for A in mats) for _, mats in self._levels)


@dataclass
class FieldSample:
    """Field values ``values[r, k, i]`` for replicate ``r``, bandwidth ``k``, point ``i``."""

    grid: EvalGrid
    values: np.ndarray
    seed: int
    delta: float
    kernel: str
    bandwidths: List[str]
    replicates: List[int] = field(default_factory=list)


def evaluate_field(K: Kernel, h, noise: NoiseLattice, grid: EvalGrid) -> FieldSample:
    """Evaluate ``xi_h`` for one bandwidth or a collection on one noise realization."""
    hs = [h] if isinstance(h, MultiBandwidth) else list(h)
    vals = np.stack([FieldOperator(K, hk, noise.geometry, grid).apply(noise.increments)
                     for hk in hs])
    return FieldSample(grid, vals[None], noise.seed, noise.delta, K.name,
                       [hk.name for hk in hs], [noise.replicate])


class FieldSimulator:
    """Operators for a bandwidth collection on one lattice; samples replicates in batches."""

    def __init__(self, K: Kernel, hs: Sequence[MultiBandwidth], grid: EvalGrid,
                 delta: Optional[float] = None, cap: int = MAX_CELLS):
        self.K, self.hs, self.grid = K, list(hs), grid
        h_min = min(hk.h_min() for hk in self.hs)
        h_max = max(hk.h_max() for hk in self.hs)
        self.delta = float(delta) if delta else h_min / DEFAULT_DELTA_RATIO
        self.geometry = LatticeGeometry.covering(grid.b, K.a * h_max, self.delta, grid.d, cap)
        self.operators = [FieldOperator(K, hk, self.geometry, grid) for hk in self.hs]
        self.batch = max(1, min(256, (1 << 22) // self.geometry.size))

    def sample(self, seed: int, replicates: Sequence[int]) -> np.ndarray:
        """Array ``(R, n_bandwidths, n_points)``, computed in fixed-size batches."""
        replicates = list(replicates)
        out = np.empty((len(replicates), len(self.hs), self.grid.size))
        for start in range(0, len(replicates), self.batch):
            reps = replicates[start:start + self.batch]
            Z = noise_batch(self.geometry, seed, reps)
            for k, op in enumerate(self.operators):
                out[start:start + len(reps), k] = op.apply(Z)
        return out

    def field_sample(self, seed: int, replicates: Sequence[int]) -> FieldSample:
        return FieldSample(self.grid, self.sample(seed, replicates), seed, self.delta,
                           self.K.name, [hk.name for hk in self.hs], list(replicates))


# ---------------------------------------------------------------------- norms
def lp_norm(values: np.ndarray, cell_volume: float, p: float) -> np.ndarray:
    """``(dx * sum_i |xi_i|^p)^{1/p}`` along the last axis."""
    if p < 1 or math.isinf(p):
        raise DomainError("p must lie in [1, inf)")
    v = np.abs(np.asarray(values, dtype=float))
    return (cell_volume * np.sum(v ** p, axis=-1)) ** (1.0 / p)


def sample_lp_norms(sample: FieldSample, p: float) -> np.ndarray:
    """``||xi||_p`` of shape ``(R, n_bandwidths)``."""
    return lp_norm(sample.values, sample.grid.cell_volume, p)


def grid_volumes(h: MultiBandwidth, grid: EvalGrid) -> np.ndarray:
    """``V_h`` at each evaluation point."""
    return np.prod(h.values_at(grid.points()), axis=1)


def discrete_v_norm(V: np.ndarray, cell_volume: float, m: float) -> float:
    """``(dx * sum_i V_i^{-m/2})^{1/m}``: the grid-weighted ``||V^{-1/2}||_m``."""
    return float((cell_volume * np.sum(np.asarray(V) ** (-m / 2))) ** (1.0 / m))


def holder_sides(xi: np.ndarray, V: np.ndarray, cell_volume: float, p: float, r: float):
    """Both sides of ``||xi||_p <= ||V^{1/2} xi||_r * ||V^{-1/2}||_{rp/(r-p)}``
    with the grid weights on both sides (``r > p``)."""
    if r <= p:
        raise DomainError("need r > p")
    lhs = lp_norm(xi, cell_volume, p)
    rhs = lp_norm(np.sqrt(V) * xi, cell_volume, r) * discrete_v_norm(V, cell_volume, r * p / (r - p))
    return lhs, rhs


# ---------------------------------------------------------------------- oracles
def _breakpoints(x: float, h: float, a: float) -> List[float]:
    k = int(math.ceil(a))
    return [x + i * h for i in range(-k, k + 1)] + [x - a * h, x + a * h]


def _cross_1d(kfun, a: float, x: float, hx: float, y: float, hy: float) -> float:
    lo = max(x - a * hx, y - a * hy)
    hi = min(x + a * hx, y + a * hy)
    if hi <= lo:
        return 0.0
    pts = sorted({p for p in _breakpoints(x, hx, a) + _breakpoints(y, hy, a) if lo < p < hi})
    f = lambda t: float(kfun(np.asarray((t - x) / hx)) * kfun(np.asarray((t - y) / hy)))  # noqa: E731
    edges = [lo] + pts + [hi]
    total = 0.0
    for e0, e1 in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, e0, e1, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
    return total / (hx * hy)


def exact_covariance(K: Kernel, h: MultiBandwidth, x, y, *, panels: int = 64,
                     order: int = 8) -> float:
    """``E xi_h(x) xi_h(y) = V^{-1}(x) V^{-1}(y) int K((t-x)/h(x)) K((t-y)/h(y)) dt``.

    Product kernels factor into one-dimensional integrals done by adaptive
    quadrature split at the kinks of the rescaled factors.  Other kernels use
    a tensor composite Gauss-Legendre rule on the intersection of supports.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    hx = h.values_at(x[None])[0]
    hy = h.values_at(y[None])[0]
    a = K.a
    if K.is_product:
        out = 1.0
        for j in range(K.d):
            out *= _cross_1d(K.univariate, a, x[j], hx[j], y[j], hy[j])
            if out == 0.0:
                return 0.0
        return out
    lo = np.maximum(x - a * hx, y - a * hy)
    hi = np.minimum(x + a * hx, y + a * hy)
    if np.any(hi <= lo):
        return 0.0
    g, w = np.polynomial.legendre.leggauss(order)
    axes, weights = [], []
    for j in range(K.d):
        edges = np.linspace(lo[j], hi[j], panels + 1)
        half = np.diff(edges) / 2
        mid = (edges[:-1] + edges[1:]) / 2
        axes.append((mid[:, None] + half[:, None] * g[None]).ravel())
        weights.append((half[:, None] * w[None]).ravel())
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    wts = np.ones(mesh.shape[:-1])
    for j in range(K.d):
        shape = [1] * K.d
        shape[j] = -1
        wts = wts * weights[j].reshape(shape)
    val = np.sum(wts * K.evaluator((mesh - x) / hx) * K.evaluator((mesh - y) / hy))
    return float(val) / float(np.prod(hx) * np.prod(hy))


def exact_lp_moment(K: Kernel, h: MultiBandwidth, p: float) -> float:
    """``E ||xi_h||_p^p = E|N|^p ||K||_2^p ||V_h^{-1/2}||_p^p``."""
    if p < 1 or math.isinf(p):
        raise DomainError("p must lie in [1, inf)")
    return abs_normal_moment(p) * K.norm(2) ** p * v_norm(h, p) ** p


def discrete_lp_moment(K: Kernel, h: MultiBandwidth, grid: EvalGrid, p: float) -> float:
    """Grid version of :func:`exact_lp_moment`: ``E|N|^p ||K||_2^p dx sum_i V_i^{-p/2}``."""
    V = grid_volumes(h, grid)
    return abs_normal_moment(p) * K.norm(2) ** p * grid.cell_volume * float(np.sum(V ** (-p / 2)))


# ---------------------------------------------------------------------- raw dump
MAGIC = b"UPFN"
DUMP_VERSION = 1


def write_samples(path, sample: FieldSample) -> None:
    """Binary dump: ``UPFN``, version, d, grid dims, replicate count and
    bandwidth count as little-endian uint32, then the values as ``<f8`` in
    (replicate, bandwidth, point) order."""
    R, H, _ = sample.values.shape
    g = sample.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", DUMP_VERSION, g.d))
        fh.write(struct.pack(f"<{g.d}I", *g.shape))
        fh.write(struct.pack("<II", R, H))
        fh.write(np.ascontiguousarray(sample.values, dtype="<f8").tobytes())


def read_samples(path) -> Tuple[Tuple[int, ...], np.ndarray]:
    """Inverse of :func:`write_samples`; returns (grid dims, values)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not an UPFN sample dump")
        version, d = struct.unpack("<II", fh.read(8))
        if version != DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        dims = struct.unpack(f"<{d}I", fh.read(4 * d))
        R, H = struct.unpack("<II", fh.read(8))
        vals = np.frombuffer(fh.read(), dtype="<f8")
    return dims, vals.reshape(R, H, int(np.prod(dims))).copy()
