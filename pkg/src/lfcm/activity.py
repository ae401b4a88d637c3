"""Activity densities on rasters, level sets, persistence, Top-k regions,
set and distribution distances, and trajectory distance matrices."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import directed_hausdorff

from .core import DeltaSeries, Trajectory
from .errors import (EmptyGrid, EmptyReference, EmptySet, FewerComponents, GridMismatch, InvalidParam,
                     NoRegions, UnnormalizedInput)


@dataclass(frozen=True)
class ActivityDensity:
    """Mixture of bivariate Gaussians."""

    weights: np.ndarray
    centers: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size == 0:
            raise NoRegions("empty mixture")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise InvalidParam("mixture weights must form a simplex")

    def pdf(self, xy) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        out = np.zeros(len(xy))
        for w, m, S in zip(self.weights, self.centers, self.covs):
            det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
            if det <= 0:
                raise InvalidParam("component covariance must be positive definite")
            inv = np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det
            d = xy - m
            q = np.einsum("ij,jk,ik->i", d, inv, d)
            out += w * np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))
        return out


def activity_density(deltas: DeltaSeries, scan, kind: str = "bridge", jitter: float = 1e-12) -> ActivityDensity:
    """Posterior activity density of one scan.

    ``kind="bridge"`` time-averages the Brownian bridge between every pair
    of consecutive fixes inside a segment and moment-matches it by one
    Gaussian: center at the midpoint, covariance ``dt * Sigma* / 6 + dx dx' / 12``,
    weight proportional to ``dt``.  ``kind="region"`` uses one Gaussian per
    activity region, ``N(mu_tilde, Sigma_z)``, weighted by ``T_z``.
    """
    from .mcmc.chain import scan_regions

    segs = scan.state.segments()
    if not segs:
        raise NoRegions("scan has no Brownian segments")
    if kind == "region":
        regs = scan_regions(deltas, scan)
        w = np.array([r.T_z for r in regs])
        return ActivityDensity(w / w.sum(), np.array([r.mu_tilde for r in regs]),
                               np.array([r.Sigma_z + jitter * np.eye(2) for r in regs]))
    if kind != "bridge":
        raise InvalidParam(f"unknown density kind {kind!r}")
    ws, cs, Ss = [], [], []
    for s, e, g in segs:
        S = scan.groups[g].dispersion
        for i in range(s, e + 1):
            dt = float(deltas.dt[i])
            dx = deltas.dx[i]
            ws.append(dt)
            cs.append(0.5 * (deltas.loc[i] + deltas.loc[i + 1]))
            Ss.append(dt * S / 6.0 + np.outer(dx, dx) / 12.0 + jitter * np.eye(2))
    w = np.array(ws)
    return ActivityDensity(w / w.sum(), np.array(cs), np.array(Ss))


@dataclass(frozen=True)
class Raster:
    """Regular grid of ``nx * ny`` cells with lower-left corner ``origin``."""

    origin: tuple[float, float]
    cell: tuple[float, float]
    shape: tuple[int, int]

    @property
    def area(self) -> float:
        return self.cell[0] * self.cell[1]

    def centers(self) -> np.ndarray:
        """Cell centers, shape (nx * ny, 2), x index varying slowest."""
        xs = self.origin[0] + (np.arange(self.shape[0]) + 0.5) * self.cell[0]
        ys = self.origin[1] + (np.arange(self.shape[1]) + 0.5) * self.cell[1]
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_xy(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=float).reshape(-1, 2)
        return np.asarray(self.origin) + (idx + 0.5) * np.asarray(self.cell)


def make_raster(points, n: int = 256, pad: float = 0.1) -> Raster:
    """Square-celled count ``n`` per side over the bounding box padded by ``pad`` of its span."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if p.size == 0:
        raise EmptyGrid("no points to bound")
    lo, hi = p.min(axis=0), p.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo = lo - pad * span
    hi = hi + pad * span
    cell = (hi - lo) / n
    return Raster((float(lo[0]), float(lo[1])), (float(cell[0]), float(cell[1])), (n, n))


def rasterize(density, raster: Raster) -> np.ndarray:
    """Density evaluated at cell centers, shape ``raster.shape``.

    ``density`` is anything with a ``pdf`` or ``density`` method (a fitted
    CPT grid qualifies).
    """
    f = density.pdf if hasattr(density, "pdf") else density.density
    return f(raster.centers()).reshape(raster.shape)


def normalize(p, raster: Raster) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    tot = p.sum() * raster.area
    if not tot > 0:
        raise UnnormalizedInput("raster carries no mass")
    return p / tot


def _check_normalized(p, area):
    if np.any(p < 0) or not abs(p.sum() * area - 1.0) <= 1e-6:
        raise UnnormalizedInput("raster must be a nonnegative density integrating to one")


def kl_divergence(p, q, raster: Raster, floor: float = 1e-12) -> float:
    """KL(p || q) on a raster; ``q`` is floored at ``floor`` per cell and renormalized."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise GridMismatch("rasters differ in shape")
    a = raster.area
    _check_normalized(p, a)
    _check_normalized(q, a)
    if floor > 0:
        q = np.maximum(q, floor)
        q = q / (q.sum() * a)
    m = p > 0
    if np.any(q[m] == 0):
        return math.inf
    return float(max(0.0, np.sum(p[m] * np.log(p[m] / q[m])) * a))


def js_divergence(p, q, raster: Raster) -> float:
    """Jensen-Shannon divergence; lies in [0, log 2]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = 0.5 * (p + q)
    v = 0.5 * kl_divergence(p, m, raster, floor=0.0) + 0.5 * kl_divergence(q, m, raster, floor=0.0)
    return float(min(v, math.log(2)))


def level_set_gamma(p, raster: Raster, gamma: float) -> np.ndarray:
    """Smallest mask holding at least ``1 - gamma`` of the raster mass, filled from the top."""
    if not 0 <= gamma <= 1:
        raise InvalidParam("gamma must lie in [0, 1]")
    p = np.asarray(p, dtype=float)
    flat = p.ravel()
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(flat[order])
    need = (1.0 - gamma) * cum[-1]
    k = int(np.searchsorted(cum, need * (1 - 1e-12), side="left")) + 1 if need > 0 else 0
    mask = np.zeros(flat.size, dtype=bool)
    mask[order[:min(k, flat.size)]] = True
    return mask.reshape(p.shape)


def count_components(mask) -> int:
    return int(ndimage.label(np.asarray(mask, dtype=bool))[1])


def persistence_curve(p, raster: Raster, gammas) -> tuple[np.ndarray, np.ndarray]:
    """Number of 4-connected components of the level set at every ``gamma``."""
    g = np.asarray(gammas, dtype=float)
    return g, np.array([count_components(level_set_gamma(p, raster, v)) for v in g])


@dataclass(frozen=True)
class TopRegion:
    mask: np.ndarray
    mass: float
    centroid: np.ndarray


def top_k_regions(p, raster: Raster, k: int, gamma: float = 0.2) -> tuple[list[TopRegion], bool]:
    """Connected components of the ``1 - gamma`` level set ranked by mass.

    Returns
    -------
    (regions, complete) where ``complete`` is False when fewer than ``k``
    components exist; all of them are returned then.
    """
    if k < 1:
        raise InvalidParam("k must be >= 1")
    p = np.asarray(p, dtype=float)
    lab, n = ndimage.label(level_set_gamma(p, raster, gamma))
    xy = raster.centers().reshape(*p.shape, 2)
    out = []
    for j in range(1, n + 1):
        m = lab == j
        mass = float(p[m].sum() * raster.area)
        cen = (p[m][:, None] * xy[m]).sum(axis=0) / p[m].sum() if p[m].sum() > 0 else xy[m].mean(axis=0)
        out.append(TopRegion(m, mass, cen))
    out.sort(key=lambda r: -r.mass)
    if n < k:
        warnings.warn(f"only {n} components, {k} requested", FewerComponents, stacklevel=2)
    return out[:k], n >= k


def hausdorff(A, B, raster: Optional[Raster] = None) -> float:
    """Symmetric Hausdorff distance between the cell centers of two masks."""
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if not A.any() or not B.any():
        raise EmptySet("both masks must be nonempty")
    if raster is None:
        a, b = np.argwhere(A).astype(float), np.argwhere(B).astype(float)
    else:
        a, b = raster.cell_xy(np.argwhere(A)), raster.cell_xy(np.argwhere(B))
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def jaccard_distance(A, B) -> float:
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if A.shape != B.shape:
        raise GridMismatch("masks differ in shape")
    union = np.count_nonzero(A | B)
    if union == 0:
        return 0.0
    return 1.0 - np.count_nonzero(A & B) / union


def overlap_distance(A, B) -> float:
    """Share of ``B`` not covered by ``A``."""
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if A.shape != B.shape:
        raise GridMismatch("masks differ in shape")
    nb = np.count_nonzero(B)
    if nb == 0:
        raise EmptyReference("reference mask is empty")
    return 1.0 - np.count_nonzero(A & B) / nb


METRICS: dict[str, Callable] = {
    "jaccard": jaccard_distance,
    "overlap": overlap_distance,
    "hausdorff": hausdorff,
}


def stability_series(masks_by_week: Mapping[int, np.ndarray], reference: int = 12,
                     metric: str = "overlap") -> dict[int, float]:
    """Distance of each week's mask to the reference week's mask (``metric(mask_w, mask_ref)``)."""
    if len(masks_by_week) < 2:
        raise InvalidParam("need at least two week splits")
    if reference not in masks_by_week:
        raise InvalidParam("reference week missing")
    f = METRICS[metric]
    ref = masks_by_week[reference]
    return {w: float(f(m, ref)) for w, m in sorted(masks_by_week.items())}


def stability_summary(series: Sequence[Mapping[int, float]]) -> dict[int, tuple[float, float, float]]:
    """Across-device mean with a 2.5 / 97.5 percentile band per week."""
    weeks = sorted(set().union(*[set(s) for s in series]))
    out = {}
    for w in weeks:
        v = np.array([s[w] for s in series if w in s])
        out[w] = (float(v.mean()), float(np.percentile(v, 2.5)), float(np.percentile(v, 97.5)))
    return out


def mean_path_distance(a: Trajectory, b: Trajectory) -> float:
    """Time-averaged Euclidean distance between two paths on the same grid."""
    if a.t.shape != b.t.shape or not np.array_equal(a.t, b.t):
        raise GridMismatch("paths are not on a common time grid")
    d = a.xy - b.xy
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))


def distance_matrix(paths: Sequence[Sequence[Trajectory]]) -> np.ndarray:
    """Mean over aligned scans of the mean pointwise distance between devices.

    ``paths[i][s]`` is device ``i``'s path under scan ``s``; every device
    must supply the same number of scans on one time grid.
    """
    n = len(paths)
    if n == 0:
        return np.zeros((0, 0))
    m = {len(p) for p in paths}
    if len(m) != 1 or 0 in m:
        raise GridMismatch("devices must supply the same nonzero number of scans")
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = float(np.mean([mean_path_distance(a, b) for a, b in zip(paths[i], paths[j])]))
    return D
