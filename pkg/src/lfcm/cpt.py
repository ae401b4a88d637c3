"""Conservative proportional-time (CPT) grid estimator, density ranking,
level sets and grid-based simulation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Trajectory
from .errors import InvalidParam, NoSameCellPairs, TooShort


@dataclass(frozen=True)
class CptGrid:
    """Cell probabilities on a regular grid anchored at ``origin``.

    ``prob`` has shape (nx, ny); cell (i, j) covers
    ``origin + [i, i + 1) x [j, j + 1) * cell_size``.
    """

    origin: np.ndarray
    cell_size: float
    prob: np.ndarray

    def cell_of(self, xy) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        return np.floor((xy - self.origin) / self.cell_size).astype(np.int64)

    def density(self, xy) -> np.ndarray:
        """Cell probability per unit area at each point; zero outside the grid."""
        ij = self.cell_of(xy)
        nx, ny = self.prob.shape
        ok = (ij[:, 0] >= 0) & (ij[:, 0] < nx) & (ij[:, 1] >= 0) & (ij[:, 1] < ny)
        out = np.zeros(len(ij))
        out[ok] = self.prob[ij[ok, 0], ij[ok, 1]] / self.cell_size ** 2
        return out

    def occupied(self) -> np.ndarray:
        return np.argwhere(self.prob > 0)

    def cell_centers(self, cells) -> np.ndarray:
        return self.origin + (np.asarray(cells, dtype=float) + 0.5) * self.cell_size


def cpt_fit(traj: Trajectory, cell_size: float, bounds: Optional[tuple] = None) -> CptGrid:
    """Fit cell probabilities from the durations of consecutive same-cell pairs.

    Parameters
    ----------
    bounds : (xmin, ymin, xmax, ymax), optional
        Window of the grid; defaults to the bounding box of the fixes.
    """
    if cell_size <= 0:
        raise InvalidParam("cell_size must be positive")
    if len(traj) < 2:
        raise TooShort("need at least two fixes")
    xy = traj.xy
    if bounds is None:
        lo, hi = xy.min(axis=0), xy.max(axis=0)
    else:
        lo, hi = np.array(bounds[:2], dtype=float), np.array(bounds[2:], dtype=float)
        if np.any(hi < lo):
            raise InvalidParam("bounds must be (xmin, ymin, xmax, ymax)")
    shape = tuple(int(v) for v in np.floor((hi - lo) / cell_size).astype(int) + 1)
    ij = np.floor((xy - lo) / cell_size).astype(np.int64)
    inside = np.all((ij >= 0) & (ij < np.array(shape)), axis=1)
    same = np.all(ij[1:] == ij[:-1], axis=1) & inside[1:] & inside[:-1]
    dt = np.diff(traj.t)
    if not same.any() or dt[same].sum() <= 0:
        raise NoSameCellPairs("no consecutive fixes share a cell")
    prob = np.zeros(shape)
    np.add.at(prob, (ij[:-1][same, 0], ij[:-1][same, 1]), dt[same])
    return CptGrid(lo, float(cell_size), prob / prob.sum())


def density_ranking(grid: CptGrid, points, query) -> np.ndarray:
    """Fraction of ``points`` whose estimated density does not exceed that at each query."""
    dp = np.sort(grid.density(points))
    dq = grid.density(query)
    return np.searchsorted(dp, dq, side="right") / len(dp)


def level_set(grid: CptGrid, gamma: float, points=None) -> np.ndarray:
    """Occupied cells whose density ranking is at least ``1 - gamma``.

    The ranking is the fraction of ``points`` with density not above the
    cell's.  Without ``points`` every cell is weighted by its own
    probability, which is the limit of many observations drawn from the
    grid.  Returns an (m, 2) array of cell indices.
    """
    if not 0 <= gamma <= 1:
        raise InvalidParam("gamma must lie in [0, 1]")
    cells = grid.occupied()
    p = grid.prob[cells[:, 0], cells[:, 1]]
    if points is None:
        order = np.argsort(p, kind="stable")
        cum = np.cumsum(p[order])
        # mass of all cells with probability <= p, ties included
        idx = np.searchsorted(p[order], p, side="right") - 1
        rank = cum[idx] / cum[-1]
    else:
        rank = density_ranking(grid, points, grid.cell_centers(cells))
    # guard the threshold against rounding in the cumulative sums
    return cells[rank >= 1 - gamma - 1e-12]


def components(cells) -> list[np.ndarray]:
    """4-connected components of a set of integer cells, largest first."""
    cells = [tuple(int(v) for v in c) for c in np.asarray(cells).reshape(-1, 2)]
    todo = set(cells)
    out = []
    for c in cells:
        if c not in todo:
            continue
        todo.discard(c)
        stack, comp = [c], []
        while stack:
            i, j = stack.pop()
            comp.append((i, j))
            for nb in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if nb in todo:
                    todo.discard(nb)
                    stack.append(nb)
        out.append(np.array(sorted(comp)))
    out.sort(key=lambda a: (-len(a), tuple(a[0])))
    return out


def cpt_simulate(grid: CptGrid, timestamps, rng: np.random.Generator, device_id: str = "cpt") -> Trajectory:
    """Independent cell draw per timestamp with a uniform position inside the cell."""
    t = np.asarray(timestamps, dtype=float)
    cells = grid.occupied()
    p = grid.prob[cells[:, 0], cells[:, 1]]
    k = rng.choice(len(cells), size=t.size, p=p / p.sum())
    xy = grid.origin + (cells[k] + rng.random((t.size, 2))) * grid.cell_size
    return Trajectory(t, xy, device_id=device_id)
