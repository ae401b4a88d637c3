"""Mobility metrics: jump lengths, MSD, radius of gyration, ECCDFs, the
new-locations curve and random-effects pooling of tail exponents."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .core import Trajectory
from .errors import EmptyInput, InvalidParam, TooFewGroups, TooShort


def _xy(traj) -> np.ndarray:
    return np.asarray(traj.xy if isinstance(traj, Trajectory) else traj, dtype=float)


def jump_lengths(traj) -> np.ndarray:
    """Euclidean length of every step between consecutive fixes."""
    xy = _xy(traj)
    if len(xy) < 2:
        raise TooShort("need at least two fixes")
    d = np.diff(xy, axis=0)
    return np.hypot(d[:, 0], d[:, 1])


def msd(traj) -> float:
    """Mean squared displacement from the first fix, averaged over the later fixes."""
    xy = _xy(traj)
    if len(xy) < 2:
        raise TooShort("need at least two fixes")
    d = xy[1:] - xy[0]
    return float(np.mean(np.sum(d * d, axis=1)))


def radius_of_gyration(traj) -> float:
    """Root-mean-square distance of the fixes from their centroid."""
    xy = _xy(traj)
    if len(xy) == 0:
        raise EmptyInput("no fixes")
    d = xy - xy.mean(axis=0)
    return float(math.sqrt(np.mean(np.sum(d * d, axis=1))))


def eccdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical survival function P(X >= x) at the sorted unique values.

    The first value has survival 1 and the largest has ``count(max) / n``.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("no values")
    x, counts = np.unique(v, return_counts=True)
    surv = 1.0 - np.concatenate([[0], np.cumsum(counts)[:-1]]) / v.size
    return x, surv


def new_locations_curve(traj: Trajectory, cell_size: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of distinct grid cells visited so far against normalized time.

    Returns
    -------
    (tau, frac) with ``tau`` in [0, 1] and ``frac[-1] == 1``.
    """
    if cell_size <= 0:
        raise InvalidParam("cell_size must be positive")
    if len(traj) == 0:
        raise EmptyInput("no fixes")
    cells = np.floor(traj.xy / cell_size).astype(np.int64)
    seen = set()
    count = np.empty(len(traj))
    for i, (a, b) in enumerate(cells):
        seen.add((a, b))
        count[i] = len(seen)
    span = traj.t[-1] - traj.t[0]
    tau = (traj.t - traj.t[0]) / span if span > 0 else np.zeros(len(traj))
    return tau, count / count[-1]


def new_locations_exponent(traj: Trajectory, cell_size: float = 0.05) -> float:
    """Least-squares slope of log(cells visited) on log(normalized time), t > 0 only."""
    tau, frac = new_locations_curve(traj, cell_size)
    keep = tau > 0
    if keep.sum() < 2:
        raise TooShort("need two fixes after the first")
    return float(np.polyfit(np.log(tau[keep]), np.log(frac[keep]), 1)[0])


def _fixed_effect(a, v):
    w = 1.0 / v
    mu = float(np.sum(w * a) / np.sum(w))
    return mu, float(math.sqrt(1.0 / np.sum(w)))


def _dl_tau2(a, se2) -> float:
    w = 1.0 / se2
    mu = np.sum(w * a) / np.sum(w)
    q = float(np.sum(w * (a - mu) ** 2))
    c = float(np.sum(w) - np.sum(w * w) / np.sum(w))
    return max(0.0, (q - (len(a) - 1)) / c)


def _reml_score(t2, a, se2):
    w = 1.0 / (se2 + t2)
    mu = np.sum(w * a) / np.sum(w)
    # derivative of the restricted log likelihood in tau^2
    return 0.5 * (np.sum(w * w * (a - mu) ** 2) - np.sum(w) + np.sum(w * w) / np.sum(w))


def _reml_tau2(a, se2) -> float:
    f = lambda t2: _reml_score(t2, a, se2)  # noqa: E731
    if f(0.0) <= 0:
        return 0.0
    hi = max(1.0, float(np.var(a)) * 4)
    while f(hi) > 0:
        hi *= 4
    return float(brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-12))


def pooled_alpha(alphas: Sequence[float], ses: Sequence[float], method: str = "REML"):
    """Random-effects pooled exponent.

    Parameters
    ----------
    method : {"REML", "DL", "FE"}
        Between-group variance by restricted maximum likelihood, the
        DerSimonian-Laird moment estimator, or fixed at zero.

    Returns
    -------
    (alpha_pooled, (lo, hi), tau2) with a normal 95% interval.
    """
    a = np.asarray(alphas, dtype=float)
    se = np.asarray(ses, dtype=float)
    if a.size < 2 or a.shape != se.shape:
        raise TooFewGroups("need at least two groups with matching standard errors")
    if np.any(se <= 0):
        raise InvalidParam("standard errors must be positive")
    se2 = se * se
    if method == "REML":
        t2 = _reml_tau2(a, se2)
    elif method == "DL":
        t2 = _dl_tau2(a, se2)
    elif method == "FE":
        t2 = 0.0
    else:
        raise InvalidParam(f"unknown method {method!r}")
    mu, s = _fixed_effect(a, se2 + t2)
    return mu, (mu - 1.96 * s, mu + 1.96 * s), t2


@dataclass(frozen=True)
class MetricSummary:
    mean_jump_length: float
    msd: float
    rog: float
    sd_jump_length: float
    sd_msd: float
    sd_rog: float

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def summarize(trajs: Sequence[Trajectory]) -> MetricSummary:
    """Across-trajectory mean and standard deviation (ddof 0) of the three metrics."""
    if not len(trajs):
        raise EmptyInput("no trajectories")
    jl = np.array([jump_lengths(t).mean() for t in trajs])
    m = np.array([msd(t) for t in trajs])
    r = np.array([radius_of_gyration(t) for t in trajs])
    return MetricSummary(float(jl.mean()), float(m.mean()), float(r.mean()),
                         float(jl.std()), float(m.std()), float(r.std()))


def metric_table(observed: Sequence[Trajectory], simulated: Sequence[Trajectory]):
    """Summaries of an observed and a simulated set, in that order."""
    return summarize(observed), summarize(simulated)
