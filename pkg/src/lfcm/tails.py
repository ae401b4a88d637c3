"""Choosing the minimal jump scale eps by goodness-of-fit minimisation.

For every candidate eps on a grid the tail ``x >= eps`` gets a Pareto MLE
and a distance between its empirical CDF and the fitted CDF (KS, Anderson-
Darling or Kuiper).  The eps with the smallest distance wins, optionally
smoothed by averaging the ``k`` best candidates near the minimiser.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AllDegenerate, InvalidParam, TooFewTail

METHODS = ("KS", "AD", "Kuiper", "KuiperNbhd")


@dataclass(frozen=True)
class TailFit:
    eps_hat: float
    alpha_hat: float
    method: str
    n_tail: int
    statistic_value: float


# --- statistics on sorted fitted CDF values


def ks_from_cdf(F) -> float:
    F = np.sort(np.asarray(F, dtype=float))
    n = F.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def kuiper_from_cdf(F) -> float:
    F = np.sort(np.asarray(F, dtype=float))
    n = F.size
    i = np.arange(1, n + 1)
    return float(np.max(i / n - F) + np.max(F - (i - 1) / n))


def ad_from_cdf(F) -> float:
    """Anderson-Darling A^2; ``+inf`` when some fitted CDF value is 0 or 1."""
    F = np.sort(np.asarray(F, dtype=float))
    n = F.size
    if F[0] <= 0.0 or F[-1] >= 1.0:
        return math.inf
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) / n * (np.log(F) + np.log1p(-F[::-1]))))


_FROM_CDF: dict[str, Callable] = {"KS": ks_from_cdf, "AD": ad_from_cdf, "Kuiper": kuiper_from_cdf}


def _tail_fit(samples: np.ndarray, eps: float):
    """Sorted tail, its Pareto MLE and fitted CDF values; None if degenerate."""
    tail = np.sort(samples[samples >= eps])
    if tail.size < 2:
        return None
    s = float(np.sum(np.log(tail / eps)))
    if s <= 0:
        return None
    alpha = tail.size / s
    F = -np.expm1(-alpha * np.log(tail / eps))
    return tail, alpha, F


def _statistic(samples, eps: float, method: str) -> float:
    x = np.asarray(samples, dtype=float)
    fit = _tail_fit(x, eps)
    if fit is None:
        raise TooFewTail(f"fewer than 2 distinct tail samples at eps={eps}")
    return _FROM_CDF[method](fit[2])


def ks_statistic(samples, eps: float) -> float:
    return _statistic(samples, eps, "KS")


def ad_statistic(samples, eps: float) -> float:
    return _statistic(samples, eps, "AD")


def kuiper_statistic(samples, eps: float) -> float:
    return _statistic(samples, eps, "Kuiper")


# --- grid search


def default_grid(samples, method: str = "KS") -> np.ndarray:
    """Sorted unique samples; geometric midpoints of them for AD.

    With eps equal to a sample the smallest tail value has fitted CDF 0 and
    the AD statistic is infinite, so AD candidates sit between samples.
    """
    u = np.unique(np.asarray(samples, dtype=float))
    u = u[u > 0]
    if method == "AD":
        return np.sqrt(u[:-1] * u[1:]) if u.size > 1 else u
    return u


def _scan(samples: np.ndarray, grid: np.ndarray, method: str):
    stat = np.full(grid.size, np.inf)
    alpha = np.full(grid.size, np.nan)
    fn = _FROM_CDF[method]
    for j, e in enumerate(grid):
        fit = _tail_fit(samples, e)
        if fit is None:
            continue
        alpha[j] = fit[1]
        stat[j] = fn(fit[2])
    return stat, alpha


def _prepare(samples, method, grid):
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0 or np.any(x <= 0):
        raise InvalidParam("samples must be positive and nonempty")
    base = "Kuiper" if method == "KuiperNbhd" else method
    if base not in _FROM_CDF:
        raise InvalidParam(f"unknown method {method!r}")
    g = default_grid(x, base) if grid is None else np.asarray(grid, dtype=float).reshape(-1)
    if g.size == 0:
        raise InvalidParam("empty grid")
    if np.any(np.diff(g) < 0):
        raise InvalidParam("grid must be sorted ascending")
    stat, alpha = _scan(x, g, base)
    if not np.any(np.isfinite(stat)):
        raise AllDegenerate("no grid point leaves a usable tail")
    return x, g, stat, alpha


def estimate_epsilon(samples, method: str = "Kuiper", grid=None) -> TailFit:
    """Grid argmin of the chosen statistic; ties go to the smaller eps."""
    if method == "KuiperNbhd":
        return neighborhood_average(samples, "Kuiper", grid)
    x, g, stat, alpha = _prepare(samples, method, grid)
    j = int(np.argmin(stat))
    return TailFit(float(g[j]), float(alpha[j]), method, int(np.sum(x >= g[j])), float(stat[j]))


def neighborhood_average(samples, method: str = "Kuiper", grid=None, k: int = 5,
                         r: Optional[float] = None) -> TailFit:
    """Average eps and alpha over the ``k`` best candidates within ``r`` of the argmin."""
    if k < 1:
        raise InvalidParam("k must be >= 1")
    x, g, stat, alpha = _prepare(samples, method, grid)
    if r is None:
        r = 0.1 * float(g[-1] - g[0])
    if r < 0:
        raise InvalidParam("r must be non-negative")
    j = int(np.argmin(stat))
    centre = g[j]
    dist = np.abs(g - centre)
    cand = np.flatnonzero((dist <= r) & np.isfinite(stat))
    # best statistic first, then nearest to the centre, then smaller eps
    order = np.lexsort((g[cand], dist[cand], stat[cand]))
    pick = cand[order[:k]]
    eps_n = float(np.mean(g[pick]))
    label = "KuiperNbhd" if method == "Kuiper" else method + "Nbhd"
    return TailFit(eps_n, float(np.mean(alpha[pick])), label, int(np.sum(x >= eps_n)),
                   float(np.mean(stat[pick])))


# --- calibration data


def calibration_tail_mass(alpha: float, eps: float) -> float:
    body = eps / alpha * -math.expm1(-alpha)
    return 1.0 / (1.0 + body)


def generate_calibration_samples(n: int, alpha: float, eps: float,
                                 rng: np.random.Generator) -> np.ndarray:
    """Draws from the Pareto tail glued to an ``exp(-alpha x / eps)`` body on [0, eps).

    The unnormalised tail has mass 1 and the body ``eps/alpha (1 - e^-alpha)``.
    """
    if n < 1:
        raise InvalidParam("n must be >= 1")
    if not 0 < alpha <= 1e3 or eps <= 0:
        raise InvalidParam("need 0 < alpha <= 1e3 and eps > 0")
    in_tail = rng.random(n) < calibration_tail_mass(alpha, eps)
    u = rng.random(n)
    tail = eps * (1.0 - u) ** (-1.0 / alpha)
    # inverse CDF of the truncated exponential on [0, eps)
    body = -eps / alpha * np.log1p(u * np.expm1(-alpha))
    return np.where(in_tail, tail, body)
