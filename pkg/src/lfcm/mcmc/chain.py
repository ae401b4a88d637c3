"""Chain driver, single-kernel entry points and posterior summaries."""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.stats import chi2

from ..core import DeltaSeries
from ..errors import EmptyChain, InvalidParam, NoRegions, TooShort
from .engine import Engine
from .hyper import Hyperparams
from .state import ActivityRegion, LatentState, PosteriorScan, segments_of

log = logging.getLogger(__name__)


def init_state(deltas: DeltaSeries, hyper: Hyperparams, rng: np.random.Generator) -> LatentState:
    """Random feasible starting state.

    Eligible deltas jump with probability ``hyper.init_jump_prob``, every
    non-jump gets a uniform group among ``min(init_groups, max_groups)`` and
    half of the jumps become returns to a uniformly chosen earlier segment.
    """
    n = len(deltas)
    if n < 2:
        raise TooShort("need at least two deltas")
    elig = deltas.ratio >= hyper.eps
    b = (elig & (rng.random(n) < hyper.init_jump_prob)).astype(np.int8)
    if b.all():
        b[int(rng.integers(n))] = 0
    k0 = min(hyper.init_groups, hyper.max_groups)
    raw = rng.integers(k0, size=n)
    used = sorted(set(raw[b == 0].tolist()))
    remap = {g: i for i, g in enumerate(used)}
    c = np.array([remap[g] if not bj else -1 for g, bj in zip(raw.tolist(), b)], dtype=np.int64)
    eta = np.zeros(n, dtype=np.int8)
    z = np.full(n, -1, dtype=np.int64)
    starts = np.array([s for s, _, _ in segments_of(b, c)])
    coins = rng.random(n) < 0.5
    for i in np.flatnonzero(b):
        causal = starts[starts < i]
        if coins[i] and causal.size:
            eta[i] = 1
            z[i] = causal[int(rng.integers(causal.size))]
    return LatentState(b, c, eta, z, len(used))


def _single(kernel):
    def run(deltas: DeltaSeries, state: LatentState, hyper: Hyperparams, rng: np.random.Generator) -> LatentState:
        eng = Engine(deltas, hyper, state)
        kernel(eng, rng)
        return eng.state()

    return run


update_activity_groups = _single(Engine.update_groups)
update_activity_groups.__doc__ = "Gibbs-sample the group label of every segment in turn."
absorb_eject = _single(Engine.absorb_eject)
absorb_eject.__doc__ = "One Metropolis-Hastings absorb or eject proposal on the number of groups."
update_jump_indicators = _single(Engine.update_jumps)
update_jump_indicators.__doc__ = "Gibbs-sample each delta's full label block (jump flag with its companions)."
update_return_indicators = _single(Engine.update_returns)
update_return_indicators.__doc__ = "Gibbs-sample (eta, z) jointly for every jump."
update_region_assignments = _single(Engine.update_regions)
update_region_assignments.__doc__ = "Gibbs-sample the target region of every return."


def run_chain(deltas: DeltaSeries, hyper: Hyperparams, sweeps: int, burn_in: int = 0, thin: int = 1,
              seed: int = 0, init: Optional[LatentState] = None, debug: bool = False) -> list[PosteriorScan]:
    """Run one chain and return the thinned post-burn-in scans.

    Parameters
    ----------
    sweeps : int
        Total number of sweeps, burn-in included.
    burn_in, thin : int
        Sweep ``s`` (1-based) is recorded when ``s > burn_in`` and
        ``(s - burn_in) % thin == 0``.
    seed : int
        Seeds the chain's own generator; identical inputs give identical scans.
    debug : bool
        Check the cached log joint against the reference after every move.
    """
    if not sweeps > burn_in >= 0 or thin < 1:
        raise InvalidParam("need sweeps > burn_in >= 0 and thin >= 1")
    rng = np.random.default_rng(seed)
    state = init if init is not None else init_state(deltas, hyper, rng)
    eng = Engine(deltas, hyper, state.copy(), debug=debug)
    if debug:
        eng.check()
    out = []
    for s in range(1, sweeps + 1):
        eng.sweep(rng)
        if s > burn_in and (s - burn_in) % thin == 0:
            lj = eng.log_joint()
            if not np.isfinite(lj):
                raise AssertionError("non-finite log joint in a recorded scan")
            out.append(PosteriorScan(eng.state(), lj, s, eng.group_summaries(), seed))
    return out


def extract_map(chain: Sequence[PosteriorScan]) -> PosteriorScan:
    """Scan with the largest log joint, the earliest one on ties."""
    if not len(chain):
        raise EmptyChain("chain has no scans")
    best = 0
    for i, sc in enumerate(chain):
        if sc.log_joint > chain[best].log_joint:
            best = i
    return chain[best]


def scan_regions(deltas: DeltaSeries, scan: PosteriorScan) -> list[ActivityRegion]:
    """Activity regions (one per segment) under the scan's group posteriors.

    ``T_z`` is reported in seconds; the center and covariance use the
    series' own time unit, which the drift and dispersion are expressed in.
    """
    segs = scan.state.segments()
    if not segs:
        raise NoRegions("scan has no Brownian segments")
    per = [0] * scan.state.n_groups
    T = [float(deltas.t[e + 1] - deltas.t[s]) for s, e, _ in segs]
    total = sum(T)
    out = []
    for (s, e, g), Tz in zip(segs, T):
        gs = scan.groups[g]
        mu = deltas.loc[s] + 0.5 * Tz * gs.drift
        out.append(ActivityRegion(mu, Tz / 3.0 * gs.dispersion, Tz * deltas.time_unit, (g, per[g]), s, e,
                                  Tz / total))
        per[g] += 1
    return out


def ellipse_points(center, cov, level: float = 0.95, n: int = 64) -> np.ndarray:
    """Boundary of the chi-square(2) ``level`` contour of N(center, cov)."""
    r = np.sqrt(chi2.ppf(level, 2))
    w, V = np.linalg.eigh(np.asarray(cov, dtype=float))
    ang = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    circ = np.stack([np.cos(ang), np.sin(ang)])
    return (np.asarray(center, dtype=float)[:, None] + r * (V * np.sqrt(np.maximum(w, 0))) @ circ).T


def region_ellipses(deltas: DeltaSeries, scan: PosteriorScan, level: float = 0.95):
    """Brownian-bridge confidence ellipses at the midpoint of every within-segment pair.

    Between two fixes ``dt`` apart the bridge variance peaks at the midpoint
    with ``dt / 4 * Sigma*``.  A segment of one delta yields one ellipse.

    Returns
    -------
    list of (center, covariance, boundary) with ``boundary`` an (m, 2) array.
    """
    if not 0 < level < 1:
        raise InvalidParam("level must lie in (0, 1)")
    segs = scan.state.segments()
    if not segs:
        raise NoRegions("scan has no Brownian segments")
    out = []
    for s, e, g in segs:
        S = scan.groups[g].dispersion
        for i in range(s, e + 1):
            dt = float(deltas.dt[i])
            center = 0.5 * (deltas.loc[i] + deltas.loc[i + 1])
            cov = 0.25 * dt * S
            out.append((center, cov, ellipse_points(center, cov, level)))
    return out
