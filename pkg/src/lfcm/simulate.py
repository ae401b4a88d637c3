"""Synthetic trajectories: the daily routine generator, model-driven simulation,
interpolation onto common time grids and random subsampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DeltaSeries, Trajectory
from .errors import EmptyGrid, InvalidParam

@dataclass(frozen=True)
class Stay:
    name: str
    center: tuple[float, float]
    start_min: float
    end_min: float
    sigma: float
    every_min: float


@dataclass(frozen=True)
class RoutineConfig:
    """Daily home / work / public routine.

    Times are minutes after midnight.  Stays emit a fix every ``every_min``
    minutes starting at the stay's start; travel legs fill the gaps between
    consecutive stays with one fix per ``travel_every_min``.
    """

    stays: tuple[Stay, ...] = (
        Stay("home", (0.0, 0.0), 0.0, 520.0, 0.1, 10.0),
        Stay("work", (1.0, 1.0), 540.0, 1020.0, 0.1, 10.0),
        Stay("public", (1.0, 0.0), 1035.0, 1425.0, 0.2, 5.0),
    )
    travel_every_min: float = 1.0
    days: int = 1

    def __post_init__(self):
        if self.days < 1 or self.travel_every_min <= 0:
            raise InvalidParam("days and travel cadence must be positive")
        prev_end = 0.0
        for s in self.stays:
            if s.every_min <= 0 or s.sigma < 0 or not s.start_min >= prev_end or not s.end_min > s.start_min:
                raise InvalidParam(f"bad stay {s.name}")
            prev_end = s.end_min
        if self.stays[0].start_min != 0.0 or prev_end > 1440.0:
            raise InvalidParam("schedule must cover one day starting at midnight")

    def legs(self):
        """Travel legs as (start_min, end_min, source, destination); the last one wraps to the first stay."""
        out = []
        for a, b in zip(self.stays, self.stays[1:] + self.stays[:1]):
            end = b.start_min if b is not self.stays[0] else 1440.0
            out.append((a.end_min, end, np.array(a.center), np.array(b.center)))
        return out


def simulate_routine(config: RoutineConfig, rng: np.random.Generator, return_phases: bool = False):
    """Simulate the routine; timestamps in seconds from midnight of day one.

    Stay fixes are independent N(center, sigma^2 I) draws, travel fixes are
    independent uniform positions on the straight line between the two key
    locations.

    Returns
    -------
    Trajectory, or (Trajectory, phases) where ``phases`` holds the stay name
    or ``"travel"`` for every fix.
    """
    ts, xs, ph = [], [], []
    legs = config.legs()
    for day in range(config.days):
        base = day * 1440.0
        for k, s in enumerate(config.stays):
            m = np.arange(s.start_min, s.end_min, s.every_min)
            ts.append(base + m)
            xs.append(np.asarray(s.center) + s.sigma * rng.standard_normal((m.size, 2)))
            ph += [s.name] * m.size
            t0, t1, src, dst = legs[k]
            m = np.arange(t0, t1, config.travel_every_min)
            u = rng.random(m.size)
            ts.append(base + m)
            xs.append(src + u[:, None] * (dst - src))
            ph += ["travel"] * m.size
    traj = Trajectory(np.concatenate(ts) * 60.0, np.concatenate(xs), device_id="routine")
    return (traj, np.array(ph)) if return_phases else traj


def routine_mixture(config: RoutineConfig):
    """Generative stay density: Gaussians at the key locations weighted by stay time.

    Returns
    -------
    (weights, centers, covariances)
    """
    w = np.array([s.end_min - s.start_min for s in config.stays], dtype=float)
    centers = np.array([s.center for s in config.stays], dtype=float)
    covs = np.array([s.sigma ** 2 * np.eye(2) for s in config.stays])
    return w / w.sum(), centers, covs


def subsample(traj: Trajectory, fraction: float, rng: np.random.Generator) -> Trajectory:
    """Uniform random subset of ``round(fraction * n)`` fixes, time order kept."""
    if not 0 < fraction <= 1:
        raise InvalidParam("fraction must lie in (0, 1]")
    n = len(traj)
    if fraction == 1:
        return traj
    k = max(1, int(round(fraction * n)))
    return traj.subset(np.sort(rng.choice(n, size=k, replace=False)))


@dataclass(frozen=True)
class GenerativeParams:
    """Plug-in parameters of the jump / Brownian mixture.

    Drifts and dispersions are per ``time_unit`` seconds, region centers are
    absolute positions, ``alpha`` and ``eps`` describe jump length per time unit.
    """

    weights: np.ndarray
    drifts: np.ndarray
    dispersions: np.ndarray
    jump_prob: float
    return_prob: float
    region_centers: np.ndarray
    region_covs: np.ndarray
    region_weights: np.ndarray
    alpha: float
    eps: float
    vm_mean: float = 0.0
    vm_conc: float = 1.0
    time_unit: float = 60.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise InvalidParam("group weights must form a simplex")
        if not (0 <= self.jump_prob <= 1 and 0 <= self.return_prob <= 1):
            raise InvalidParam("probabilities must lie in [0, 1]")
        if self.alpha <= 0 or self.eps <= 0 or self.vm_conc < 0 or self.time_unit <= 0:
            raise InvalidParam("alpha, eps and time_unit must be positive")
        for S in np.asarray(self.dispersions):
            if np.any(np.linalg.eigvalsh(S) < 0):
                raise InvalidParam("dispersions must be positive semidefinite")
        rw = np.asarray(self.region_weights, dtype=float)
        if rw.size and (np.any(rw < 0) or not math.isclose(rw.sum(), 1.0, abs_tol=1e-9)):
            raise InvalidParam("region weights must form a simplex")
        if self.return_prob > 0 and self.jump_prob > 0 and rw.size == 0:
            raise InvalidParam("returns need at least one region")


def params_from_scan(deltas: DeltaSeries, scan, hyper) -> GenerativeParams:
    """Posterior-mean plug-in parameters given one posterior scan."""
    from .mcmc.chain import scan_regions

    s = scan.state
    b = s.b.astype(bool)
    n, nb, ne = len(b), int(b.sum()), int(s.eta.sum())
    counts = np.bincount(s.c[~b], minlength=s.n_groups).astype(float)
    weights = (counts + hyper.dir_conc) / (counts.sum() + s.n_groups * hyper.dir_conc)
    b1, b2 = hyper.jump_beta
    r1, r2 = hyper.return_beta
    regs = scan_regions(deltas, scan)
    zc = np.array([np.sum(s.z[s.eta == 1] == r.start) for r in regs], dtype=float)
    xi = (zc + hyper.region_conc) / (zc.sum() + len(regs) * hyper.region_conc)
    vp, ze = hyper.pareto_gamma
    ratio = deltas.ratio[b]
    alpha = (vp + nb) / (ze + float(np.sum(np.log(ratio / hyper.eps))))
    th = deltas.theta[b]
    C = hyper.vm_r0 * math.cos(hyper.vm_mu0) + float(np.sum(np.cos(th)))
    S = hyper.vm_r0 * math.sin(hyper.vm_mu0) + float(np.sum(np.sin(th)))
    return GenerativeParams(
        weights=weights,
        drifts=np.array([g.drift for g in scan.groups]),
        dispersions=np.array([g.dispersion for g in scan.groups]),
        jump_prob=(b1 + nb) / (b1 + b2 + n),
        return_prob=(r1 + ne) / (r1 + r2 + nb),
        region_centers=np.array([r.mu_tilde for r in regs]),
        region_covs=np.array([r.Sigma_z for r in regs]),
        region_weights=xi,
        alpha=alpha,
        eps=hyper.eps,
        vm_mean=math.atan2(S, C),
        vm_conc=hyper.vm_tau,
        time_unit=deltas.time_unit,
    )


def _step(params: GenerativeParams, x: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One displacement over ``dt`` time units from position ``x``."""
    if rng.random() >= params.jump_prob:
        g = rng.choice(len(params.weights), p=params.weights)
        L = np.linalg.cholesky(params.dispersions[g] * dt + 1e-300 * np.eye(2))
        return x + params.drifts[g] * dt + L @ rng.standard_normal(2)
    if params.region_weights.size and rng.random() < params.return_prob:
        z = rng.choice(len(params.region_weights), p=params.region_weights)
        return rng.multivariate_normal(params.region_centers[z], params.region_covs[z])
    ratio = params.eps * (1.0 - rng.random()) ** (-1.0 / params.alpha)
    ang = rng.vonmises(params.vm_mean, params.vm_conc) if params.vm_conc > 0 else rng.uniform(-np.pi, np.pi)
    return x + ratio * dt * np.array([math.cos(ang), math.sin(ang)])


def simulate_from_params(params: GenerativeParams, timestamps, start, rng: np.random.Generator,
                         device_id: str = "simulated") -> Trajectory:
    """Sequential draw of one position per timestamp starting from ``start`` at ``timestamps[0]``.

    Timestamps are in seconds; every step picks a Brownian move for a group
    drawn by weight, a return landing in a region, or a Pareto-length jump.
    """
    t = np.asarray(timestamps, dtype=float)
    if t.size == 0:
        raise EmptyGrid("no timestamps")
    if np.any(np.diff(t) <= 0):
        raise InvalidParam("timestamps must be strictly increasing")
    xy = np.empty((t.size, 2))
    xy[0] = start
    for i in range(1, t.size):
        xy[i] = _step(params, xy[i - 1], (t[i] - t[i - 1]) / params.time_unit, rng)
    return Trajectory(t, xy, device_id=device_id)


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.size == 0:
        raise EmptyGrid("empty time grid")
    if np.any(np.diff(g) <= 0):
        raise InvalidParam("grid must be strictly increasing")
    return g


def linear_interpolate_extrapolate(traj: Trajectory, grid) -> Trajectory:
    """Piecewise-linear interpolation, held constant outside the observed span."""
    g = _check_grid(grid)
    xy = np.column_stack([np.interp(g, traj.t, traj.xy[:, k]) for k in range(2)])
    return Trajectory(g, xy, device_id=traj.device_id)


def interpolate_extrapolate(traj: Trajectory, scan, params: GenerativeParams, grid,
                            rng: np.random.Generator) -> Trajectory:
    """Conditional sample path on ``grid`` given one posterior scan.

    Gaps between fixes of a Brownian segment are filled with a Brownian
    bridge using the group's dispersion.  Across a jump the path stays at the
    origin until a uniformly drawn jump instant.  Before the first and after
    the last fix the path is simulated from ``params``, backwards in time for
    the leading part.
    """
    g = _check_grid(grid)
    t = traj.t
    xy = traj.xy
    s = scan.state
    if len(s.b) != len(t) - 1:
        raise InvalidParam("scan does not match the trajectory")
    out = np.empty((g.size, 2))
    tu = params.time_unit
    idx = np.searchsorted(t, g, side="right") - 1  # fix at or before each grid time
    # leading part, simulated backwards from the first fix
    lead = np.flatnonzero(idx < 0)
    if lead.size:
        back = [xy[0]]
        prev = t[0]
        for k in lead[::-1]:
            back.append(_step(params, back[-1], (prev - g[k]) / tu, rng))
            prev = g[k]
        out[lead[::-1]] = np.array(back[1:])
    trail = np.flatnonzero(idx >= len(t) - 1)
    # grid points exactly on the last fix take it; later ones are simulated forward
    cur, prev = xy[-1], t[-1]
    for k in trail:
        if g[k] == t[-1]:
            out[k] = xy[-1]
            continue
        cur = _step(params, cur, (g[k] - prev) / tu, rng)
        prev = g[k]
        out[k] = cur
    inside = np.flatnonzero((idx >= 0) & (idx < len(t) - 1))
    # group grid points by gap and fill each gap left to right
    for i in np.unique(idx[inside]):
        ks = inside[idx[inside] == i]
        t0, t1 = t[i], t[i + 1]
        a, b = xy[i], xy[i + 1]
        if s.b[i]:
            tj = rng.uniform(t0, t1)
            for k in ks:
                out[k] = a if g[k] < tj or g[k] == t0 else b
            continue
        S = params.dispersions[s.c[i]]
        L = np.linalg.cholesky(S + 1e-300 * np.eye(2))
        x, tc = a, t0
        for k in ks:
            if g[k] == t0:
                out[k] = a
                continue
            # bridge from (tc, x) to (t1, b) evaluated at g[k]
            u = (g[k] - tc) / (t1 - tc)
            var = (g[k] - tc) * (t1 - g[k]) / (t1 - tc) / tu
            x = x + u * (b - x) + math.sqrt(var) * (L @ rng.standard_normal(2))
            tc = g[k]
            out[k] = x
    return Trajectory(g, out, device_id=traj.device_id)
