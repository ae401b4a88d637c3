"""Reference evaluation of the collapsed joint density, assembled term by term.

This is the slow, obviously-correct path.  The sampler keeps running
sufficient statistics instead and is checked against this function.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .. import distributions as D
from ..core import DeltaSeries
from .hyper import Hyperparams
from .state import LatentState


def brownian_obs(deltas: DeltaSeries, i: int) -> D.WeightedGaussObs:
    dt = float(deltas.dt[i])
    return D.WeightedGaussObs(deltas.dx[i], dt * np.eye(2), np.eye(2) / dt)


def return_obs(deltas: DeltaSeries, i: int, start: int, end: int) -> D.WeightedGaussObs:
    """Landing point of jump ``i`` against the average position of segment [start, end]."""
    T = float(deltas.t[end + 1] - deltas.t[start])
    x = deltas.loc[i + 1] - deltas.loc[start]
    return D.WeightedGaussObs(x, 0.5 * T * np.eye(2), (3.0 / T) * np.eye(2))


def group_observations(deltas: DeltaSeries, state: LatentState) -> list[list[D.WeightedGaussObs]]:
    segs = {s: (e, g) for s, e, g in state.segments()}
    obs: list[list[D.WeightedGaussObs]] = [[] for _ in range(state.n_groups)]
    for i in range(len(deltas)):
        if not state.b[i]:
            obs[state.c[i]].append(brownian_obs(deltas, i))
    for i in np.flatnonzero(state.eta):
        s = int(state.z[i])
        e, g = segs[s]
        obs[g].append(return_obs(deltas, int(i), s, e))
    return obs


def log_joint_terms(deltas: DeltaSeries, state: LatentState, hyper: Hyperparams) -> dict[str, float]:
    n = len(deltas)
    b = np.asarray(state.b, dtype=bool)
    eta = np.asarray(state.eta, dtype=bool)
    K = state.n_groups
    counts = np.bincount(state.c[~b], minlength=K)
    n_b = int(b.sum())
    n_eta = int(eta.sum())
    segs = state.segments()
    z_counts = [int(np.sum(state.z[eta] == s)) for s, _, _ in segs]
    ratio = deltas.ratio[b]
    theta = deltas.theta[b]
    out = {
        "count_prior": float(hyper.log_count_prior()[K]),
        "groups": D.log_dirichlet_multinomial(counts, hyper.dir_conc),
        "jump_flag": D.log_beta_bernoulli(n_b, n, *hyper.jump_beta),
        "return_flag": D.log_beta_bernoulli(n_eta, n_b, *hyper.return_beta),
        "regions": D.log_dirichlet_multinomial(z_counts, hyper.region_conc) if segs else 0.0,
        "jump_length": D.log_gamma_pareto_marginal(ratio, *hyper.pareto_gamma, hyper.eps),
        "jump_angle": D.von_mises_log_marginal(theta, hyper.vm_tau, hyper.vm_mu0, hyper.vm_r0),
        # densities on (ratio, angle) moved to displacement space
        "jacobian": -float(np.sum(np.log(deltas.dt[b] * deltas.dr[b]))),
        "brownian": float(sum(D.log_marginal_nw(o, hyper.nw) for o in group_observations(deltas, state))),
    }
    return out


def log_joint(deltas: DeltaSeries, state: LatentState, hyper: Hyperparams) -> float:
    """Log of the collapsed joint density of data and discrete latents (labelled groups)."""
    return float(sum(log_joint_terms(deltas, state, hyper).values()))


def group_posteriors(deltas: DeltaSeries, state: LatentState, hyper: Hyperparams) -> list[D.NWPosterior]:
    return [D.nw_posterior(o, hyper.nw) for o in group_observations(deltas, state)]
