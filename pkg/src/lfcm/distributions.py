"""Densities and integrated marginals used by the collapsed sampler.

Everything is in log space.  The Normal-Wishart pieces are specialised to
two dimensions; the Wishart is parameterised so that its density is
proportional to ``|L|^((dof - 2) / 2) exp(-tr(W^-1 L) / 2)``, i.e. a
standard Wishart with ``dof + 1`` degrees of freedom.  This keeps the
default ``dof = 1/2`` proper in 2-D.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import (BelowThreshold, DomainError, EmptyInput, InvalidParam,
                     NoConvergence, SingularMatrix)

LOG_2PI = math.log(2 * math.pi)
LOG_PI = math.log(math.pi)


# ---------------------------------------------------------------- Pareto


def pareto_log_density(x, alpha: float, eps: float):
    """Log of ``alpha eps^alpha x^-(alpha+1)`` on ``x >= eps``, ``-inf`` below."""
    if alpha <= 0 or eps <= 0:
        raise InvalidParam("alpha and eps must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.log(alpha) + alpha * math.log(eps) - (alpha + 1) * np.log(x)
    out = np.where(x >= eps, out, -np.inf)
    return out if out.ndim else float(out)


def pareto_cdf(x, alpha: float, eps: float):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= eps, 1.0 - (eps / np.maximum(x, eps)) ** alpha, 0.0)
    return out if out.ndim else float(out)


def pareto_sample(n: int, alpha: float, eps: float, rng: np.random.Generator) -> np.ndarray:
    return eps * rng.random(n) ** (-1.0 / alpha)


def pareto_mle_alpha(samples, eps: float) -> tuple[float, float]:
    """Closed-form tail index MLE and its asymptotic standard error.

    Returns ``(alpha_hat, se)`` with ``alpha_hat = n / sum(log(x / eps))`` and
    ``se = (alpha_hat - 1) / sqrt(n)``.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptyInput("no samples")
    if np.any(x < eps):
        raise BelowThreshold("samples below eps")
    s = float(np.sum(np.log(x / eps)))
    if s <= 0:
        raise DomainError("all samples equal eps; MLE undefined")
    a = x.size / s
    return a, (a - 1.0) / math.sqrt(x.size)


def _tpl_log_norm(alpha: float, beta: float, eps: float) -> float:
    """log of int_eps^inf x^-(alpha+1) exp(-beta x) dx, by quadrature."""
    if beta == 0.0:
        if alpha <= 0:
            return math.inf
        return -alpha * math.log(eps) - math.log(alpha)
    # x = eps * u; pull out the value at the lower limit for scaling
    c = beta * eps
    val, _ = integrate.quad(lambda u: u ** (-(alpha + 1)) * math.exp(-c * (u - 1.0)),
                            1.0, np.inf, limit=200)
    if not val > 0:
        return math.inf
    return -alpha * math.log(eps) - c + math.log(val)


def truncated_powerlaw_loglik(x, alpha: float, kappa_cut: float, eps: float) -> float:
    x = np.asarray(x, dtype=float)
    beta = 0.0 if math.isinf(kappa_cut) else 1.0 / kappa_cut
    lz = _tpl_log_norm(alpha, beta, eps)
    if not math.isfinite(lz):
        return -math.inf
    return float(np.sum(-(alpha + 1) * np.log(x) - beta * x) - x.size * lz)


def truncated_powerlaw_fit(samples, eps: float) -> tuple[float, float]:
    """MLE of ``(alpha, kappa_cut)`` for density ``~ x^-(alpha+1) exp(-x / kappa_cut)``.

    The exponent shares the Pareto convention, so ``kappa_cut -> inf``
    recovers the plain tail index.  The normaliser is evaluated by
    quadrature at every likelihood call.
    """
    x = np.asarray(samples, dtype=float)
    x = x[x >= eps]
    if x.size < 10:
        raise EmptyInput("need at least 10 samples >= eps")
    scale = float(np.mean(x))

    def nll(p):
        a, lb = p
        beta = math.exp(lb) / scale
        ll = truncated_powerlaw_loglik(x, a, 1.0 / beta, eps)
        return -ll if math.isfinite(ll) else 1e300

    a0, _ = pareto_mle_alpha(x, eps)
    best = None
    for lb0 in (-8.0, -3.0, 0.0):
        res = optimize.minimize(nll, x0=[a0, lb0], method="Nelder-Mead",
                                options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun) or best.fun >= 1e300:
        raise NoConvergence("truncated power-law fit failed")
    a, lb = best.x
    # the pure power law is the beta -> 0 boundary; compare explicitly
    if a0 > 0:
        pure = -truncated_powerlaw_loglik(x, a0, math.inf, eps)
        if pure <= best.fun:
            return float(a0), math.inf
    return float(a), float(scale / math.exp(lb))


# ---------------------------------------------------------------- von Mises


def _i0_series(k: float) -> float:
    q = 0.25 * k * k
    term = 1.0
    total = 1.0
    j = 0
    while True:
        j += 1
        term *= q / (j * j)
        total += term
        if term < 1e-17 * total:
            return total


def _log_i0_asymptotic(k: float) -> float:
    # e^k / sqrt(2 pi k) * sum_j ((2j-1)!!)^2 / (j! (8k)^j)
    total = 1.0
    term = 1.0
    for j in range(1, 60):
        nxt = term * (2 * j - 1) ** 2 / (j * 8.0 * k)
        if nxt > term:
            break
        term = nxt
        total += term
        if term < 1e-17 * total:
            break
    return k - 0.5 * math.log(2 * math.pi * k) + math.log(total)


def bessel_i0(kappa: float) -> float:
    """Modified Bessel function of the first kind, order zero."""
    if kappa < 0:
        raise DomainError("kappa must be non-negative")
    if kappa < 15.0:
        return _i0_series(kappa)
    return math.exp(_log_i0_asymptotic(kappa))


def log_bessel_i0(kappa: float) -> float:
    if kappa < 0:
        raise DomainError("kappa must be non-negative")
    if kappa < 15.0:
        return math.log(_i0_series(kappa))
    return _log_i0_asymptotic(kappa)


def von_mises_log_density(theta, mu_dir: float, conc: float):
    if conc < 0:
        raise InvalidParam("concentration must be non-negative")
    theta = np.asarray(theta, dtype=float)
    out = conc * np.cos(theta - mu_dir) - (LOG_2PI + log_bessel_i0(conc))
    return out if out.ndim else float(out)


def von_mises_posterior(angles, prior: tuple[float, float, float]) -> tuple[float, float, float]:
    """Conjugate update of ``(c, mu0, R0)`` by the resultant-vector rule."""
    c, mu0, r0 = prior
    if r0 < 0:
        raise InvalidParam("R0 must be non-negative")
    a = np.asarray(angles, dtype=float).reshape(-1)
    if a.size == 0:
        return c, mu0, r0
    cx = r0 * math.cos(mu0) + float(np.sum(np.cos(a)))
    sy = r0 * math.sin(mu0) + float(np.sum(np.sin(a)))
    rn = math.hypot(cx, sy)
    mun = math.atan2(sy, cx) % (2 * math.pi)
    return c + a.size, mun, rn


def von_mises_log_marginal_from_sums(n: int, sum_cos: float, sum_sin: float,
                                     tau: float = 1.0, mu0: float = 0.0, r0: float = 1.0) -> float:
    """Angles ~ VM(mu, tau) with prior density on mu ~ exp(tau R0 cos(mu - mu0)), mu integrated."""
    if n == 0:
        return 0.0
    rn = math.hypot(r0 * math.cos(mu0) + sum_cos, r0 * math.sin(mu0) + sum_sin)
    return (-n * (LOG_2PI + log_bessel_i0(tau))
            + log_bessel_i0(tau * rn) - log_bessel_i0(tau * r0))


def von_mises_log_marginal(angles, tau: float = 1.0, mu0: float = 0.0, r0: float = 1.0) -> float:
    a = np.asarray(angles, dtype=float).reshape(-1)
    return von_mises_log_marginal_from_sums(a.size, float(np.sum(np.cos(a))),
                                            float(np.sum(np.sin(a))), tau, mu0, r0)


# ---------------------------------------------------------------- discrete marginals


def log_bivariate_gamma(a: float) -> float:
    if a <= 0.5:
        raise DomainError("bivariate gamma needs a > 1/2")
    return 0.5 * LOG_PI + math.lgamma(a) + math.lgamma(a - 0.5)


def log_dirichlet_multinomial(counts: Sequence[float], conc: Sequence[float] | float) -> float:
    """log of prod G(a_k + n_k) / G(n + sum a) * G(sum a) / prod G(a_k)."""
    n = np.asarray(counts, dtype=float)
    a = np.broadcast_to(np.asarray(conc, dtype=float), n.shape)
    if n.size == 0:
        return 0.0
    sa = float(a.sum())
    return float(math.lgamma(sa) - math.lgamma(n.sum() + sa) + np.sum(gammaln(a + n) - gammaln(a)))


def log_beta_bernoulli(n_success: int, n_total: int, b1: float, b2: float) -> float:
    if not 0 <= n_success <= n_total:
        raise InvalidParam("need 0 <= n_success <= n_total")
    return (math.lgamma(b1 + n_success) + math.lgamma(b2 + n_total - n_success)
            - math.lgamma(b1 + b2 + n_total)
            + math.lgamma(b1 + b2) - math.lgamma(b1) - math.lgamma(b2))


def log_gamma_pareto_from_sums(n_b: int, sum_log_excess: float, sum_log_ratio: float,
                               varpi: float, zeta: float) -> float:
    if n_b == 0:
        return 0.0
    return (math.lgamma(varpi + n_b) - (varpi + n_b) * math.log(zeta + sum_log_excess)
            - math.lgamma(varpi) + varpi * math.log(zeta) - sum_log_ratio)


def log_gamma_pareto_marginal(jump_ratios, varpi: float, zeta: float, eps: float) -> float:
    """Pareto likelihood of jump ratios with ``alpha ~ Gamma(varpi, zeta)`` integrated out."""
    x = np.asarray(jump_ratios, dtype=float).reshape(-1)
    if x.size == 0:
        return 0.0
    if np.any(x < eps):
        raise BelowThreshold("jump ratio below eps")
    lx = np.log(x)
    return log_gamma_pareto_from_sums(x.size, float(np.sum(lx - math.log(eps))), float(np.sum(lx)),
                                      varpi, zeta)


# ---------------------------------------------------------------- Normal-Wishart


@dataclass(frozen=True)
class NWHyper:
    kappa: float = 0.01
    wishart_dof: float = 0.5
    W: np.ndarray = field(default_factory=lambda: 0.5 * np.eye(2))

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        object.__setattr__(self, "W", W)
        if self.kappa <= 0:
            raise InvalidParam("kappa must be positive")
        if self.wishart_dof + 1 <= 1:
            raise InvalidParam("wishart_dof + 1 must exceed dimension - 1")
        if not np.allclose(W, W.T) or np.any(np.linalg.eigvalsh(W) <= 0):
            raise InvalidParam("W must be symmetric positive definite")

    @property
    def W_inv(self) -> np.ndarray:
        return np.linalg.inv(self.W)


@dataclass(frozen=True)
class WeightedGaussObs:
    """``x ~ N(D mu, (A^1/2 Lambda A^1/2)^-1)``."""

    x: np.ndarray
    D: np.ndarray
    A: np.ndarray


@dataclass(frozen=True)
class NWPosterior:
    K_n: np.ndarray
    mu_n: np.ndarray
    nu_n: float
    W_n_inv: np.ndarray

    @property
    def drift(self) -> np.ndarray:
        return self.mu_n

    @property
    def dispersion(self) -> np.ndarray:
        """Plug-in covariance ``E[Lambda]^-1``."""
        return self.W_n_inv / (self.nu_n + 1.0)


def _sqrtm_spd(A: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    if np.any(w <= 0):
        raise SingularMatrix("A is not positive definite")
    return (V * np.sqrt(w)) @ V.T


def _reduce_obs(obs: Sequence[WeightedGaussObs]):
    """Sufficient statistics (N, sum b^2, sum b y, sum y y', sum 1/2 log|A|)."""
    sbb = 0.0
    sby = np.zeros(2)
    syy = np.zeros((2, 2))
    sld = 0.0
    for o in obs:
        A = np.asarray(o.A, dtype=float)
        D = np.asarray(o.D, dtype=float)
        Ah = _sqrtm_spd(A)
        B = Ah @ D
        b = 0.5 * (B[0, 0] + B[1, 1])
        if not np.allclose(B, b * np.eye(2), rtol=1e-10, atol=1e-12 * max(1.0, abs(b))):
            raise InvalidParam("A^1/2 D must be a multiple of the identity for a conjugate update")
        y = Ah @ np.asarray(o.x, dtype=float)
        sbb += b * b
        sby += b * y
        syy += np.outer(y, y)
        sld += 0.5 * math.log(np.linalg.det(A))
    return len(obs), sbb, sby, syy, sld


def nw_posterior(obs: Sequence[WeightedGaussObs], prior: NWHyper) -> NWPosterior:
    n, sbb, sby, syy, _ = _reduce_obs(obs)
    return _posterior_from_stats(n, sbb, sby, syy, prior.kappa, prior.wishart_dof, prior.W_inv)


def _posterior_from_stats(n, sbb, sby, syy, kappa, dof, W_inv) -> NWPosterior:
    k = kappa + sbb
    m = np.asarray(sby, dtype=float) / k
    Wn = W_inv + syy - k * np.outer(m, m)
    Wn = 0.5 * (Wn + Wn.T)
    if np.linalg.eigvalsh(Wn)[0] <= 0:
        raise SingularMatrix("posterior scale matrix is not positive definite")
    return NWPosterior(K_n=k * np.eye(2), mu_n=m, nu_n=dof + n, W_n_inv=Wn)


def nw_log_marginal_from_stats(n: int, sbb: float, sbx: float, sby: float,
                               sxx: float, sxy: float, syy: float, sld: float,
                               kappa: float, dof: float, wi00: float, wi01: float, wi11: float,
                               prior_const: float) -> float:
    """Scalar fast path of :func:`log_marginal_nw` from sufficient statistics.

    ``prior_const`` is ``(dof + 1) / 2 * log|W^-1| - log Gamma_2((dof + 1) / 2)``.
    """
    if n == 0:
        return 0.0
    k = kappa + sbb
    a = wi00 + sxx - sbx * sbx / k
    b = wi01 + sxy - sbx * sby / k
    c = wi11 + syy - sby * sby / k
    det = a * c - b * b
    if det <= 0:
        raise SingularMatrix("posterior scale matrix is not positive definite")
    h = 0.5 * (dof + n + 1)
    return (-n * LOG_PI + 0.5 * LOG_PI + math.lgamma(h) + math.lgamma(h - 0.5)
            - h * math.log(det) + math.log(kappa / k) + sld + prior_const)


def nw_prior_const(prior: NWHyper) -> float:
    h0 = 0.5 * (prior.wishart_dof + 1)
    return h0 * math.log(np.linalg.det(prior.W_inv)) - log_bivariate_gamma(h0)


def log_marginal_nw(obs: Sequence[WeightedGaussObs], prior: NWHyper) -> float:
    """Log evidence of weighted Gaussian observations under the Normal-Wishart prior.

    The drift and precision are integrated out exactly; zero observations
    give 0.
    """
    n, sbb, sby, syy, sld = _reduce_obs(obs)
    if n == 0:
        return 0.0
    Wi = prior.W_inv
    return nw_log_marginal_from_stats(n, sbb, sby[0], sby[1], syy[0, 0], syy[0, 1], syy[1, 1], sld,
                                      prior.kappa, prior.wishart_dof, Wi[0, 0], Wi[0, 1], Wi[1, 1],
                                      nw_prior_const(prior))


def log_student_t2(x, loc, shape_matrix, dof: float) -> float:
    """Bivariate Student-t log density with scale matrix ``shape_matrix``."""
    d = np.asarray(x, dtype=float) - np.asarray(loc, dtype=float)
    S = np.asarray(shape_matrix, dtype=float)
    q = float(d @ np.linalg.solve(S, d))
    return (math.lgamma(0.5 * (dof + 2)) - math.lgamma(0.5 * dof) - math.log(dof * math.pi)
            - 0.5 * math.log(np.linalg.det(S)) - 0.5 * (dof + 2) * math.log1p(q / dof))


def nw_log_predictive(x_new: WeightedGaussObs, posterior: NWPosterior) -> float:
    """Posterior predictive log density of one weighted observation."""
    Ah = _sqrtm_spd(np.asarray(x_new.A, dtype=float))
    B = Ah @ np.asarray(x_new.D, dtype=float)
    b = 0.5 * (B[0, 0] + B[1, 1])
    k = posterior.K_n[0, 0]
    y = Ah @ np.asarray(x_new.x, dtype=float)
    dof_eff = posterior.nu_n  # standard Wishart dof nu_n + 1, minus d - 1
    S = posterior.W_n_inv * (1 + b * b / k) / dof_eff
    return log_student_t2(y, b * posterior.mu_n, S, dof_eff) + 0.5 * math.log(np.linalg.det(np.asarray(x_new.A)))


# ---------------------------------------------------------------- count prior


def log_poisson_gamma(k: int, shape: float = 0.5, rate: float = 0.5) -> float:
    """log P(N = k) for N ~ Poisson(lambda), lambda ~ Gamma(shape, rate)."""
    return (shape * math.log(rate) - math.lgamma(shape) - math.lgamma(k + 1)
            + math.lgamma(k + shape) - (k + shape) * math.log(rate + 1))


def log_group_count_prior(max_groups: int, shape: float = 0.5, rate: float = 0.5) -> np.ndarray:
    """``log pi(k)`` for k = 1..max_groups, truncated and renormalised; index 0 unused."""
    vals = np.array([log_poisson_gamma(k, shape, rate) for k in range(1, max_groups + 1)])
    vals -= np.logaddexp.reduce(vals)
    return np.concatenate([[-np.inf], vals])
