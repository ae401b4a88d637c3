from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..distributions import NWHyper, log_group_count_prior
from ..errors import InvalidParam


@dataclass(frozen=True)
class Hyperparams:
    """Prior constants and sampler controls.

    ``eps`` is in the units of ``DeltaSeries.ratio`` (km per time unit).
    Defaults follow the standard prior table: Gamma(1/2, 1/2) on the
    Poisson rate of ``N_G``, Dir(1) group weights, Beta(2, 2) on the jump and
    return probabilities, Gamma(1/2, 1/2) on the Pareto index, a von Mises
    VM(0, 1) prior on the mean jump direction and NW(0, .01, 1/2, I/2) on
    the Brownian drift and precision.
    """

    eps: float = 0.1
    lambda_shape: float = 0.5
    lambda_rate: float = 0.5
    dir_conc: float = 1.0
    jump_beta: tuple[float, float] = (2.0, 2.0)
    return_beta: tuple[float, float] = (2.0, 2.0)
    pareto_gamma: tuple[float, float] = (0.5, 0.5)
    nw: NWHyper = field(default_factory=NWHyper)
    vm_mu0: float = 0.0
    vm_r0: float = 1.0
    vm_tau: float = 1.0
    region_conc: float = 1.0
    max_groups: int = 6
    eject_conc: float = 1.0
    init_jump_prob: float = 0.2
    init_groups: int = 2

    def __post_init__(self):
        pos = [self.eps, self.lambda_shape, self.lambda_rate, self.dir_conc, *self.jump_beta,
               *self.return_beta, *self.pareto_gamma, self.vm_tau, self.region_conc, self.eject_conc]
        if any(not v > 0 for v in pos):
            raise InvalidParam("hyperparameters must be positive")
        if self.vm_r0 < 0:
            raise InvalidParam("vm_r0 must be non-negative")
        if self.max_groups < 1 or self.init_groups < 1:
            raise InvalidParam("max_groups and init_groups must be >= 1")
        if not 0 <= self.init_jump_prob <= 1:
            raise InvalidParam("init_jump_prob must lie in [0, 1]")

    def log_count_prior(self) -> np.ndarray:
        return log_group_count_prior(self.max_groups, self.lambda_shape, self.lambda_rate)
