from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import DeltaSeries
from ..errors import InvalidParam


def segments_of(b, c) -> list[tuple[int, int, int]]:
    """Maximal runs of consecutive ``b == 0`` deltas sharing a group, as (start, end, group)."""
    out = []
    n = len(b)
    i = 0
    while i < n:
        if b[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and not b[j + 1] and c[j + 1] == c[i]:
            j += 1
        out.append((i, j, int(c[i])))
        i = j + 1
    return out


@dataclass
class LatentState:
    """Discrete latent configuration of the collapsed model.

    ``c`` is -1 on jumps, ``eta`` is 0 off jumps and ``z`` holds the start
    index of the segment a return lands in (-1 otherwise).  Groups are
    labelled ``0 .. n_groups - 1`` and all are nonempty.
    """

    b: np.ndarray
    c: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    n_groups: int

    def copy(self) -> "LatentState":
        return LatentState(self.b.copy(), self.c.copy(), self.eta.copy(), self.z.copy(), self.n_groups)

    def segments(self) -> list[tuple[int, int, int]]:
        return segments_of(self.b, self.c)

    def region_labels(self) -> np.ndarray:
        """Returns as ``(g, l)`` pairs: group and 0-based time rank of the target segment."""
        rank = {}
        per = [0] * self.n_groups
        for s, _, g in self.segments():
            rank[s] = (g, per[g])
            per[g] += 1
        out = np.full((len(self.b), 2), -1, dtype=int)
        for i in np.flatnonzero(self.eta):
            out[i] = rank[int(self.z[i])]
        return out

    def key(self) -> tuple:
        return (self.n_groups, self.b.tobytes(), self.c.tobytes(), self.eta.tobytes(), self.z.tobytes())

    def canonical(self) -> "LatentState":
        """Groups relabelled by order of first appearance."""
        m = {}
        for g in self.c:
            if g >= 0 and g not in m:
                m[int(g)] = len(m)
        c = np.array([m[int(g)] if g >= 0 else -1 for g in self.c], dtype=self.c.dtype)
        return LatentState(self.b.copy(), c, self.eta.copy(), self.z.copy(), self.n_groups)


def check_state(deltas: DeltaSeries, state: LatentState, eps: float, max_groups: int) -> None:
    """Raise InvalidParam if ``state`` breaks any structural invariant."""
    n = len(deltas)
    b, c, eta, z = state.b, state.c, state.eta, state.z
    if not (len(b) == len(c) == len(eta) == len(z) == n):
        raise InvalidParam("latent vectors must match the number of deltas")
    if not 1 <= state.n_groups <= max_groups:
        raise InvalidParam("n_groups out of range")
    ratio = deltas.ratio
    for i in range(n):
        if b[i] not in (0, 1) or eta[i] not in (0, 1):
            raise InvalidParam(f"non-binary label at {i}")
        if b[i]:
            if ratio[i] < eps:
                raise InvalidParam(f"jump below eps at {i}")
            if c[i] != -1:
                raise InvalidParam(f"group label on jump {i}")
        else:
            if not 0 <= c[i] < state.n_groups:
                raise InvalidParam(f"bad group label at {i}")
            if eta[i] or z[i] != -1:
                raise InvalidParam(f"return label off a jump at {i}")
    seen = set(int(g) for g in c if g >= 0)
    if seen != set(range(state.n_groups)):
        raise InvalidParam("empty group")
    starts = {s for s, _, _ in state.segments()}
    for i in range(n):
        if eta[i]:
            if z[i] not in starts or not z[i] < i:
                raise InvalidParam(f"return {i} targets a missing or future segment")
        elif z[i] != -1:
            raise InvalidParam(f"region label without return at {i}")


@dataclass(frozen=True)
class ActivityRegion:
    """A return target built from one Brownian segment.

    ``mu_tilde = x(t0) + T/2 * drift`` and ``Sigma_z = T/3 * Sigma*`` with the
    group's posterior-mean drift and dispersion.  ``mass`` is the segment's
    share of total segment time.
    """

    mu_tilde: np.ndarray
    Sigma_z: np.ndarray
    T_z: float
    source: tuple[int, int]
    start: int
    end: int
    mass: float = 0.0


@dataclass(frozen=True)
class GroupSummary:
    n_obs: int
    drift: np.ndarray
    dispersion: np.ndarray


@dataclass(frozen=True)
class PosteriorScan:
    state: LatentState
    log_joint: float
    sweep: int
    groups: tuple[GroupSummary, ...] = field(default=())
    seed: Optional[int] = None
