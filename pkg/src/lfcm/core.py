"""Trajectory containers and the first-difference series the sampler consumes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NonMonotoneTime, TooShort

log = logging.getLogger(__name__)

KM_PER_DEGREE = 2 * math.pi * 6378.137 / 360.0  # equatorial radius, ~111.32 km


@dataclass(frozen=True)
class GpsRecord:
    device_id: str
    t: float
    x: tuple[float, float]
    accuracy: Optional[float] = None
    speed: Optional[float] = None


@dataclass
class Trajectory:
    """Time-ordered planar locations of one device over one window.

    ``t`` is in seconds, ``xy`` has shape ``(n, 2)``.  Optional per-record
    ``accuracy`` and ``speed`` arrays use NaN for missing values.
    """

    t: np.ndarray
    xy: np.ndarray
    device_id: str = ""
    accuracy: Optional[np.ndarray] = None
    speed: Optional[np.ndarray] = None
    n_dropped_duplicates: int = field(default=0, compare=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if self.t.shape[0] != self.xy.shape[0]:
            raise ValueError("t and xy lengths differ")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.xy))):
            raise ValueError("non-finite time or coordinate")

    def __len__(self) -> int:
        return self.t.shape[0]

    @classmethod
    def from_records(cls, records: Iterable[GpsRecord], dedupe: bool = True) -> "Trajectory":
        """Sort records by time and drop repeated timestamps (first kept)."""
        recs = sorted(records, key=lambda r: r.t)
        kept: list[GpsRecord] = []
        dropped = 0
        for r in recs:
            if kept and r.t == kept[-1].t:
                if not dedupe:
                    raise NonMonotoneTime(f"duplicate timestamp {r.t}")
                dropped += 1
                continue
            kept.append(r)
        if dropped:
            log.warning("dropped %d records with duplicate timestamps", dropped)
        nan = float("nan")
        return cls(
            t=np.array([r.t for r in kept], dtype=float),
            xy=np.array([r.x for r in kept], dtype=float).reshape(-1, 2),
            device_id=kept[0].device_id if kept else "",
            accuracy=np.array([nan if r.accuracy is None else r.accuracy for r in kept]),
            speed=np.array([nan if r.speed is None else r.speed for r in kept]),
            n_dropped_duplicates=dropped,
        )

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Trajectory":
        idx = np.asarray(idx)
        return Trajectory(
            t=self.t[idx],
            xy=self.xy[idx],
            device_id=self.device_id,
            accuracy=None if self.accuracy is None else self.accuracy[idx],
            speed=None if self.speed is None else self.speed[idx],
        )

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(t=self.t + dt, xy=self.xy.copy(), device_id=self.device_id,
                          accuracy=self.accuracy, speed=self.speed)


@dataclass(frozen=True)
class DeltaSeries:
    """First differences of a trajectory.

    Row ``i`` describes the move from location ``i`` to location ``i + 1``.
    ``dt`` is expressed in ``time_unit`` seconds.  The originating locations
    and times are kept because return moves are scored against absolute
    positions.
    """

    dx: np.ndarray
    dt: np.ndarray
    dr: np.ndarray
    theta: np.ndarray
    loc: np.ndarray
    t: np.ndarray
    time_unit: float = 1.0

    def __len__(self) -> int:
        return self.dt.shape[0]

    @property
    def ratio(self) -> np.ndarray:
        """Normalized jump lengths dr / dt."""
        return self.dr / self.dt


def build_delta_series(traj: Trajectory, time_unit: float = 1.0) -> DeltaSeries:
    """First differences ``(dx, dt, dr, theta)`` of a trajectory.

    ``time_unit`` rescales seconds (60 gives minutes).  The angle of a zero
    displacement is defined as 0.
    """
    if len(traj) < 2:
        raise TooShort(f"need at least 2 records, got {len(traj)}")
    t = traj.t
    steps = np.diff(t)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 1
        raise NonMonotoneTime(f"timestamps not strictly increasing at record {bad}")
    tt = (t - t[0]) / time_unit
    dt = steps / time_unit
    dx = np.diff(traj.xy, axis=0)
    dr = np.hypot(dx[:, 0], dx[:, 1])
    theta = np.where(dr > 0, np.mod(np.arctan2(dx[:, 1], dx[:, 0]), 2 * np.pi), 0.0)
    theta[theta >= 2 * np.pi] = 0.0  # mod of a tiny negative angle rounds up to 2 pi
    return DeltaSeries(dx=dx, dt=dt, dr=dr, theta=theta, loc=traj.xy.copy(), t=tt,
                       time_unit=float(time_unit))


@dataclass(frozen=True)
class AffineRecord:
    """Inverse data for :func:`normalize_coordinates`.

    Planar ``(u, v)`` km map back to ``lon = lon0 + u / kx`` and
    ``lat = lat0 + v / ky``.
    """

    lon0: float
    lat0: float
    kx: float
    ky: float

    def invert(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.column_stack([self.lon0 + xy[:, 0] / self.kx, self.lat0 + xy[:, 1] / self.ky])


def normalize_coordinates(traj: Trajectory, project: bool = True) -> tuple[Trajectory, AffineRecord]:
    """Map lon/lat to kilometres about the trajectory centroid (equirectangular).

    With ``project=False`` coordinates are treated as already planar and
    returned unchanged together with an identity record.
    """
    if not project:
        return traj, AffineRecord(0.0, 0.0, 1.0, 1.0)
    lon0, lat0 = traj.xy.mean(axis=0)
    ky = KM_PER_DEGREE
    kx = KM_PER_DEGREE * math.cos(math.radians(lat0))
    uv = np.column_stack([(traj.xy[:, 0] - lon0) * kx, (traj.xy[:, 1] - lat0) * ky])
    out = Trajectory(t=traj.t.copy(), xy=uv, device_id=traj.device_id,
                     accuracy=traj.accuracy, speed=traj.speed)
    return out, AffineRecord(float(lon0), float(lat0), kx, ky)
