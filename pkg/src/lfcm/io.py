"""Dataset ingestion, (device, week) partitioning, seeded parallel fan-out
and deterministic CSV / config serialization."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import AffineRecord, GpsRecord, Trajectory
from .errors import EmptyDevice, InputError, LfcmError, SchemaError
from .mcmc.state import LatentState

log = logging.getLogger(__name__)

HEADER = ["device_id", "timestamp", "lon", "lat", "accuracy", "speed"]
MIN_PARTITION = 10


# --- formatting


def fmt(v) -> str:
    """Shortest round-trip text of a number; integral floats keep a trailing ``.0``."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_json(path: str, obj) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_config(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    with open(path) as fh:
        for k, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{k}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


# --- ingestion


@dataclass
class IngestResult:
    trajectories: dict[str, Trajectory]
    rejected: list[tuple[int, str]] = field(default_factory=list)
    deduplicated: int = 0
    total: int = 0

    @property
    def kept(self) -> int:
        return sum(len(t) for t in self.trajectories.values())


def _opt_float(s: str) -> Optional[float]:
    s = s.strip()
    return None if s == "" else float(s)


def ingest(path: str) -> IngestResult:
    """Read a trajectory CSV into per-device trajectories.

    Rows with an unparsable or non-finite field are rejected with their
    1-based line number; repeated timestamps within a device keep the first
    row.  ``kept + rejected + deduplicated == total``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header[:4] != HEADER[:4] or any(h not in HEADER for h in header):
            raise SchemaError(f"{path}: header must be {','.join(HEADER)}")
        col = {h: i for i, h in enumerate(header)}
        recs: dict[str, list[GpsRecord]] = {}
        rejected = []
        total = 0
        for line, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            total += 1
            try:
                if len(row) != len(header):
                    raise ValueError(f"expected {len(header)} fields, got {len(row)}")
                dev = row[col["device_id"]].strip()
                if not dev:
                    raise ValueError("empty device_id")
                ts = row[col["timestamp"]].strip()
                t = float(int(ts)) if ts.lstrip("-").isdigit() else float(ts)
                x = (float(row[col["lon"]]), float(row[col["lat"]]))
                acc = _opt_float(row[col["accuracy"]]) if "accuracy" in col else None
                spd = _opt_float(row[col["speed"]]) if "speed" in col else None
                if not all(math.isfinite(v) for v in (t, *x)):
                    raise ValueError("non-finite value")
            except ValueError as e:
                rejected.append((line, str(e)))
                continue
            recs.setdefault(dev, []).append(GpsRecord(dev, t, x, acc, spd))
    for line, why in rejected:
        log.warning("%s:%d rejected: %s", path, line, why)
    if not recs:
        raise EmptyDevice(f"{path}: no valid rows")
    trajs = {}
    dedup = 0
    for dev in sorted(recs):
        tr = Trajectory.from_records(recs[dev])
        dedup += tr.n_dropped_duplicates
        trajs[dev] = tr
    return IngestResult(trajs, rejected, dedup, total)


def write_trajectory_csv(path: str, trajs: Sequence[Trajectory], affine: Optional[AffineRecord] = None) -> None:
    """Trajectories in the ingestion schema; ``affine`` maps planar km back to lon/lat."""
    rows = []
    for tr in trajs:
        xy = tr.xy if affine is None else affine.invert(tr.xy)
        acc = tr.accuracy if tr.accuracy is not None else np.full(len(tr), np.nan)
        spd = tr.speed if tr.speed is not None else np.full(len(tr), np.nan)
        for k in range(len(tr)):
            t = tr.t[k]
            rows.append((tr.device_id, int(t) if float(t).is_integer() else t, xy[k, 0], xy[k, 1], acc[k], spd[k]))
    write_csv(path, HEADER, rows)


# --- partitioning and seeds


def iso_week(t: float) -> tuple[int, int]:
    y, w, _ = datetime.fromtimestamp(t, tz=timezone.utc).isocalendar()
    return int(y), int(w)


def week_label(week: tuple[int, int]) -> str:
    return f"{week[0]}-W{week[1]:02d}"


def partition_weeks(traj: Trajectory, min_points: int = MIN_PARTITION) -> list[tuple[tuple[str, str], Trajectory]]:
    """Split at ISO week boundaries (UTC), dropping partitions with fewer than ``min_points`` fixes."""
    if len(traj) == 0:
        raise EmptyDevice(f"device {traj.device_id!r} has no fixes")
    weeks = [iso_week(t) for t in traj.t]
    out = []
    start = 0
    for k in range(1, len(weeks) + 1):
        if k == len(weeks) or weeks[k] != weeks[start]:
            part = traj.subset(np.arange(start, k))
            key = (traj.device_id, week_label(weeks[start]))
            if len(part) < min_points:
                log.warning("dropping partition %s %s with %d points", key[0], key[1], len(part))
            else:
                out.append((key, part))
            start = k
    return out


def partition_seed(seed: int, device: str, week: str = "") -> int:
    """``seed`` XOR a stable 63-bit hash of the partition key."""
    h = int.from_bytes(hashlib.sha256(f"{device}\x1f{week}".encode()).digest()[:8], "big")
    return (int(seed) ^ h) & ((1 << 63) - 1)


# --- fan-out


class _Job:
    def __init__(self, job: Callable):
        self.job = job

    def __call__(self, item):
        key, payload = item
        try:
            return self.job(key, payload)
        except LfcmError as e:
            raise type(e)(f"partition {key}: {e}") from e


def fan_out(items: Sequence[tuple], job: Callable, jobs: int = 1) -> list:
    """Apply ``job(key, payload)`` to every ``(key, payload)`` item, results in input order.

    ``job`` must be a picklable pure function of its arguments; the first
    failing item (in input order) propagates with its key in the message.
    """
    if jobs < 1:
        raise InputError("parallelism must be >= 1")
    items = list(items)
    if not items:
        return []
    w = _Job(job)
    if jobs == 1 or len(items) == 1:
        return [w(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(w, items))


# --- scan serialization


def rle(a) -> str:
    """Run-length code ``value*count`` joined by ``;``."""
    a = np.asarray(a)
    if a.size == 0:
        return ""
    cut = np.flatnonzero(np.diff(a) != 0) + 1
    starts = np.concatenate([[0], cut])
    lens = np.diff(np.concatenate([starts, [a.size]]))
    return ";".join(f"{int(a[s])}*{int(n)}" for s, n in zip(starts, lens))


def unrle(s: str) -> np.ndarray:
    if not s:
        return np.zeros(0, dtype=np.int64)
    out = []
    for tok in s.split(";"):
        v, n = tok.split("*")
        out += [int(v)] * int(n)
    return np.array(out, dtype=np.int64)


SCAN_HEADER = ["chain", "sweep", "log_joint", "n_groups", "b", "c", "eta", "z"]


def scan_row(chain: int, scan) -> list:
    s = scan.state
    return [chain, scan.sweep, scan.log_joint, s.n_groups, rle(s.b), rle(s.c), rle(s.eta), rle(s.z)]


def state_from_row(row: dict) -> LatentState:
    return LatentState(unrle(row["b"]).astype(np.int8), unrle(row["c"]), unrle(row["eta"]).astype(np.int8),
                       unrle(row["z"]), int(row["n_groups"]))


def read_csv_dicts(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_mask_csv(path: str, shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Mask stored as ``i,j`` rows; the shape defaults to the tightest box holding every cell."""
    rows = read_csv_dicts(path)
    try:
        ij = np.array([(int(r["i"]), int(r["j"])) for r in rows], dtype=np.int64).reshape(-1, 2)
    except (KeyError, ValueError) as e:
        raise SchemaError(f"{path}: mask rows need integer i,j") from e
    if shape is None:
        shape = tuple(int(v) for v in (ij.max(axis=0) + 1)) if len(ij) else (1, 1)
    m = np.zeros(shape, dtype=bool)
    if len(ij):
        m[ij[:, 0], ij[:, 1]] = True
    return m
