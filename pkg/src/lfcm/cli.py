"""Command-line entry point ``lfcm``.

Every subcommand writes CSV (and occasionally JSON) files into ``--out``.
Outputs depend only on the inputs, the configuration and ``--seed``; the
``--jobs`` degree never changes a byte.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import activity as A
from .core import AffineRecord, Trajectory, build_delta_series, normalize_coordinates
from .cpt import cpt_fit, level_set
from .errors import InputError, InvalidParam, NumericalError
from .io import (SCAN_HEADER, fan_out, ingest, partition_seed, partition_weeks, read_config, read_csv_dicts,
                 read_mask_csv, scan_row, write_csv, write_json, write_trajectory_csv)
from .mcmc import Hyperparams, extract_map, run_chain, scan_regions
from .metrics import (eccdf, jump_lengths, msd, new_locations_curve, new_locations_exponent,
                      radius_of_gyration, summarize)
from .simulate import (GenerativeParams, RoutineConfig, interpolate_extrapolate, linear_interpolate_extrapolate,
                       params_from_scan, simulate_from_params, simulate_routine, subsample)
from .tails import METHODS, estimate_epsilon, neighborhood_average

log = logging.getLogger("lfcm")

ROUTINE_EPOCH = 1704067200  # Monday 2024-01-01 00:00 UTC


# --- argument helpers


def _floats(s: str, n: Optional[int] = None) -> tuple[float, ...]:
    try:
        v = tuple(float(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None
    if n is not None and len(v) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {s!r}")
    return v


def _grid_spec(s: str) -> tuple[float, float, float]:
    """``start:stop:step`` in seconds, stop inclusive when on the lattice."""
    try:
        a, b, c = (float(x) for x in s.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {s!r}") from None
    if not c > 0 or b < a:
        raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
    return a, b, c


def _grid(spec) -> np.ndarray:
    a, b, c = spec
    return a + c * np.arange(int(math.floor((b - a) / c + 1e-9)) + 1)


def _gammas(s: str) -> np.ndarray:
    a, b, n = s.split(":")
    return np.linspace(float(a), float(b), int(n))


def _add_fit_flags(p):
    g = p.add_argument_group("model fit")
    g.add_argument("--eps", type=float, default=0.1, help="minimal jump scale, km per time unit")
    g.add_argument("--time-unit", type=float, default=60.0, help="seconds per model time unit")
    g.add_argument("--sweeps", type=int, default=600)
    g.add_argument("--burn-in", type=int, default=300)
    g.add_argument("--thin", type=int, default=1)
    g.add_argument("--max-groups", type=int, default=6)
    g.add_argument("--chains", type=int, default=1)


def _add_input(p, many=False):
    p.add_argument("input", nargs="+" if many else None, help="trajectory CSV")
    p.add_argument("--planar", action="store_true", help="lon/lat columns already hold planar km")


def _hyper(args) -> Hyperparams:
    return Hyperparams(eps=args.eps, max_groups=args.max_groups)


def _fit_settings(args) -> dict:
    return dict(eps=args.eps, max_groups=args.max_groups, time_unit=args.time_unit, sweeps=args.sweeps,
                burn_in=args.burn_in, thin=args.thin, chains=args.chains)


# --- loading


def _load(paths, planar: bool) -> tuple[dict[str, Trajectory], AffineRecord]:
    """Ingest every file; project all devices about one common centroid."""
    trajs: dict[str, Trajectory] = {}
    for p in [paths] if isinstance(paths, str) else paths:
        for dev, tr in ingest(p).trajectories.items():
            if dev in trajs:
                raise InputError(f"device {dev!r} appears in more than one input")
            trajs[dev] = tr
    if planar:
        return trajs, AffineRecord(0.0, 0.0, 1.0, 1.0)
    allxy = np.concatenate([t.xy for t in trajs.values()])
    _, aff = normalize_coordinates(Trajectory(np.arange(len(allxy), dtype=float), allxy))
    out = {}
    for dev, tr in trajs.items():
        uv = np.column_stack([(tr.xy[:, 0] - aff.lon0) * aff.kx, (tr.xy[:, 1] - aff.lat0) * aff.ky])
        out[dev] = Trajectory(tr.t, uv, device_id=dev, accuracy=tr.accuracy, speed=tr.speed)
    return out, aff


# --- fitting (module level so worker processes can import it)


def fit_chains(traj: Trajectory, settings: dict, seed: int):
    """All recorded scans of every chain as (chain, scan) pairs, the deltas and the hyperparameters."""
    d = build_delta_series(traj, settings["time_unit"])
    h = Hyperparams(eps=settings["eps"], max_groups=settings["max_groups"])
    scans = []
    for k in range(settings["chains"]):
        ch = run_chain(d, h, settings["sweeps"], settings["burn_in"], settings["thin"], seed=seed + k)
        scans += [(k, s) for s in ch]
    return scans, d, h


def _params_json(p: GenerativeParams, start, aff: AffineRecord) -> dict:
    return dict(weights=p.weights.tolist(), drifts=p.drifts.tolist(), dispersions=p.dispersions.tolist(),
                jump_prob=p.jump_prob, return_prob=p.return_prob, region_centers=p.region_centers.tolist(),
                region_covs=p.region_covs.tolist(), region_weights=p.region_weights.tolist(), alpha=p.alpha,
                eps=p.eps, vm_mean=p.vm_mean, vm_conc=p.vm_conc, time_unit=p.time_unit,
                start=[float(v) for v in start],
                affine=dict(lon0=aff.lon0, lat0=aff.lat0, kx=aff.kx, ky=aff.ky))


def _params_from_json(obj: dict) -> tuple[GenerativeParams, np.ndarray, AffineRecord]:
    try:
        p = GenerativeParams(**{k: np.asarray(obj[k], dtype=float) if isinstance(obj[k], list) else obj[k]
                                for k in ("weights", "drifts", "dispersions", "jump_prob", "return_prob",
                                          "region_centers", "region_covs", "region_weights", "alpha", "eps",
                                          "vm_mean", "vm_conc", "time_unit")})
        aff = AffineRecord(**obj["affine"])
        start = np.asarray(obj["start"], dtype=float)
    except (KeyError, TypeError) as e:
        raise InvalidParam(f"malformed params file: {e}") from e
    if p.region_centers.size == 0:
        p = GenerativeParams(**{**p.__dict__, "region_centers": np.zeros((0, 2)),
                                "region_covs": np.zeros((0, 2, 2))})
    return p, start, aff


def fit_job(key, payload) -> dict:
    traj, settings, seed, aff = payload
    scans, d, h = fit_chains(traj, settings, seed)
    best = extract_map([s for _, s in scans])
    regs = scan_regions(d, best)
    params = params_from_scan(d, best, h)
    sim = simulate_from_params(params, traj.t, traj.xy[0], np.random.default_rng(seed), device_id=key[0])
    metrics = []
    for name, tr in (("observed", traj), ("simulated", sim)):
        metrics.append((name, len(tr), float(jump_lengths(tr).mean()), msd(tr), radius_of_gyration(tr)))
    s = best.state
    return dict(
        key=key,
        scans=[scan_row(k, sc) for k, sc in scans],
        regions=[(j, r.start, r.end, r.source[0], r.mu_tilde[0], r.mu_tilde[1], r.Sigma_z[0, 0], r.Sigma_z[0, 1],
                  r.Sigma_z[1, 1], r.T_z, r.mass) for j, r in enumerate(regs)],
        metrics=metrics,
        summary=(key[0], key[1], len(traj), len(scans), best.log_joint, s.n_groups, int(s.b.sum()),
                 int(s.eta.sum()), len(regs)),
        params=_params_json(params, traj.xy[0], aff),
    )


def density_job(key, payload):
    """Normalized activity raster of one device under ``model`` (lfcm or cpt)."""
    traj, settings, seed, model, cell_size, bounds = payload
    pts = traj.xy if bounds is None else np.array([bounds[:2], bounds[2:]])
    R = A.make_raster(pts)
    if model == "cpt":
        p = A.rasterize(cpt_fit(traj, cell_size), R)
    else:
        scans, d, _ = fit_chains(traj, settings, seed)
        p = A.rasterize(A.activity_density(d, extract_map([s for _, s in scans])), R)
    return A.normalize(p, R), R


def interp_job(key, payload):
    traj, settings, seed, grid, method, n_scans = payload
    if method == "linear":
        return [linear_interpolate_extrapolate(traj, grid)]
    scans, d, h = fit_chains(traj, settings, seed)
    if n_scans is None:
        pick = [extract_map([s for _, s in scans])]
    else:
        idx = np.unique(np.linspace(0, len(scans) - 1, n_scans).round().astype(int))
        pick = [scans[i][1] for i in idx]
        if len(pick) < n_scans:
            raise InvalidParam(f"chain recorded only {len(scans)} scans, {n_scans} requested")
    rng = np.random.default_rng(seed)
    return [interpolate_extrapolate(traj, sc, params_from_scan(d, sc, h), grid, rng) for sc in pick]


# --- subcommands


def cmd_calibrate(args):
    vals = []
    with open(args.input) as fh:
        for k, line in enumerate(fh, 1):
            s = line.strip().split(",")[0].strip()
            if not s:
                continue
            try:
                vals.append(float(s))
            except ValueError:
                if k == 1:
                    continue  # header
                raise InputError(f"{args.input}:{k}: not a number: {s!r}") from None
    if args.method == "KuiperNbhd":
        f = neighborhood_average(vals, "Kuiper", k=args.k)
    else:
        f = estimate_epsilon(vals, args.method)
    write_csv(os.path.join(args.out, "calibrate.csv"),
              ["eps_hat", "alpha_hat", "method", "n_tail", "statistic_value"],
              [(f.eps_hat, f.alpha_hat, f.method, f.n_tail, f.statistic_value)])


def cmd_fit(args):
    trajs, aff = _load(args.input, args.planar)
    settings = _fit_settings(args)
    _hyper(args)
    items = []
    for dev, tr in trajs.items():
        for key, part in partition_weeks(tr):
            items.append((key, (part, settings, partition_seed(args.seed, *key), aff)))
    results = fan_out(items, fit_job, args.jobs)
    for r in results:
        dev, week = r["key"]
        base = os.path.join(args.out, dev, week)
        write_csv(os.path.join(base, "scans.csv"), SCAN_HEADER, r["scans"])
        write_csv(os.path.join(base, "regions.csv"),
                  ["segment_id", "start", "end", "group", "center_x", "center_y", "cov_xx", "cov_xy", "cov_yy",
                   "T_z", "mass"], r["regions"])
        write_csv(os.path.join(base, "metrics.csv"), ["source", "n_points", "mean_jump_length", "msd", "rog"],
                  r["metrics"])
        write_json(os.path.join(base, "params.json"), r["params"])
    write_csv(os.path.join(args.out, "summary.csv"),
              ["device_id", "week", "n_points", "n_scans", "map_log_joint", "n_groups", "n_jumps", "n_returns",
               "n_regions"], [r["summary"] for r in results])


def cmd_routine(args):
    rng = np.random.default_rng(args.seed)
    tr, ph = simulate_routine(RoutineConfig(days=args.days), rng, return_phases=True)
    if args.fraction < 1:
        idx = np.sort(rng.choice(len(tr), size=max(1, int(round(args.fraction * len(tr)))), replace=False))
        tr, ph = tr.subset(idx), ph[idx]
    tr = Trajectory(tr.t + ROUTINE_EPOCH, tr.xy, device_id=args.device)
    write_trajectory_csv(os.path.join(args.out, "routine.csv"), [tr])
    write_csv(os.path.join(args.out, "routine_phases.csv"), ["timestamp", "phase"],
              [(int(t), p) for t, p in zip(tr.t, ph)])


def cmd_simulate(args):
    import json

    with open(args.params) as fh:
        params, start, aff = _params_from_json(json.load(fh))
    if args.start is not None:
        start = np.asarray(args.start)
    grid = _grid(args.grid)
    items = [((f"sim-{k}", ""), k) for k in range(args.paths)]
    out = fan_out(items, _SimJob(params, grid, start, args.seed), args.jobs)
    write_trajectory_csv(os.path.join(args.out, "simulated.csv"), out, None if args.planar_out else aff)


class _SimJob:
    def __init__(self, params, grid, start, seed):
        self.params, self.grid, self.start, self.seed = params, grid, start, seed

    def __call__(self, key, k):
        rng = np.random.default_rng(partition_seed(self.seed, key[0]))
        return simulate_from_params(self.params, self.grid, self.start, rng, device_id=key[0])


def cmd_interp(args):
    trajs, aff = _load(args.input, args.planar)
    settings = _fit_settings(args)
    grid = _grid(args.grid)
    items = [((dev, ""), (tr, settings, partition_seed(args.seed, dev), grid, args.method, None))
             for dev, tr in trajs.items()]
    out = [paths[0] for paths in fan_out(items, interp_job, args.jobs)]
    write_trajectory_csv(os.path.join(args.out, "interp.csv"), out, None if args.planar else aff)


def cmd_metrics(args):
    trajs, _ = _load(args.input, args.planar)
    rows, ecc, newloc = [], [], []
    for dev, tr in trajs.items():
        jl = jump_lengths(tr)
        rows.append((dev, len(tr), float(jl.mean()), msd(tr), radius_of_gyration(tr),
                     new_locations_exponent(tr, args.cell_size) if len(tr) > 2 else float("nan")))
        if args.curves:
            x, s = eccdf(jl)
            ecc += [(dev, a, b) for a, b in zip(x, s)]
            tau, frac = new_locations_curve(tr, args.cell_size)
            newloc += [(dev, a, b) for a, b in zip(tau, frac)]
    write_csv(os.path.join(args.out, "metrics.csv"),
              ["device_id", "n_points", "mean_jump_length", "msd", "rog", "new_locations_exponent"], rows)
    s = summarize(list(trajs.values()))
    write_csv(os.path.join(args.out, "summary.csv"), list(s.as_row()), [list(s.as_row().values())])
    if args.curves:
        write_csv(os.path.join(args.out, "eccdf.csv"), ["device_id", "jump_length", "survival"], ecc)
        write_csv(os.path.join(args.out, "new_locations.csv"), ["device_id", "tau", "fraction"], newloc)


def cmd_cpt(args):
    trajs, _ = _load(args.input, args.planar)
    grid_rows, ls_rows = [], []
    for dev, tr in trajs.items():
        g = cpt_fit(tr, args.cell_size)
        for i, j in g.occupied():
            x, y = g.cell_centers([i, j])
            grid_rows.append((dev, i, j, x, y, g.prob[i, j]))
        ls_rows += [(dev, i, j) for i, j in level_set(g, args.gamma)]
    write_csv(os.path.join(args.out, "grid.csv"), ["device_id", "i", "j", "center_x", "center_y", "prob"], grid_rows)
    write_csv(os.path.join(args.out, "level_set.csv"), ["device_id", "i", "j"], ls_rows)


def _densities(args):
    trajs, _ = _load(args.input, args.planar)
    settings = _fit_settings(args)
    items = [((dev, ""), (tr, settings, partition_seed(args.seed, dev), args.model, args.cell_size, args.bounds))
             for dev, tr in trajs.items()]
    return list(trajs), fan_out(items, density_job, args.jobs)


def cmd_persistence(args):
    devs, dens = _densities(args)
    rows = []
    for dev, (p, R) in zip(devs, dens):
        g, cnt = A.persistence_curve(p, R, _gammas(args.gammas))
        rows += [(dev, a, int(b)) for a, b in zip(g, cnt)]
    write_csv(os.path.join(args.out, "persistence.csv"), ["device_id", "gamma", "components"], rows)


def cmd_topk(args):
    devs, dens = _densities(args)
    rows, cells = [], []
    for dev, (p, R) in zip(devs, dens):
        regs, complete = A.top_k_regions(p, R, args.k, args.gamma)
        for rank, r in enumerate(regs, 1):
            rows.append((dev, rank, r.mass, r.centroid[0], r.centroid[1], int(r.mask.sum()), int(complete)))
            cells += [(dev, rank, i, j) for i, j in np.argwhere(r.mask)]
        write_json(os.path.join(args.out, f"raster_{dev}.json"),
                   dict(origin=list(R.origin), cell=list(R.cell), shape=list(R.shape)))
    write_csv(os.path.join(args.out, "topk.csv"),
              ["device_id", "rank", "mass", "centroid_x", "centroid_y", "n_cells", "complete"], rows)
    write_csv(os.path.join(args.out, "topk_cells.csv"), ["device_id", "rank", "i", "j"], cells)


def cmd_overlap(args):
    a = read_mask_csv(args.a)
    b = read_mask_csv(args.b)
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    ma = np.zeros(shape, bool)
    mb = np.zeros(shape, bool)
    ma[:a.shape[0], :a.shape[1]] = a
    mb[:b.shape[0], :b.shape[1]] = b
    rows = [("jaccard", A.jaccard_distance(ma, mb)), ("overlap", A.overlap_distance(ma, mb)),
            ("hausdorff_cells", A.hausdorff(ma, mb))]
    write_csv(os.path.join(args.out, "overlap.csv"), ["metric", "value"], rows)


def cmd_sociomatrix(args):
    trajs, _ = _load(args.input, args.planar)
    if args.grid is None:
        lo = min(t.t[0] for t in trajs.values())
        hi = max(t.t[-1] for t in trajs.values())
        grid = _grid((lo, hi, args.step))
    else:
        grid = _grid(args.grid)
    settings = _fit_settings(args)
    items = [((dev, ""), (tr, settings, partition_seed(args.seed, dev), grid, "lfcm", args.scans))
             for dev, tr in trajs.items()]
    paths = fan_out(items, interp_job, args.jobs)
    D = A.distance_matrix(paths)
    devs = list(trajs)
    write_csv(os.path.join(args.out, "sociomatrix.csv"), ["device_id", *devs],
              [(d, *D[i]) for i, d in enumerate(devs)])


# --- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file supplying flag defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=".")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="lfcm", description="Levy flight cluster model toolkit; global "
                                 "flags (--config, --seed, --jobs, --out) follow the subcommand")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="estimate eps from jump ratios")
    p.add_argument("input", help="one-column CSV of ratios dr/dt")
    p.add_argument("--method", choices=METHODS, default="Kuiper")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", parents=[common], help="fit every (device, week) partition")
    _add_input(p, many=True)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("routine", parents=[common], help="emit the synthetic daily routine")
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--device", default="routine")
    p.set_defaults(func=cmd_routine)

    p = sub.add_parser("simulate", parents=[common], help="simulate paths from fitted parameters")
    p.add_argument("params", help="params.json written by fit")
    p.add_argument("--grid", type=_grid_spec, required=True, help="start:stop:step seconds")
    p.add_argument("--start", type=lambda s: _floats(s, 2), help="x,y in planar km")
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--planar-out", action="store_true", help="write planar km instead of lon/lat")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("interp", parents=[common], help="interpolate and extrapolate onto a time grid")
    _add_input(p)
    _add_fit_flags(p)
    p.add_argument("--grid", type=_grid_spec, required=True)
    p.add_argument("--method", choices=("lfcm", "linear"), default="lfcm")
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("metrics", parents=[common], help="mobility metrics per device")
    _add_input(p, many=True)
    p.add_argument("--cell-size", type=float, default=0.05)
    p.add_argument("--curves", action="store_true", help="also write ECCDF and new-location curves")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("cpt", parents=[common], help="CPT grid estimate and level set")
    _add_input(p)
    p.add_argument("--cell-size", type=float, default=0.2)
    p.add_argument("--gamma", type=float, default=0.9)
    p.set_defaults(func=cmd_cpt)

    for name, func, hlp in (("persistence", cmd_persistence, "component counts across level sets"),
                            ("topk", cmd_topk, "Top-k connected regions of the level set")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        _add_input(p)
        _add_fit_flags(p)
        p.add_argument("--model", choices=("lfcm", "cpt"), default="lfcm")
        p.add_argument("--cell-size", type=float, default=0.2, help="CPT cell size")
        p.add_argument("--bounds", type=lambda s: _floats(s, 4), help="raster window xmin,ymin,xmax,ymax")
        if name == "persistence":
            p.add_argument("--gammas", default="0.01:0.99:99", help="start:stop:count")
        else:
            p.add_argument("--k", type=int, default=3)
            p.add_argument("--gamma", type=float, default=0.2)
        p.set_defaults(func=func)

    p = sub.add_parser("overlap", parents=[common], help="set distances between two masks")
    p.add_argument("a", help="mask CSV with i,j columns")
    p.add_argument("b", help="reference mask CSV")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("sociomatrix", parents=[common], help="mean pairwise path distances")
    _add_input(p, many=True)
    _add_fit_flags(p)
    p.add_argument("--grid", type=_grid_spec)
    p.add_argument("--step", type=float, default=600.0, help="grid step when --grid is absent")
    p.add_argument("--scans", type=int, default=10)
    p.set_defaults(func=cmd_sociomatrix)
    return ap


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        # config values become defaults; explicit flags still win
        first = ap.parse_known_args(argv)[0]
        sp = ap._subparsers._group_actions[0].choices[first.command]
        dests = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - dests)
        if unknown:
            raise InvalidParam(f"unknown config keys: {', '.join(unknown)}")
        for a in sp._actions:
            if isinstance(a, argparse._StoreTrueAction) and a.dest in cfg:
                v = cfg[a.dest].lower()
                if v not in ("true", "false", "1", "0", "yes", "no"):
                    raise InvalidParam(f"config key {a.dest} expects a boolean")
                cfg[a.dest] = v in ("true", "1", "yes")
        sp.set_defaults(**cfg)
    args = ap.parse_args(argv)
    if args.jobs < 1:
        ap.error("--jobs must be >= 1")
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except (InputError, OSError) as e:
        print(f"lfcm: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, OSError, ValueError) as e:
        print(f"lfcm: error: {e}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"lfcm: numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
