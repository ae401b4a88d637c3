"""Incremental collapsed Gibbs engine.

The engine keeps per-group Normal-Wishart sufficient statistics, the segment
registry and the return references, so a proposed relabelling of one delta
or one segment is scored from a handful of statistics instead of a full
pass over the data.

Every kernel is a Gibbs step over the states that agree with the current
one outside a small block, restricted to valid states (nonempty groups,
returns pointing at existing earlier segments).  Segments are identified by
their start index, so a candidate that would delete a start index some
return still points to is not a valid state and is left out.
"""
from __future__ import annotations

import math
import numpy as np

from .. import distributions as D
from ..core import DeltaSeries
from .hyper import Hyperparams
from .state import GroupSummary, LatentState, segments_of

lgamma = math.lgamma
LOG_PI = math.log(math.pi)

# stats layout: n, sum b^2, sum b*y (2), sum y y' (3), sum 1/2 log|A|
ZERO = (0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def _add(s, o):
    return (s[0] + o[0], s[1] + o[1], s[2] + o[2], s[3] + o[3], s[4] + o[4], s[5] + o[5],
            s[6] + o[6], s[7] + o[7])


def _sub(s, o):
    return (s[0] - o[0], s[1] - o[1], s[2] - o[2], s[3] - o[3], s[4] - o[4], s[5] - o[5],
            s[6] - o[6], s[7] - o[7])


class Engine:
    def __init__(self, deltas: DeltaSeries, hyper: Hyperparams, state: LatentState, debug: bool = False):
        self.deltas = deltas
        self.debug = debug
        self.hyper = hyper
        n = len(deltas)
        self.n = n
        eps = hyper.eps
        ratio = deltas.ratio
        self.elig = [bool(r >= eps) for r in ratio]
        self.t = [float(v) for v in deltas.t]
        self.loc = [(float(x), float(y)) for x, y in deltas.loc]
        dt = deltas.dt
        dx = deltas.dx
        self.bobs = [(1, float(dt[i]), float(dx[i, 0]), float(dx[i, 1]),
                      float(dx[i, 0] ** 2 / dt[i]), float(dx[i, 0] * dx[i, 1] / dt[i]),
                      float(dx[i, 1] ** 2 / dt[i]), -math.log(dt[i])) for i in range(n)]
        # jump sums: log(ratio/eps), log ratio, cos, sin, log(dt*dr)
        self.jobs = []
        for i in range(n):
            if self.elig[i]:
                self.jobs.append((math.log(ratio[i] / eps), math.log(ratio[i]),
                                  math.cos(deltas.theta[i]), math.sin(deltas.theta[i]),
                                  math.log(dt[i] * deltas.dr[i])))
            else:
                self.jobs.append(None)
        nw = hyper.nw
        Wi = nw.W_inv
        self._wi = (float(Wi[0, 0]), float(Wi[0, 1]), float(Wi[1, 1]))
        self._kappa = nw.kappa
        self._dof = nw.wishart_dof
        self._pc = D.nw_prior_const(nw)
        self._lpN = hyper.log_count_prior()
        self.load(state)

    # ---------------------------------------------------------------- scoring

    def ev(self, s) -> float:
        n = s[0]
        if n == 0:
            return 0.0
        k = self._kappa + s[1]
        a = self._wi[0] + s[4] - s[2] * s[2] / k
        b = self._wi[1] + s[5] - s[2] * s[3] / k
        c = self._wi[2] + s[6] - s[3] * s[3] / k
        det = a * c - b * b
        if det <= 0:
            return -math.inf
        h = 0.5 * (self._dof + n + 1)
        return (-n * LOG_PI + 0.5 * LOG_PI + lgamma(h) + lgamma(h - 0.5) - h * math.log(det)
                + math.log(self._kappa / k) + s[7] + self._pc)

    def ret_obs(self, i: int, s: int, e: int):
        T = self.t[e + 1] - self.t[s]
        x0, y0 = self.loc[s]
        x1, y1 = self.loc[i + 1]
        u, v = x1 - x0, y1 - y0
        w = 3.0 / T
        return (1, 0.75 * T, 1.5 * u, 1.5 * v, w * u * u, w * u * v, w * v * v, math.log(w))

    def count_terms(self, K, sum_lg_pts, n_b, n_eta, n_z, zsum, js) -> float:
        h = self.hyper
        a = h.dir_conc
        n = self.n
        n0 = n - n_b
        b1, b2 = h.jump_beta
        r1, r2 = h.return_beta
        out = self._lpN[K]
        out += lgamma(K * a) - lgamma(n0 + K * a) + sum_lg_pts - K * lgamma(a)
        out += (lgamma(b1 + n_b) + lgamma(b2 + n0) - lgamma(b1 + b2 + n)
                + lgamma(b1 + b2) - lgamma(b1) - lgamma(b2))
        out += (lgamma(r1 + n_eta) + lgamma(r2 + n_b - n_eta) - lgamma(r1 + r2 + n_b)
                + lgamma(r1 + r2) - lgamma(r1) - lgamma(r2))
        if n_z:
            r = h.region_conc
            out += lgamma(n_z * r) - lgamma(n_eta + n_z * r) + zsum
        if n_b:
            vp, ze = h.pareto_gamma
            out += (lgamma(vp + n_b) - (vp + n_b) * math.log(ze + js[0]) - lgamma(vp)
                    + vp * math.log(ze) - js[1])
            tau, mu0, r0 = h.vm_tau, h.vm_mu0, h.vm_r0
            rn = math.hypot(r0 * math.cos(mu0) + js[2], r0 * math.sin(mu0) + js[3])
            out += (-n_b * (D.LOG_2PI + D.log_bessel_i0(tau)) + D.log_bessel_i0(tau * rn)
                    - D.log_bessel_i0(tau * r0))
            out -= js[4]
        return out

    def log_joint(self) -> float:
        return self.count_terms(self.K, self.sum_lg_pts, self.n_b, self.n_eta, len(self.seg_end),
                                self.zsum, self.js) + sum(self.gev)

    # ---------------------------------------------------------------- bookkeeping

    def load(self, state: LatentState) -> None:
        self.b = [int(v) for v in state.b]
        self.c = [int(v) for v in state.c]
        self.eta = [int(v) for v in state.eta]
        self.z = [int(v) for v in state.z]
        self.K = int(state.n_groups)
        self.rebuild()

    def rebuild(self) -> None:
        """Recompute every cached quantity from the label vectors."""
        n, K = self.n, self.K
        a = self.hyper.dir_conc
        r = self.hyper.region_conc
        self.seg_end: dict[int, int] = {}
        self.seg_grp: dict[int, int] = {}
        self.seg_key = [-1] * n
        for s, e, g in segments_of(self.b, self.c):
            self.seg_end[s] = e
            self.seg_grp[s] = g
            for i in range(s, e + 1):
                self.seg_key[i] = s
        self.refs: dict[int, set] = {s: set() for s in self.seg_end}
        self.pts = [0] * K
        stats = [ZERO] * K
        js = [0.0] * 5
        n_b = n_eta = 0
        for i in range(n):
            if self.b[i]:
                n_b += 1
                o = self.jobs[i]
                for k in range(5):
                    js[k] += o[k]
                if self.eta[i]:
                    n_eta += 1
                    s = self.z[i]
                    self.refs[s].add(i)
                    stats[self.seg_grp[s]] = _add(stats[self.seg_grp[s]], self.ret_obs(i, s, self.seg_end[s]))
            else:
                g = self.c[i]
                self.pts[g] += 1
                stats[g] = _add(stats[g], self.bobs[i])
        self.stats = stats
        self.gev = [self.ev(s) for s in stats]
        self.js = js
        self.n_b, self.n_eta = n_b, n_eta
        self.sum_lg_pts = sum(lgamma(a + p) for p in self.pts)
        self.zsum = sum(lgamma(r + len(v)) - lgamma(r) for v in self.refs.values())

    def state(self) -> LatentState:
        return LatentState(np.array(self.b, dtype=np.int8), np.array(self.c, dtype=np.int64),
                           np.array(self.eta, dtype=np.int8), np.array(self.z, dtype=np.int64), self.K)

    def group_summaries(self) -> tuple[GroupSummary, ...]:
        out = []
        for s in self.stats:
            k = self._kappa + s[1]
            m = np.array([s[2] / k, s[3] / k])
            Wn = np.array([[self._wi[0] + s[4], self._wi[1] + s[5]], [self._wi[1] + s[5], self._wi[2] + s[6]]])
            Wn = Wn - k * np.outer(m, m)
            out.append(GroupSummary(int(s[0]), m, Wn / (self._dof + s[0] + 1)))
        return tuple(out)

    # ---------------------------------------------------------------- per-delta block

    def _window_segs(self, j, cfg, A, B):
        """Segments covering the window around ``j`` for configuration ``cfg``.

        ``cfg`` is -1 for a jump or the group of ``j``.  ``A = (start, group)`` of
        the run ending at ``j - 1`` and ``B = (end, group)`` of the run starting
        at ``j + 1`` (either may be None).
        """
        out = []
        if cfg < 0:
            if A:
                out.append((A[0], j - 1, A[1]))
            if B:
                out.append((j + 1, B[0], B[1]))
            return out
        left = A is not None and A[1] == cfg
        right = B is not None and B[1] == cfg
        start = A[0] if left else j
        end = B[0] if right else j
        if A and not left:
            out.append((A[0], j - 1, A[1]))
        out.append((start, end, cfg))
        if B and not right:
            out.append((j + 1, B[0], B[1]))
        return out

    def point_block(self, j: int, rng: np.random.Generator, mode: str = "full") -> None:
        """Gibbs update of (b_j, c_j, eta_j, z_j) jointly; ``mode`` narrows the block.

        ``full`` lets every label of ``j`` change, ``eta`` keeps b_j = 1 and
        updates (eta_j, z_j), ``z`` keeps eta_j = 1 and updates z_j only.
        """
        n, K = self.n, self.K
        b, c = self.b, self.c
        bj, cj, ej, zj = b[j], c[j], self.eta[j], self.z[j]
        a = self.hyper.dir_conc
        rc = self.hyper.region_conc
        A = (self.seg_key[j - 1], c[j - 1]) if j > 0 and not b[j - 1] else None
        B = (self.seg_end[self.seg_key[j + 1]], c[j + 1]) if j + 1 < n and not b[j + 1] else None
        cur_keys = []
        if A:
            cur_keys.append(A[0])
        if not bj and self.seg_key[j] not in cur_keys:
            cur_keys.append(self.seg_key[j])
        if B and self.seg_key[j + 1] not in cur_keys:
            cur_keys.append(self.seg_key[j + 1])
        # base: everything with j and the window's return observations taken out
        stats = list(self.stats)
        touched = set()
        pts = list(self.pts)
        if not bj:
            stats[cj] = _sub(stats[cj], self.bobs[j])
            touched.add(cj)
            pts[cj] -= 1
        n_b0, n_eta0 = self.n_b - bj, self.n_eta - ej
        js0 = self.js
        if bj:
            o = self.jobs[j]
            js0 = [js0[k] - o[k] for k in range(5)]
        zsum0 = self.zsum
        if ej:
            g = self.seg_grp[zj]
            stats[g] = _sub(stats[g], self.ret_obs(j, zj, self.seg_end[zj]))
            touched.add(g)
            m = len(self.refs[zj])
            zsum0 -= lgamma(rc + m) - lgamma(rc + m - 1)
        win_refs = {}
        for k in cur_keys:
            rs = sorted(i for i in self.refs[k] if i != j)
            win_refs[k] = rs
            g = self.seg_grp[k]
            e = self.seg_end[k]
            for i in rs:
                stats[g] = _sub(stats[g], self.ret_obs(i, k, e))
                touched.add(g)
        nz0 = len(self.seg_end) - len(cur_keys)
        need = [k for k, rs in win_refs.items() if rs]
        sum_pts0 = self.sum_lg_pts
        if not bj:
            sum_pts0 += lgamma(a + pts[cj]) - lgamma(a + pts[cj] + 1)
        ev_base = sum(self.gev) - sum(self.gev[g] for g in touched)

        cands = []  # (logp, cfg, zkey, segs, new stats dict)

        def layout(cfg):
            segs = self._window_segs(j, cfg, A, B)
            keys = {s for s, _, _ in segs}
            if any(k not in keys for k in need):
                return None
            add = {}
            for s, e, g in segs:
                rs = win_refs.get(s)
                if rs:
                    acc = add.get(g, stats[g])
                    for i in rs:
                        acc = _add(acc, self.ret_obs(i, s, e))
                    add[g] = acc
            return segs, add

        # moves are scored on the partition level: the labelled joint times K!,
        # so a point may leave a singleton group or open a new one
        singleton = not bj and pts[cj] == 0
        M = self.hyper.max_groups
        stats.append(ZERO)
        pts.append(0)
        gev = self.gev + [0.0]

        def score(add, Kp, sp, nb, ne, nz, zs, jsum):
            tot = ev_base
            for g in touched | set(add):
                if g not in touched:
                    tot -= gev[g]
                tot += self.ev(add.get(g, stats[g]))
            if Kp < K:
                sp -= lgamma(a)  # the emptied group drops out of the product
            return tot + self.count_terms(Kp, sp, nb, ne, nz, zs, jsum) + lgamma(Kp + 1)

        if mode == "full":
            labels = list(range(K))
            if K < M and not singleton:
                labels.append(K)
            for g in labels:
                lay = layout(g)
                if lay is None:
                    continue
                segs, add = lay
                Kp = K + (g == K) - (singleton and g != cj)
                add = dict(add)
                add[g] = _add(add.get(g, stats[g]), self.bobs[j])
                sp = sum_pts0 + lgamma(a + pts[g] + 1) - (lgamma(a + pts[g]) if g < K else 0.0)
                lp = score(add, Kp, sp, n_b0, n_eta0, nz0 + len(segs), zsum0, js0)
                cands.append((lp, g, -1, segs, add, Kp))
        if self.elig[j] and not (singleton and K == 1):
            lay = layout(-1)
            if lay is not None:
                segs, add = lay
                Kp = K - singleton
                o = self.jobs[j]
                js1 = [js0[k] + o[k] for k in range(5)]
                nz1 = nz0 + len(segs)
                if mode in ("full", "eta"):
                    lp = score(add, Kp, sum_pts0, n_b0 + 1, n_eta0, nz1, zsum0, js1)
                    cands.append((lp, -1, -1, segs, add, Kp))
                # returns: any segment starting before j
                ends = dict(self.seg_end)
                grps = dict(self.seg_grp)
                for k in cur_keys:
                    ends.pop(k, None)
                    grps.pop(k, None)
                for s, e, g in segs:
                    ends[s] = e
                    grps[s] = g
                new_keys = {s for s, _, _ in segs}
                for s in sorted(k for k in ends if k < j):
                    g = grps[s]
                    add2 = dict(add)
                    add2[g] = _add(add.get(g, stats[g]), self.ret_obs(j, s, ends[s]))
                    if s in new_keys:
                        m = len(win_refs.get(s, ()))
                    else:
                        m = len(self.refs[s]) - (1 if s == zj and ej else 0)
                    zs = zsum0 + math.log(rc + m)
                    lp = score(add2, Kp, sum_pts0, n_b0 + 1, n_eta0 + 1, nz1, zs, js1)
                    cands.append((lp, -1, s, segs, add2, Kp))
        if mode == "z":
            cands = [cd for cd in cands if cd[2] >= 0]
        elif mode == "eta":
            cands = [cd for cd in cands if cd[1] < 0]
        if not cands:
            return
        lps = np.array([cd[0] for cd in cands])
        p = np.exp(lps - lps.max())
        p /= p.sum()
        pick = min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), len(cands) - 1)
        self._commit_point(j, cands[pick], cur_keys, win_refs, stats, touched)

    def _commit_point(self, j, cand, cur_keys, win_refs, base, touched):
        _, cfg, zkey, segs, add, Kp = cand
        if Kp > self.K:
            self.stats.append(ZERO)
            self.gev.append(0.0)
            self.pts.append(0)
            self.sum_lg_pts += lgamma(self.hyper.dir_conc)
            self.K += 1
        a = self.hyper.dir_conc
        rc = self.hyper.region_conc
        bj, cj, ej, zj = self.b[j], self.c[j], self.eta[j], self.z[j]
        # unwind j
        if not bj:
            self.sum_lg_pts += lgamma(a + self.pts[cj] - 1) - lgamma(a + self.pts[cj])
            self.pts[cj] -= 1
        else:
            o = self.jobs[j]
            self.js = [self.js[k] - o[k] for k in range(5)]
            self.n_b -= 1
        if ej:
            m = len(self.refs[zj])
            self.zsum -= lgamma(rc + m) - lgamma(rc + m - 1)
            self.refs[zj].discard(j)
            self.n_eta -= 1
        # segment registry
        for k in cur_keys:
            del self.seg_end[k]
            del self.seg_grp[k]
            r = self.refs.pop(k)
            r.discard(j)
        for s, e, g in segs:
            self.seg_end[s] = e
            self.seg_grp[s] = g
            self.refs[s] = set(win_refs.get(s, ()))
            for i in range(s, e + 1):
                self.seg_key[i] = s
        # new labels of j
        if cfg >= 0:
            self.b[j], self.c[j], self.eta[j], self.z[j] = 0, cfg, 0, -1
            self.sum_lg_pts += lgamma(a + self.pts[cfg] + 1) - lgamma(a + self.pts[cfg])
            self.pts[cfg] += 1
        else:
            self.b[j], self.c[j] = 1, -1
            self.seg_key[j] = -1
            o = self.jobs[j]
            self.js = [self.js[k] + o[k] for k in range(5)]
            self.n_b += 1
            if zkey >= 0:
                m = len(self.refs[zkey])
                self.zsum += math.log(rc + m)
                self.refs[zkey].add(j)
                self.eta[j], self.z[j] = 1, zkey
                self.n_eta += 1
            else:
                self.eta[j], self.z[j] = 0, -1
        for g in touched | set(add):
            self.stats[g] = add.get(g, base[g])
            self.gev[g] = self.ev(self.stats[g])
        if Kp < self.K:
            self._drop_group(cj)

    def _drop_group(self, g: int) -> None:
        """Remove the empty group ``g``; the last label takes its place."""
        last = self.K - 1
        if g != last:
            for i in range(self.n):
                if self.c[i] == last:
                    self.c[i] = g
            for k, h in self.seg_grp.items():
                if h == last:
                    self.seg_grp[k] = g
            self.stats[g], self.gev[g], self.pts[g] = self.stats[last], self.gev[last], self.pts[last]
        self.stats.pop()
        self.gev.pop()
        self.pts.pop()
        self.sum_lg_pts -= lgamma(self.hyper.dir_conc)
        self.K = last

    # ---------------------------------------------------------------- segment relabel

    def segment_move(self, s: int, rng: np.random.Generator) -> None:
        K = self.K
        if K == 1:
            return
        e = self.seg_end[s]
        g = self.seg_grp[s]
        L = e - s + 1
        if self.pts[g] == L:
            return
        excl = set()
        if s > 0 and not self.b[s - 1]:
            excl.add(self.c[s - 1])
        if e + 1 < self.n and not self.b[e + 1]:
            excl.add(self.c[e + 1])
        seg = ZERO
        for i in range(s, e + 1):
            seg = _add(seg, self.bobs[i])
        for i in sorted(self.refs[s]):
            seg = _add(seg, self.ret_obs(i, s, e))
        a = self.hyper.dir_conc
        base_g = _sub(self.stats[g], seg)
        ev_g_minus = self.ev(base_g)
        opts, lps = [], []
        tot_other = sum(self.gev) - self.gev[g]
        for h in range(K):
            if h in excl:
                continue
            if h == g:
                lp = self.gev[g] + tot_other
                sp = self.sum_lg_pts
            else:
                new_h = _add(self.stats[h], seg)
                lp = tot_other - self.gev[h] + self.ev(new_h) + ev_g_minus
                sp = (self.sum_lg_pts + lgamma(a + self.pts[g] - L) - lgamma(a + self.pts[g])
                      + lgamma(a + self.pts[h] + L) - lgamma(a + self.pts[h]))
            lp += self.count_terms(K, sp, self.n_b, self.n_eta, len(self.seg_end), self.zsum, self.js)
            opts.append(h)
            lps.append(lp)
        if len(opts) < 2:
            return
        lps = np.array(lps)
        p = np.exp(lps - lps.max())
        p /= p.sum()
        h = opts[min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), len(opts) - 1)]
        if h == g:
            return
        self.stats[g] = base_g
        self.gev[g] = ev_g_minus
        self.stats[h] = _add(self.stats[h], seg)
        self.gev[h] = self.ev(self.stats[h])
        self.sum_lg_pts += (lgamma(a + self.pts[g] - L) - lgamma(a + self.pts[g])
                            + lgamma(a + self.pts[h] + L) - lgamma(a + self.pts[h]))
        self.pts[g] -= L
        self.pts[h] += L
        self.seg_grp[s] = h
        for i in range(s, e + 1):
            self.c[i] = h

    # ---------------------------------------------------------------- eject / absorb

    def _segment_stats(self, s):
        e = self.seg_end[s]
        acc = ZERO
        for i in range(s, e + 1):
            acc = _add(acc, self.bobs[i])
        for i in sorted(self.refs[s]):
            acc = _add(acc, self.ret_obs(i, s, e))
        return acc, e - s + 1

    def _lp_groups(self, K, pts, evs) -> float:
        a = self.hyper.dir_conc
        sp = sum(lgamma(a + p) for p in pts)
        return sum(evs) + self.count_terms(K, sp, self.n_b, self.n_eta, len(self.seg_end), self.zsum, self.js)

    def _log_pbar(self, K, pts, evs) -> float:
        """Partition-level target: labelled joint times K!."""
        return self._lp_groups(K, pts, evs) + lgamma(K + 1)

    def _p_eject(self, K) -> float:
        M = self.hyper.max_groups
        if K >= M:
            return 0.0
        return 1.0 if K == 1 else 0.5

    def _p_absorb(self, K) -> float:
        M = self.hyper.max_groups
        if K <= 1:
            return 0.0
        return 1.0 if K == M else 0.5

    def _log_split_prob(self, m1, m2) -> float:
        # both orderings of the same split, with rho ~ Beta(a, a) integrated out
        a = self.hyper.eject_conc
        return (math.log(2.0) + lgamma(a + m1) + lgamma(a + m2) - lgamma(2 * a + m1 + m2)
                + lgamma(2 * a) - 2 * lgamma(a))

    def absorb_eject(self, rng: np.random.Generator) -> bool:
        K = self.K
        M = self.hyper.max_groups
        if M == 1:
            return False
        pe = self._p_eject(K)
        if rng.random() < pe:
            return self._eject(rng)
        return self._absorb(rng)

    def _eject(self, rng) -> bool:
        K = self.K
        g = int(rng.integers(K))
        rho = rng.beta(self.hyper.eject_conc, self.hyper.eject_conc)
        keys = sorted(k for k, h in self.seg_grp.items() if h == g)
        move = [k for k in keys if rng.random() < rho]
        if not move or len(move) == len(keys):
            return False
        stay_stats, move_stats = ZERO, ZERO
        p_move = 0
        for k in keys:
            st, L = self._segment_stats(k)
            if k in move:
                move_stats = _add(move_stats, st)
                p_move += L
            else:
                stay_stats = _add(stay_stats, st)
        pts1 = list(self.pts)
        pts1[g] -= p_move
        pts1.append(p_move)
        evs1 = list(self.gev)
        evs1[g] = self.ev(stay_stats)
        evs1.append(self.ev(move_stats))
        log_new = self._log_pbar(K + 1, pts1, evs1)
        log_old = self._log_pbar(K, self.pts, self.gev)
        log_fwd = math.log(self._p_eject(K)) - math.log(K) + self._log_split_prob(len(keys) - len(move), len(move))
        log_rev = math.log(self._p_absorb(K + 1)) - math.log((K + 1) * K / 2)
        if math.log(rng.random()) >= log_new - log_old + log_rev - log_fwd:
            return False
        mv = set(move)
        for k in move:
            self.seg_grp[k] = K
            for i in range(k, self.seg_end[k] + 1):
                self.c[i] = K
        self.K = K + 1
        self.pts = pts1
        self.stats[g] = stay_stats
        self.stats.append(move_stats)
        self.gev = evs1
        self.sum_lg_pts = sum(lgamma(self.hyper.dir_conc + p) for p in self.pts)
        return True

    def _absorb(self, rng) -> bool:
        K = self.K
        if K < 2:
            return False
        g1, g2 = sorted(int(v) for v in rng.choice(K, size=2, replace=False))
        # merging must not fuse adjacent segments, otherwise no eject reverses it
        for k, h in self.seg_grp.items():
            if h != g2:
                continue
            e = self.seg_end[k]
            if (k > 0 and not self.b[k - 1] and self.c[k - 1] == g1) or \
                    (e + 1 < self.n and not self.b[e + 1] and self.c[e + 1] == g1):
                return False
        merged = _add(self.stats[g1], self.stats[g2])
        m1 = sum(1 for h in self.seg_grp.values() if h == g1)
        m2 = sum(1 for h in self.seg_grp.values() if h == g2)
        pts1 = [p for h, p in enumerate(self.pts) if h != g2]
        evs1 = [v for h, v in enumerate(self.gev) if h != g2]
        i1 = g1  # g1 < g2 so its index is unchanged after removal
        pts1[i1] = self.pts[g1] + self.pts[g2]
        evs1[i1] = self.ev(merged)
        log_new = self._log_pbar(K - 1, pts1, evs1)
        log_old = self._log_pbar(K, self.pts, self.gev)
        log_fwd = math.log(self._p_absorb(K)) - math.log(K * (K - 1) / 2)
        log_rev = math.log(self._p_eject(K - 1)) - math.log(K - 1) + self._log_split_prob(m1, m2)
        if math.log(rng.random()) >= log_new - log_old + log_rev - log_fwd:
            return False
        last = K - 1
        relabel = {g2: g1}
        if g2 != last:
            relabel[last] = g2
        for i in range(self.n):
            if self.c[i] in relabel:
                self.c[i] = relabel[self.c[i]]
        for k, h in list(self.seg_grp.items()):
            if h in relabel:
                self.seg_grp[k] = relabel[h]
        stats = list(self.stats)
        stats[g1] = merged
        pts = list(self.pts)
        pts[g1] = self.pts[g1] + self.pts[g2]
        if g2 != last:
            stats[g2] = stats[last]
            pts[g2] = pts[last]
        self.stats = stats[:last]
        self.pts = pts[:last]
        self.gev = [self.ev(s) for s in self.stats]
        self.K = K - 1
        self.sum_lg_pts = sum(lgamma(self.hyper.dir_conc + p) for p in self.pts)
        return True

    # ---------------------------------------------------------------- sweeps

    def check(self, tol: float = 1e-7) -> None:
        """Compare cached quantities with a from-scratch evaluation (debug mode)."""
        from .joint import log_joint
        from .state import check_state

        st = self.state()
        check_state(self.deltas, st, self.hyper.eps, self.hyper.max_groups)
        cached = self.log_joint()
        ref = log_joint(self.deltas, st, self.hyper)
        if not abs(cached - ref) <= tol * max(1.0, abs(ref)):
            raise AssertionError(f"incremental log joint {cached!r} differs from reference {ref!r}")

    def update_groups(self, rng: np.random.Generator) -> None:
        for s in sorted(self.seg_end):
            if s in self.seg_end:
                self.segment_move(s, rng)
                self._after_move()

    def update_jumps(self, rng: np.random.Generator) -> None:
        for j in range(self.n):
            self.point_block(j, rng, "full")
            self._after_move()

    def update_returns(self, rng: np.random.Generator) -> None:
        for j in range(self.n):
            if self.b[j]:
                self.point_block(j, rng, "eta")
                self._after_move()

    def update_regions(self, rng: np.random.Generator) -> None:
        for j in range(self.n):
            if self.eta[j]:
                self.point_block(j, rng, "z")
                self._after_move()

    def _after_move(self) -> None:
        if self.debug:
            self.check()

    def sweep(self, rng: np.random.Generator) -> None:
        self.update_groups(rng)
        self.absorb_eject(rng)
        self._after_move()
        self.update_jumps(rng)
        self.update_returns(rng)
        self.update_regions(rng)
        # drop accumulated rounding from the running sums
        self.rebuild()
