"""MECNC: per-slot max-weight decisions for processing, wired and wireless links.

The single-resource functions (``decide_processing``, ``decide_wired``,
``waterfill_power`` ...) follow the textbook steps one node at a time.
``MecncController`` runs the same rules vectorized over the whole network for
the slot loop; tests check that both routes agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .queues import FlowPlan, PlanOps

LN2 = math.log(2.0)


@dataclass
class WeightTable:
    proc_w: np.ndarray      # [node, comm]
    wired_w: np.ndarray     # [wired edge, comm]
    link_w: np.ndarray      # [wireless link, comm]


class Decision:
    """One slot's control action: association, levels, powers and planned flows.

    The planned flows are held as a ``FlowPlan`` (dict form) or ``PlanOps``
    (column form); each is derived from the other on first access.
    """

    def __init__(self, assoc, compute_level, wired_level, power, plan=None, link_pkts=None,
                 ops=None):
        self.assoc: dict[int, int | None] = assoc
        self.compute_level = compute_level
        self.wired_level = wired_level
        self.power = power
        self.link_pkts = np.zeros(0) if link_pkts is None else link_pkts  # R*tau per link
        self._plan = plan
        self._ops = ops

    @property
    def plan(self) -> FlowPlan:
        if self._plan is None:
            self._plan = self._ops.to_plan() if self._ops is not None else FlowPlan()
        return self._plan

    def plan_ops(self, idx) -> PlanOps:
        if self._ops is None:
            self._ops = PlanOps.from_plan(self.plan, idx)
        return self._ops


def compute_weights(Qt: np.ndarray, idx) -> WeightTable:
    """Backpressure weights from kappa-scaled queues (next stage of final = 0)."""
    nxt = np.where(idx.c_next >= 0, idx.c_next, 0)
    pw = Qt - idx.c_xi[None, :] * Qt[:, nxt]
    pw = np.where(idx.proc_mask, np.maximum(pw, 0.0), 0.0)
    if idx.wired:
        src = np.array([a for a, _ in idx.wired])
        dst = np.array([b for _, b in idx.wired])
        ww = np.maximum(Qt[src] - Qt[dst], 0.0)
    else:
        ww = np.zeros((0, Qt.shape[1]))
    lw = np.where(idx.link_mask, np.maximum(Qt[idx.l_src] - Qt[idx.l_dst], 0.0), 0.0)
    return WeightTable(pw, ww, lw)


def _argmax_first(x: np.ndarray) -> int:
    return int(np.argmax(x))  # numpy returns the first maximum: lexicographic tie-break


def decide_processing(w: np.ndarray, workload: np.ndarray, capacity, setup_cost,
                      unit_cost: float, V: float) -> tuple[int, int, float]:
    """One node's computing decision.

    ``w`` and ``workload`` are indexed by commodity (entries the node cannot
    process must carry w = 0).  Returns (level, commodity or -1, planned intake).
    """
    W = np.maximum(np.asarray(w) / np.asarray(workload) - V * unit_cost, 0.0)
    c = _argmax_first(W)
    Wc = W[c]
    cap = np.asarray(capacity, dtype=float)
    k = _argmax_first(Wc * cap - V * np.asarray(setup_cost, dtype=float))
    if Wc <= 0:
        return k, -1, 0.0
    return k, c, cap[k] / workload[c]


def decide_wired(w: np.ndarray, capacity, setup_cost, unit_cost: float,
                 V: float) -> tuple[int, int, float]:
    """One wired link's decision: (level, commodity or -1, planned packets)."""
    W = np.maximum(np.asarray(w) - V * unit_cost, 0.0)
    c = _argmax_first(W)
    Wc = W[c]
    cap = np.asarray(capacity, dtype=float)
    k = _argmax_first(Wc * cap - V * np.asarray(setup_cost, dtype=float))
    if Wc <= 0:
        return k, -1, 0.0
    return k, c, float(cap[k])


def max_weight_commodity(w: np.ndarray) -> tuple[int, float]:
    """Commodity with the largest weight on one link (first on ties)."""
    c = _argmax_first(w)
    return c, max(float(w[c]), 0.0)


def wireless_objective(p, w, g, V, c_wt, pkts_per_hz, noise) -> float:
    """sum_j [V c_wt p_j - w_j R_j(p_j)] for one transmitting node."""
    p = np.asarray(p, dtype=float)
    R = pkts_per_hz * np.log2(1.0 + np.asarray(g) * p / noise)
    return float(np.sum(V * c_wt * p - np.asarray(w) * R))


def waterfill_power(w, g, V: float, c_wt: float, P: float, bandwidth: float,
                    packet_size: float, noise: float,
                    method: str = "exact") -> tuple[np.ndarray, float]:
    """Power split over one node's links minimizing the drift-plus-penalty term.

    p_j = [w_j (B/F) / ((V c_wt + rho) ln 2) - sigma^2 / g_j]^+ with rho = 0 when
    that fits the budget, else the root of sum_j p_j = P.  ``exact`` finds the
    root on the piecewise-linear breakpoints; ``bisection`` is the iterative
    cross-check.  Returns (p, rho).
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if method == "bisection":
        a = w * (bandwidth / packet_size) / LN2
        b = noise / g
        act = a > 0
        if not act.any():
            return np.zeros_like(w), 0.0
        cv = V * c_wt
        if cv > 0:
            p0 = np.where(act, np.maximum(a / cv - b, 0.0), 0.0)
            if p0.sum() <= P:
                return p0, 0.0
        return _waterfill_bisect(a, b, act, cv, P)
    # scalar loops: nodes have only a handful of links, so this beats numpy
    k = bandwidth / packet_size / LN2
    n = len(w)
    wl, gl = w.tolist(), g.tolist()
    act = [j for j in range(n) if wl[j] > 0]
    p = [0.0] * n
    if not act:
        return np.zeros(n), 0.0
    a = {j: wl[j] * k for j in act}
    b = {j: noise / gl[j] for j in act}
    cv = V * c_wt
    if cv > 0:
        tot = 0.0
        for j in act:
            x = a[j] / cv - b[j]
            if x > 0:
                p[j] = x
                tot += x
        if tot <= P:
            return np.array(p), 0.0
    # water level t = 1 / (V c_wt + rho); sum_j [a_j t - b_j]^+ is piecewise linear in t
    act.sort(key=lambda j: b[j] / a[j])
    A = B = 0.0
    t = 0.0
    for r, j in enumerate(act):
        A += a[j]
        B += b[j]
        t = (P + B) / A
        if r == len(act) - 1 or t <= b[act[r + 1]] / a[act[r + 1]]:
            break
    rho = max(1.0 / t - cv, 0.0)
    tot = 0.0
    p = [0.0] * n
    for j in act:
        x = a[j] * t - b[j]
        if x > 0:
            p[j] = x
            tot += x
    out = np.array(p)
    if tot > 0:
        out *= P / tot
    return out, rho


def _waterfill_bisect(a, b, act, cv, P, tol=1e-9, max_iter=200):
    def total(rho):
        lvl = cv + rho
        if lvl <= 0:
            return math.inf, None
        p = np.where(act, np.maximum(a / lvl - b, 0.0), 0.0)
        return p.sum(), p

    lo, hi = 0.0, 1.0
    while total(hi)[0] > P:
        lo, hi = hi, 2.0 * hi
    p = total(hi)[1]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s, pm = total(mid)
        if s > P:
            lo = mid
        else:
            hi, p = mid, pm
        if abs(s - P) <= tol * max(P, 1.0):
            return pm, mid
    return p, hi


def decide_ue_association(w_star, g, V: float, c_wt: float, P: float, bandwidth: float,
                          packet_size: float, noise: float) -> tuple[int | None, float]:
    """Brute-force server choice for one UE over its candidate uplinks.

    ``w_star`` and ``g`` are per candidate (in server order).  Returns
    (candidate position or None, power).
    """
    best, best_obj, best_p = None, 0.0, 0.0
    for k, (wk, gk) in enumerate(zip(np.atleast_1d(w_star), np.atleast_1d(g))):
        if wk <= 0:
            continue
        p, _ = waterfill_power([wk], [gk], V, c_wt, P, bandwidth, packet_size, noise)
        obj = wireless_objective(p, [wk], [gk], V, c_wt, bandwidth / packet_size, noise)
        if obj < best_obj:
            best, best_obj, best_p = k, obj, float(p[0])
    return best, best_p


def decide_server_wireless(w_star, g, V: float, c_wt: float, P: float, bandwidth: float,
                           packet_size: float, noise: float) -> np.ndarray:
    """Downlink powers of one server to its covered UEs."""
    p, _ = waterfill_power(w_star, g, V, c_wt, P, bandwidth, packet_size, noise)
    return p


# ---------------------------------------------------------------------------
# compiled slot decision (same rules as ``MecncController.decide_reference``)

@numba.njit(cache=True)
def _waterfill_exact(w, g, cv, P, k, noise, out):
    """Scalar water-filling into ``out``; mirrors ``waterfill_power`` (exact)."""
    n = w.shape[0]
    for j in range(n):
        out[j] = 0.0
    na = 0
    for j in range(n):
        if w[j] > 0:
            na += 1
    if na == 0:
        return 0.0
    act = np.empty(na, np.int64)
    a = np.zeros(n)
    b = np.zeros(n)
    r = 0
    for j in range(n):
        if w[j] > 0:
            act[r] = j
            r += 1
            a[j] = w[j] * k
            b[j] = noise / g[j]
    if cv > 0:
        tot = 0.0
        for j in act:
            x = a[j] / cv - b[j]
            if x > 0:
                out[j] = x
                tot += x
        if tot <= P:
            return 0.0
        for j in act:
            out[j] = 0.0
    key = np.empty(na)
    for r in range(na):
        key[r] = b[act[r]] / a[act[r]]
    act = act[np.argsort(key, kind="mergesort")]
    A = 0.0
    B = 0.0
    t = 0.0
    for r in range(na):
        j = act[r]
        A += a[j]
        B += b[j]
        t = (P + B) / A
        if r == na - 1:
            break
        j2 = act[r + 1]
        if t <= b[j2] / a[j2]:
            break
    rho = max(1.0 / t - cv, 0.0)
    tot = 0.0
    for j in act:
        x = a[j] * t - b[j]
        if x > 0:
            out[j] = x
            tot += x
    if tot > 0:
        f = P / tot
        for j in range(n):
            out[j] *= f
    return rho


@numba.njit(cache=True)
def _decide_kernel(Qt, V, gains, offload, n_ue,
                   xi, nxt, inv_work, work, proc_mask, c_pr, cap, setup, valid, fdest,
                   w_src, w_dst, c_tr, w_cap, w_setup, w_valid,
                   l_src, l_dst, link_mask, up_table, grp_ptr, grp_links, grp_node,
                   p_budget, c_wt, bf, noise, tau,
                   klev, wlev, power, pk, assoc,
                   o_kind, o_res, o_src, o_srcc, o_dst, o_dstc, o_plan, o_cap, o_scale,
                   o_deliver, o_prio):
    N, C = Qt.shape
    no = 0
    # processing
    for i in range(N):
        best = 0.0
        bc = -1
        for c in range(C):
            if not proc_mask[i, c]:
                continue
            w = (Qt[i, c] - xi[c] * Qt[i, nxt[c]]) * inv_work[c]
            if V != 0.0:
                w -= V * c_pr[i]
            if w > best:
                best = w
                bc = c
        kb = 0
        sb = -np.inf
        for k in range(cap.shape[1]):
            if not valid[i, k]:
                continue
            sc = best * cap[i, k]
            if V != 0.0:
                sc -= V * setup[i, k]
            if sc > sb:
                sb = sc
                kb = k
        klev[i] = kb
        if bc < 0:
            continue
        if not offload and i >= n_ue:
            klev[i] = 0
            continue
        cp = cap[i, kb]
        if cp > 0:
            nc = nxt[bc]
            o_kind[no] = 0
            o_res[no] = i
            o_src[no] = i
            o_srcc[no] = bc
            o_dst[no] = i
            o_dstc[no] = nc
            o_plan[no] = cp / work[bc]
            o_cap[no] = cp
            o_scale[no] = xi[bc]
            o_deliver[no] = fdest[nc] == i
            o_prio[no] = best * work[bc]
            no += 1
    if not offload:
        return no
    # wired links
    for e in range(w_src.shape[0]):
        i = w_src[e]
        j = w_dst[e]
        best = -np.inf
        bc = 0
        for c in range(C):
            w = Qt[i, c] - Qt[j, c]
            if V != 0.0:
                w -= V * c_tr[e]
            if w > best:
                best = w
                bc = c
        m = max(best, 0.0)
        kb = 0
        sb = -np.inf
        for k in range(w_cap.shape[1]):
            if not w_valid[e, k]:
                continue
            sc = m * w_cap[e, k]
            if V != 0.0:
                sc -= V * w_setup[e, k]
            if sc > sb:
                sb = sc
                kb = k
        wlev[e] = kb
        if best > 0 and w_cap[e, kb] > 0:
            o_kind[no] = 1
            o_res[no] = e
            o_src[no] = i
            o_srcc[no] = bc
            o_dst[no] = j
            o_dstc[no] = bc
            o_plan[no] = w_cap[e, kb]
            o_cap[no] = w_cap[e, kb]
            o_scale[no] = 1.0
            o_deliver[no] = fdest[bc] == j
            o_prio[no] = best
            no += 1
    # wireless: per-link max-weight commodity
    L = l_src.shape[0]
    wst = np.zeros(L)
    lc = np.zeros(L, np.int64)
    for l in range(L):
        i = l_src[l]
        j = l_dst[l]
        best = 0.0
        bc = -1
        for c in range(C):
            if link_mask[l, c]:
                w = Qt[i, c] - Qt[j, c]
                if w > best:
                    best = w
                    bc = c
        if bc < 0:
            for c in range(C):
                if not link_mask[l, c]:
                    bc = c
                    break
            if bc < 0:
                bc = 0
        wst[l] = best
        lc[l] = bc
    k = bf / math.log(2.0)
    for u in range(n_ue):
        assoc[u] = -1
        cv = V * c_wt[u]
        P = p_budget[u]
        bo = 0.0
        bl = -1
        bp = 0.0
        for r in range(up_table.shape[1]):
            l = up_table[u, r]
            if l < 0:
                continue
            ws = wst[l]
            if ws <= 0:
                continue
            a = ws * k
            b = noise / gains[l]
            if cv > 0:
                p = min(max(a / cv - b, 0.0), P)
            else:
                p = P
            obj = cv * p - ws * bf * math.log2(1.0 + p / b)
            if obj < bo:
                bo = obj
                bl = l
                bp = p
        if bl >= 0:
            power[bl] = bp
            assoc[u] = l_dst[bl]
    for sidx in range(grp_node.shape[0]):
        lo = grp_ptr[sidx]
        hi = grp_ptr[sidx + 1]
        s = grp_node[sidx]
        ls = grp_links[lo:hi]
        anyw = False
        for l in ls:
            if wst[l] > 0:
                anyw = True
        if not anyw:
            continue
        wv = np.empty(hi - lo)
        gv = np.empty(hi - lo)
        for r in range(hi - lo):
            wv[r] = wst[ls[r]]
            gv[r] = gains[ls[r]]
        out = np.empty(hi - lo)
        _waterfill_exact(wv, gv, V * c_wt[s], p_budget[s], k, noise, out)
        for r in range(hi - lo):
            power[ls[r]] = out[r]
    for l in range(L):
        if power[l] <= 0:
            continue
        pk[l] = bf * math.log2(1.0 + gains[l] * power[l] / noise) * tau
        if pk[l] <= 0:
            continue
        c = lc[l]
        o_kind[no] = 2
        o_res[no] = l
        o_src[no] = l_src[l]
        o_srcc[no] = c
        o_dst[no] = l_dst[l]
        o_dstc[no] = c
        o_plan[no] = pk[l]
        o_cap[no] = pk[l]
        o_scale[no] = 1.0
        o_deliver[no] = fdest[c] == l_dst[l]
        o_prio[no] = wst[l]
        no += 1
    return no


class MecncController:
    """Vectorized MECNC for a fixed instance and kappa table."""

    name = "mecnc"

    def __init__(self, inst, kappa: np.ndarray, offload: bool = True):
        idx = self.idx = inst.index
        wl = inst.wireless
        self.kappa = np.asarray(kappa, dtype=float)
        self.offload = offload
        self.bf = wl.pkts_per_hz
        self.noise = wl.noise_power
        self.tau = wl.slot_len
        self.bw, self.F = wl.bandwidth, wl.packet_size
        self.nxt = np.where(idx.c_next >= 0, idx.c_next, 0)
        self.inv_work = 1.0 / idx.c_work
        self.proc_f = idx.proc_mask.astype(float)
        self.pen = np.where(np.isfinite(idx.setup), 0.0, -np.inf)
        self.setup0 = np.where(np.isfinite(idx.setup), idx.setup, 0.0)
        self.w_pen = np.where(np.isfinite(idx.w_setup), 0.0, -np.inf)
        self.w_setup0 = np.where(np.isfinite(idx.w_setup), idx.w_setup, 0.0)
        self.w_src = np.array([a for a, _ in idx.wired], dtype=int)
        self.w_dst = np.array([b for _, b in idx.wired], dtype=int)
        self.rows = np.arange(len(idx.nodes))
        self.link_f = idx.link_mask.astype(float)
        self.l_rows = np.arange(len(idx.links))
        ut = idx.up_table
        self.up_ok = ut >= 0
        self.up_l = np.where(self.up_ok, ut, 0)
        self.ue_rows = np.arange(idx.n_ue)
        self.ue_P = idx.p_budget[: idx.n_ue][:, None]
        self.ue_c = idx.c_wt[: idx.n_ue][:, None]
        self.ue_c_pos = bool((self.ue_c > 0).all())
        self.n_links = len(idx.links)
        self.work_l = idx.c_work.tolist()
        self.cap_l = idx.cap.tolist()
        self.wcap_l = idx.w_cap.tolist()
        self.links_l = [(int(i), int(j)) for i, j in idx.links]
        self.l_dst_l = idx.l_dst.tolist()
        self.groups = [(idx.n_ue + k, g) for k, g in enumerate(idx.down_groups) if len(g)]
        # flattened tables for the compiled kernel
        ptr = np.cumsum([0] + [len(g) for _, g in self.groups]).astype(np.int64)
        glinks = (np.concatenate([g for _, g in self.groups]).astype(np.int64)
                  if self.groups else np.zeros(0, np.int64))
        gnode = np.array([s for s, _ in self.groups], dtype=np.int64)
        fdest = np.where(idx.c_final, idx.c_dest, -1).astype(np.int64)
        i64 = lambda x: np.ascontiguousarray(x, dtype=np.int64)
        f64 = lambda x: np.ascontiguousarray(x, dtype=float)
        self._karg = (
            f64(idx.c_xi), i64(self.nxt), f64(self.inv_work), f64(idx.c_work),
            np.ascontiguousarray(idx.proc_mask), f64(idx.c_pr), f64(idx.cap), f64(self.setup0),
            np.isfinite(idx.setup), fdest,
            i64(self.w_src), i64(self.w_dst), f64(idx.c_tr),
            f64(idx.w_cap),
            f64(self.w_setup0),
            np.isfinite(idx.w_setup),
            i64(idx.l_src), i64(idx.l_dst), np.ascontiguousarray(idx.link_mask),
            i64(idx.up_table), ptr, glinks, gnode, f64(idx.p_budget), f64(idx.c_wt))
        m = len(idx.nodes) + len(idx.wired) + len(idx.links)
        self._buf = tuple(np.zeros(m, t) for t in
                          (np.int64,) * 6 + (float,) * 3 + (np.bool_, float))

    def decide(self, Q: np.ndarray, gains: np.ndarray, V: float, states=None) -> Decision:
        """Compiled slot decision; identical rules to ``decide_reference``."""
        idx = self.idx
        Qt = Q * self.kappa
        N = len(idx.nodes)
        klev = np.zeros(N, np.int64)
        wlev = np.zeros(len(idx.wired), np.int64)
        power = np.zeros(self.n_links)
        pk = np.zeros(self.n_links)
        assoc = np.full(idx.n_ue, -1, np.int64)
        o = self._buf
        n = _decide_kernel(Qt, float(V), np.asarray(gains, dtype=float), self.offload, idx.n_ue,
                           *self._karg, self.bf, self.noise, self.tau,
                           klev, wlev, power, pk, assoc, *o)
        ops = PlanOps(*(x[:n].copy() for x in o))
        amap = dict(zip(range(idx.n_ue), [None if a < 0 else a for a in assoc.tolist()]))
        return Decision(amap, klev, wlev, power, None, pk, ops)

    def decide_reference(self, Q: np.ndarray, gains: np.ndarray, V: float,
                         states=None) -> Decision:
        """Vectorized numpy version of the slot decision (readable reference)."""
        idx = self.idx
        Qt = Q * self.kappa
        plan = FlowPlan()
        to_proc, proc_cap, links, link_cap, prio = (plan.to_proc, plan.proc_cap, plan.link,
                                                    plan.link_cap, plan.priority)
        n_ue = idx.n_ue

        # processing: W = [w / r - V c_pr]^+, then the best level for W*
        W = (Qt - idx.c_xi * Qt[:, self.nxt]) * self.inv_work
        if V:
            W -= V * idx.c_pr[:, None]
        W *= self.proc_f
        cst = W.argmax(axis=1)
        Wst = W[self.rows, cst]
        score = np.maximum(Wst, 0.0)[:, None] * idx.cap + self.pen
        if V:
            score -= V * self.setup0
        klev = score.argmax(axis=1)
        act = np.flatnonzero(Wst > 0)
        if len(act):
            kl, cl, wl_ = klev.tolist(), cst.tolist(), Wst.tolist()
            for i in act.tolist():
                if not self.offload and i >= n_ue:
                    klev[i] = 0
                    continue
                cap = self.cap_l[i][kl[i]]
                if cap > 0:
                    c = cl[i]
                    to_proc[(i, c)] = cap / self.work_l[c]
                    proc_cap[i] = cap
                    prio[(i, c)] = wl_[i] * self.work_l[c]

        E = len(idx.wired)
        wlev = np.zeros(E, dtype=int)
        if E and self.offload:
            WW = Qt[self.w_src] - Qt[self.w_dst]
            if V:
                WW -= V * idx.c_tr[:, None]
            cw = WW.argmax(axis=1)
            Ww = WW[np.arange(E), cw]
            sc = np.maximum(Ww, 0.0)[:, None] * idx.w_cap + self.w_pen
            if V:
                sc -= V * self.w_setup0
            wlev = sc.argmax(axis=1)
            for e in np.flatnonzero(Ww > 0).tolist():
                cap = self.wcap_l[e][wlev[e]]
                if cap > 0:
                    i, j = idx.wired[e]
                    c = int(cw[e])
                    links[(i, j, c)] = cap
                    link_cap[(i, j)] = cap
                    prio[(i, j, c)] = float(Ww[e])

        power = np.zeros(self.n_links)
        pk = np.zeros(self.n_links)
        assoc: dict[int, int | None] = dict.fromkeys(range(n_ue))
        if self.offload and self.n_links:
            D = (Qt[idx.l_src] - Qt[idx.l_dst]) * self.link_f
            lc = D.argmax(axis=1)
            wst = np.maximum(D[self.l_rows, lc], 0.0)
            # UEs: one-link subproblem per candidate server, keep the best
            ws = wst[self.up_l] * self.up_ok
            if ws.any():
                g = gains[self.up_l]
                a = ws * (self.bf / LN2)
                b = self.noise / g
                cv = V * self.ue_c
                if V and self.ue_c_pos:
                    p = np.clip(a / cv - b, 0.0, self.ue_P)
                else:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        p = np.where(cv > 0, a / np.where(cv > 0, cv, 1.0) - b, np.inf)
                    p = np.clip(p, 0.0, self.ue_P)
                p[a <= 0] = 0.0
                obj = cv * p - ws * self.bf * np.log2(1.0 + p / b)
                obj[ws <= 0] = np.inf
                best = obj.argmin(axis=1)
                bobj = obj[self.ue_rows, best]
                for u in np.flatnonzero(bobj < 0).tolist():
                    l = int(self.up_l[u, best[u]])
                    power[l] = p[u, best[u]]
                    assoc[u] = self.l_dst_l[l]
            # servers: water-filling over covered UEs
            for s, grp in self.groups:
                wg = wst[grp]
                if not wg.any():
                    continue
                pp, _ = waterfill_power(wg, gains[grp], V, idx.c_wt[s], idx.p_budget[s],
                                        self.bw, self.F, self.noise)
                power[grp] = pp
            on = np.flatnonzero(power > 0)
            if len(on):
                pk[on] = self.bf * np.log2(1.0 + gains[on] * power[on] / self.noise) * self.tau
                lcl, pkl, wsl = lc[on].tolist(), pk[on].tolist(), wst[on].tolist()
                for k, l in enumerate(on.tolist()):
                    if pkl[k] <= 0:
                        continue
                    i, j = self.links_l[l]
                    c = lcl[k]
                    links[(i, j, c)] = pkl[k]
                    link_cap[(i, j)] = pkl[k]
                    prio[(i, j, c)] = wsl[k]
        return Decision(assoc, klev, wlev, power, plan, pk)


def mecnc_slot(inst, state, channel, V: float, kappa) -> Decision:
    """One-shot convenience wrapper around ``MecncController``."""
    Q = getattr(state, "backlog", state)
    return MecncController(inst, kappa).decide(Q, channel.gains, V)
