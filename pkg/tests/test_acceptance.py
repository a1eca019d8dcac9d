"""Acceptance criteria 1-6.

Each test prints a single PASS/FAIL line (visible even with output capture on)
before asserting.  The desk-scale runs are expensive and shared between
criteria 3, 4 and 6 through module-scoped fixtures.
"""

import json
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import mini_config
from mecnc import build_instance, harness, load_instance
from mecnc.controller import waterfill_power, wireless_objective
from mecnc.harness import RunConfig, SweepSpec
from mecnc.oracle import capacity_theta, projected_min_cost
from mecnc.queues import FlowPlan, QueueState, apply_decision

DESK_SLOTS = 100_000
DESK_V = np.logspace(3, np.log10(3e6), 8)
DESK_SEEDS = (0, 1, 2)
KNEE_GRID = [float(x) for x in range(180, 255, 5)]
KNEE_SLOTS = 30_000
LARGE_V = 1e5


def report(capsys, n, ok, msg):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {msg}")


# ---------------------------------------------------------------------------
# 1. water-filling optimality

BW, PKT = 1e6, 1e3
NOISE = 10 ** ((-174.0 - 30) / 10) * BW
K = BW / PKT


def _f(p, w, g, cv):
    """Per-link objective on an array of powers."""
    return cv * p - w * K * np.log2(1.0 + g * p / NOISE)


def _grid_min_2(w, g, cv, P, n=10_000):
    """Exact minimum over the n x n grid restricted to p1 + p2 <= P."""
    x = np.linspace(0.0, P, n)
    f1 = _f(x, w[0], g[0], cv)
    if len(w) == 1:
        return float(f1.min())
    pre = np.minimum.accumulate(_f(x, w[1], g[1], cv))
    # the largest grid point not above P - p1 is index n-1-i
    return float(np.min(f1 + pre[::-1]))


def _line_min(fun, hi, n=10_000):
    x = np.linspace(0.0, max(hi, 0.0), n)
    v = fun(x)
    k = int(np.argmin(v))
    return x[k], v[k]


def _coord_descent(w, g, cv, P, p0, sweeps=60):
    """Single-coordinate and pairwise-exchange descent on 10^4-point lines."""
    p = p0.copy()
    n = len(w)
    for _ in range(sweeps):
        prev = p.copy()
        for j in range(n):
            free = P - (p.sum() - p[j])
            p[j], _ = _line_min(lambda x: _f(x, w[j], g[j], cv), free)
        for a in range(n):
            for b in range(a + 1, n):
                s = p[a] + p[b]
                x, _ = _line_min(lambda x: _f(x, w[a], g[a], cv) + _f(s - x, w[b], g[b], cv), s)
                p[a], p[b] = x, s - x
        if np.array_equal(p, prev):
            break
    return float(np.sum(_f(p, w, g, cv))), p


def test_criterion1_waterfill_optimality(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_gap, worst_cs, binding = -np.inf, 0.0, 0
    n_inst = 240
    for k in range(n_inst):
        n = int(rng.integers(1, 9))
        w = rng.uniform(0.0, 10.0, n) * (rng.random(n) < 0.85)
        P = float(rng.uniform(0.05, 2.0))
        g = NOISE / P * 10 ** rng.uniform(-1.0, 3.0, n)
        V = float(10 ** rng.uniform(-1.0, 5.0))
        c_wt = float(rng.uniform(0.5, 2.0))
        cv = V * c_wt
        p, rho = waterfill_power(w, g, V, c_wt, P, BW, PKT, NOISE)
        assert (p >= 0).all() and p.sum() <= P * (1 + 1e-12)
        obj = wireless_objective(p, w, g, V, c_wt, K, NOISE)
        if n <= 2:
            ref = _grid_min_2(w, g, cv, P)
        else:
            starts = (np.zeros(n), np.full(n, P / n))
            ref = min(_coord_descent(w, g, cv, P, s)[0] for s in starts)
        gap = (obj - ref) / max(abs(ref), 1e-300)
        worst_gap = max(worst_gap, gap)
        worst_cs = max(worst_cs, abs(rho * (P - p.sum())))
        binding += rho > 0
    dt = time.perf_counter() - t0
    ok = worst_gap <= 1e-6 and worst_cs <= 1e-8 and dt < 30
    report(capsys, 1, ok, f"{n_inst} instances ({binding} budget-binding), worst relative gap "
                          f"{worst_gap:.2e}, worst |rho(P-sum p)| {worst_cs:.1e}, {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------------------
# 2. tiny instance against the oracle

def test_criterion2_tiny_oracle_agreement(capsys, tiny_config):
    t0 = time.perf_counter()
    theta = capacity_theta(load_instance("tiny"), np.array([[1.0]]), power_levels=5).theta
    base = RunConfig(tiny_config, V=0.0, slots=40_000)
    lo = harness.run(RunConfig(tiny_config, V=0.0, lam=0.9 * theta, slots=40_000))
    hi = harness.run(RunConfig(tiny_config, V=0.0, lam=1.1 * theta, slots=40_000))
    grid = [round(x, 2) for x in np.arange(5.0, 7.01, 0.2)]
    knee = harness.sweep_lambda(SweepSpec("lambda", grid), base)["knee"]
    dt = time.perf_counter() - t0
    err = abs(knee - theta) / theta
    ok = lo.stable and not hi.stable and err < 0.05 and dt < 120
    report(capsys, 2, ok, f"theta*={theta:.4f}; stable at 0.9 theta*: {lo.stable}, at 1.1 theta*: "
                          f"{hi.stable}; knee {knee:.2f} ({100 * err:.1f}% off), {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------------------
# shared desk fixtures

@pytest.fixture(scope="module")
def desk_knees(desk_config):
    t0 = time.perf_counter()
    knees = {}
    for V in (0.0, LARGE_V):
        base = RunConfig(desk_config, V=V, slots=KNEE_SLOTS)
        knees[V] = harness.sweep_lambda(SweepSpec("lambda", KNEE_GRID), base)
    return knees, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_tradeoff(desk_config, desk_knees):
    knees, _ = desk_knees
    lam = 0.5 * knees[0.0]["knee"]
    t0 = time.perf_counter()
    base = RunConfig(desk_config, lam=lam, slots=DESK_SLOTS)
    rep = harness.sweep_V(SweepSpec("V", [float(v) for v in DESK_V], seeds=list(DESK_SEEDS)),
                          base)
    n_ue = len(load_instance("desk").topology.ue_nodes)
    rates = np.full((n_ue, len(desk_config["services"])), lam)
    bound, _ = projected_min_cost(desk_config, rates, power_levels=40, csi_quantiles=5)
    return lam, rep, bound, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# 3. cost/delay trends over V

def test_criterion3_tradeoff_trends(capsys, desk_tradeoff):
    lam, rep, bound, dt = desk_tradeoff
    rows = rep["rows"]
    V = [r["V"] for r in rows]
    cost = [r["h1"] for r in rows]
    age = [r["age_delay_ms"] for r in rows]
    rho_c = spearmanr(V, cost)[0]
    rho_a = spearmanr(V, age)[0]
    lowest = min(r["h1"] for r in rep["raw"])
    ok = rho_c <= -0.8 and rho_a >= 0.8 and lowest >= bound and dt < 600
    report(capsys, 3, ok, f"lambda={lam:.1f}; cost Spearman {rho_c:+.3f}, age Spearman "
                          f"{rho_a:+.3f}; lowest run cost {lowest:.5f} vs projected bound "
                          f"{bound:.5f}; {dt:.0f} s")
    assert ok


# ---------------------------------------------------------------------------
# 4. knee invariance in V

def test_criterion4_knee_invariance(capsys, desk_knees):
    knees, dt = desk_knees
    k0, k1 = knees[0.0]["knee"], knees[LARGE_V]["knee"]
    diff = abs(k1 - k0) / k0
    ok = np.isfinite(k0) and np.isfinite(k1) and diff < 0.05
    report(capsys, 4, ok, f"knee at V=0: {k0:.1f}, at V={LARGE_V:.0e}: {k1:.1f} "
                          f"({100 * diff:.1f}% apart), {dt:.0f} s")
    assert ok


# ---------------------------------------------------------------------------
# 5. invariants

def _random_plan_checks(n_plans=10_000):
    cfg = mini_config(n_ue=2, n_server=2, wired=True,
                      services=[{"id": "a", "scaling": [2.0, 0.5], "workload": [1.0, 1.0]}])
    idx = build_instance(cfg).index
    N, C = len(idx.nodes), len(idx.comms)
    proc = [(i, c) for i in range(N) for c in range(C) if idx.proc_mask[i, c]]
    links = [(i, j, c) for i, j in list(idx.wired) + list(idx.links) for c in range(C)
             if idx.hold[j, c] and idx.hold[i, c] and not (idx.c_final[c] and idx.c_dest[c] == i)]
    rng = np.random.default_rng(9)
    s = QueueState(N, C)
    worst_bound = worst_ledger = 0.0
    modes = ("ordered", "weighted", "proportional")
    for t in range(n_plans):
        plan = FlowPlan()
        for key in proc:
            if rng.random() < 0.6:
                plan.to_proc[key] = float(rng.uniform(0, 6))
                plan.proc_cap[key[0]] = 1e9
                plan.priority[key] = float(rng.normal())
        for key in links:
            if rng.random() < 0.6:
                plan.link[key] = float(rng.uniform(0, 6))
                plan.link_cap[key[:2]] = 1e9
                plan.priority[key] = float(rng.normal())
        arr = rng.integers(0, 3, (2, 1))
        Q0 = s.backlog.copy()
        _, _, ex = apply_decision(s, plan, arr, t, idx, mode=modes[t % 3])
        out_p, in_p, exo = np.zeros((N, C)), np.zeros((N, C)), np.zeros((N, C))
        for (i, c), a in plan.to_proc.items():
            out_p[i, c] += a
            in_p[i, idx.c_next[c]] += idx.c_xi[c] * a
        for (i, j, c), a in plan.link.items():
            out_p[i, c] += a
            in_p[j, c] += a
        for u in range(2):
            exo[u, idx.first_stage[u, 0]] += arr[u, 0]
        over = s.backlog - (np.maximum(Q0 - out_p, 0.0) + in_p + exo)
        worst_bound = max(worst_bound, float(over.max()))
        delta = exo.copy()
        ops, got = ex.ops, ex.got
        np.subtract.at(delta, (ops.src, ops.src_c), got)
        keep = ~ops.deliver
        np.add.at(delta, (ops.dst[keep], ops.dst_c[keep]), got[keep] * ops.scale[keep])
        worst_ledger = max(worst_ledger, float(np.abs(s.backlog - Q0 - delta).max()))
        if t % 500 == 0:
            s = QueueState(N, C)            # restart so backlogs stay moderate
    return worst_bound, worst_ledger


class _Checked:
    """Wraps a controller and checks radio feasibility of every decision.

    Association binds UE uplinks only; servers split power over downlinks freely.
    """

    def __init__(self, ctrl, idx):
        self.ctrl, self.idx = ctrl, idx
        self.src = np.array([i for i, _ in idx.links])
        self.dst = np.array([j for _, j in idx.links])
        self.worst_power = -np.inf
        self.multi_assoc = 0
        self.slots = 0

    def decide(self, Q, gains, V, states=None):
        d = self.ctrl.decide(Q, gains, V, states)
        idx = self.idx
        used = np.zeros(len(idx.nodes))
        np.add.at(used, self.src, d.power)
        self.worst_power = max(self.worst_power, float((used - idx.p_budget).max()))
        for u in range(idx.n_ue):
            on = np.nonzero((self.src == u) & (d.power > 0))[0]
            a = d.assoc.get(u)
            if len(on) > 1 or (len(on) == 1 and (a is None or self.dst[on[0]] != a)):
                self.multi_assoc += 1
        self.slots += 1
        return d


def _full_run_checks(desk_config, monkeypatch):
    checked, audits = [], []
    real_make = harness.make_controller
    real_apply = harness.apply_ops

    def make(cfg, inst, rates, kap):
        c = _Checked(real_make(cfg, inst, rates, kap), inst.index)
        checked.append(c)
        return c

    def apply(state, ops, arr, t, idx, mode):
        out = real_apply(state, ops, arr, t, idx, mode)
        if t % 250 == 0:
            audits.append(state.audit())
        return out

    monkeypatch.setattr(harness, "make_controller", make)
    monkeypatch.setattr(harness, "apply_ops", apply)
    for V in (0.0, 1e5):
        harness.run(RunConfig(desk_config, V=V, lam=150.0, slots=10_000))
    monkeypatch.undo()
    worst_power = max(c.worst_power for c in checked)
    bad_assoc = sum(c.multi_assoc for c in checked)
    return worst_power, bad_assoc, max(audits), sum(c.slots for c in checked)


def _little_vs_age():
    # one UE computing locally: a single stage-1 queue served at 2 per slot
    cfg = mini_config(services=[{"id": "f", "scaling": [1.0], "workload": [1.0]}])
    res = harness.run(RunConfig(cfg, lam=1.8, slots=200_000, controller="local", seed=3))
    m = res.metrics
    return res.stable, m.little_delay, m.age_delay


def _determinism(desk_config, tmp_path):
    files = ("timeseries.csv", "summary.json", "queues.csv", "decisions.csv")
    same = True
    for seed in (0, 1):
        for d in ("a", "b"):
            harness.run(RunConfig(desk_config, V=1e4, lam=100.0, slots=2000, seed=seed,
                                  trace=True, out=str(tmp_path / f"{seed}{d}")))
        same &= all((tmp_path / f"{seed}a" / f).read_bytes() == (tmp_path / f"{seed}b" / f)
                    .read_bytes() for f in files)
    return same


def test_criterion5_invariants(capsys, desk_config, monkeypatch, tmp_path):
    t0 = time.perf_counter()
    worst_bound, worst_ledger = _random_plan_checks()
    worst_power, bad_assoc, worst_audit, n_slots = _full_run_checks(desk_config, monkeypatch)
    stable, little, age = _little_vs_age()
    agree = abs(little - age) / age
    same = _determinism(desk_config, tmp_path)
    ok = (worst_bound <= 1e-9 and worst_ledger <= 1e-9 and worst_audit <= 1e-9
          and worst_power <= 1e-12 and bad_assoc == 0 and stable and agree <= 0.15 and same)
    dt = time.perf_counter() - t0
    report(capsys, 5, ok, f"1e4 plans: bound excess {worst_bound:.1e}, flow ledger error "
                          f"{worst_ledger:.1e}; {n_slots} desk slots: age-ledger error "
                          f"{worst_audit:.1e}, budget excess {worst_power:.1e}, association "
                          f"violations {bad_assoc}; Little {little:.3f} vs age {age:.3f} slots "
                          f"({100 * agree:.1f}%); byte-exact reruns: {same}; {dt:.0f} s")
    assert ok


# ---------------------------------------------------------------------------
# 6. offloading grows with V

def test_criterion6_offload_monotone(capsys, desk_tradeoff):
    _, rep, _, _ = desk_tradeoff
    raw = rep["raw"]
    grid = sorted({r["value"] for r in raw})
    per = {v: [json.loads(r["offload_ratio"]) for r in raw if r["value"] == v] for v in grid}
    keys = sorted(per[grid[0]][0])
    ok, parts = True, []
    for key in keys:
        vals = np.array([[d[key] for d in per[v]] for v in grid])      # [V, seed]
        mean = vals.mean(axis=1)
        se = vals.std(axis=1, ddof=1) / np.sqrt(vals.shape[1])
        drops = [k for k in range(len(grid) - 1) if mean[k + 1] < mean[k]]
        noisy = all(mean[k] - mean[k + 1] <= 2 * np.hypot(se[k], se[k + 1]) for k in drops)
        good = len(drops) <= 1 and noisy
        ok &= good
        parts.append(f"{key} " + "/".join(f"{x:.2f}" for x in mean) + f" ({len(drops)} inv)")
    report(capsys, 6, ok, "; ".join(parts))
    assert ok
