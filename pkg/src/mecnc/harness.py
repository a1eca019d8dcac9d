"""Slot loop, stability classifier, lambda / V sweeps and result persistence."""

from __future__ import annotations

import contextlib
import copy
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as mt
from .controller import MecncController
from .model import ConfigError, Instance, build_instance
from .queues import PlanError, QueueState, apply_ops, dump_rows, validate_plan
from .stochastic import ChannelSampler, Streams, a_max_for, sample_arrivals, step_mobility

log = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ("slot", "proc_setup", "proc_unit", "wired_setup", "wired_unit",
                      "wireless_energy", "h1", "kappa_q", "total_q", "delivered", "age_mass")
SWEEP_COLUMNS = ("value", "seed", "stable", "h1", "proc_setup", "proc_unit", "wired_setup",
                 "wired_unit", "wireless_energy", "little_delay_ms", "age_delay_ms",
                 "offload_ratio")


@dataclass
class RunConfig:
    instance: dict
    V: float = 0.0
    lam: float | None = None          # packets per slot per UE per service; None -> config rates
    slots: int = 10_000
    warmup: float = 0.1
    seed: int = 0
    controller: str = "mecnc"         # mecnc | oracle | local
    out: str | None = None
    trace: bool = False
    mobility: bool = True
    track_ages: bool = True
    execution: str = "weighted"
    validate_plans: bool | None = None  # None: only for the oracle policy
    oracle_margin: float = 0.05

    def check(self) -> None:
        if self.slots < 1000:
            raise ConfigError("horizon must be at least 1000 slots")
        if not 0 <= self.warmup < 0.5:
            raise ConfigError("warm-up fraction must lie in [0, 0.5)")
        if self.V < 0:
            raise ConfigError("V must be nonnegative")
        if self.controller not in ("mecnc", "oracle", "local"):
            raise ConfigError(f"unknown controller '{self.controller}'")
        if self.execution not in ("ordered", "weighted", "proportional"):
            raise ConfigError(f"unknown execution mode '{self.execution}'")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lambda must be nonnegative")


@dataclass
class RunResult:
    metrics: mt.RunMetrics
    series: np.ndarray                # [slot, len(TIMESERIES_COLUMNS)]
    stable: bool
    tau: float
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        m = self.metrics
        ms = self.tau * 1e3
        return {
            "slots_measured": m.slots,
            "h1": m.cost,
            "cost_parts": dict(zip(TIMESERIES_COLUMNS[1:6], map(float, m.cost_parts))),
            "little_delay_slots": m.little_delay,
            "little_delay_ms": m.little_delay * ms,
            "age_delay_slots": m.age_delay,
            "age_delay_ms": m.age_delay * ms,
            "delivered_input_equiv": m.delivered,
            "offload_ratio": m.offload_ratio,
            "stable": self.stable,
            **self.extra,
        }


def classify_stable(traj: np.ndarray, ratio: float = 1.25, floor: float = 1e-9) -> bool:
    """Trailing-quarter mean <= ratio * middle-quarter mean  =>  stable."""
    T = len(traj)
    if T < 8:
        return True
    mid = float(np.mean(traj[int(0.375 * T): int(0.625 * T)]))
    tail = float(np.mean(traj[int(0.75 * T):]))
    if tail <= floor:
        return True
    return tail <= ratio * mid


def instance_for(cfg: RunConfig) -> tuple[Instance, np.ndarray]:
    inst = build_instance(cfg.instance)
    rates = inst.rates_array() if cfg.lam is None else np.full(
        (len(inst.topology.ue_nodes), len(inst.services)), float(cfg.lam))
    return inst, rates


def make_controller(cfg: RunConfig, inst: Instance, rates: np.ndarray, kap: np.ndarray):
    if cfg.controller == "mecnc":
        return MecncController(inst, kap)
    if cfg.controller == "local":
        return MecncController(inst, kap, offload=False)
    from .oracle import RandomizedPolicy, oracle_policy_for
    sol = oracle_policy_for(inst, rates, margin=cfg.oracle_margin)
    return RandomizedPolicy(inst, sol)


def run(cfg: RunConfig) -> RunResult:
    """Simulate ``cfg.slots`` slots; writes outputs when ``cfg.out`` is set."""
    cfg.check()
    inst, rates = instance_for(cfg)
    idx = inst.index
    wl = inst.wireless
    streams = Streams.from_seed(cfg.seed)
    total_rate = float(rates.sum())
    kap = mt.kappa(idx, rates).values if total_rate > 0 else np.ones(len(idx.comms))
    ctrl = make_controller(cfg, inst, rates, kap)
    sampler = ChannelSampler(inst)
    amax = a_max_for(rates, inst.a_max_factor)
    n_ue = idx.n_ue
    pos = np.array([inst.topology.positions[n] for n in idx.nodes], dtype=float)
    state = QueueState(len(idx.nodes), len(idx.comms), track_ages=cfg.track_ages)
    warm = int(cfg.warmup * cfg.slots)
    acc = mt.MetricsAccumulator(idx, kap, warm)
    series = np.zeros((cfg.slots, len(TIMESERIES_COLUMNS)))
    kq_w = kap
    move = cfg.mobility and wl.mobility_var > 0 and wl.discrete is None
    tau = wl.slot_len
    check = cfg.controller == "oracle" if cfg.validate_plans is None else cfg.validate_plans
    with contextlib.ExitStack() as files:
        trace_q = trace_d = None
        if cfg.trace and cfg.out:
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            trace_q = csv.writer(files.enter_context(
                open(Path(cfg.out) / "queues.csv", "w", newline="")))
            trace_q.writerow(("slot", "node", "commodity", "backlog"))
            trace_d = csv.writer(files.enter_context(
                open(Path(cfg.out) / "decisions.csv", "w", newline="")))
            trace_d.writerow(("slot", "kind", "src", "dst", "commodity", "planned",
                              "level_or_power"))
        for t in range(cfg.slots):
            if move:
                pos[:n_ue] = step_mobility(pos[:n_ue], wl.mobility_var, inst.topology.area_side,
                                           streams.mobility)
            ch = sampler.sample(pos, streams.channel)
            arr = sample_arrivals(streams.arrivals, rates, amax) if total_rate > 0 else None
            Q = state.backlog
            kq = float(np.sum(Q.sum(axis=0) * kq_w))
            tq = float(Q.sum())
            dec = ctrl.decide(Q, ch.gains, cfg.V, ch.states)
            if trace_q is not None:
                trace_q.writerows(dump_rows(state, t, idx))
                _trace_decision(trace_d, t, idx, dec)
            if check:
                try:
                    validate_plan(dec.plan, idx)
                except PlanError as exc:
                    raise PlanError(f"slot {t}: {exc}") from exc
            _, rec, ex = apply_ops(state, dec.plan_ops(idx), arr, t, idx, cfg.execution)
            cost = mt.slot_cost(idx, dec, ex, tau)
            acc.accumulate(t, cost, kq, ex, rec)
            dv = am = 0.0
            if len(rec):
                e = rec.amount / idx.c_cumxi[rec.comm]
                dv = float(e.sum())
                am = float(e @ rec.age)
            series[t] = (t, *cost.as_tuple(), cost.total, kq, tq, dv, am)

    res = RunResult(acc.result(inst.services), series, classify_stable(series[:, 7]), tau,
                    {"V": cfg.V, "lambda": cfg.lam, "seed": cfg.seed,
                     "controller": cfg.controller, "slots": cfg.slots})
    if cfg.out:
        write_run(cfg, res)
    return res


def _trace_decision(w, t, idx, dec):
    lab = [f"{cm.dest}/{cm.service}/{cm.stage}" for cm in idx.comms]
    for (i, c), a in dec.plan.to_proc.items():
        w.writerow((t, "proc", idx.nodes[i], idx.nodes[i], lab[c], a, int(dec.compute_level[i])))
    for (i, j, c), a in dec.plan.link.items():
        w.writerow((t, "link", idx.nodes[i], idx.nodes[j], lab[c], a, ""))
    for l in np.nonzero(dec.power)[0]:
        i, j = idx.links[l]
        w.writerow((t, "power", idx.nodes[i], idx.nodes[j], "", "", float(dec.power[l])))


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_series(path: Path, series: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_COLUMNS)
        for row in series:
            w.writerow((int(row[0]), *map(_fmt, row[1:])))


def write_run(cfg: RunConfig, res: RunResult) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    snap = asdict(cfg)
    (out / "config.snapshot").write_text(json.dumps(snap, indent=2, sort_keys=True))
    (out / "summary.json").write_text(json.dumps(res.summary(), indent=2, sort_keys=True,
                                                 default=float))
    write_series(out / "timeseries.csv", res.series)
    return out


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepSpec:
    variable: str                 # "lambda" or "V"
    grid: list[float]
    seeds: list[int] = field(default_factory=lambda: [0])
    ratio: float = 1.25

    def check(self) -> None:
        if self.variable not in ("lambda", "V"):
            raise ConfigError("sweep variable must be 'lambda' or 'V'")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])) or not self.grid:
            raise ConfigError("sweep grid must be non-empty and strictly increasing")
        if len(self.seeds) < 1:
            raise ConfigError("need at least one replicate seed")


def _sweep_row(value, seed, res: RunResult) -> dict:
    m = res.metrics
    ms = res.tau * 1e3
    stable = res.stable
    return {
        "value": value, "seed": seed, "stable": stable, "h1": m.cost,
        **dict(zip(TIMESERIES_COLUMNS[1:6], map(float, m.cost_parts))),
        "little_delay_ms": m.little_delay * ms if stable else math.inf,
        "age_delay_ms": m.age_delay * ms if stable else math.inf,
        "offload_ratio": json.dumps(m.offload_ratio, sort_keys=True),
    }


def _sweep(spec: SweepSpec, base: RunConfig) -> list[dict]:
    spec.check()
    rows = []
    for v in spec.grid:
        for s in spec.seeds:
            cfg = copy.copy(base)
            cfg.seed = s
            cfg.out = str(Path(base.out) / f"{spec.variable}_{v:.6g}_seed{s}") if base.out else None
            if spec.variable == "lambda":
                cfg.lam = v
            else:
                cfg.V = v
            res = run(cfg)
            rows.append(_sweep_row(v, s, res))
            log.info("%s=%g seed=%d stable=%s h1=%.6g", spec.variable, v, s, res.stable,
                     res.metrics.cost)
    if base.out:
        write_sweep(Path(base.out) / "sweep.csv", rows)
    return rows


def write_sweep(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def read_sweep(path: Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append({"value": float(r["value"]), "seed": int(r["seed"]),
                         "stable": r["stable"] == "True", "h1": float(r["h1"]),
                         **{k: float(r[k]) for k in SWEEP_COLUMNS[4:11]},
                         "offload_ratio": r["offload_ratio"]})
    return rows


def knee_report(rows: list[dict]) -> dict:
    """Aggregate lambda-sweep rows: a grid point is stable if all replicates are."""
    grid = sorted({r["value"] for r in rows})
    stable = {v: all(r["stable"] for r in rows if r["value"] == v) for v in grid}
    delay = {v: float(np.mean([r["little_delay_ms"] for r in rows if r["value"] == v]))
             for v in grid}
    first_bad = next((k for k, v in enumerate(grid) if not stable[v]), None)
    if first_bad is None:
        knee = math.inf
    elif first_bad == 0:
        knee = grid[0]
    else:
        knee = 0.5 * (grid[first_bad - 1] + grid[first_bad])
    violations = [v for k, v in enumerate(grid) if first_bad is not None and k > first_bad and stable[v]]
    return {"grid": grid, "stable": [stable[v] for v in grid],
            "delay_ms": [delay[v] for v in grid], "knee": knee,
            "monotone_violations": violations}


def sweep_lambda(spec: SweepSpec, base: RunConfig) -> dict:
    rows = _sweep(spec, base)
    rep = knee_report(rows)
    rep["rows"] = rows
    return rep


def tradeoff_report(rows: list[dict]) -> dict:
    grid = sorted({r["value"] for r in rows})
    out = []
    for v in grid:
        rs = [r for r in rows if r["value"] == v]
        ratios = [json.loads(r["offload_ratio"]) for r in rs]
        keys = sorted(ratios[0]) if ratios else []
        out.append({
            "V": v,
            "h1": float(np.mean([r["h1"] for r in rs])),
            "age_delay_ms": float(np.mean([r["age_delay_ms"] for r in rs])),
            "little_delay_ms": float(np.mean([r["little_delay_ms"] for r in rs])),
            "cost_parts": {k: float(np.mean([r[k] for r in rs])) for k in TIMESERIES_COLUMNS[1:6]},
            "offload_ratio": {k: float(np.mean([d[k] for d in ratios])) for k in keys},
            "stable": all(r["stable"] for r in rs),
        })
    return {"rows": out}


def sweep_V(spec: SweepSpec, base: RunConfig) -> dict:
    rows = _sweep(spec, base)
    rep = tradeoff_report(rows)
    rep["raw"] = rows
    return rep
