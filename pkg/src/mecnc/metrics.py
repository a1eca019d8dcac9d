"""Operation cost, kappa weights, the two delay estimators and offload ratios."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass
class KappaTable:
    """kappa_i^(u,phi,m); the value does not depend on the node i."""

    values: np.ndarray  # per commodity

    def __getitem__(self, key) -> float:
        _, c = key
        return float(self.values[c])


def kappa(idx, rates: np.ndarray) -> KappaTable:
    """1 / (prod_{z<m} xi * total arrival rate) per commodity."""
    total = float(np.sum(rates))
    if total <= 0:
        raise MetricsError("kappa undefined: total arrival rate is zero")
    return KappaTable(1.0 / (idx.c_cumxi * total))


@dataclass
class SlotCost:
    proc_setup: float = 0.0
    proc_unit: float = 0.0
    wired_setup: float = 0.0
    wired_unit: float = 0.0
    wireless_energy: float = 0.0

    @property
    def total(self) -> float:
        return self.proc_setup + self.proc_unit + self.wired_setup + self.wired_unit + self.wireless_energy

    def as_tuple(self) -> tuple[float, ...]:
        return (self.proc_setup, self.proc_unit, self.wired_setup, self.wired_unit,
                self.wireless_energy)


def slot_cost(idx, decision, executed, tau: float) -> SlotCost:
    """Setup costs from chosen levels, unit costs from executed flows."""
    rows = np.arange(len(idx.nodes))
    ps = float(np.sum(idx.setup[rows, decision.compute_level]))
    ops, got = executed.ops, executed.got
    pm = ops.kind == 0
    pu = float(np.sum(idx.c_pr[ops.src[pm]] * idx.c_work[ops.src_c[pm]] * got[pm]))
    ws = 0.0
    if len(idx.wired):
        ws = float(np.sum(idx.w_setup[np.arange(len(idx.wired)), decision.wired_level]))
    wm = ops.kind == 1
    wu = float(np.sum(idx.c_tr[ops.res[wm]] * got[wm])) if len(idx.wired) else 0.0
    we = float(np.sum(idx.c_wt[idx.l_src] * decision.power)) * tau if len(decision.power) else 0.0
    return SlotCost(ps, pu, ws, wu, we)


@dataclass
class RunMetrics:
    slots: int = 0
    cost: float = 0.0
    cost_parts: np.ndarray = field(default_factory=lambda: np.zeros(5))
    little_delay: float = 0.0            # slots
    age_delay: float = float("nan")      # slots, input-equivalent weighted
    delivered: float = 0.0               # input-equivalent packets
    offload_ratio: dict = field(default_factory=dict)
    offload_counts: dict = field(default_factory=dict)


class MetricsAccumulator:
    """Running means over the post-warm-up window."""

    def __init__(self, idx, kappa_values: np.ndarray, warmup: int = 0):
        self.idx = idx
        self.kappa = np.asarray(kappa_values)
        self.warmup = warmup
        self.n = 0
        self.cost_sum = np.zeros(5)
        self.kq_sum = 0.0
        self.age_mass = 0.0
        self.deliv = 0.0
        S = int(idx.c_svc.max()) + 1
        M = int(idx.c_stage.max())
        self.proc_server = np.zeros((S, M))
        self.proc_all = np.zeros((S, M))

    def accumulate(self, slot: int, cost: SlotCost, kq: float, executed, record) -> None:
        if slot < self.warmup:
            return
        idx = self.idx
        self.n += 1
        self.cost_sum += cost.as_tuple()
        self.kq_sum += kq
        ops, got = executed.ops, executed.got
        pm = (ops.kind == 0) & (got > 0)
        if pm.any():
            c, a = ops.src_c[pm], got[pm]
            s, m = idx.c_svc[c], idx.c_stage[c] - 1
            np.add.at(self.proc_all, (s, m), a)
            sv = ops.src[pm] >= idx.n_ue
            np.add.at(self.proc_server, (s[sv], m[sv]), a[sv])
        if len(record):
            eq = record.amount / idx.c_cumxi[record.comm]
            self.deliv += float(eq.sum())
            self.age_mass += float(eq @ record.age)

    def result(self, services) -> RunMetrics:
        n = max(self.n, 1)
        parts = self.cost_sum / n
        ratio, counts = {}, {}
        for s, svc in enumerate(services):
            for m in range(len(svc.scaling)):
                key = f"{svc.id}/f{m + 1}"
                tot = self.proc_all[s, m]
                ratio[key] = float(self.proc_server[s, m] / tot) if tot > 0 else 0.0
                counts[key] = (float(self.proc_server[s, m]), float(tot))
        age = self.age_mass / self.deliv if self.deliv > 0 else float("nan")
        return RunMetrics(self.n, float(parts.sum()), parts, self.kq_sum / n, age,
                          self.deliv, ratio, counts)
