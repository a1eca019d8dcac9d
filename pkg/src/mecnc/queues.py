"""Per-node per-commodity queues with FIFO age ledgers.

Backlogs are real-valued.  Every queue also keeps a FIFO list of
``(origin_slot, amount)`` batches so delivered packets can report their age;
a processed packet inherits the origin slots of the inputs that produced it.

The ledgers live in one pool of linked-list nodes (flat arrays) so a whole
slot can execute inside a compiled kernel.  Moving a batch between queues
relinks its node; only a partial head drain or an arrival allocates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

EPS = 1e-12
_MODES = {"ordered": 0, "weighted": 1, "proportional": 2}


def ledger_age_transfer(slices, xi: float) -> list[tuple[int, float]]:
    """Scale drained FIFO slices by ``xi``, keeping their origin slots."""
    return [(t, a * xi) for t, a in slices]


# ---------------------------------------------------------------------------
# compiled ledger primitives

@numba.njit(cache=True)
def _alloc(nxt, free):
    n = free[0]
    free[0] = nxt[n]
    free[1] -= 1
    nxt[n] = -1
    return n


@numba.njit(cache=True)
def _release(n, nxt, free):
    nxt[n] = free[0]
    free[0] = n
    free[1] += 1


@numba.njit(cache=True)
def _append(q, n, head, tail, lt, la, nxt, free):
    """Append node ``n`` to queue ``q``; merge with the tail on equal timestamps."""
    tl = tail[q]
    if tl >= 0 and lt[tl] == lt[n]:
        la[tl] += la[n]
        _release(n, nxt, free)
    else:
        nxt[n] = -1
        if tl >= 0:
            nxt[tl] = n
        else:
            head[q] = n
        tail[q] = n


@numba.njit(cache=True)
def _cut(q, amount, full, head, tail, lt, la, nxt, free):
    """Detach ``amount`` from the head of ``q``; returns (chain head, chain tail)."""
    if full:
        ch, ct = head[q], tail[q]
        head[q] = -1
        tail[q] = -1
        return ch, ct
    ch = -1
    ct = -1
    need = amount
    while need > 0 and head[q] >= 0:
        h = head[q]
        if la[h] <= need:
            need -= la[h]
            head[q] = nxt[h]
            if head[q] < 0:
                tail[q] = -1
            nxt[h] = -1
            n = h
        else:
            n = _alloc(nxt, free)
            lt[n] = lt[h]
            la[n] = need
            la[h] -= need
            need = 0.0
        if ct >= 0:
            nxt[ct] = n
        else:
            ch = n
        ct = n
    return ch, ct


@numba.njit(cache=True)
def _execute(Q, head, tail, lt, la, nxt, free, track,
             order, src, src_c, dst, dst_c, planned, scale, deliver, mode,
             arr_q, arr_amt, slot, got, d_c, d_a, d_age):
    """Outgoing phase in ``order``, then incoming phase, then arrivals.

    Returns the number of delivered batches written to ``d_*``.
    """
    C = Q.shape[1]
    n_ops = src.shape[0]
    chain_h = np.full(n_ops, -1, np.int64)
    start = np.empty(0)
    factor = np.empty(0)
    if mode == 2:
        demand = np.zeros(Q.shape[0] * C)
        for k in range(n_ops):
            demand[src[k] * C + src_c[k]] += planned[k]
        start = Q.ravel().copy()
        factor = np.ones(Q.shape[0] * C)
        for q in range(Q.shape[0] * C):
            if demand[q] > 0:
                factor[q] = min(1.0, start[q] / demand[q])
    for k in range(n_ops):
        got[k] = 0.0
    for k in order:
        i = src[k]
        c = src_c[k]
        q = Q[i, c]
        a = planned[k]
        if mode == 2:
            a *= factor[i * C + c]
            ref = start[i * C + c]
        else:
            ref = q
        if q <= 0 or a <= 0:
            continue
        full = a >= q - EPS * max(1.0, ref)
        amt = q if full else a
        Q[i, c] = 0.0 if full else q - amt
        got[k] = amt
        if track:
            ch, ct = _cut(i * C + c, amt, full, head, tail, lt, la, nxt, free)
            chain_h[k] = ch
    nd = 0
    for k in order:
        if got[k] <= 0:
            continue
        s = scale[k]
        if deliver[k]:
            if track:
                n = chain_h[k]
                while n >= 0:
                    m = nxt[n]
                    d_c[nd] = dst_c[k]
                    d_a[nd] = la[n] * s
                    d_age[nd] = slot - lt[n]
                    nd += 1
                    _release(n, nxt, free)
                    n = m
            else:
                d_c[nd] = dst_c[k]
                d_a[nd] = got[k] * s
                d_age[nd] = 0
                nd += 1
            continue
        j = dst[k]
        c2 = dst_c[k]
        Q[j, c2] += got[k] * s
        if track:
            q2 = j * C + c2
            n = chain_h[k]
            while n >= 0:
                m = nxt[n]
                la[n] *= s
                _append(q2, n, head, tail, lt, la, nxt, free)
                n = m
    for k in range(arr_q.shape[0]):
        q = arr_q[k]
        Q[q // C, q % C] += arr_amt[k]
        if track:
            n = _alloc(nxt, free)
            lt[n] = slot
            la[n] = arr_amt[k]
            _append(q, n, head, tail, lt, la, nxt, free)
    return nd


# ---------------------------------------------------------------------------

class QueueState:
    """Backlogs ``(node, commodity)`` plus the pooled FIFO age ledgers."""

    def __init__(self, n_nodes: int, n_comm: int, track_ages: bool = True,
                 capacity: int = 4096):
        self.backlog = np.zeros((n_nodes, n_comm))
        self.track_ages = track_ages
        nq = n_nodes * n_comm
        self.n_comm = n_comm
        self.head = np.full(nq, -1, np.int64)
        self.tail = np.full(nq, -1, np.int64)
        self.lt = np.zeros(0, np.int64)
        self.la = np.zeros(0)
        self.nxt = np.zeros(0, np.int64)
        self.free = np.array([-1, 0], np.int64)   # free-list head, free count
        self._grow(capacity)
        # cumulative intake / output per commodity, for the scaling audit
        self.processed = np.zeros(n_comm)
        self.created = np.zeros(n_comm)

    def _grow(self, extra: int) -> None:
        old = len(self.lt)
        new = old + extra
        self.lt = np.concatenate([self.lt, np.zeros(extra, np.int64)])
        self.la = np.concatenate([self.la, np.zeros(extra)])
        nx = np.arange(old + 1, new + 1, dtype=np.int64)
        nx[-1] = self.free[0]
        self.nxt = np.concatenate([self.nxt, nx])
        self.free[0] = old
        self.free[1] += extra
        self.d_c = np.zeros(new, np.int64)
        self.d_a = np.zeros(new)
        self.d_age = np.zeros(new, np.int64)

    def reserve(self, n: int) -> None:
        """Make sure ``n`` nodes can be allocated without growing mid-kernel."""
        if self.free[1] < n:
            self._grow(max(n, len(self.lt)))

    def copy_backlog(self) -> np.ndarray:
        return self.backlog.copy()

    def _q(self, i: int, c: int) -> int:
        return int(i) * self.n_comm + int(c)

    def push(self, i: int, c: int, slices) -> None:
        """Append batches to the ledger only (the caller owns the backlog)."""
        if not self.track_ages:
            return
        slices = [(int(t), float(a)) for t, a in slices if a > 0]
        self.reserve(len(slices))
        q = self._q(i, c)
        for t, a in slices:
            n = _alloc(self.nxt, self.free)
            self.lt[n] = t
            self.la[n] = a
            _append(q, n, self.head, self.tail, self.lt, self.la, self.nxt, self.free)

    def drain(self, i: int, c: int, amount: float) -> tuple[float, list]:
        """Remove up to ``amount`` from the head; returns (actual, slices)."""
        q = float(self.backlog[i, c])
        if q <= 0 or amount <= 0:
            return 0.0, []
        full = amount >= q - EPS * max(1.0, q)
        got = q if full else float(amount)
        self.backlog[i, c] = 0.0 if full else q - got
        if not self.track_ages:
            return got, []
        self.reserve(1)
        n, _ = _cut(self._q(i, c), got, full, self.head, self.tail, self.lt, self.la,
                    self.nxt, self.free)
        out = []
        while n >= 0:
            m = int(self.nxt[n])
            out.append((int(self.lt[n]), float(self.la[n])))
            _release(n, self.nxt, self.free)
            n = m
        return got, out

    def ledger_slices(self, i: int, c: int) -> list[tuple[int, float]]:
        out = []
        n = int(self.head[self._q(i, c)])
        while n >= 0:
            out.append((int(self.lt[n]), float(self.la[n])))
            n = int(self.nxt[n])
        return out

    def ledger_sum(self, i: int, c: int) -> float:
        return float(sum(a for _, a in self.ledger_slices(i, c)))

    @property
    def ledger(self) -> dict:
        """Non-empty ledgers as ``{(node, commodity): [(slot, amount), ...]}``."""
        out = {}
        for q in np.nonzero(self.head >= 0)[0]:
            i, c = divmod(int(q), self.n_comm)
            out[(i, c)] = self.ledger_slices(i, c)
        return out

    def audit(self) -> float:
        """Largest |backlog - ledger sum| over all queues."""
        worst = 0.0
        nz = set(zip(*np.nonzero(self.backlog))) | set(self.ledger)
        for i, c in nz:
            worst = max(worst, abs(self.backlog[i, c] - self.ledger_sum(i, c)))
        return worst


@dataclass
class FlowPlan:
    """Planned flows of one slot plus the capacities they must respect.

    ``link`` holds both wired and wireless flows keyed ``(i, j, c)``; the
    queue engine tells them apart through the instance index.
    """

    to_proc: dict[tuple[int, int], float] = field(default_factory=dict)
    link: dict[tuple[int, int, int], float] = field(default_factory=dict)
    proc_cap: dict[int, float] = field(default_factory=dict)
    link_cap: dict[tuple[int, int], float] = field(default_factory=dict)
    # per-packet net weight of each plan (keys (i, c) and (i, j, c)); used by
    # the ``weighted`` execution mode
    priority: dict = field(default_factory=dict)

    def from_proc(self, idx) -> dict[tuple[int, int], float]:
        """Processor outputs implied by service chaining."""
        return {(i, int(idx.c_next[c])): idx.c_xi[c] * a for (i, c), a in self.to_proc.items()}


class DeliveryRecord:
    """Batches that reached their destination this slot: (commodity, amount, age)."""

    def __init__(self, comm=None, amount=None, age=None):
        self.comm = np.zeros(0, np.int64) if comm is None else np.asarray(comm)
        self.amount = np.zeros(0) if amount is None else np.asarray(amount, dtype=float)
        self.age = np.zeros(0, np.int64) if age is None else np.asarray(age)

    @property
    def items(self) -> list[tuple[int, float, int]]:
        return list(zip(self.comm.tolist(), self.amount.tolist(), self.age.tolist()))

    def __len__(self) -> int:
        return len(self.comm)


KIND_PROC, KIND_WIRED, KIND_WIRELESS = 0, 1, 2


@dataclass
class PlanOps:
    """Column form of a ``FlowPlan``: one row per planned flow.

    ``res`` is the node (processing), wired edge or wireless link index;
    processing rows have ``dst = src`` and ``dst_c`` = the next stage, with
    ``scale`` = xi.  ``cap`` is the capacity the row was planned against.
    """

    kind: np.ndarray
    res: np.ndarray
    src: np.ndarray
    src_c: np.ndarray
    dst: np.ndarray
    dst_c: np.ndarray
    planned: np.ndarray
    cap: np.ndarray
    scale: np.ndarray
    deliver: np.ndarray
    priority: np.ndarray

    def __len__(self) -> int:
        return len(self.kind)

    @classmethod
    def empty(cls) -> "PlanOps":
        i = np.zeros(0, np.int64)
        f = np.zeros(0)
        return cls(i, i, i, i, i, i, f, f, f, np.zeros(0, np.bool_), f)

    @classmethod
    def from_plan(cls, plan: FlowPlan, idx) -> "PlanOps":
        xi_l, next_l, fdest = _lists(idx)
        epos, lpos = _res_maps(idx)
        rows = []
        for (i, c), a in plan.to_proc.items():
            nc = next_l[c]
            rows.append((KIND_PROC, i, i, c, i, nc, a, plan.proc_cap.get(i, 0.0), xi_l[c],
                         fdest[nc] == i, plan.priority.get((i, c), 0.0)))
        for (i, j, c), a in plan.link.items():
            if (i, j) in epos:
                kind, r = KIND_WIRED, epos[(i, j)]
            else:
                kind, r = KIND_WIRELESS, lpos[(i, j)]
            rows.append((kind, r, i, c, j, c, a, plan.link_cap.get((i, j), 0.0), 1.0,
                         fdest[c] == j, plan.priority.get((i, j, c), 0.0)))
        if not rows:
            return cls.empty()
        cols = list(zip(*rows))
        ints = [np.array(x, np.int64) for x in cols[:6]]
        return cls(*ints, np.array(cols[6], float), np.array(cols[7], float),
                   np.array(cols[8], float), np.array(cols[9], np.bool_),
                   np.array(cols[10], float))

    def to_plan(self) -> FlowPlan:
        plan = FlowPlan()
        for k, r, i, c, j, a, cap, w in zip(self.kind.tolist(), self.res.tolist(),
                                           self.src.tolist(), self.src_c.tolist(),
                                           self.dst.tolist(), self.planned.tolist(),
                                           self.cap.tolist(), self.priority.tolist()):
            if k == KIND_PROC:
                plan.to_proc[(i, c)] = a
                plan.proc_cap[i] = cap
                plan.priority[(i, c)] = w
            else:
                plan.link[(i, j, c)] = a
                plan.link_cap[(i, j)] = cap
                plan.priority[(i, j, c)] = w
        return plan

    def order(self, mode: str) -> np.ndarray:
        """Row order of the outgoing phase.

        ``ordered``/``proportional``: processors, then wired links, then
        wireless links, each lexicographic in (src, dst, commodity).
        ``weighted``: decreasing priority, ties processor, wireless, wired.
        """
        if mode == "weighted":
            kr = np.array([0, 2, 1])[self.kind]
            return np.lexsort((self.src_c, self.dst, self.src, kr, -self.priority))
        return np.lexsort((self.src_c, self.dst, self.src, self.kind))


@dataclass
class Executed:
    """Actual flows of one slot: ``got[k]`` for row k of ``ops``."""

    ops: PlanOps
    got: np.ndarray

    @property
    def proc(self) -> list[tuple[int, int, float]]:
        m = (self.ops.kind == KIND_PROC) & (self.got > 0)
        return list(zip(self.ops.src[m].tolist(), self.ops.src_c[m].tolist(),
                        self.got[m].tolist()))

    @property
    def link(self) -> list[tuple[int, int, int, float]]:
        m = (self.ops.kind != KIND_PROC) & (self.got > 0)
        return list(zip(self.ops.src[m].tolist(), self.ops.dst[m].tolist(),
                        self.ops.src_c[m].tolist(), self.got[m].tolist()))


def _res_maps(idx):
    cache = getattr(idx, "_resmaps", None)
    if cache is None:
        cache = ({tuple(map(int, e)): k for k, e in enumerate(idx.wired)},
                 {tuple(map(int, e)): k for k, e in enumerate(idx.links)})
        idx._resmaps = cache
    return cache


class PlanError(ValueError):
    pass


def validate_plan(plan: FlowPlan, idx, tol: float = 1e-9) -> None:
    load: dict = {}
    for (i, c), a in plan.to_proc.items():
        if a < 0:
            raise PlanError(f"negative processing plan at node {i}, commodity {c}")
        if idx.c_final[c]:
            raise PlanError(f"node {i} plans to process final-stage commodity {c}")
        if not idx.proc_mask[i, c]:
            raise PlanError(f"node {i} may not process commodity {c}")
        load[i] = load.get(i, 0.0) + a * idx.c_work[c]
    for i, v in load.items():
        cap = plan.proc_cap.get(i, 0.0)
        if v > cap + tol * max(1.0, cap):
            raise PlanError(f"node {i}: compute load {v:.6g} exceeds capacity {cap:.6g}")
    load = {}
    for (i, j, c), a in plan.link.items():
        if a < 0:
            raise PlanError(f"negative link plan on ({i}, {j}), commodity {c}")
        if idx.c_final[c] and idx.c_dest[c] == i:
            raise PlanError(f"destination {i} plans to send its finished commodity {c}")
        if not idx.hold[j, c]:
            raise PlanError(f"node {j} may not receive commodity {c}")
        load[(i, j)] = load.get((i, j), 0.0) + a
    for e, v in load.items():
        cap = plan.link_cap.get(e, 0.0)
        if v > cap + tol * max(1.0, cap):
            raise PlanError(f"link {e}: load {v:.6g} exceeds capacity {cap:.6g}")


def _lists(idx):
    """Plain-Python copies of per-commodity tables (scalar access is faster)."""
    cache = getattr(idx, "_qlists", None)
    if cache is None:
        fdest = [int(d) if f else -1 for d, f in zip(idx.c_dest, idx.c_final)]
        cache = (idx.c_xi.tolist(), [int(x) for x in idx.c_next], fdest)
        idx._qlists = cache
    return cache


def apply_decision(state: QueueState, plan: FlowPlan, arrivals: np.ndarray | None, slot: int,
                   idx, validate: bool = True,
                   mode: str = "ordered") -> tuple[QueueState, DeliveryRecord, Executed]:
    """Execute one slot: outgoing phase, then incoming phase.

    Outgoing flows are capped by the backlog present at the start of the slot.
    In ``ordered`` mode a queue serves its processor first, then wired links,
    then wireless links.  ``weighted`` serves the plans of a queue in
    decreasing ``plan.priority`` (missing entries count as 0); ties go to the
    processor, then wireless links, then wired links.  ``proportional`` scales
    every plan on an over-subscribed queue by the same factor.  ``state`` is
    updated in place.
    """
    if mode not in _MODES:
        raise ValueError(f"unknown execution mode {mode!r}")
    if validate:
        validate_plan(plan, idx)
    return apply_ops(state, PlanOps.from_plan(plan, idx), arrivals, slot, idx, mode)


def apply_ops(state: QueueState, ops: PlanOps, arrivals: np.ndarray | None, slot: int,
              idx, mode: str = "ordered") -> tuple[QueueState, DeliveryRecord, Executed]:
    """``apply_decision`` on the column form of a plan (no validation)."""
    if arrivals is not None:
        us, ss = np.nonzero(arrivals)
        arr_q = us * len(idx.comms) + idx.first_stage[us, ss]
        arr_amt = arrivals[us, ss].astype(float)
    else:
        arr_q = np.zeros(0, np.int64)
        arr_amt = np.zeros(0)
    n = len(ops)
    state.reserve(n + len(arr_q))
    got = np.zeros(n)
    nd = _execute(state.backlog, state.head, state.tail, state.lt, state.la, state.nxt,
                  state.free, state.track_ages, ops.order(mode), ops.src, ops.src_c, ops.dst,
                  ops.dst_c, ops.planned, ops.scale, ops.deliver, _MODES[mode],
                  arr_q.astype(np.int64), arr_amt, int(slot), got,
                  state.d_c, state.d_a, state.d_age)
    m = (ops.kind == KIND_PROC) & (got > 0)
    if m.any():
        np.add.at(state.processed, ops.src_c[m], got[m])
        np.add.at(state.created, ops.dst_c[m], got[m] * ops.scale[m])
    rec = DeliveryRecord(state.d_c[:nd].copy(), state.d_a[:nd].copy(), state.d_age[:nd].copy())
    return state, rec, Executed(ops, got)


def scaled_queues(state_or_backlog, kappa) -> np.ndarray:
    """Q~ = diag(kappa) Q; ``kappa`` is per commodity (node independent)."""
    Q = getattr(state_or_backlog, "backlog", state_or_backlog)
    return Q * np.asarray(kappa)[None, :]


def dump_rows(state: QueueState, slot: int, idx):
    """Rows (slot, node, commodity, backlog) for the optional queue trace."""
    for i, c in zip(*np.nonzero(state.backlog)):
        cm = idx.comms[c]
        yield slot, idx.nodes[i], f"{cm.dest}/{cm.service}/{cm.stage}", float(state.backlog[i, c])
