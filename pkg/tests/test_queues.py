import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import mini_config
from mecnc import build_instance
from mecnc.queues import (FlowPlan, PlanError, QueueState, apply_decision, apply_ops,
                          ledger_age_transfer, scaled_queues, PlanOps)

BIG = 1e9


def _setup(**kw):
    inst = build_instance(mini_config(**kw))
    idx = inst.index
    return idx, QueueState(len(idx.nodes), len(idx.comms))


def _fill(state, i, c, amount, slot=0):
    state.backlog[i, c] += amount
    state.push(i, c, [(slot, amount)])


class TestSpecExamples:
    def test_drain_capped_by_backlog(self):
        idx, s = _setup()
        _fill(s, 0, 0, 5.0)
        plan = FlowPlan(link={(0, 1, 0): 8.0}, link_cap={(0, 1): BIG})
        arr = np.array([[2]])
        _, _, ex = apply_decision(s, plan, arr, 1, idx)
        assert ex.got.tolist() == [5.0]
        assert s.backlog[0, 0] == 2.0       # [5 - 8]^+ + 2, tight
        assert s.backlog[1, 0] == 5.0

    def test_processing_doubles(self):
        idx, s = _setup()
        _fill(s, 1, 0, 3.0)
        plan = FlowPlan(to_proc={(1, 0): 3.0}, proc_cap={1: BIG})
        apply_decision(s, plan, None, 1, idx)
        assert s.backlog[1, 1] == 6.0
        assert s.backlog[1, 0] == 0.0

    def test_processing_third(self):
        svc = [{"id": "f", "scaling": [1 / 3], "workload": [1.0]}]
        idx, s = _setup(services=svc)
        _fill(s, 1, 0, 3.0)
        apply_decision(s, FlowPlan(to_proc={(1, 0): 3.0}, proc_cap={1: BIG}), None, 1, idx)
        assert s.backlog[1, 1] == pytest.approx(1.0)


class TestLedger:
    def test_transfer_scales_amounts(self):
        assert ledger_age_transfer([(10, 4.0)], 0.5) == [(10, 2.0)]

    def test_fifo_partial_drain(self):
        _, s = _setup()
        s.backlog[0, 0] = 2.0
        s.push(0, 0, [(1, 1.0), (5, 1.0)])
        got, slices = s.drain(0, 0, 1.5)
        assert got == 1.5
        assert ledger_age_transfer(slices, 1.0) == [(1, 1.0), (5, 0.5)]
        assert s.ledger_slices(0, 0) == [(5, 0.5)]

    def test_delivery_age(self):
        idx, s = _setup()
        _fill(s, 0, 0, 2.0, slot=8)
        # local processing at the destination UE finishes the packets
        _, rec, _ = apply_decision(s, FlowPlan(to_proc={(0, 0): 2.0}, proc_cap={0: BIG}),
                                   None, 20, idx)
        assert rec.items == [(1, 4.0, 12)]
        assert s.backlog[0, 1] == 0.0

    def test_equal_timestamps_merge(self):
        _, s = _setup()
        s.backlog[0, 0] = 3.0
        s.push(0, 0, [(4, 1.0), (4, 2.0)])
        assert s.ledger_slices(0, 0) == [(4, 3.0)]

    def test_arrivals_enter_ledger(self):
        idx, s = _setup(n_ue=2)
        apply_decision(s, FlowPlan(), np.array([[3], [1]]), 7, idx)
        assert s.ledger == {(0, 0): [(7, 3.0)], (1, 2): [(7, 1.0)]}


class TestValidation:
    def test_negative_plan(self):
        idx, s = _setup()
        with pytest.raises(PlanError, match="negative"):
            apply_decision(s, FlowPlan(to_proc={(1, 0): -1.0}, proc_cap={1: BIG}), None, 0, idx)

    def test_capacity_violation(self):
        idx, s = _setup()
        plan = FlowPlan(to_proc={(1, 0): 5.0}, proc_cap={1: 4.0})
        with pytest.raises(PlanError, match="capacity"):
            apply_decision(s, plan, None, 0, idx)

    def test_final_stage_not_processed(self):
        idx, s = _setup()
        with pytest.raises(PlanError, match="final"):
            apply_decision(s, FlowPlan(to_proc={(1, 1): 1.0}, proc_cap={1: BIG}), None, 0, idx)

    def test_destination_does_not_send_finished(self):
        idx, s = _setup()
        plan = FlowPlan(link={(0, 1, 1): 1.0}, link_cap={(0, 1): BIG})
        with pytest.raises(PlanError, match="finished"):
            apply_decision(s, plan, None, 0, idx)

    def test_no_processor_output_into_stage_one(self):
        idx, _ = _setup()
        # the only producer of a commodity is the function before it
        assert all(idx.c_stage[n] > 1 for n in idx.c_next if n >= 0)


class TestOrder:
    def test_ordered_mode_processor_first(self):
        idx, s = _setup()
        _fill(s, 0, 0, 3.0)
        plan = FlowPlan(to_proc={(0, 0): 2.0}, proc_cap={0: BIG},
                        link={(0, 1, 0): 2.0}, link_cap={(0, 1): BIG})
        _, _, ex = apply_decision(s, plan, None, 1, idx, mode="ordered")
        got = dict(zip(ex.ops.kind.tolist(), ex.got.tolist()))
        assert got == {0: 2.0, 2: 1.0}

    def test_weighted_mode_follows_priority(self):
        idx, s = _setup()
        _fill(s, 0, 0, 3.0)
        plan = FlowPlan(to_proc={(0, 0): 2.0}, proc_cap={0: BIG},
                        link={(0, 1, 0): 2.0}, link_cap={(0, 1): BIG},
                        priority={(0, 0): 1.0, (0, 1, 0): 5.0})
        _, _, ex = apply_decision(s, plan, None, 1, idx, mode="weighted")
        got = dict(zip(ex.ops.kind.tolist(), ex.got.tolist()))
        assert got == {0: 1.0, 2: 2.0}

    def test_proportional_mode(self):
        idx, s = _setup()
        _fill(s, 0, 0, 3.0)
        plan = FlowPlan(to_proc={(0, 0): 2.0}, proc_cap={0: BIG},
                        link={(0, 1, 0): 4.0}, link_cap={(0, 1): BIG})
        _, _, ex = apply_decision(s, plan, None, 1, idx, mode="proportional")
        assert sorted(ex.got.tolist()) == pytest.approx([1.0, 2.0])

    def test_unknown_mode(self):
        idx, s = _setup()
        with pytest.raises(ValueError):
            apply_decision(s, FlowPlan(), None, 0, idx, mode="random")

    def test_column_round_trip(self):
        idx, _ = _setup(n_ue=2, n_server=2, wired=True)
        plan = FlowPlan(to_proc={(2, 0): 1.5}, proc_cap={2: 4.0},
                        link={(2, 3, 0): 2.0, (0, 2, 0): 1.0},
                        link_cap={(2, 3): 10.0, (0, 2): 3.0},
                        priority={(2, 0): 0.5, (2, 3, 0): 0.25, (0, 2, 0): 1.0})
        back = PlanOps.from_plan(plan, idx).to_plan()
        assert back == plan


def test_scaled_queues():
    Q = np.array([[12.0, 0.0]])
    assert scaled_queues(np.zeros((1, 2)), [1.0, 1.0]).tolist() == [[0.0, 0.0]]
    assert scaled_queues(Q, [1.0, 1.0]).tolist() == Q.tolist()
    # xi-product 2, total rate 3
    assert scaled_queues(Q, [1 / (2 * 3), 1.0])[0, 0] == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# property tests on random plans

IDX, _ = _setup(n_ue=2, n_server=2, wired=True,
                services=[{"id": "a", "scaling": [2.0, 0.5], "workload": [1.0, 1.0]}])
N, C = len(IDX.nodes), len(IDX.comms)
PROC = [(i, c) for i in range(N) for c in range(C) if IDX.proc_mask[i, c]]
LINKS = [(i, j, c) for i, j in list(IDX.wired) + list(IDX.links) for c in range(C)
         if IDX.hold[j, c] and not (IDX.c_final[c] and IDX.c_dest[c] == i) and IDX.hold[i, c]]

amounts = st.floats(0.0, 6.0, allow_nan=False)
plans = st.tuples(st.lists(amounts, min_size=len(PROC), max_size=len(PROC)),
                  st.lists(amounts, min_size=len(LINKS), max_size=len(LINKS)),
                  st.sampled_from(["ordered", "weighted", "proportional"]),
                  st.integers(0, 2**31 - 1))


def _random_plan(pa, la, seed):
    r = np.random.default_rng(seed)
    plan = FlowPlan()
    for key, a in zip(PROC, pa):
        if a > 0:
            plan.to_proc[key] = a
            plan.proc_cap[key[0]] = BIG
            plan.priority[key] = float(r.normal())
    for key, a in zip(LINKS, la):
        if a > 0:
            plan.link[key] = a
            plan.link_cap[key[:2]] = BIG
            plan.priority[key] = float(r.normal())
    return plan


def _start_state(seed):
    r = np.random.default_rng(seed)
    s = QueueState(N, C)
    for i, c in zip(*np.nonzero(IDX.hold)):
        if IDX.c_final[c] and IDX.c_dest[c] == i:
            continue
        if r.random() < 0.7:
            for t in range(3):
                a = float(r.integers(0, 4))
                if a:
                    s.backlog[i, c] += a
                    s.push(i, c, [(t, a)])
    return s


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(plans)
def test_eq9_bound_and_conservation(args):
    pa, la, mode, seed = args
    s = _start_state(seed)
    plan = _random_plan(pa, la, seed)
    arr = np.random.default_rng(seed + 1).integers(0, 3, (2, 1))
    Q0 = s.backlog.copy()
    _, rec, ex = apply_decision(s, plan, arr, 5, IDX, mode=mode)
    Q1 = s.backlog

    # upper bound with planned flows
    out_plan = np.zeros((N, C))
    in_plan = np.zeros((N, C))
    for (i, c), a in plan.to_proc.items():
        out_plan[i, c] += a
        in_plan[i, IDX.c_next[c]] += IDX.c_xi[c] * a
    for (i, j, c), a in plan.link.items():
        out_plan[i, c] += a
        in_plan[j, c] += a
    exo = np.zeros((N, C))
    for u in range(2):
        exo[u, IDX.first_stage[u, 0]] += arr[u, 0]
    bound = np.maximum(Q0 - out_plan, 0.0) + in_plan + exo
    assert (Q1 <= bound + 1e-9).all()
    assert (Q1 >= 0).all()

    # exact ledger with actual flows
    delta = exo.copy()
    ops, got = ex.ops, ex.got
    for k in range(len(ops)):
        delta[ops.src[k], ops.src_c[k]] -= got[k]
        if not ops.deliver[k]:
            delta[ops.dst[k], ops.dst_c[k]] += got[k] * ops.scale[k]
    assert np.allclose(Q1 - Q0, delta, atol=1e-12, rtol=0)
    assert (got <= ops.planned + 1e-12).all()
    # delivered mass equals the delivering flows
    dmass = sum(got[k] * ops.scale[k] for k in range(len(ops)) if ops.deliver[k])
    assert rec.amount.sum() == pytest.approx(dmass, abs=1e-12)
    assert (rec.age >= 0).all()
    # nothing finished sits at its destination
    for c in range(C):
        if IDX.c_final[c]:
            assert Q1[IDX.c_dest[c], c] == 0.0
    assert s.audit() < 1e-9


def test_scaling_audit_cumulative():
    s = _start_state(11)
    r = np.random.default_rng(12)
    for t in range(200):
        plan = _random_plan(r.uniform(0, 3, len(PROC)), r.uniform(0, 3, len(LINKS)), t)
        apply_decision(s, plan, r.integers(0, 3, (2, 1)), t, IDX, mode="weighted")
    fin = IDX.c_next >= 0
    expect = np.zeros(C)
    np.add.at(expect, IDX.c_next[fin], IDX.c_xi[fin] * s.processed[fin])
    assert np.allclose(s.created, expect, rtol=1e-12)
    assert s.audit() < 1e-9


def test_untracked_matches_tracked():
    a, b = _start_state(3), _start_state(3)
    b.track_ages = False
    plan = _random_plan([1.0] * len(PROC), [1.0] * len(LINKS), 3)
    apply_ops(a, PlanOps.from_plan(plan, IDX), None, 4, IDX, "weighted")
    apply_ops(b, PlanOps.from_plan(plan, IDX), None, 4, IDX, "weighted")
    assert np.array_equal(a.backlog, b.backlog)
