import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peakshaver.gen import SmallConfig, small_instance
from peakshaver.metrics import verify_dual_feasibility, verify_primal_feasibility
from peakshaver.model import InvalidInstanceError, marginal_value, sort_key
from peakshaver.oracle import is_feasible
from peakshaver.scheduler import (
    SchedulerState,
    beta_cover,
    effective_remaining,
    feasibility_check,
    phase_revenue,
    reconsider,
    run_scs,
    smart_allocate,
)

from conftest import make_instance


def state_with_remaining(remaining, *, cap, request, global_cap=None, **opts):
    """Single-station state whose remaining capacity per slot is ``remaining``."""
    T = len(remaining)
    inst = make_instance([request], horizon=T, caps=[cap],
                         global_cap=global_cap or 100 * cap)
    state = SchedulerState.empty(inst, **opts)
    state.local_load[:, 0] = cap - np.asarray(remaining, dtype=float)
    state.global_load[:] = state.local_load[:, 0]
    return state, inst.requests[0]


# -- effective remaining ------------------------------------------------------

def test_effective_remaining_global_binds():
    inst = make_instance([(1, 1.0, 1, 1.0, 1.0)] * 2, horizon=1, caps=[125.0, 500.0],
                         global_cap=500.0)
    state = SchedulerState.empty(inst)
    state.local_load[0] = [25.0, 465.0]
    state.global_load[0] = 490.0
    assert effective_remaining(state, 1, 1) == 10.0


def test_effective_remaining_empty_state():
    inst = make_instance([(1, 1.0, 1, 1.0, 1.0)], horizon=1, caps=[125.0], global_cap=500.0)
    assert effective_remaining(SchedulerState.empty(inst), 1, 1) == 125.0


def test_effective_remaining_saturated_local():
    inst = make_instance([(1, 1.0, 1, 1.0, 1.0)], horizon=1, caps=[125.0], global_cap=500.0)
    state = SchedulerState.empty(inst)
    state.local_load[0, 0] = 125.0
    state.global_load[0] = 125.0
    assert effective_remaining(state, 1, 1) == 0.0


# -- feasibility --------------------------------------------------------------

def test_feasibility_boundary():
    state, req = state_with_remaining([5, 5], cap=5.0, request=(1, 6.0, 2, 3.0, 1.0),
                                      global_cap=5.0)
    assert feasibility_check(state, req)
    state, req = state_with_remaining([5, 5], cap=5.0, request=(1, 6.5, 2, 3.0, 1.0),
                                      global_cap=5.0)
    assert not feasibility_check(state, req)


def test_feasibility_with_existing_load_matches_flow():
    # slot 1 already carries 4 of 5 kWh: room is min(1,3) + min(5,3) = 4
    state, req = state_with_remaining([1, 5], cap=5.0, request=(1, 4.0, 2, 3.0, 1.0),
                                      global_cap=5.0)
    assert feasibility_check(state, req)
    # the same situation as a fixed selection: a blocker pinned to slot 1
    inst = make_instance([(1, 4.0, 1, 4.0, 1.0), (1, 4.0, 2, 3.0, 1.0)],
                         horizon=2, caps=[5.0], global_cap=5.0)
    assert is_feasible(inst, [1, 2])
    inst = make_instance([(1, 4.0, 1, 4.0, 1.0), (1, 4.1, 2, 3.0, 1.0)],
                         horizon=2, caps=[5.0], global_cap=5.0)
    assert not is_feasible(inst, [1, 2])
    state, req = state_with_remaining([1, 5], cap=5.0, request=(1, 4.1, 2, 3.0, 1.0),
                                      global_cap=5.0)
    assert not feasibility_check(state, req)


# -- smart allocation ---------------------------------------------------------

@pytest.mark.parametrize("remaining, ev, expected", [
    ([10, 7, 10], (1, 8.0, 3, 4.0, 1.0), [4, 0, 4]),
    ([1, 5], (1, 5.0, 2, 4.0, 1.0), [1, 4]),
    ([3, 3], (1, 3.0, 2, 3.0, 1.0), [0, 3]),
])
def test_smart_allocate_ranking(remaining, ev, expected):
    state, req = state_with_remaining(remaining, cap=10.0, request=ev)
    y = smart_allocate(state, req)
    np.testing.assert_allclose(y, expected)
    assert state.alpha[req.id] == marginal_value(req)
    np.testing.assert_allclose(state.local_load[:, 0], 10.0 - np.array(remaining) + y)


def test_smart_allocate_respects_global_cap():
    # station 2 is empty locally, but slot 2 is globally full after request 1
    inst = make_instance([(1, 6.0, 2, 6.0, 1.0), (2, 5.0, 2, 4.0, 1.0)],
                         horizon=2, caps=[6.0, 6.0], global_cap=6.0)
    state = SchedulerState.empty(inst)
    a, b = inst.requests
    y = smart_allocate(state, a)
    np.testing.assert_allclose(y, [0, 6])
    assert feasibility_check(state, b) is False
    state.global_aware = False
    assert feasibility_check(state, b) is True


def test_rerank_variant_levels_the_profile():
    state, req = state_with_remaining([10, 7, 10], cap=10.0, request=(1, 8.0, 3, 4.0, 1.0),
                                      rerank=True)
    y = smart_allocate(state, req)
    assert y.sum() == pytest.approx(8.0, abs=1e-12)
    remaining_after = 10.0 - state.local_load[:, 0]
    # 2 * (10 - L) + (7 - L) = 8 puts the common water level at L = 19/3
    level = 19 / 3
    np.testing.assert_allclose(y, [10 - level, 7 - level, 10 - level], atol=1e-9)
    np.testing.assert_allclose(remaining_after, [level] * 3, atol=1e-9)


# -- beta cover ---------------------------------------------------------------

def test_beta_cover_without_extension():
    inst = make_instance([(1, 1.0, 2, 1.0, 2.0)], horizon=4, caps=[10.0])
    state = SchedulerState.empty(inst)
    t_cov, R = beta_cover(state, inst.requests[0])
    assert (t_cov, R) == (1, 2)
    np.testing.assert_array_equal(state.beta, [2, 2, 0, 0])


def test_beta_cover_appends_after_earlier_cover():
    inst = make_instance([(1, 1.0, 3, 1.0, 2.0)], horizon=5, caps=[10.0])
    state = SchedulerState.empty(inst)
    state.beta[:2] = 3.0
    beta_cover(state, inst.requests[0])
    np.testing.assert_array_equal(state.beta, [3, 3, 2, 0, 0])
    assert all(state.beta[t] >= 2.0 for t in range(3))


def test_beta_cover_extends_over_congested_slots():
    # slots 3-4 have less than K = 3 left, slot 5 is free
    inst = make_instance([(1, 1.0, 2, 3.0, 1.0)], horizon=5, caps=[10.0])
    state = SchedulerState.empty(inst)
    state.local_load[2:4, 0] = 8.0
    state.global_load[2:4] = 8.0
    _, R = beta_cover(state, inst.requests[0])
    assert R == 4
    np.testing.assert_array_equal(state.beta, [1, 1, 1, 1, 0])


def test_beta_cover_phi_bookkeeping():
    # selected request 1 holds [4, 0, 4]; request 2 (v/D = 1, k = 5) is rejected
    inst = make_instance([(1, 8.0, 3, 6.0, 8.0), (1, 2.0, 3, 5.0, 2.0)],
                         horizon=3, caps=[10.0], slackness=2.0)
    state = SchedulerState.empty(inst)
    state.allocation[1] = np.array([4.0, 0.0, 4.0])
    state.local_load[:, 0] = state.allocation[1]
    state.global_load[:] = state.allocation[1]
    before = state.allocation[1].copy()
    _, R = beta_cover(state, inst.requests[1])
    assert R == 3
    C, k, s, ratio = 10.0, 5.0, 2.0, 1.0
    expected = [C / (C - k) * s / (s - 1) * ratio * y if y > 0 else 0.0 for y in before]
    np.testing.assert_allclose(state.phi[1], expected)
    np.testing.assert_allclose(state.phi[1], [16.0, 0.0, 16.0])
    np.testing.assert_array_equal(state.allocation[1], before)
    # a second cover leaves already-charged entries alone
    beta_cover(state, inst.requests[1])
    np.testing.assert_allclose(state.phi[1], [16.0, 0.0, 16.0])


# -- reconsider ---------------------------------------------------------------

def test_pathology_swap(pathology):
    sched, cert, trace = run_scs(pathology)
    assert phase_revenue(trace, 1) == 2.0
    assert sched.revenue(pathology) == 10.0
    assert sched.selected == {2}
    np.testing.assert_allclose(sched.energy(2), [10.0])
    assert [r["decision"] for r in trace] == ["allocated", "covered", "swapped"]
    assert trace[-1]["removed"] == [1]


def test_reconsider_without_colocated_candidates():
    inst = make_instance([(1, 1.0, 1, 1.0, 2.0), (2, 10.0, 1, 10.0, 10.0)],
                         horizon=1, caps=[10.0, 10.0], global_cap=10.0)
    state = SchedulerState.empty(inst)
    order = sorted(inst.requests, key=sort_key)
    smart_allocate(state, order[0])
    before = (state.local_load.copy(), dict(state.allocation))
    assert reconsider(state, order[1], order, 1) is None
    np.testing.assert_array_equal(state.local_load, before[0])
    assert state.allocation.keys() == before[1].keys()


def test_reconsider_needs_strictly_cheaper_pool():
    # co-located selected EV worth exactly as much: the guard fails
    inst = make_instance([(1, 5.0, 1, 10.0, 10.0), (1, 10.0, 1, 10.0, 10.0)],
                         horizon=1, caps=[10.0], global_cap=10.0)
    state = SchedulerState.empty(inst)
    order = sorted(inst.requests, key=sort_key)
    smart_allocate(state, order[0])
    assert reconsider(state, order[1], order, 1) is None
    assert set(state.allocation) == {1}


# -- full runs ----------------------------------------------------------------

def test_empty_instance():
    inst = make_instance([], horizon=3, caps=[5.0])
    sched, cert, trace = run_scs(inst)
    assert sched.selected == frozenset() and trace == []
    assert cert.dual_objective == 0.0


def test_invalid_instance_rejected():
    inst = make_instance([(1, 5.0, 1, 1.0, 1.0)], horizon=1, caps=[5.0])
    with pytest.raises(InvalidInstanceError):
        run_scs(inst)


def test_trace_records():
    inst = small_instance(3)
    _, _, trace = run_scs(inst)
    assert {r["decision"] for r in trace} <= {"allocated", "rejected", "covered", "swapped"}
    for rec in trace:
        assert {"phase", "request_id", "decision", "slots_touched", "revenue_so_far"} <= set(rec)
    assert sum(1 for r in trace if r["phase"] == 1) == inst.n


seeds = st.integers(0, 10**6)


@settings(max_examples=60, deadline=None)
@given(seed=seeds)
def test_run_invariants(seed):
    inst = small_instance(seed, SmallConfig(max_evs=12, max_horizon=8))
    sched, cert, trace = run_scs(inst)
    assert verify_primal_feasibility(inst, sched) == []
    assert verify_dual_feasibility(inst, cert) == []
    for r in inst.requests:
        total = sched.energy(r.id).sum()
        assert abs(total) <= 1e-9 or abs(total - r.demand) <= 1e-9
        for t in range(1, r.deadline + 1):
            assert cert.alpha[r.id] + cert.beta[t - 1] >= marginal_value(r) - 1e-9
    assert np.all(np.diff(cert.beta) <= 0)
    assert sched.revenue(inst) >= phase_revenue(trace, 1) - 1e-9
    assert cert.dual_objective == pytest.approx(cert.objective(inst), rel=1e-9)
    assert all(np.all(g == 0) for g in [cert.gamma, *cert.pi.values()])


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_determinism(seed):
    inst = small_instance(seed)
    a, ca, ta = run_scs(inst)
    b, cb, tb = run_scs(inst)
    assert a.selected == b.selected and ta == tb
    for rid in a.allocation:
        assert a.allocation[rid].tobytes() == b.allocation[rid].tobytes()
    assert ca.beta.tobytes() == cb.beta.tobytes()


def test_beta_never_increases_along_the_run():
    inst = small_instance(11, SmallConfig(min_evs=10, max_evs=10))
    state = SchedulerState.empty(inst)
    for req in sorted(inst.requests, key=sort_key):
        if feasibility_check(state, req):
            smart_allocate(state, req)
        elif state.beta[req.deadline - 1] == 0:
            beta_cover(state, req)
        assert np.all(np.diff(state.beta) <= 0)
