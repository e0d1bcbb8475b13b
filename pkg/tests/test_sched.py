import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from mmwsched.channel import ChannelSnapshot, LinkBudget, bits_table
from mmwsched.core import McsIndex, SubframeConfig
from mmwsched.sched import (
    PfConfig, PfState, Policy, UeDemand, allocate, default_r_ref, epf_contribution, ewma_update,
    gamma, instantaneous_rate_norm, peak_r_ref, priority,
)

CFG = SubframeConfig()
BITS = bits_table(LinkBudget(), CFG)
REL = 1e-9


def snap(ue, mcs):
    return ChannelSnapshot(ue, True, 80.0, 20.0, McsIndex(mcs), int(BITS[mcs]))


def pf_config(**kw):
    kw.setdefault("r_ref", default_r_ref(LinkBudget(), CFG))
    return PfConfig(**kw)


# --- tabulated equation examples -------------------------------------------

def test_rate_norm_against_peak_reference():
    pf = PfConfig(r_ref=peak_r_ref(LinkBudget(), CFG))
    assert instantaneous_rate_norm(snap(0, 28), CFG, pf) == pytest.approx(1.0, rel=REL)
    assert instantaneous_rate_norm(snap(0, 14), CFG, pf) == pytest.approx(0.5, rel=1e-4)
    half = ChannelSnapshot(0, True, 0, 0, McsIndex(14), int(BITS[28]) / 2)
    assert instantaneous_rate_norm(half, CFG, pf) == pytest.approx(0.5, rel=REL)


def test_default_reference_is_bandwidth():
    pf = pf_config()
    # full-subframe service at MCS 28: 22 symbols * 23333 bits / 100 us = 5.133 Gbit/s over 1 GHz
    assert instantaneous_rate_norm(snap(0, 28), CFG, pf) == pytest.approx(22 * 23333 / 100e-6 / 1e9, rel=REL)


def test_rate_norm_requires_resolved_reference():
    with pytest.raises(ValueError):
        instantaneous_rate_norm(snap(0, 5), CFG, PfConfig())


@pytest.mark.parametrize("r_prev, r, scheduled, expected", [
    (100, 200, True, 110), (100, 200, False, 90), (100, 100, True, 100),
])
def test_ewma_update_examples(r_prev, r, scheduled, expected):
    assert ewma_update(r_prev, r, scheduled, 10) == pytest.approx(expected, rel=REL)


def test_ewma_epsilon_floor():
    assert ewma_update(1e-7, 0.0, False, 10, epsilon=1e-6) == 1e-6


@pytest.mark.parametrize("mcs, expected", [(28, 1.5), (14, 1.0), (1, 1 / 28 + 0.5)])
def test_gamma_examples(mcs, expected):
    assert gamma(mcs) == pytest.approx(expected, rel=REL)


def test_gamma_range_and_monotone():
    values = [gamma(m) for m in range(1, 29)]
    assert min(values) == pytest.approx(0.5357142857, rel=1e-9) and max(values) == 1.5
    assert all(a < b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        gamma(29)


def test_epf_contribution_examples():
    for m in (1, 14, 28):
        assert epf_contribution(1.0, m) == 1.0
    assert epf_contribution(0.25, 28) == pytest.approx(0.125, rel=REL)
    for m in range(1, 28):
        assert epf_contribution(0.4, m + 1) < epf_contribution(0.4, m)


@given(st.floats(1e-3, 0.999), st.integers(1, 28))
def test_contribution_crossing_below_unit_rate(r, mcs):
    g = gamma(mcs)
    c = epf_contribution(r, mcs)
    if g > 1:
        assert c < r
    elif g < 1:
        assert c > r
    else:
        assert c == pytest.approx(r)


@given(st.floats(1.001, 50), st.integers(1, 28))
def test_contribution_crossing_above_unit_rate(r, mcs):
    # poor channel shrinks the averaged sample, good channel inflates it
    g = gamma(mcs)
    c = epf_contribution(r, mcs)
    if g > 1:
        assert c > r
    elif g < 1:
        assert c < r


def test_priority_examples():
    assert priority(0.8, 0.4, pf_config()) == pytest.approx(2.0, rel=REL)
    assert priority(0.5, 0.25, pf_config(alpha=2.0)) == pytest.approx(1.0, rel=REL)


@given(st.floats(1e-3, 10), st.floats(1e-6, 10))
def test_generalized_priority_reduces_to_ratio(r, avg):
    assert priority(r, avg, pf_config()) == r / avg


# --- allocation --------------------------------------------------------------

def test_single_ue_gets_what_it_needs_under_every_policy():
    for policy in Policy:
        state = PfState.for_ues([0], pf_config())
        small = allocate([UeDemand(0, 3 * int(BITS[10]) - 5, snap(0, 10))], state, pf_config(), CFG, policy)
        assert small.grants == {0: 3}
        state = PfState.for_ues([0], pf_config())
        big = allocate([UeDemand(0, 10**9, snap(0, 10))], state, pf_config(), CFG, policy)
        assert big.grants == {0: 22}


@pytest.mark.parametrize("policy", [Policy.MAXRATE, Policy.SPF])
def test_strictly_better_rate_wins(policy):
    pf = PfConfig(r_ref=peak_r_ref(LinkBudget(), CFG))
    state = PfState.for_ues([0, 1], pf)
    backlog = 10**8
    alloc = allocate([UeDemand(0, backlog, snap(0, 14)), UeDemand(1, backlog, snap(1, 28))],
                     state, pf, CFG, policy)
    assert list(alloc.grants) == [1]


def test_ties_go_to_lowest_ue_id():
    state = PfState.for_ues([0, 1, 2], pf_config())
    alloc = allocate([UeDemand(k, 10**8, snap(k, 20)) for k in (2, 1, 0)], state, pf_config(), CFG, Policy.SPF)
    assert list(alloc.grants) == [0]


def test_no_grant_to_empty_queue_and_bounded_total():
    state = PfState.for_ues(range(4), pf_config())
    demands = [UeDemand(0, 0, snap(0, 28)), UeDemand(1, 5000, snap(1, 3)),
               UeDemand(2, 10**6, snap(2, 9)), UeDemand(3, 30000, snap(3, 28))]
    alloc = allocate(demands, state, pf_config(), CFG, Policy.EPF)
    assert 0 not in alloc.grants
    assert alloc.total <= 22
    assert 0 not in alloc.priorities


def test_unknown_ue_and_negative_backlog_rejected():
    state = PfState.for_ues([0], pf_config())
    with pytest.raises(KeyError):
        allocate([UeDemand(5, 100, snap(5, 10))], state, pf_config(), CFG, Policy.SPF)
    with pytest.raises(ValueError):
        allocate([UeDemand(0, -1, snap(0, 10))], state, pf_config(), CFG, Policy.SPF)


def test_round_robin_cycles():
    state = PfState.for_ues(range(3), pf_config())
    order = []
    for _ in range(6):
        alloc = allocate([UeDemand(k, 10**8, snap(k, 28 - 5 * k)) for k in range(3)], state, pf_config(),
                         CFG, Policy.RR)
        order.append(next(iter(alloc.grants)))
    assert order == [0, 1, 2, 0, 1, 2]


def test_idle_ue_average_does_not_decay_before_first_traffic():
    pf = pf_config()
    state = PfState.for_ues([0, 1], pf)
    allocate([UeDemand(0, 10**7, snap(0, 20)), UeDemand(1, 0, snap(1, 20))], state, pf, CFG, Policy.SPF)
    assert state.ues[1].avg_rate == pf.r_init
    allocate([UeDemand(0, 0, snap(0, 20)), UeDemand(1, 1000, snap(1, 20))], state, pf, CFG, Policy.SPF)
    avg0 = state.ues[0].avg_rate
    allocate([UeDemand(0, 0, snap(0, 20)), UeDemand(1, 0, snap(1, 20))], state, pf, CFG, Policy.SPF)
    # UE 0 has had traffic, so an empty buffer decays it
    assert state.ues[0].avg_rate == pytest.approx(avg0 * (1 - 1 / pf.t_c))


def hand_spf(trace, t_c, r_ref, r_init):
    """Independent replay of the SPF recurrences for a greedy grant loop.

    ``trace`` is a list of subframes, each a list of (backlog_bits, mcs)
    per UE. Returns the per-subframe list of (ue, symbols) in grant order.
    """
    n = len(trace[0])
    avg = [r_init] * n
    out = []
    for sub in trace:
        rate = [22 * int(BITS[m]) / 100e-6 / r_ref for _, m in sub]
        prio = {k: rate[k] / avg[k] for k in range(n) if sub[k][0] > 0}
        left, grants = 22, []
        for k in sorted(prio, key=lambda u: (-prio[u], u)):
            if left == 0:
                break
            s = min(math.ceil(sub[k][0] / int(BITS[sub[k][1]])), left)
            grants.append((k, s))
            left -= s
        got = {k for k, _ in grants}
        for k in range(n):
            if k in got:
                avg[k] = (1 - 1 / t_c) * avg[k] + rate[k] / t_c
            elif sub[k][0] > 0 or avg[k] != r_init:
                avg[k] = (1 - 1 / t_c) * avg[k]
        out.append(grants)
    return out


def test_spf_matches_hand_replay_four_ues_three_subframes():
    trace = [
        [(200_000, 28), (50_000, 12), (0, 20), (400_000, 5)],
        [(180_000, 27), (10_000, 12), (90_000, 20), (380_000, 6)],
        [(150_000, 25), (10_000, 13), (80_000, 4), (350_000, 6)],
    ]
    pf = PfConfig(t_c=4.0, r_ref=default_r_ref(LinkBudget(), CFG), r_init=0.5)
    expected = hand_spf(trace, 4.0, pf.r_ref, 0.5)
    state = PfState.for_ues(range(4), pf)
    got = []
    for sub in trace:
        alloc = allocate([UeDemand(k, b, snap(k, m)) for k, (b, m) in enumerate(sub)], state, pf, CFG, Policy.SPF)
        got.append(list(alloc.grants.items()))
    assert got == expected
    # sub 0: UE 2 idle, the MCS 5 UE takes the leftovers; later subframes rotate by r/R
    assert expected == [[(0, 9), (1, 5), (3, 8)], [(2, 6), (0, 8), (1, 1), (3, 7)], [(1, 1), (0, 8), (3, 13)]]


# --- collapse identities ------------------------------------------------------

demand_streams = st.lists(
    st.lists(st.tuples(st.integers(0, 400_000), st.integers(1, 28)), min_size=4, max_size=4),
    min_size=1, max_size=40)


def replay(stream, policy, pf):
    state = PfState.for_ues(range(4), pf)
    out = []
    for sub in stream:
        alloc = allocate([UeDemand(k, b, snap(k, m)) for k, (b, m) in enumerate(sub)], state, pf, CFG, policy)
        out.append((list(alloc.grants.items()), [state.ues[k].avg_rate for k in range(4)]))
    return out


@settings(max_examples=150, deadline=None)
@given(demand_streams, st.floats(1, 200))
def test_gpf_unit_exponents_is_spf(stream, t_c):
    pf = pf_config(t_c=t_c)
    assert replay(stream, Policy.GPF, pf) == replay(stream, Policy.SPF, pf)


@settings(max_examples=150, deadline=None)
@given(demand_streams, st.floats(1, 200))
def test_epf_fixed_unit_gamma_is_spf(stream, t_c):
    pf = pf_config(t_c=t_c, gamma_mode="fixed", gamma_fixed=1.0)
    assert replay(stream, Policy.EPF, pf) == replay(stream, Policy.SPF, pf)


@settings(max_examples=100, deadline=None)
@given(demand_streams)
def test_average_rate_never_below_epsilon(stream):
    for policy in (Policy.SPF, Policy.EPF, Policy.GPF):
        for _, avgs in replay(stream, policy, pf_config(t_c=1.0)):
            assert min(avgs) >= 1e-6


@given(st.lists(st.tuples(st.floats(0.01, 5), st.floats(0.01, 5)), min_size=2, max_size=8),
       st.floats(0.01, 100))
def test_priority_argmax_scale_invariant(pairs, c):
    pf = pf_config()
    prio = [priority(r, a, pf) for r, a in pairs]
    scaled = [priority(c * r, c * a, pf) for r, a in pairs]
    best = max(range(len(pairs)), key=lambda k: (prio[k], -k))
    best_scaled = max(range(len(pairs)), key=lambda k: (scaled[k], -k))
    if sorted(prio)[-1] != pytest.approx(sorted(prio)[-2] if len(prio) > 1 else -1, rel=1e-9):
        assert best == best_scaled


def test_pf_config_validation():
    with pytest.raises(ValueError):
        PfConfig(t_c=0.5)
    with pytest.raises(ValueError):
        PfConfig(r_ref=0)
    with pytest.raises(ValueError):
        PfConfig(gamma_mode="adaptive")
    assert replace(PfConfig(), t_c=1.0).t_c == 1.0
