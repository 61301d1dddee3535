import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risric.channel import ConfigurationError, DimensionError
from risric.policy import (CQI_THRESHOLDS_DB, THROUGHPUT_FLOOR_BPS, InputError,
                           UeServiceState, WeightPolicy, compute_weights, cqi_from_rsrp,
                           tbs_proxy, update_throughput_ewma, weighted_rsrp)


def ue(cqi=10, tbs=1000, thr=1000.0, rsrp=-100.0):
    return UeServiceState(cqi, tbs, thr, rsrp)


service_states = st.builds(
    UeServiceState,
    cqi=st.integers(1, 15),
    tbs_bits=st.integers(1, 10**6),
    throughput_ewma_bps=st.floats(1.0, 1e9),
    last_rsrp_dbm=st.floats(-140, -40),
)


def test_equal_weights():
    assert compute_weights(WeightPolicy.equal(), [ue(), ue()]).tolist() == [0.5, 0.5]


def test_best_cqi_weights():
    w = compute_weights(WeightPolicy.best_cqi(), [ue(cqi=15), ue(cqi=5)])
    assert w.tolist() == [0.75, 0.25]


def test_proportional_fair_weights():
    w = compute_weights(WeightPolicy.proportional_fair(),
                        [ue(tbs=1000, thr=500.0), ue(tbs=1000, thr=1000.0)])
    assert w == pytest.approx([2 / 3, 1 / 3], abs=1e-15)


def test_reference_ue_weights():
    w = compute_weights(WeightPolicy.reference_ue(1), [ue(), ue(), ue()])
    assert w.tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(ConfigurationError):
        compute_weights(WeightPolicy.reference_ue(3), [ue(), ue()])


def test_empty_states_rejected():
    with pytest.raises(ConfigurationError):
        compute_weights(WeightPolicy.equal(), [])


@pytest.mark.parametrize("text,kind,index", [
    ("equal", "equal", 0), ("pf", "proportional_fair", 0), ("method3", "best_cqi", 0),
    ("reference_ue:1", "reference_ue", 1), ("best-cqi", "best_cqi", 0),
])
def test_policy_parse(text, kind, index):
    p = WeightPolicy.parse(text)
    assert (p.kind, p.index) == (kind, index)
    assert WeightPolicy.parse(str(p)) == p


@settings(max_examples=200, deadline=None)
@given(states=st.lists(service_states, min_size=1, max_size=6),
       kind=st.sampled_from(WeightPolicy.KINDS))
def test_weights_normalized(states, kind):
    w = compute_weights(WeightPolicy(kind, 0), states)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(states=st.lists(service_states, min_size=2, max_size=5), data=st.data())
def test_permutation_covariance(states, data):
    perm = data.draw(st.permutations(range(len(states))))
    permuted = [states[i] for i in perm]
    for policy in (WeightPolicy.equal(), WeightPolicy.best_cqi(),
                   WeightPolicy.proportional_fair()):
        w = compute_weights(policy, states)
        wp = compute_weights(policy, permuted)
        assert wp == pytest.approx(w[list(perm)], rel=1e-12, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(a=st.integers(1, 15), b=st.integers(1, 15))
def test_best_cqi_strictly_monotone(a, b):
    w = compute_weights(WeightPolicy.best_cqi(), [ue(cqi=a), ue(cqi=b)])
    if a > b:
        assert w[0] > w[1]
    elif a == b:
        assert w[0] == w[1]


@settings(max_examples=100, deadline=None)
@given(r1=st.floats(10.0, 1e8), factor=st.floats(1.01, 100.0))
def test_pf_decreasing_in_throughput(r1, factor):
    other = ue(tbs=5000, thr=3e4)
    w_low = compute_weights(WeightPolicy.proportional_fair(), [ue(tbs=5000, thr=r1), other])
    w_high = compute_weights(WeightPolicy.proportional_fair(),
                             [ue(tbs=5000, thr=r1 * factor), other])
    assert w_high[0] < w_low[0]


# --- weighted_rsrp ---------------------------------------------------------

@pytest.mark.parametrize("w,r,expected", [
    ((0.5, 0.5), (-100, -90), -95.0),
    ((1, 0), (-97.5, -40), -97.5),
    ((0.75, 0.25), (-100, -108), -102.0),
])
def test_weighted_rsrp_examples(w, r, expected):
    assert weighted_rsrp(w, r) == expected


def test_weighted_rsrp_length_mismatch():
    with pytest.raises(DimensionError):
        weighted_rsrp([0.5, 0.5], [-100.0])


def test_weighted_rsrp_linear_domain():
    got = weighted_rsrp([0.5, 0.5], [-100.0, -100.0], domain="linear")
    assert got == pytest.approx(-100.0 + 10 * math.log10(1.0), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(w1=st.lists(st.floats(0, 1), min_size=3, max_size=3),
       w2=st.lists(st.floats(0, 1), min_size=3, max_size=3),
       r=st.lists(st.floats(-140, -40), min_size=3, max_size=3),
       a=st.floats(-3, 3))
def test_weighted_rsrp_linear_in_weights(w1, w2, r, a):
    combo = np.asarray(w1) + a * np.asarray(w2)
    assert weighted_rsrp(combo, r) == pytest.approx(
        weighted_rsrp(w1, r) + a * weighted_rsrp(w2, r), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-1e6, 1e6))
def test_zero_weight_ue_is_ignored(x):
    assert weighted_rsrp([1.0, 0.0], [-100.0, x]) == -100.0


# --- CQI and TBS proxies ---------------------------------------------------

def test_cqi_clamps():
    assert cqi_from_rsrp(-200.0, -120.0) == 1
    assert cqi_from_rsrp(0.0, -120.0) == 15


@pytest.mark.parametrize("k", range(15))
def test_cqi_threshold_is_lower_inclusive(k):
    t = CQI_THRESHOLDS_DB[k]
    assert cqi_from_rsrp(-120.0 + t, -120.0) == min(max(k + 1, 1), 15)
    if k > 0:
        assert cqi_from_rsrp(-120.0 + t - 1e-9, -120.0) == max(k, 1)


def test_tbs_examples():
    assert tbs_proxy(1, 1) == 25
    assert tbs_proxy(15, 106) == 98918
    with pytest.raises(InputError):
        tbs_proxy(1, 0)
    with pytest.raises(InputError):
        tbs_proxy(16, 10)
    with pytest.raises(InputError):
        tbs_proxy(0, 10)


def test_service_state_invariants():
    with pytest.raises(InputError):
        UeServiceState(0, 10, 1.0)
    with pytest.raises(InputError):
        UeServiceState(5, 0, 1.0)
    with pytest.raises(InputError):
        UeServiceState(5, 10, 0.0)


# --- throughput EWMA -------------------------------------------------------

def test_ewma_beta_one():
    s = ue(thr=5e5)
    assert update_throughput_ewma(s, 2e6, beta=1.0).throughput_ewma_bps == 2e6
    assert update_throughput_ewma(s, 0.0, beta=1.0).throughput_ewma_bps == THROUGHPUT_FLOOR_BPS


def test_ewma_single_step():
    s = update_throughput_ewma(ue(thr=1e6), 0.0, beta=0.1)
    assert s.throughput_ewma_bps == pytest.approx(9e5, rel=1e-15)


@pytest.mark.parametrize("beta", [0.05, 0.1, 0.3, 0.7])
def test_ewma_convergence_steps(beta):
    # Remaining gap shrinks by (1 - beta) per step: geometric-series bound.
    target, start = 5e6, 1e4
    steps = math.ceil(math.log(0.01) / math.log(1 - beta))
    s = ue(thr=start)
    for _ in range(steps):
        s = update_throughput_ewma(s, target, beta)
    assert abs(s.throughput_ewma_bps - target) <= 0.01 * target
    assert s.cqi == 10 and s.tbs_bits == 1000


def test_ewma_input_checks():
    with pytest.raises(InputError):
        update_throughput_ewma(ue(), 1.0, beta=0.0)
    with pytest.raises(InputError):
        update_throughput_ewma(ue(), -1.0, beta=0.5)
