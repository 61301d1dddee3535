from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risric.channel import (ZERO_POWER_DBFS, ChannelRealization, ConfigurationError,
                            DimensionError, MeasurementConfig, RisConfiguration,
                            average_re_dbm, draw_channel, effective_channel,
                            measure_power_dbfs, measure_ss_rsrp)
from risric.harness import ScenarioConfig


def single(h, g, noise_var=0.0, h_los=0.0):
    return ChannelRealization(h=np.atleast_1d(h), g=np.atleast_2d(g), h_los=h_los,
                              noise_var=noise_var)


def config(states, n_state=4, amplitude=1.0):
    states = np.atleast_1d(states)
    return RisConfiguration(states, 1, states.size, n_state, amplitude)


def unit_meas(**kw):
    kw.setdefault("dbfs_to_dbm_offset", 0.0)
    return MeasurementConfig(**kw)


# --- draw_channel ----------------------------------------------------------

def test_draw_is_deterministic_per_seed():
    sc = ScenarioConfig(n_ue=2, path_gain_db=(0.0, -3.0))
    a, b = draw_channel(sc, 7), draw_channel(sc, 7)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.g, b.g)
    assert not np.array_equal(draw_channel(sc, 8).h, a.h)


def test_default_los_is_zero():
    ch = draw_channel(ScenarioConfig(n_ue=3, path_gain_db=0.0), 1)
    assert np.all(ch.h_los == 0)


def test_path_gain_offset_sample_mean():
    # 10^5 elements per UE so the sample means are tight.
    sc = ScenarioConfig(n_x=1, n_y=100_000, n_ue=2, path_gain_db=(0.0, -10.0))
    ch = draw_channel(sc, 3)
    ratio = np.mean(np.abs(ch.g[1]) ** 2) / np.mean(np.abs(ch.g[0]) ** 2)
    assert ratio == pytest.approx(0.1, rel=0.05)


@pytest.mark.parametrize("n_elements,n_ue", [(0, 1), (4, 0), (-1, 2)])
def test_draw_rejects_bad_sizes(n_elements, n_ue):
    sc = SimpleNamespace(n_elements=n_elements, n_ue=n_ue, path_gain_db=0.0,
                         noise_var=lambda: np.zeros(1))
    with pytest.raises(ConfigurationError):
        draw_channel(sc, 0)


# --- effective_channel -----------------------------------------------------

def test_effective_identity_and_flip():
    ch = single([1 + 0j], [1 + 0j])
    assert effective_channel(ch, config([0]), 0) == 1 + 0j
    assert effective_channel(ch, config([2]), 0) == -1 + 0j


def test_effective_matches_hand_sum():
    rng = np.random.default_rng(11)
    h = rng.normal(size=3) + 1j * rng.normal(size=3)
    g = rng.normal(size=3) + 1j * rng.normal(size=3)
    states = [0, 3, 2]
    phases = [0.0, np.pi, np.pi]
    alpha = 0.8
    expected = sum(np.conj(g[n]) * alpha * np.exp(1j * phases[n]) * h[n] for n in range(3))
    got = effective_channel(single(h, g), config(states, amplitude=alpha), 0)
    assert got == pytest.approx(expected, abs=1e-12)


def test_effective_adds_los():
    ch = single([1.0], [1.0], h_los=0.5j)
    assert effective_channel(ch, config([0]), 0) == pytest.approx(1 + 0.5j)


def test_effective_dimension_mismatch():
    with pytest.raises(DimensionError):
        effective_channel(single([1, 1], [1, 1]), config([0]), 0)


def test_state_phase_map_single_polarization():
    cfg = RisConfiguration(np.array([0, 1, 2, 3]), 2, 2, 4)
    assert cfg.phase_bits().tolist() == [0, 0, 1, 1]
    assert np.all(np.abs(cfg.reflection()) == 1.0)
    two = RisConfiguration(np.array([0, 1]), 1, 2, 2)
    assert two.phase_bits().tolist() == [0, 1]


def test_dual_polarization_hook():
    ch = ChannelRealization(h=[1.0], g=[[1.0]], h_los=0, noise_var=0,
                            h_v=[1.0], g_v=[[1.0]])
    vals = [effective_channel(ch, RisConfiguration([s], 1, 1, 4, polarization="dual"), 0)
            for s in range(4)]
    assert vals == [2, 0, 0, -2]


def test_configuration_validation():
    with pytest.raises(ConfigurationError):
        RisConfiguration([0, 4], 1, 2, 4)
    with pytest.raises(ConfigurationError):
        RisConfiguration([0, 1, 2], 2, 2, 4)
    with pytest.raises(ConfigurationError):
        RisConfiguration([0], 1, 1, 4, amplitude=0.0)


# --- measurement -----------------------------------------------------------

@pytest.mark.parametrize("k", [1, 5, 1000])
def test_noiseless_power_is_exact(k):
    rng = np.random.default_rng(0)
    assert measure_power_dbfs(single([1.0], [1.0]), config([0]), 0,
                              unit_meas(k_samples=k), rng) == pytest.approx(0.0, abs=1e-12)
    assert measure_power_dbfs(single([0.1], [1.0]), config([0]), 0,
                              unit_meas(k_samples=k), rng) == pytest.approx(-20.0, abs=1e-12)


def test_noisy_power_expectation():
    rng = np.random.default_rng(5)
    got = measure_power_dbfs(single([1.0], [1.0], noise_var=0.01), config([0]), 0,
                             unit_meas(k_samples=10_000), rng)
    assert got == pytest.approx(10 * np.log10(1.01), abs=0.1)


def test_zero_power_sentinel():
    rng = np.random.default_rng(0)
    assert measure_power_dbfs(single([0.0], [1.0]), config([0]), 0, unit_meas(), rng) \
        == ZERO_POWER_DBFS


def test_rsrp_calibration_exact():
    rng = np.random.default_rng(0)
    for n_re in (1, 3, 12):
        meas = MeasurementConfig(n_re=n_re, dbfs_to_dbm_offset=-130.0, tx_power_dbm=30.0)
        assert measure_ss_rsrp(single([1.0], [1.0]), config([0]), 0, meas, rng) == -100.0


def test_re_averaging_modes():
    assert average_re_dbm([-100.0, -90.0]) == -95.0
    lin = average_re_dbm([-100.0, -90.0], "linear")
    assert lin == pytest.approx(10 * np.log10((1e-10 + 1e-9) / 2) + 0, abs=1e-9)


def test_rsrp_jitter_statistics():
    rng = np.random.default_rng(1)
    meas = unit_meas(rsrp_noise_std=2.0)
    vals = [measure_ss_rsrp(single([1.0], [1.0]), config([0]), 0, meas, rng)
            for _ in range(4000)]
    assert np.mean(vals) == pytest.approx(0.0, abs=0.1)
    assert np.std(vals) == pytest.approx(2.0, rel=0.05)


def test_pure_noise_level():
    rng = np.random.default_rng(2)
    ch = single([1.0], [0.0], noise_var=0.05)
    meas = MeasurementConfig(k_samples=10_000, n_re=1, dbfs_to_dbm_offset=-120.0)
    got = measure_ss_rsrp(ch, config([0]), 0, meas, rng)
    assert got == pytest.approx(10 * np.log10(0.05) - 120.0, abs=0.2)


def test_measurement_config_validation():
    with pytest.raises(ConfigurationError):
        MeasurementConfig(k_samples=0)
    with pytest.raises(ConfigurationError):
        MeasurementConfig(n_re=0)
    with pytest.raises(ConfigurationError):
        MeasurementConfig(rsrp_noise_std=-1)


# --- properties ------------------------------------------------------------

complex_vec = st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False,
                                          allow_infinity=False), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), c=st.floats(0.01, 100))
def test_linearity_in_g(data, c):
    h = data.draw(complex_vec)
    g = data.draw(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False,
                                              allow_infinity=False),
                           min_size=len(h), max_size=len(h)))
    states = data.draw(st.lists(st.integers(0, 3), min_size=len(h), max_size=len(h)))
    cfg = config(states)
    e1 = effective_channel(single(h, g), cfg, 0)
    e2 = effective_channel(single(h, np.asarray(g) * c), cfg, 0)
    assert e2 == pytest.approx(c * e1, rel=1e-9, abs=1e-9)
    if abs(e1) > 1e-6:
        rng = np.random.default_rng(0)
        p1 = measure_power_dbfs(single(h, g), cfg, 0, unit_meas(), rng)
        p2 = measure_power_dbfs(single(h, np.asarray(g) * c), cfg, 0, unit_meas(), rng)
        assert p2 - p1 == pytest.approx(20 * np.log10(c), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_phase_flip_symmetry(data):
    h = np.asarray(data.draw(complex_vec))
    g = np.asarray(data.draw(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                         allow_infinity=False),
                                      min_size=len(h), max_size=len(h))))
    states = np.asarray(data.draw(st.lists(st.integers(0, 3), min_size=len(h),
                                           max_size=len(h))))
    flipped = (states + 2) % 4
    ch = single(h, g)
    assert effective_channel(ch, config(flipped), 0) == -effective_channel(ch, config(states), 0)
    rng = np.random.default_rng(0)
    assert measure_power_dbfs(ch, config(flipped), 0, unit_meas(), rng) == \
        measure_power_dbfs(ch, config(states), 0, unit_meas(), rng)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), k1=st.integers(1, 50), k2=st.integers(1, 50))
def test_noiseless_power_independent_of_k_and_pilots(seed, k1, k2):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    g = rng.normal(size=4) + 1j * rng.normal(size=4)
    ch, cfg = single(h, g), config(rng.integers(0, 4, 4))
    a = measure_power_dbfs(ch, cfg, 0, unit_meas(k_samples=k1), np.random.default_rng(seed))
    b = measure_power_dbfs(ch, cfg, 0, unit_meas(k_samples=k2), np.random.default_rng(seed + 1))
    assert a == b
