import math

import numpy as np
import pytest
from scipy import stats

from tempfade.channel import specular_gain
from tempfade.errors import ConfigError
from tempfade.link import (QPSK_POINTS, Frame, IQTrace, WaveformConfig, add_awgn, apply_channel,
                           envelope_dbm, gen_qpsk, rssi_estimate, simulate_link)
from tempfade.scenario import resolve_scene, rolling_mill_vehicle, static_scenario


def test_qpsk_unit_magnitude_and_determinism():
    a = gen_qpsk(3, 1000)
    assert np.all(np.abs(a) == 1.0)
    assert np.array_equal(a, gen_qpsk(3, 1000))
    assert not np.array_equal(a, gen_qpsk(4, 1000))
    assert set(np.round(a, 12)) <= set(np.round(QPSK_POINTS, 12))


def test_qpsk_point_frequencies_multinomial():
    n = 100_000
    a = gen_qpsk(9, n)
    sd = math.sqrt(n * 0.25 * 0.75)
    for pt in QPSK_POINTS:
        assert abs(np.sum(np.isclose(a, pt)) - n / 4) < 3 * sd


def test_apply_channel():
    x = gen_qpsk(1, 64)
    assert np.array_equal(apply_channel(x, np.ones(64)), x)
    y = apply_channel(x, np.full(64, 1j))
    assert np.allclose(y, 1j * x) and np.allclose(np.abs(y), 1.0)
    g = 0.3 * np.exp(1j * np.linspace(0, 1, 64))
    assert np.allclose(np.abs(apply_channel(x, g)), np.abs(g))
    with pytest.raises(ValueError):
        apply_channel(x, np.ones(63))


def test_awgn_zero_power_and_variance():
    x = gen_qpsk(1, 1_000_000)
    assert np.array_equal(add_awgn(x, 0.0, 5), x)
    n = add_awgn(x, 0.02, 5) - x
    assert np.var(n) == pytest.approx(0.02, rel=0.01)
    assert np.array_equal(add_awgn(x, 0.02, 5), add_awgn(x, 0.02, 5))


def test_awgn_envelope_squared_is_exponential():
    e2 = np.abs(add_awgn(np.zeros(200_000, complex), 2.0, 8)) ** 2
    assert stats.kstest(e2, stats.expon(scale=2.0).cdf).pvalue > 0.01


def test_envelope_dbm():
    tr = IQTrace(915e6, 1e6, 1e-4, np.array([1.0, 2.0, 0.0], dtype=np.complex64))
    d = envelope_dbm(tr)
    assert d[0] == pytest.approx(-40.0)
    assert d[1] - d[0] == pytest.approx(20 * math.log10(2), abs=1e-9)
    assert d[1] - d[0] == pytest.approx(6.0206, abs=1e-4)
    assert d[2] == -np.inf


def test_rssi_constant_envelope():
    frame = Frame(0, np.ones(5000, complex), 1e6)
    assert rssi_estimate(frame, 1e-4) == -40


def test_rssi_leading_window_failure_mode():
    a_hi = math.sqrt(10 ** (-33 / 10))
    a_lo = math.sqrt(10 ** (-46 / 10))
    x = np.full(5000, a_lo, complex)
    x[:16] = a_hi
    frame = Frame(0, x, 1e6)
    assert rssi_estimate(frame, 1.0) == -33
    mean_dbm = 10 * math.log10(np.mean(np.abs(x) ** 2))
    assert mean_dbm == pytest.approx(-45.8, abs=0.1)
    assert -33 - mean_dbm > 12


def test_rssi_awgn_frame_close_to_mean():
    x = add_awgn(np.zeros(5000, complex), 1.0, 3)
    frame = Frame(0, x, 1e6)
    assert abs(rssi_estimate(frame, 1e-5) - 10 * math.log10(1e-5)) < 4  # 16-sample window
    long_frame = Frame(0, add_awgn(np.zeros(200_000, complex), 1.0, 3), 1e9)
    assert abs(rssi_estimate(long_frame, 1e-5) - (-50)) <= 1


def test_rssi_short_frame_rejected():
    with pytest.raises(ValueError):
        rssi_estimate(Frame(0, np.ones(10, complex), 1e6), 1.0)


def test_no_objects_no_noise_constant_envelope():
    sc = static_scenario(duration_s=0.1)
    tr = simulate_link(sc, WaveformConfig(noise_power_mw=0.0, scatter_model="static"))
    env = tr.envelope()
    assert np.ptp(env) < 1e-6 * env.mean()
    h = specular_gain(resolve_scene(sc, 0), sc.carrier_hz)
    assert env.mean() == pytest.approx(abs(h + sum(
        p.amplitude * np.exp(1j * p.phase_offset_rad) for p in resolve_scene(sc, 0).scattered_paths))
        * math.sqrt(2e-4), rel=1e-6)


def test_gain_constant_within_frame():
    sc = rolling_mill_vehicle(duration_s=1.0)
    cfg = WaveformConfig(noise_power_mw=0.0)
    tr, sym = simulate_link(sc, cfg, return_symbols=True)
    g = (tr.samples / sym).reshape(-1, cfg.frame_len)
    # the scattered sum is random per sample; the specular part is frame-constant
    tr_s, sym_s = simulate_link(sc, WaveformConfig(noise_power_mw=0.0, scatter_model="static"),
                                return_symbols=True)
    gs = (tr_s.samples / sym_s).reshape(-1, cfg.frame_len)
    assert np.allclose(gs, gs[:, :1], rtol=1e-6, atol=0)
    assert not np.allclose(g, g[:, :1])


def test_power_conservation_unit_gain():
    sc = static_scenario(n_const_scattered=0, duration_s=0.05)
    sc_los = sc
    cfg = WaveformConfig(noise_power_mw=0.0, scatter_model="static", norm_mw=1.0)
    tr = simulate_link(sc_los, cfg)
    assert np.mean(tr.power_mw()) == pytest.approx(1.0, rel=1e-6)


def test_simulate_determinism():
    sc = rolling_mill_vehicle(duration_s=0.5)
    a = simulate_link(sc, WaveformConfig())
    b = simulate_link(sc, WaveformConfig())
    assert a.samples.tobytes() == b.samples.tobytes()
    c = simulate_link(sc, WaveformConfig(noise_seed=3))
    assert a.samples.tobytes() != c.samples.tobytes()


def test_ground_truth_matches_channel():
    sc = rolling_mill_vehicle(duration_s=1.0)
    _, gt = simulate_link(sc, WaveformConfig(), return_truth=True)
    scene = resolve_scene(sc, gt.frame_times[37])
    s = abs(specular_gain(scene, sc.carrier_hz)) * math.sqrt(2e-4)
    assert gt.s_inst[37] == pytest.approx(s, rel=1e-12)


def test_default_run_dbm_range():
    tr = simulate_link(rolling_mill_vehicle(duration_s=60.0),
                       WaveformConfig(duration_s=30.0, noise_power_mw=0.0, scatter_model="static",
                                      sample_rate_hz=2e4))
    d = envelope_dbm(tr)
    assert -50 < d.min() < -40 and -36 < d.max() < -30


def test_waveform_validation():
    with pytest.raises(ConfigError, match="waveform.gain_update"):
        WaveformConfig(gain_update="slot")
    with pytest.raises(ConfigError, match="waveform.norm_mw"):
        WaveformConfig(norm_mw=0.0)
    with pytest.raises(ValueError):
        IQTrace(1e9, 1e6, 1.0, np.array([np.nan], dtype=np.complex64))
