"""Baseband link: QPSK source, channel application, noise, mW/dBm scaling, RSSI.

Samples are stored in receiver units; ``norm_mw * |x|**2`` is the sample
power in mW. One sample per symbol, no pulse shaping: only envelope
statistics matter here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ClassicalRicianParams, eval_classical, path_phase, specular_gain
from .errors import ConfigError, TimeRangeError
from .scenario import TWO_PI, PathKind, Scenario, reflected_params, resolve_scene, scattered_amplitudes

FRAME_S = 5e-3
RSSI_WINDOW_S = 16e-6

# dBm value reported for exact-zero samples
NO_SIGNAL_DBM = -math.inf

SCATTER_MODELS = ("gaussian", "phasor", "static")

# one ulp below sqrt(0.5): np.abs of every constellation point is then exactly 1.0
_A = float(np.nextafter(math.sqrt(0.5), 0.0))
QPSK_POINTS = np.array([_A + 1j * _A, -_A + 1j * _A, -_A - 1j * _A, _A - 1j * _A])


@dataclass(frozen=True)
class IQTrace:
    carrier_hz: float
    sample_rate_hz: float
    norm_mw: float
    samples: np.ndarray = field(repr=False)
    start_time_s: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigError("must be positive", "sample_rate_hz")
        if not self.norm_mw > 0:
            raise ConfigError("must be positive", "norm_mw")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trace samples must be finite")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def power_mw(self) -> np.ndarray:
        x = self.samples
        return self.norm_mw * (x.real.astype(float) ** 2 + x.imag.astype(float) ** 2)

    def envelope(self) -> np.ndarray:
        """Amplitude sqrt(I^2 + Q^2) scaled to sqrt(mW)."""
        return np.sqrt(self.power_mw())


@dataclass(frozen=True)
class Frame:
    index: int
    samples: np.ndarray = field(repr=False)
    sample_rate_hz: float = 1e6
    start_time_s: float = 0.0

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def frame_length(sample_rate_hz: float, frame_s: float = FRAME_S) -> int:
    return int(round(sample_rate_hz * frame_s))


@dataclass(frozen=True)
class WaveformConfig:
    """Transmit/receive settings of a simulated link.

    ``gain_update`` selects whether the channel is re-evaluated once per frame
    ("frame") or at every sample ("sample"). ``scatter_model`` selects how the
    scattered paths combine sample by sample:

    * "gaussian": zero-mean circular complex Gaussian with the scattered
      paths' total power (many paths with independent uniform phases);
    * "phasor": the exact finite sum, every path with a fresh uniform phase
      per sample;
    * "static": the scenario's fixed phases, so the gain is deterministic.
    """

    sample_rate_hz: float = 1e6
    frame_s: float = FRAME_S
    noise_power_mw: float = 1e-7
    norm_mw: float = 2e-4
    bit_seed: int = 1
    noise_seed: int = 2
    gain_update: str = "frame"
    scatter_model: str = "gaussian"
    duration_s: Optional[float] = None

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigError("must be positive", "waveform.sample_rate_hz")
        if not self.frame_s > 0 or frame_length(self.sample_rate_hz, self.frame_s) < 1:
            raise ConfigError("frame must hold at least one sample", "waveform.frame_s")
        if not self.noise_power_mw >= 0:
            raise ConfigError("must be non-negative", "waveform.noise_power_mw")
        if not self.norm_mw > 0:
            raise ConfigError("must be positive", "waveform.norm_mw")
        if self.gain_update not in ("frame", "sample"):
            raise ConfigError("expected 'frame' or 'sample'", "waveform.gain_update")
        if self.scatter_model not in SCATTER_MODELS:
            raise ConfigError(f"expected one of {SCATTER_MODELS}", "waveform.scatter_model")
        if self.duration_s is not None and not self.duration_s > 0:
            raise ConfigError("must be positive", "waveform.duration_s")

    @property
    def frame_len(self) -> int:
        return frame_length(self.sample_rate_hz, self.frame_s)


def gen_qpsk(seed, n_symbols: int) -> np.ndarray:
    """Unit-power QPSK symbols (+-1 +-j)/sqrt(2) from a random bit stream."""
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    return QPSK_POINTS[np.random.default_rng(seed).integers(0, 4, n_symbols)]


def apply_channel(symbols, gains) -> np.ndarray:
    """Flat fading: one complex gain per sample (a single channel tap)."""
    symbols = np.asarray(symbols)
    gains = np.asarray(gains)
    if gains.ndim and gains.shape != symbols.shape:
        raise ValueError(f"length mismatch: {symbols.shape} symbols vs {gains.shape} gains")
    return symbols * gains


def awgn(n: int, noise_power: float, rng) -> np.ndarray:
    """Circular complex Gaussian noise with total variance ``noise_power``."""
    if noise_power == 0:
        return np.zeros(n, dtype=complex)
    w = rng.standard_normal((n, 2))
    return math.sqrt(noise_power / 2.0) * (w[:, 0] + 1j * w[:, 1])


def add_awgn(symbols, noise_power_mw: float, seed) -> np.ndarray:
    """Add circular Gaussian noise of total variance ``noise_power_mw`` (sample units)."""
    if noise_power_mw < 0:
        raise ValueError("noise power must be non-negative")
    symbols = np.asarray(symbols, dtype=complex)
    if noise_power_mw == 0:
        return symbols.copy()
    return symbols + awgn(symbols.size, noise_power_mw, np.random.default_rng(seed)).reshape(symbols.shape)


def envelope_dbm(trace: IQTrace) -> np.ndarray:
    """Per-sample received power in dBm; exact zeros map to ``NO_SIGNAL_DBM``."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(trace.power_mw())


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def rssi_estimate(frame: Frame, norm_mw: float, window_s: float = RSSI_WINDOW_S) -> int:
    """Integer-dBm RSSI from the mean power of the first 16 us of a frame."""
    n = int(round(window_s * frame.sample_rate_hz))
    if n < 1 or len(frame.samples) < n or frame.duration_s < window_s - 1e-12:
        raise ValueError(f"frame of {frame.duration_s * 1e6:.3f} us is shorter than the "
                         f"{window_s * 1e6:g} us RSSI window")
    x = frame.samples[:n].astype(complex)
    p = norm_mw * float(np.mean(x.real ** 2 + x.imag ** 2))
    if p <= 0:
        raise ValueError("RSSI window carries no power")
    return _round_half_up(10.0 * math.log10(p))


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame Rician parameters of the simulated channel, in sqrt(mW)."""

    frame_times: np.ndarray
    s_inst: np.ndarray
    sigma_inst: np.ndarray


def _n_frames(duration_s: float, cfg: WaveformConfig) -> int:
    return int(math.floor(duration_s * cfg.sample_rate_hz / cfg.frame_len + 1e-9))


def _specular_per_sample(sc: Scenario, t: np.ndarray):
    """Specular gain and scattered amplitudes at every time in ``t``."""
    scene0 = resolve_scene(sc, 0.0)
    los = scene0.los
    amps, delays = reflected_params(sc, t)
    h = np.full(t.shape, los.amplitude * np.exp(1j * path_phase(los.phase_offset_rad, sc.carrier_hz, los.delay_s)))
    for i, p in enumerate(scene0.of_kind(PathKind.DYNAMIC_REFLECTED)):
        h = h + amps[:, i] * np.exp(1j * path_phase(p.phase_offset_rad, sc.carrier_hz, delays[:, i]))
    return h, scattered_amplitudes(sc, amps)


def _scattered_sum(amps: np.ndarray, n: int, model: str, rng) -> np.ndarray:
    """``n`` realisations of the scattered sum for amplitudes ``amps``.

    ``amps`` is either shape (m,) or (n, m).
    """
    if model == "phasor":
        return _random_phasor_sum(amps, n, rng)
    power = np.sum(np.asarray(amps) ** 2, axis=-1)
    w = rng.standard_normal((n, 2))
    return np.sqrt(power / 2.0) * (w[:, 0] + 1j * w[:, 1])


def _random_phasor_sum(amps: np.ndarray, n: int, rng) -> np.ndarray:
    """Sum of len(amps) phasors with i.i.d. uniform phases, ``n`` realisations.

    ``amps`` is either shape (m,) or (n, m).
    """
    m = amps.shape[-1]
    if m == 0:
        return np.zeros(n, dtype=complex)
    theta = rng.random((n, m), dtype=np.float32) * np.float32(TWO_PI)
    c = np.cos(theta)
    s = np.sin(theta)
    if amps.ndim == 1:
        return c @ amps + 1j * (s @ amps)
    return np.sum(c * amps, axis=1) + 1j * np.sum(s * amps, axis=1)


def simulate_link(sc: Scenario, cfg: WaveformConfig = WaveformConfig(),
                  return_truth: bool = False, return_symbols: bool = False):
    """Simulate the received baseband trace of a scenario.

    Frame by frame: resolve the scene (at the frame start, or at every sample
    when ``cfg.gain_update == "sample"``), form the channel gain, multiply the
    QPSK symbols and add receiver noise.

    Returns the :class:`IQTrace`, optionally followed by :class:`GroundTruth`
    and the transmitted symbols.
    """
    duration = sc.duration_s if cfg.duration_s is None else cfg.duration_s
    if duration > sc.duration_s + 1e-9:
        raise TimeRangeError(f"waveform duration {duration} s exceeds scenario duration {sc.duration_s} s")
    n = cfg.frame_len
    n_frames = _n_frames(duration, cfg)
    if n_frames < 1:
        raise ValueError("trace shorter than one frame")
    fs = cfg.sample_rate_hz
    noise_var = cfg.noise_power_mw / cfg.norm_mw
    scale = math.sqrt(cfg.norm_mw)

    bit_rng = np.random.default_rng(cfg.bit_seed)
    noise_rng = np.random.default_rng(cfg.noise_seed)
    scat_rng = np.random.default_rng([sc.seed, 7])

    out = np.empty(n_frames * n, dtype=np.complex64)
    sym_out = np.empty(n_frames * n, dtype=complex) if return_symbols else None
    times = np.empty(n_frames)
    s_inst = np.empty(n_frames)
    sigma_inst = np.empty(n_frames)
    offsets = np.arange(n) / fs

    for k in range(n_frames):
        t0 = k * n / fs
        times[k] = t0
        scene = resolve_scene(sc, t0)
        h_frame = specular_gain(scene, sc.carrier_hz)
        amps = np.array([p.amplitude for p in scene.scattered_paths])
        s_inst[k] = abs(h_frame)
        sigma_inst[k] = math.sqrt(0.5 * float(np.sum(amps ** 2)))

        if cfg.gain_update == "frame":
            h_spec, amps_t = h_frame, amps
        else:
            t = np.minimum(t0 + offsets, sc.duration_s)
            h_spec, amps_t = _specular_per_sample(sc, t)
        if cfg.scatter_model == "static":
            phasors = np.exp(1j * np.array([p.phase_offset_rad for p in scene.scattered_paths]))
            gain = h_spec + (amps_t @ phasors if amps_t.size else 0.0)
        else:
            gain = h_spec + _scattered_sum(amps_t, n, cfg.scatter_model, scat_rng)

        sym = QPSK_POINTS[bit_rng.integers(0, 4, n)]
        y = apply_channel(sym, np.broadcast_to(gain, sym.shape)) + awgn(n, noise_var, noise_rng)
        out[k * n:(k + 1) * n] = y
        if sym_out is not None:
            sym_out[k * n:(k + 1) * n] = sym

    trace = IQTrace(sc.carrier_hz, fs, cfg.norm_mw, out)
    result = [trace]
    if return_truth:
        result.append(GroundTruth(times, s_inst * scale, sigma_inst * scale))
    if return_symbols:
        result.append(sym_out)
    return trace if len(result) == 1 else tuple(result)


def simulate_classical_link(params: ClassicalRicianParams, duration_s: float,
                            cfg: WaveformConfig = WaveformConfig(),
                            carrier_hz: float = 915e6) -> IQTrace:
    """Trace through the classical Rician channel, gain updated every sample."""
    n = cfg.frame_len
    n_frames = _n_frames(duration_s, cfg)
    if n_frames < 1:
        raise ValueError("trace shorter than one frame")
    fs = cfg.sample_rate_hz
    noise_var = cfg.noise_power_mw / cfg.norm_mw
    bit_rng = np.random.default_rng(cfg.bit_seed)
    noise_rng = np.random.default_rng(cfg.noise_seed)
    out = np.empty(n_frames * n, dtype=np.complex64)
    offsets = np.arange(n) / fs
    for k in range(n_frames):
        gain = eval_classical(params, k * n / fs + offsets)
        sym = QPSK_POINTS[bit_rng.integers(0, 4, n)]
        out[k * n:(k + 1) * n] = apply_channel(sym, gain) + awgn(n, noise_var, noise_rng)
    return IQTrace(carrier_hz, fs, cfg.norm_mw, out)
