"""Complex baseband channel gain and impulse-response snapshots.

Two evaluation modes share this module:

* the classical Rician channel of a mobile link, a Doppler-rotating LOS term
  plus a time-constant scattered sum (:func:`eval_classical`);
* the temporal model of a fixed link, where each specular path (LOS and
  moving-object reflections) carries a delay-dependent phase
  ``phi - 2*pi*f_c*tau`` and the scattered paths keep their own phase
  (:func:`eval_temporal`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import TimeRangeError
from .scenario import TWO_PI, PathKind, PathState, SceneState


def path_phase(phi_rad, carrier_hz, delay_s):
    """Delay-based path phase ``phi - 2*pi*f_c*tau`` wrapped to [0, 2*pi)."""
    ph = np.mod(np.asarray(phi_rad, dtype=float)
                - TWO_PI * np.asarray(carrier_hz, dtype=float) * np.asarray(delay_s, dtype=float),
                TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    ph = np.where(ph >= TWO_PI, 0.0, ph)
    return float(ph) if ph.ndim == 0 else ph


@dataclass(frozen=True)
class ClassicalRicianParams:
    """Parameters of the classical (mobile-link) Rician channel.

    ``scattered`` is a sequence of ``(amplitude, phase_rad)`` pairs.
    """

    c0: float = 1.0
    doppler_hz: float = 0.0
    arrival_angle_rad: float = 0.0
    phi0_rad: float = 0.0
    scattered: tuple = ()

    def __post_init__(self):
        sc = tuple((float(c), float(p)) for c, p in self.scattered)
        if self.c0 < 0 or any(c < 0 for c, _ in sc):
            raise ValueError("amplitudes must be non-negative")
        object.__setattr__(self, "scattered", sc)

    @property
    def n_scattered(self) -> int:
        return len(self.scattered)

    @property
    def scattered_sum(self) -> complex:
        return complex(sum(c * np.exp(1j * p) for c, p in self.scattered))


def eval_classical(params: ClassicalRicianParams, t):
    """h(t) of the classical Rician model; ``t`` may be a scalar or an array."""
    t = np.asarray(t, dtype=float)
    phase = TWO_PI * params.doppler_hz * math.cos(params.arrival_angle_rad) * t + params.phi0_rad
    h = params.c0 * np.exp(1j * phase) + params.scattered_sum
    return complex(h) if h.ndim == 0 else h


def with_random_scattered_phases(params: ClassicalRicianParams, rng) -> ClassicalRicianParams:
    """Copy of ``params`` with every scattered phase redrawn uniformly."""
    phases = rng.uniform(0.0, TWO_PI, params.n_scattered)
    return ClassicalRicianParams(
        params.c0, params.doppler_hz, params.arrival_angle_rad, params.phi0_rad,
        tuple((c, float(p)) for (c, _), p in zip(params.scattered, phases)))


def _phasor(p: PathState, carrier_hz: float) -> complex:
    if p.kind.is_specular:
        return p.amplitude * complex(np.exp(1j * path_phase(p.phase_offset_rad, carrier_hz, p.delay_s)))
    return p.amplitude * complex(np.exp(1j * p.phase_offset_rad))


def specular_gain(scene: SceneState, carrier_hz: float) -> complex:
    """Coherent sum of the LOS and reflected paths."""
    return sum((_phasor(p, carrier_hz) for p in scene.specular_paths), 0j)


def eval_temporal(scene: SceneState, carrier_hz: float) -> complex:
    """Channel gain h(t) of a resolved scene.

    Specular paths rotate with their delay; scattered paths contribute with
    their own (stationary) phase only.
    """
    return sum((_phasor(p, carrier_hz) for p in scene.paths), 0j)


def specular_scattered_power(scene: SceneState, carrier_hz: float) -> tuple:
    """Instantaneous Rician parameters ``(s, sigma)`` of a scene.

    ``s`` is the magnitude of the specular sum, ``2*sigma**2`` the total power
    of the scattered paths.
    """
    s = abs(specular_gain(scene, carrier_hz))
    scat = sum(p.amplitude ** 2 for p in scene.scattered_paths)
    return s, math.sqrt(0.5 * scat)


def redraw_scattered_phases(scene: SceneState, rng) -> SceneState:
    """Copy of ``scene`` with the scattered-path phases redrawn uniformly."""
    paths = []
    for p in scene.paths:
        if not p.kind.is_specular:
            p = PathState(p.kind, p.amplitude, float(rng.uniform(0.0, TWO_PI)),
                          p.delay_s, p.parent_object)
        paths.append(p)
    return SceneState(scene.t, tuple(paths))


def classical_equivalent(scene: SceneState, carrier_hz: float) -> ClassicalRicianParams:
    """Classical-mode parameters reproducing a frozen scene exactly.

    The LOS becomes the Doppler-free specular term; reflected paths enter the
    scattered list with their delay-based phase.
    """
    los = scene.los
    scattered = []
    for p in scene.paths:
        if p is los:
            continue
        if p.kind.is_specular:
            scattered.append((p.amplitude, path_phase(p.phase_offset_rad, carrier_hz, p.delay_s)))
        else:
            scattered.append((p.amplitude, p.phase_offset_rad))
    return ClassicalRicianParams(
        c0=los.amplitude, doppler_hz=0.0, arrival_angle_rad=0.0,
        phi0_rad=path_phase(los.phase_offset_rad, carrier_hz, los.delay_s),
        scattered=tuple(scattered))


@dataclass(frozen=True)
class DelayGrid:
    """Uniform delay grid ``start_s + k * step_s`` for ``k < n_bins``."""

    step_s: float = 1e-9
    n_bins: int = 256
    start_s: float = 0.0

    def __post_init__(self):
        if not self.step_s > 0 or self.n_bins < 1:
            raise ValueError("delay grid needs step_s > 0 and n_bins >= 1")

    @property
    def delays(self) -> np.ndarray:
        return self.start_s + self.step_s * np.arange(self.n_bins)

    @classmethod
    def covering(cls, max_delay_s: float, step_s: float = 1e-9, margin_bins: int = 8) -> "DelayGrid":
        return cls(step_s, int(math.ceil(max_delay_s / step_s)) + 1 + margin_bins)


@dataclass(frozen=True)
class IRSnapshot:
    """Power-vs-delay at one instant; empty bins hold ``-inf`` dB."""

    t: float
    delay_grid: np.ndarray = field(repr=False)
    power_db: np.ndarray = field(repr=False)
    complex_taps: np.ndarray = field(repr=False)

    @property
    def delays_ns(self) -> np.ndarray:
        return self.delay_grid * 1e9


def impulse_response(scene: SceneState, grid: DelayGrid, carrier_hz: float) -> IRSnapshot:
    """Place every path's phasor in its nearest delay bin.

    ``power_db`` is relative to the bin holding the LOS path.
    """
    taps = np.zeros(grid.n_bins, dtype=complex)
    weight = np.zeros(grid.n_bins)
    los_bin = None
    for i, p in enumerate(scene.paths):
        k = int(round((p.delay_s - grid.start_s) / grid.step_s))
        if not 0 <= k < grid.n_bins:
            raise TimeRangeError(
                f"path {i} ({p.kind.value}, delay {p.delay_s * 1e9:.3f} ns) lies outside "
                f"the delay grid [{grid.start_s * 1e9:.3f}, "
                f"{(grid.start_s + (grid.n_bins - 1) * grid.step_s) * 1e9:.3f}] ns")
        taps[k] += _phasor(p, carrier_hz)
        weight[k] += p.amplitude
        if p.kind is PathKind.LOS:
            los_bin = k
    # paths cancelling to rounding level leave an empty bin
    taps[np.abs(taps) <= 1e-12 * weight] = 0.0
    mag = np.abs(taps)
    ref = mag[los_bin] if los_bin is not None and mag[los_bin] > 0 else mag.max()
    with np.errstate(divide="ignore"):
        power_db = 20.0 * np.log10(mag / ref) if ref > 0 else np.full(grid.n_bins, -np.inf)
    return IRSnapshot(scene.t, grid.delays, power_db, taps)


def snapshot_series(scenes: Sequence[SceneState], grid: DelayGrid, carrier_hz: float) -> list:
    return [impulse_response(s, grid, carrier_hz) for s in scenes]
