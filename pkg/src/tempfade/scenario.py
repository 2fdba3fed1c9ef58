"""Scenario geometry and moving reflectors.

A :class:`Scenario` fixes the transmitter, receiver, carrier and a set of
moving objects. :func:`resolve_scene` turns it into the set of propagation
paths present at one time instant:

* one static line-of-sight (LOS) path, amplitude 1 (all amplitudes are
  LOS-relative voltage gains),
* one single-bounce reflected path per moving object, whose amplitude and
  delay follow the object's trajectory,
* ``n_const_scattered`` weak scattered paths rooted in the LOS, constant in
  time,
* ``n_dyn_scattered_per_object`` weak scattered paths per object whose
  amplitude is a fixed fraction of that object's reflected amplitude.

Every random quantity (phases, scattered amplitudes and delays) is drawn once
per scenario from ``Scenario.seed``; nothing here depends on call order.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, GeometryError, TimeRangeError

SPEED_OF_LIGHT = 299_792_458.0

TWO_PI = 2.0 * math.pi

# tolerance on the scenario end time; frame start times are computed as k * T
_T_EPS = 1e-9


class PathKind(str, enum.Enum):
    LOS = "LOS"
    DYNAMIC_REFLECTED = "DynamicReflected"
    CONSTANT_SCATTERED = "ConstantScattered"
    DYNAMIC_SCATTERED = "DynamicScattered"

    @property
    def is_specular(self) -> bool:
        return self in (PathKind.LOS, PathKind.DYNAMIC_REFLECTED)


class ObjectKind(str, enum.Enum):
    VEHICLE = "vehicle"
    HUMAN = "human"


def _as_point(p, key: str) -> tuple:
    try:
        pt = tuple(float(v) for v in p)
    except (TypeError, ValueError):
        raise ConfigError("expected a 3-component position", key) from None
    if len(pt) != 3 or not all(math.isfinite(v) for v in pt):
        raise ConfigError("expected 3 finite coordinates", key)
    return pt


@dataclass(frozen=True)
class MovingObject:
    """A reflector moving along a piecewise-linear trajectory.

    ``waypoints`` is a sequence of ``(time_s, (x, y, z))`` pairs with strictly
    increasing times. Outside the waypoint span the object rests at the
    first/last waypoint.
    """

    id: str
    waypoints: tuple
    reflection_coefficient: float = 0.8
    kind: ObjectKind = ObjectKind.VEHICLE

    def __post_init__(self):
        key = f"objects[{self.id}]"
        wps = tuple((float(t), _as_point(p, f"{key}.waypoints"))
                    for t, p in self.waypoints)
        if not wps:
            raise ConfigError("at least one waypoint is required", f"{key}.waypoints")
        times = [t for t, _ in wps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("waypoint times must be strictly increasing",
                              f"{key}.waypoints")
        gamma = float(self.reflection_coefficient)
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError("must lie in [0, 1]", f"{key}.reflection_coefficient")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "reflection_coefficient", gamma)
        object.__setattr__(self, "kind", ObjectKind(self.kind))

    @functools.cached_property
    def _track(self):
        times = np.array([t for t, _ in self.waypoints])
        points = np.array([p for _, p in self.waypoints])
        return times, points

    def positions(self, t) -> np.ndarray:
        """Vectorised :func:`object_position`; returns shape ``t.shape + (3,)``."""
        times, points = self._track
        t = np.asarray(t, dtype=float)
        # np.interp clamps to the end values outside [times[0], times[-1]]
        return np.stack([np.interp(t, times, points[:, k]) for k in range(3)], axis=-1)


def object_position(obj: MovingObject, t: float) -> np.ndarray:
    """Position of ``obj`` at time ``t`` by linear interpolation between waypoints."""
    if not obj.waypoints:
        raise ConfigError("empty waypoint list", f"objects[{obj.id}].waypoints")
    return obj.positions(float(t))


def looping_waypoints(a, b, period_s: float, duration_s: float) -> tuple:
    """Waypoints for an object shuttling A -> B -> A with the given round-trip period."""
    if period_s <= 0:
        raise ConfigError("must be positive", "loop.period_s")
    a = _as_point(a, "loop.a")
    b = _as_point(b, "loop.b")
    half = period_s / 2.0
    n_legs = max(1, math.ceil(duration_s / half - 1e-12))
    return tuple((k * half, a if k % 2 == 0 else b) for k in range(n_legs + 1))


@dataclass(frozen=True)
class PathState:
    kind: PathKind
    amplitude: float
    phase_offset_rad: float
    delay_s: float
    parent_object: Optional[str] = None


@dataclass(frozen=True)
class SceneState:
    t: float
    paths: tuple

    @property
    def los(self) -> PathState:
        return next(p for p in self.paths if p.kind is PathKind.LOS)

    @property
    def specular_paths(self) -> tuple:
        return tuple(p for p in self.paths if p.kind.is_specular)

    @property
    def scattered_paths(self) -> tuple:
        return tuple(p for p in self.paths if not p.kind.is_specular)

    def of_kind(self, kind: PathKind) -> tuple:
        return tuple(p for p in self.paths if p.kind is kind)


def _distance(a, b) -> np.ndarray:
    return np.sqrt(np.sum((np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) ** 2, axis=-1))


def reflected_path(tx, rx, obj_pos, gamma: float, carrier_hz: float,
                   phase_offset_rad: float = 0.0,
                   parent_object: Optional[str] = None) -> PathState:
    """Single-bounce path TX -> object -> RX.

    The delay is the bounce length over c; the amplitude is ``gamma`` times the
    free-space spreading ratio d_LOS / d_bounce, i.e. relative to the LOS path.
    ``carrier_hz`` only enters through the phase, which channel evaluation
    derives from the delay; it is accepted here for validation.
    """
    if carrier_hz <= 0:
        raise ConfigError("must be positive", "carrier_hz")
    d1 = float(_distance(tx, obj_pos))
    d2 = float(_distance(obj_pos, rx))
    if d1 == 0.0 or d2 == 0.0:
        raise GeometryError(
            f"reflector at {tuple(obj_pos)} coincides with an antenna (zero bounce distance)")
    d_los = float(_distance(tx, rx))
    bounce = d1 + d2
    return PathState(
        kind=PathKind.DYNAMIC_REFLECTED,
        amplitude=gamma * d_los / bounce,
        phase_offset_rad=float(phase_offset_rad) % TWO_PI,
        delay_s=bounce / SPEED_OF_LIGHT,
        parent_object=parent_object,
    )


@dataclass(frozen=True)
class Scenario:
    """Static geometry plus moving objects.

    ``const_scattered_power`` is the total power of the constant scattered
    paths relative to the LOS power. ``scatter_excess_delay_ns`` bounds the
    uniformly drawn excess delay of scattered paths: constant ones are placed
    after the LOS, dynamic ones after their parent's longest reflected delay.
    """

    tx_pos: tuple
    rx_pos: tuple
    carrier_hz: float
    objects: tuple = ()
    n_const_scattered: int = 0
    n_dyn_scattered_per_object: int = 0
    coupling_ratio: float = 0.1
    seed: int = 0
    duration_s: float = 60.0
    const_scattered_power: float = 0.01
    scatter_excess_delay_ns: tuple = (5.0, 150.0)

    def __post_init__(self):
        object.__setattr__(self, "tx_pos", _as_point(self.tx_pos, "tx_pos"))
        object.__setattr__(self, "rx_pos", _as_point(self.rx_pos, "rx_pos"))
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.tx_pos == self.rx_pos:
            raise ConfigError("must differ from tx_pos", "rx_pos")
        if not (math.isfinite(self.carrier_hz) and self.carrier_hz > 0):
            raise ConfigError("must be positive", "carrier_hz")
        for name in ("n_const_scattered", "n_dyn_scattered_per_object"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ConfigError("must be a non-negative integer", name)
            object.__setattr__(self, name, int(v))
        # 0 switches the coupling off; required for the correlation contrast runs
        if not 0.0 <= self.coupling_ratio < 1.0:
            raise ConfigError("must lie in [0, 1)", "coupling_ratio")
        if not self.duration_s > 0:
            raise ConfigError("must be positive", "duration_s")
        if not self.const_scattered_power >= 0:
            raise ConfigError("must be non-negative", "const_scattered_power")
        lo, hi = (float(v) for v in self.scatter_excess_delay_ns)
        if not 0 < lo <= hi:
            raise ConfigError("expected 0 < min <= max", "scatter_excess_delay_ns")
        object.__setattr__(self, "scatter_excess_delay_ns", (lo, hi))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ConfigError("object ids must be unique", "objects")
        for o in self.objects:
            for _, p in o.waypoints:
                if p == self.tx_pos or p == self.rx_pos:
                    raise ConfigError("waypoint coincides with an antenna",
                                      f"objects[{o.id}].waypoints")

    @property
    def los_distance_m(self) -> float:
        return float(_distance(self.tx_pos, self.rx_pos))

    @property
    def los_delay_s(self) -> float:
        return self.los_distance_m / SPEED_OF_LIGHT

    @property
    def n_paths(self) -> int:
        n_obj = len(self.objects)
        return 1 + n_obj + self.n_const_scattered + n_obj * self.n_dyn_scattered_per_object

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class _ObjectDraws:
    phase: float
    u: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)
    delays_s: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class _StaticDraws:
    los_phase: float
    const_amp: np.ndarray = field(repr=False)
    const_phase: np.ndarray = field(repr=False)
    const_delay_s: np.ndarray = field(repr=False)
    objects: tuple = ()


def _excess_delays(rng, n, bounds_ns) -> np.ndarray:
    lo, hi = bounds_ns
    return rng.uniform(lo, hi, n) * 1e-9


@functools.lru_cache(maxsize=64)
def _static_draws(sc: Scenario) -> _StaticDraws:
    # independent streams so that e.g. changing coupling_ratio or adding a
    # scattered path leaves every other draw untouched
    rng = np.random.default_rng([sc.seed, 0])
    los_phase = float(rng.uniform(0.0, TWO_PI))

    rng = np.random.default_rng([sc.seed, 1])
    n = sc.n_const_scattered
    amp = rng.uniform(0.5, 1.5, n)
    if n:
        amp *= math.sqrt(sc.const_scattered_power / float(np.sum(amp ** 2)))
    const_phase = rng.uniform(0.0, TWO_PI, n)
    const_delay = sc.los_delay_s + _excess_delays(rng, n, sc.scatter_excess_delay_ns)

    objs = []
    m = sc.n_dyn_scattered_per_object
    for i, obj in enumerate(sc.objects):
        rng = np.random.default_rng([sc.seed, 2, i])
        phase = float(rng.uniform(0.0, TWO_PI))
        u = rng.uniform(0.5, 1.5, m)
        if m:
            u /= math.sqrt(float(np.sum(u ** 2)))
        phases = rng.uniform(0.0, TWO_PI, m)
        # bounce length is convex in the object position, so its maximum over
        # a piecewise-linear trajectory sits at a waypoint
        _, pts = obj._track
        longest = float(np.max(_distance(sc.tx_pos, pts) + _distance(pts, sc.rx_pos)))
        delays = longest / SPEED_OF_LIGHT + _excess_delays(rng, m, sc.scatter_excess_delay_ns)
        objs.append(_ObjectDraws(phase, u, phases, delays))
    return _StaticDraws(los_phase, amp, const_phase, const_delay, tuple(objs))


def reflected_params(sc: Scenario, t) -> tuple:
    """Amplitudes and delays of every object's reflected path at times ``t``.

    Returns two arrays of shape ``t.shape + (n_objects,)``.
    """
    t = np.asarray(t, dtype=float)
    d_los = sc.los_distance_m
    amps, delays = [], []
    for obj in sc.objects:
        pos = obj.positions(t)
        d1 = _distance(sc.tx_pos, pos)
        d2 = _distance(pos, sc.rx_pos)
        if np.any(d1 == 0.0) or np.any(d2 == 0.0):
            raise GeometryError(f"object {obj.id} passes through an antenna")
        bounce = d1 + d2
        amps.append(obj.reflection_coefficient * d_los / bounce)
        delays.append(bounce / SPEED_OF_LIGHT)
    shape = t.shape + (len(sc.objects),)
    if not sc.objects:
        return np.zeros(shape), np.zeros(shape)
    return np.stack(amps, axis=-1), np.stack(delays, axis=-1)


def scattered_amplitudes(sc: Scenario, reflected_amp: np.ndarray) -> np.ndarray:
    """Amplitudes of all scattered paths (constant first, then per object).

    ``reflected_amp`` has shape ``(..., n_objects)``; the result has shape
    ``(..., n_const + n_objects * n_dyn)`` in the same order as
    :func:`resolve_scene` lists the paths.
    """
    draws = _static_draws(sc)
    reflected_amp = np.asarray(reflected_amp, dtype=float)
    lead = reflected_amp.shape[:-1]
    parts = [np.broadcast_to(draws.const_amp, lead + draws.const_amp.shape)]
    for i, od in enumerate(draws.objects):
        parts.append(sc.coupling_ratio * od.u * reflected_amp[..., i:i + 1])
    return np.concatenate(parts, axis=-1)


def resolve_scene(sc: Scenario, t: float) -> SceneState:
    """Resolved path set of ``sc`` at time ``t`` (0 <= t <= duration)."""
    t = float(t)
    if not (0.0 <= t <= sc.duration_s + _T_EPS):
        raise TimeRangeError(f"t={t} s outside scenario duration [0, {sc.duration_s}] s")
    draws = _static_draws(sc)
    refl_amp, refl_delay = reflected_params(sc, np.array([t]))
    refl_amp, refl_delay = refl_amp[0], refl_delay[0]

    paths = [PathState(PathKind.LOS, 1.0, draws.los_phase, sc.los_delay_s)]
    for i, obj in enumerate(sc.objects):
        paths.append(PathState(PathKind.DYNAMIC_REFLECTED, float(refl_amp[i]),
                               draws.objects[i].phase, float(refl_delay[i]), obj.id))
    for a, ph, d in zip(draws.const_amp, draws.const_phase, draws.const_delay_s):
        paths.append(PathState(PathKind.CONSTANT_SCATTERED, float(a), float(ph), float(d)))
    for i, obj in enumerate(sc.objects):
        od = draws.objects[i]
        for u, ph, d in zip(od.u, od.phases, od.delays_s):
            paths.append(PathState(PathKind.DYNAMIC_SCATTERED,
                                   float(sc.coupling_ratio * u * refl_amp[i]),
                                   float(ph), float(d), obj.id))
    return SceneState(t, tuple(paths))


def rolling_mill_vehicle(carrier_hz: float = 915e6, coupling_ratio: float = 0.1,
                         seed: int = 2019, duration_s: float = 60.0) -> Scenario:
    """The default scenario: one vehicle shuttling past a 12 m fixed link.

    The vehicle drives A=(6,4,1) -> B=(16,12,1) and back with a 30 s round
    trip, so the bounce length grows monotonically along each leg and the
    reflected delay repeats once per round trip.
    """
    vehicle = MovingObject(
        id="vehicle",
        waypoints=looping_waypoints((6.0, 4.0, 1.0), (16.0, 12.0, 1.0), 30.0, duration_s),
        reflection_coefficient=0.8,
        kind=ObjectKind.VEHICLE,
    )
    return Scenario(
        tx_pos=(0.0, 1.0, 1.0),
        rx_pos=(12.0, 1.0, 1.0),
        carrier_hz=carrier_hz,
        objects=(vehicle,),
        n_const_scattered=16,
        n_dyn_scattered_per_object=8,
        coupling_ratio=coupling_ratio,
        seed=seed,
        duration_s=duration_s,
    )


def wandering_humans(n_humans: int, carrier_hz: float = 915e6, seed: int = 7,
                     duration_s: float = 20.0, gamma: float = 0.35,
                     step_s: float = 2.0) -> Scenario:
    """Scenario with ``n_humans`` operators walking irregular routes near the link.

    Routes are random walks (waypoints every ``step_s``) drawn from ``seed``
    inside a 16 m x 10 m area beside the link.
    """
    rng = np.random.default_rng([seed, 99])
    humans = []
    n_steps = max(1, math.ceil(duration_s / step_s))
    for k in range(n_humans):
        p = np.array([rng.uniform(2, 14), rng.uniform(3, 10), 1.0])
        wps = [(0.0, tuple(p))]
        for i in range(1, n_steps + 1):
            p = p + np.array([*rng.normal(0.0, 1.2, 2), 0.0])
            p[0] = min(max(p[0], 0.5), 16.0)
            p[1] = min(max(p[1], 2.5), 12.0)
            wps.append((i * step_s, tuple(p)))
        humans.append(MovingObject(f"human{k + 1}", tuple(wps), gamma, ObjectKind.HUMAN))
    return Scenario(
        tx_pos=(0.0, 1.0, 1.0),
        rx_pos=(12.0, 1.0, 1.0),
        carrier_hz=carrier_hz,
        objects=tuple(humans),
        n_const_scattered=16,
        n_dyn_scattered_per_object=8,
        coupling_ratio=0.1,
        seed=seed,
        duration_s=duration_s,
    )


def static_scenario(n_const_scattered: int = 16, carrier_hz: float = 915e6,
                    seed: int = 3, duration_s: float = 10.0,
                    const_scattered_power: float = 0.01,
                    objects: Sequence[MovingObject] = ()) -> Scenario:
    """Fixed link without moving objects (or with parked ones)."""
    return Scenario(
        tx_pos=(0.0, 1.0, 1.0),
        rx_pos=(12.0, 1.0, 1.0),
        carrier_hz=carrier_hz,
        objects=tuple(objects),
        n_const_scattered=n_const_scattered,
        n_dyn_scattered_per_object=0,
        coupling_ratio=0.0,
        seed=seed,
        duration_s=duration_s,
        const_scattered_power=const_scattered_power,
    )
