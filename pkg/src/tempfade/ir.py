"""Peak tracking and path classification on impulse-response snapshot series."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .channel import DelayGrid, IRSnapshot, impulse_response
from .errors import NoLOSError
from .scenario import Scenario, resolve_scene

IR_CADENCE_S = 0.2


class Label(str, enum.Enum):
    LOS = "LOS"
    DYNAMIC_REFLECTED = "DynamicReflected"
    CONSTANT_SCATTERED = "ConstantScattered"
    DYNAMIC_SCATTERED = "DynamicScattered"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class IRThresholds:
    floor_db: float = -30.0
    gate_ns: float = 2.0
    max_missed: int = 3
    delay_std_ns: float = 0.5
    power_std_db: float = 1.0
    corr: float = 0.5


class Peak(NamedTuple):
    delay_ns: float
    power_db: float


@dataclass(frozen=True)
class PathTrack:
    track_id: int
    times: np.ndarray = field(repr=False)
    delays_ns: np.ndarray = field(repr=False)
    powers_db: np.ndarray = field(repr=False)
    label: Label = Label.UNCLASSIFIED

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size == 0:
            raise ValueError("empty track")
        if np.any(np.diff(t) <= 0):
            raise ValueError("track times must be strictly increasing")
        if np.any(np.asarray(self.delays_ns) <= 0):
            raise ValueError("track delays must be positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "delays_ns", np.asarray(self.delays_ns, dtype=float))
        object.__setattr__(self, "powers_db", np.asarray(self.powers_db, dtype=float))

    def __len__(self):
        return self.times.size

    @property
    def mean_delay_ns(self) -> float:
        return float(np.mean(self.delays_ns))

    @property
    def delay_std_ns(self) -> float:
        return float(np.std(self.delays_ns))

    @property
    def power_std_db(self) -> float:
        return float(np.std(self.powers_db))

    @property
    def mean_power_db(self) -> float:
        return float(np.mean(self.powers_db))


def detect_peaks(snap: IRSnapshot, floor_db: float = -30.0) -> list:
    """Local maxima of the power profile at or above ``max + floor_db``."""
    p = np.asarray(snap.power_db, dtype=float)
    if p.size == 0:
        raise ValueError("empty snapshot")
    top = np.max(p)
    if not np.isfinite(top):
        return []
    left = np.concatenate(([-np.inf], p[:-1]))
    right = np.concatenate((p[1:], [-np.inf]))
    # rising edge strictly, falling edge loosely: one peak per plateau
    is_max = (p > left) & (p >= right) & (p >= top + floor_db)
    d = snap.delays_ns
    return [Peak(float(d[k]), float(p[k])) for k in np.flatnonzero(is_max)]


class _OpenTrack:
    __slots__ = ("times", "delays", "powers", "missed")

    def __init__(self, t, peak):
        self.times, self.delays, self.powers = [t], [peak.delay_ns], [peak.power_db]
        self.missed = 0


def associate_tracks(snapshots: Sequence[IRSnapshot], gate_ns: float = 2.0,
                     floor_db: float = -30.0, max_missed: int = 3) -> list:
    """Greedy nearest-delay association of per-snapshot peaks into tracks.

    Each step pairs open tracks and peaks in order of increasing delay
    distance (within ``gate_ns`` of the track's last delay). Leftover peaks
    open new tracks; a track missing more than ``max_missed`` consecutive
    snapshots is closed.
    """
    if len(snapshots) < 2:
        raise ValueError("need at least 2 snapshots")
    open_, done = [], []
    for snap in snapshots:
        peaks = detect_peaks(snap, floor_db)
        pairs = sorted((abs(tr.delays[-1] - pk.delay_ns), i, j)
                       for i, tr in enumerate(open_) for j, pk in enumerate(peaks)
                       if abs(tr.delays[-1] - pk.delay_ns) <= gate_ns)
        used_t, used_p = set(), set()
        for _, i, j in pairs:
            if i in used_t or j in used_p:
                continue
            used_t.add(i)
            used_p.add(j)
            tr = open_[i]
            tr.times.append(snap.t)
            tr.delays.append(peaks[j].delay_ns)
            tr.powers.append(peaks[j].power_db)
            tr.missed = 0
        still = []
        for i, tr in enumerate(open_):
            if i not in used_t:
                tr.missed += 1
            (done if tr.missed > max_missed else still).append(tr)
        open_ = still + [_OpenTrack(snap.t, pk) for j, pk in enumerate(peaks) if j not in used_p]
    done.extend(open_)
    done.sort(key=lambda tr: (tr.times[0], tr.delays[0]))
    return [PathTrack(k, tr.times, tr.delays, tr.powers) for k, tr in enumerate(done)]


def _overlap_corr(a: PathTrack, b: PathTrack) -> float:
    _, ia, ib = np.intersect1d(np.round(a.times, 9), np.round(b.times, 9), return_indices=True)
    if ia.size < 3:
        return math.nan
    x, y = a.powers_db[ia], b.powers_db[ib]
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    return float(np.corrcoef(x, y)[0, 1])


def classify_tracks(tracks: Sequence[PathTrack], reference: Optional[PathTrack] = None,
                    th: IRThresholds = IRThresholds()) -> list:
    """Label tracks as LOS, dynamic reflected, dynamic/constant scattered.

    The LOS is the track with the smallest mean delay, which must have a
    stable delay. Scattered candidates are compared against ``reference``,
    by default the strongest dynamic reflected track.
    """
    if not tracks:
        raise ValueError("need at least one track")
    los = min(tracks, key=lambda tr: (tr.mean_delay_ns, -len(tr)))
    if los.delay_std_ns >= th.delay_std_ns:
        raise NoLOSError(
            f"minimum-delay track {los.track_id} at {los.mean_delay_ns:.2f} ns has delay "
            f"std {los.delay_std_ns:.2f} ns >= {th.delay_std_ns} ns; no stable LOS")

    labels = {}
    for tr in tracks:
        if tr is los:
            labels[tr.track_id] = Label.LOS
        elif tr.delay_std_ns >= th.delay_std_ns and tr.power_std_db >= th.power_std_db:
            labels[tr.track_id] = Label.DYNAMIC_REFLECTED
    if reference is None:
        refl = [tr for tr in tracks if labels.get(tr.track_id) is Label.DYNAMIC_REFLECTED]
        reference = max(refl, key=lambda tr: tr.mean_power_db) if refl else None

    for tr in tracks:
        if tr.track_id in labels:
            continue
        if tr.delay_std_ns >= th.delay_std_ns:
            labels[tr.track_id] = Label.UNCLASSIFIED
            continue
        c = _overlap_corr(tr, reference) if reference is not None else math.nan
        if abs(c) > th.corr:
            labels[tr.track_id] = Label.DYNAMIC_SCATTERED
        elif tr.power_std_db < th.power_std_db:
            labels[tr.track_id] = Label.CONSTANT_SCATTERED
        else:
            labels[tr.track_id] = Label.UNCLASSIFIED
    return [replace(tr, label=labels[tr.track_id]) for tr in tracks]


def snapshot_times(duration_s: float, cadence_s: float = IR_CADENCE_S) -> np.ndarray:
    if not cadence_s > 0:
        raise ValueError("cadence must be positive")
    n = int(math.floor(duration_s / cadence_s + 1e-9)) + 1
    return np.arange(n) * cadence_s


def simulate_snapshots(sc: Scenario, cadence_s: float = IR_CADENCE_S,
                       step_s: float = 1e-9) -> list:
    """IR snapshots of ``sc`` every ``cadence_s`` on a grid covering all paths."""
    scenes = [resolve_scene(sc, t) for t in snapshot_times(sc.duration_s, cadence_s)]
    max_delay = max(p.delay_s for s in scenes for p in s.paths)
    grid = DelayGrid.covering(max_delay, step_s)
    return [impulse_response(s, grid, sc.carrier_hz) for s in scenes]


@dataclass(frozen=True)
class IRRun:
    snapshots: list = field(repr=False)
    tracks: list

    def labelled(self, label: Label) -> list:
        return [tr for tr in self.tracks if tr.label is label]


def analyze_snapshots(snapshots: Sequence[IRSnapshot], th: IRThresholds = IRThresholds()) -> IRRun:
    tracks = associate_tracks(snapshots, th.gate_ns, th.floor_db, th.max_missed)
    return IRRun(list(snapshots), classify_tracks(tracks, th=th))


def analyze_ir_run(sc: Scenario, cadence_s: float = IR_CADENCE_S,
                   th: IRThresholds = IRThresholds(), step_s: float = 1e-9) -> IRRun:
    """Snapshot generation, association and classification for a scenario."""
    return analyze_snapshots(simulate_snapshots(sc, cadence_s, step_s), th)


def delay_period(tr: PathTrack, cadence_s: float = IR_CADENCE_S) -> float:
    """Dominant period of a track's delay series.

    The series is resampled onto the cadence grid and correlated with its own
    shifted copy (Pearson over the overlap). The period is the best-matching
    lag after the correlation first turns negative.
    """
    t = np.arange(tr.times[0], tr.times[-1] + cadence_s / 2, cadence_s)
    x = np.interp(t, tr.times, tr.delays_ns)
    n = x.size
    if n < 8 or np.ptp(x) == 0:
        raise ValueError("track too short or flat for a period estimate")
    # lags beyond ~80% of the record rest on too few products
    lags = np.arange(1, int(0.8 * n))
    rho = np.array([_pearson(x[:-k], x[k:]) for k in lags])
    neg = np.flatnonzero(rho < 0)
    if neg.size == 0:
        raise ValueError("no oscillation within the record")
    k = neg[0] + int(np.nanargmax(rho[neg[0]:]))
    return float(lags[k] * cadence_s)


def _pearson(a, b) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return math.nan
    return float(np.corrcoef(a, b)[0, 1])
