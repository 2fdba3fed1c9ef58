import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from tempfade.channel import (ClassicalRicianParams, DelayGrid, classical_equivalent,
                              eval_classical, eval_temporal, impulse_response, path_phase,
                              redraw_scattered_phases, specular_gain, specular_scattered_power)
from tempfade.errors import TimeRangeError
from tempfade.scenario import (SPEED_OF_LIGHT, MovingObject, PathKind, PathState, Scenario,
                               SceneState, resolve_scene, rolling_mill_vehicle, static_scenario)


def _decimal_wrap(phi, fc, tau):
    getcontext().prec = 50
    two_pi = Decimal("6.2831853071795864769252867665590057683943387987502")
    x = Decimal(phi) - two_pi * Decimal(fc) * Decimal(tau)
    return float(x % two_pi if x % two_pi >= 0 else x % two_pi + two_pi)


def test_path_phase_examples():
    assert path_phase(0.0, 915e6, 0.0) == 0.0
    fc = 915e6
    assert path_phase(math.pi, fc, 1 / fc) == pytest.approx(math.pi, abs=1e-9)
    # 915e6 * 15e-9 = 13.725 cycles
    want = _decimal_wrap(0.5, 915e6, 15e-9)
    assert path_phase(0.5, 915e6, 15e-9) == pytest.approx(want, abs=1e-9)
    assert want == pytest.approx((0.5 - 2 * math.pi * 0.725) % (2 * math.pi), abs=1e-9)


def test_path_phase_range():
    rng = np.random.default_rng(0)
    ph = path_phase(rng.uniform(-10, 10, 1000), 2.4e9, rng.uniform(0, 1e-6, 1000))
    assert np.all((ph >= 0) & (ph < 2 * math.pi))


def test_eval_classical_examples():
    assert eval_classical(ClassicalRicianParams(), 0.3) == 1 + 0j
    p = ClassicalRicianParams(c0=0.0, scattered=((1, 0), (1, math.pi)))
    assert abs(eval_classical(p, 1.0)) < 1e-15
    q = ClassicalRicianParams(c0=1.0, doppler_hz=10.0, arrival_angle_rad=0.0)
    h = eval_classical(q, 0.025)
    assert h.real == pytest.approx(0.0, abs=1e-15) and h.imag == pytest.approx(1.0)


def test_classical_scattered_sum_time_constant():
    p = ClassicalRicianParams(c0=0.0, doppler_hz=50.0, scattered=((0.3, 1.0), (0.2, 2.0)))
    h = eval_classical(p, np.linspace(0, 1, 11))
    assert np.all(h == h[0])


def test_negative_amplitude_rejected():
    with pytest.raises(ValueError):
        ClassicalRicianParams(c0=-1.0)


def _los_scene(phase):
    return SceneState(0.0, (PathState(PathKind.LOS, 1.0, phase, 0.0),))


def test_eval_temporal_los_and_cancellation():
    assert abs(eval_temporal(_los_scene(0.0), 915e6)) == pytest.approx(1.0)
    fc = 915e6
    tau = 0.5 / fc  # half a carrier cycle later -> phase differs by pi
    scene = SceneState(0.0, (PathState(PathKind.LOS, 1.0, 0.0, 0.0),
                             PathState(PathKind.DYNAMIC_REFLECTED, 1.0, 0.0, tau)))
    assert abs(eval_temporal(scene, fc)) < 1e-12


def test_eval_temporal_brute_force_oracle():
    sc = rolling_mill_vehicle()
    scene = resolve_scene(sc, 0.0)
    total = 0j
    for p in scene.paths:
        if p.kind in (PathKind.LOS, PathKind.DYNAMIC_REFLECTED):
            ang = p.phase_offset_rad - 2 * math.pi * sc.carrier_hz * p.delay_s
        else:
            ang = p.phase_offset_rad
        total += p.amplitude * complex(math.cos(ang), math.sin(ang))
    assert abs(eval_temporal(scene, sc.carrier_hz) - total) < 1e-12


def test_specular_scattered_power_examples():
    s, sg = specular_scattered_power(_los_scene(1.0), 915e6)
    assert (s, sg) == (pytest.approx(1.0), 0.0)
    scene = SceneState(0.0, (PathState(PathKind.LOS, 1.0, 0.0, 0.0),
                             PathState(PathKind.CONSTANT_SCATTERED, 0.01, 0.3, 1e-8),
                             PathState(PathKind.CONSTANT_SCATTERED, 0.01, 2.0, 2e-8)))
    assert specular_scattered_power(scene, 915e6)[1] == pytest.approx(0.01)


def test_phase_law_static_world():
    sc = static_scenario(n_const_scattered=24)
    h = [eval_temporal(resolve_scene(sc, t), sc.carrier_hz) for t in np.linspace(0, 10, 25)]
    assert max(abs(a - b) for a in h for b in h) < 1e-12


def test_phase_law_parked_object():
    parked = MovingObject("parked", [(0.0, (5.0, 6.0, 1.0))], 0.7)
    sc = static_scenario(objects=(parked,)).replace(n_dyn_scattered_per_object=3, coupling_ratio=0.2)
    h = [eval_temporal(resolve_scene(sc, t), sc.carrier_hz) for t in np.linspace(0, 10, 25)]
    assert max(abs(a - b) for a in h for b in h) < 1e-12


def test_classical_equivalent_matches_frozen_scene():
    parked = MovingObject("parked", [(0.0, (4.0, 5.0, 1.0))], 0.6)
    sc = static_scenario(objects=(parked,)).replace(n_dyn_scattered_per_object=4, coupling_ratio=0.3)
    scene = resolve_scene(sc, 3.0)
    params = classical_equivalent(scene, sc.carrier_hz)
    for t in (0.0, 1.0, 7.5):
        assert abs(eval_temporal(resolve_scene(sc, t), sc.carrier_hz) - eval_classical(params, t)) < 1e-12


def test_energy_bookkeeping_redraws():
    sc = rolling_mill_vehicle()
    scene = resolve_scene(sc, 4.0)
    s, sg = specular_scattered_power(scene, sc.carrier_hz)
    rng = np.random.default_rng(11)
    p = [abs(eval_temporal(redraw_scattered_phases(scene, rng), sc.carrier_hz)) ** 2
         for _ in range(10_000)]
    assert np.mean(p) == pytest.approx(s ** 2 + 2 * sg ** 2, rel=0.02)


def test_ir_single_los_at_15ns():
    scene = SceneState(0.0, (PathState(PathKind.LOS, 1.0, 0.0, 15e-9),))
    snap = impulse_response(scene, DelayGrid(1e-9, 64), 915e6)
    assert np.flatnonzero(np.isfinite(snap.power_db)).tolist() == [15]
    assert snap.power_db[15] == 0.0


def test_ir_opposite_phases_cancel():
    fc = 915e6
    scene = SceneState(0.0, (PathState(PathKind.LOS, 1.0, 0.0, 10e-9),
                             PathState(PathKind.CONSTANT_SCATTERED, 0.5, 0.0, 20.1e-9),
                             PathState(PathKind.CONSTANT_SCATTERED, 0.5, math.pi, 19.9e-9)))
    snap = impulse_response(scene, DelayGrid(1e-9, 64), fc)
    assert abs(snap.complex_taps[20]) < 1e-15
    assert snap.power_db[20] == -np.inf


def test_ir_total_power_and_db_definition():
    sc = rolling_mill_vehicle()
    scene = resolve_scene(sc, 0.0)
    grid = DelayGrid(0.01e-9, 40_000)
    snap = impulse_response(scene, grid, sc.carrier_hz)
    bins = [round(p.delay_s / grid.step_s) for p in scene.paths]
    assert len(set(bins)) == len(bins)
    assert np.sum(np.abs(snap.complex_taps) ** 2) == pytest.approx(sum(p.amplitude ** 2 for p in scene.paths))
    m = np.isfinite(snap.power_db)
    ref = abs(snap.complex_taps[bins[0]])
    assert np.allclose(snap.power_db[m], 20 * np.log10(np.abs(snap.complex_taps[m]) / ref))


def test_ir_reflected_bin_moves_los_fixed():
    sc = rolling_mill_vehicle()
    grid = DelayGrid.covering(400e-9)
    los_bins, refl_bins = set(), set()
    for t in np.arange(0, 5.01, 0.2):
        scene = resolve_scene(sc, t)
        los_bins.add(round(scene.los.delay_s / grid.step_s))
        refl_bins.add(round(scene.of_kind(PathKind.DYNAMIC_REFLECTED)[0].delay_s / grid.step_s))
        impulse_response(scene, grid, sc.carrier_hz)
    assert len(los_bins) == 1 and len(refl_bins) > 1


def test_ir_path_off_grid_names_path():
    scene = resolve_scene(rolling_mill_vehicle(), 0.0)
    with pytest.raises(TimeRangeError, match="LOS"):
        impulse_response(scene, DelayGrid(1e-9, 20), 915e6)
