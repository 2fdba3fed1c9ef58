import math

import numpy as np
import pytest

from tempfade.errors import ConfigError, GeometryError, TimeRangeError
from tempfade.scenario import (SPEED_OF_LIGHT, MovingObject, PathKind, Scenario,
                               looping_waypoints, object_position, reflected_path,
                               resolve_scene, rolling_mill_vehicle, static_scenario)


def test_single_waypoint_is_constant():
    obj = MovingObject("o", [(0.0, (5, 5, 0))])
    assert tuple(object_position(obj, 7.0)) == (5, 5, 0)


def test_midpoint_and_clamp():
    obj = MovingObject("o", [(0.0, (0, 0, 0)), (10.0, (10, 0, 0))])
    assert np.allclose(object_position(obj, 5.0), (5, 0, 0))
    assert np.allclose(object_position(obj, 12.0), (10, 0, 0))
    assert np.allclose(object_position(obj, -3.0), (0, 0, 0))


def test_exact_at_waypoints():
    wps = [(0.0, (0, 0, 0)), (1.5, (3, -2, 1)), (4.0, (7, 7, 7))]
    obj = MovingObject("o", wps)
    for t, p in wps:
        assert tuple(object_position(obj, t)) == p


def test_empty_or_unsorted_waypoints_rejected():
    with pytest.raises(ConfigError) as e:
        MovingObject("car", [])
    assert "objects[car].waypoints" in str(e.value)
    with pytest.raises(ConfigError):
        MovingObject("car", [(1.0, (0, 0, 0)), (1.0, (1, 0, 0))])
    with pytest.raises(ConfigError) as e:
        MovingObject("car", [(0.0, (0, 0, 0))], reflection_coefficient=1.5)
    assert e.value.key == "objects[car].reflection_coefficient"


def test_reflected_path_hand_geometry():
    p = reflected_path((0, 0, 0), (10, 0, 0), (5, 5, 0), 0.7, 915e6)
    d = 2 * math.sqrt(50.0)
    assert p.kind is PathKind.DYNAMIC_REFLECTED
    assert p.delay_s == pytest.approx(d / 299_792_458.0, rel=1e-12)
    assert p.delay_s == pytest.approx(47.17e-9, abs=0.01e-9)
    assert p.amplitude == pytest.approx(0.7 * 10 / d, rel=1e-12)
    assert p.amplitude == pytest.approx(0.495, abs=1e-3)


def test_reflected_path_collinear_and_absorbing():
    p = reflected_path((0, 0, 0), (10, 0, 0), (20, 0, 0), 1.0, 915e6)
    assert p.delay_s == pytest.approx(30.0 / SPEED_OF_LIGHT, rel=1e-12)
    assert p.delay_s * 1e9 == pytest.approx(100.07, abs=0.01)
    assert p.amplitude == pytest.approx(1 / 3, rel=1e-12)
    q = reflected_path((0, 0, 0), (10, 0, 0), (5, 5, 0), 0.0, 915e6)
    assert q.amplitude == 0.0
    assert q.delay_s == pytest.approx(2 * math.sqrt(50.0) / SPEED_OF_LIGHT)


def test_reflected_path_on_antenna_is_geometry_error():
    with pytest.raises(GeometryError):
        reflected_path((0, 0, 0), (10, 0, 0), (0, 0, 0), 0.5, 915e6)


def test_pure_los_scene():
    sc = static_scenario(n_const_scattered=0)
    scene = resolve_scene(sc, 1.0)
    assert len(scene.paths) == 1
    assert scene.los.amplitude == 1.0
    assert scene.los.delay_s == pytest.approx(12.0 / SPEED_OF_LIGHT)


def test_coupling_ratio_constant_over_time():
    obj = MovingObject("o", [(0.0, (3, 4, 1)), (10.0, (9, 6, 1))], 0.6)
    sc = Scenario((0, 1, 1), (12, 1, 1), 915e6, (obj,), n_dyn_scattered_per_object=2,
                  coupling_ratio=0.2, seed=5, duration_s=10.0)
    ratios = []
    for t in np.linspace(0, 10, 7):
        scene = resolve_scene(sc, t)
        refl = scene.of_kind(PathKind.DYNAMIC_REFLECTED)[0].amplitude
        ratios.append([p.amplitude / refl for p in scene.of_kind(PathKind.DYNAMIC_SCATTERED)])
    ratios = np.array(ratios)
    assert ratios.shape == (7, 2)
    assert np.allclose(ratios, ratios[0], rtol=1e-12, atol=0)
    # u_n are normalised to unit energy, so the per-object ratio energy is coupling_ratio^2
    assert np.sum(ratios[0] ** 2) == pytest.approx(0.2 ** 2)


def test_default_scene_constant_paths_bitwise_equal():
    sc = rolling_mill_vehicle()
    a, b = resolve_scene(sc, 0.0), resolve_scene(sc, 0.001)
    assert a.of_kind(PathKind.CONSTANT_SCATTERED) == b.of_kind(PathKind.CONSTANT_SCATTERED)
    assert a.of_kind(PathKind.DYNAMIC_REFLECTED)[0].delay_s != b.of_kind(PathKind.DYNAMIC_REFLECTED)[0].delay_s


def test_determinism_and_path_count():
    sc = rolling_mill_vehicle()
    assert resolve_scene(sc, 12.3) == resolve_scene(sc, 12.3)
    counts = {len(resolve_scene(sc, t).paths) for t in (0, 7.5, 60)}
    assert counts == {1 + 1 + 16 + 8} == {sc.n_paths}


def test_static_world_law():
    sc = static_scenario()
    assert resolve_scene(sc, 0.0).paths == resolve_scene(sc, 9.7).paths


def test_single_los_with_minimum_delay():
    sc = rolling_mill_vehicle()
    for t in np.linspace(0, 60, 13):
        scene = resolve_scene(sc, t)
        los = scene.of_kind(PathKind.LOS)
        assert len(los) == 1 and los[0].amplitude == 1.0
        assert all(p.delay_s >= los[0].delay_s for p in scene.paths)
        assert all(0 <= p.phase_offset_rad < 2 * math.pi for p in scene.paths)


def test_dynamic_paths_continuous():
    sc = rolling_mill_vehicle()
    t = np.linspace(14.9, 15.1, 201)
    d = np.array([resolve_scene(sc, x).of_kind(PathKind.DYNAMIC_REFLECTED)[0].delay_s for x in t])
    # max speed ~1 m/s -> bounce length changes < 2 m/s, far below a jump
    assert np.max(np.abs(np.diff(d))) * SPEED_OF_LIGHT < 2.0 * (t[1] - t[0]) + 1e-9


def test_constant_scattered_power_fraction():
    sc = static_scenario(n_const_scattered=10, const_scattered_power=0.05)
    amps = [p.amplitude for p in resolve_scene(sc, 0.0).of_kind(PathKind.CONSTANT_SCATTERED)]
    assert sum(a * a for a in amps) == pytest.approx(0.05)


def test_time_outside_duration():
    with pytest.raises(TimeRangeError):
        resolve_scene(rolling_mill_vehicle(), 61.0)
    with pytest.raises(TimeRangeError):
        resolve_scene(rolling_mill_vehicle(), -0.1)


@pytest.mark.parametrize("field,value,key", [
    ("carrier_hz", 0.0, "carrier_hz"),
    ("coupling_ratio", 1.0, "coupling_ratio"),
    ("n_const_scattered", -1, "n_const_scattered"),
    ("rx_pos", (0.0, 1.0, 1.0), "rx_pos"),
    ("duration_s", 0.0, "duration_s"),
])
def test_scenario_validation_names_key(field, value, key):
    with pytest.raises(ConfigError) as e:
        rolling_mill_vehicle().replace(**{field: value})
    assert e.value.key == key


def test_looping_waypoints_period():
    wps = looping_waypoints((0, 0, 0), (1, 0, 0), 30.0, 60.0)
    assert [t for t, _ in wps] == [0, 15, 30, 45, 60]
    assert wps[2][1] == wps[0][1] and wps[1][1] == (1.0, 0.0, 0.0)
