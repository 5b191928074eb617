import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2i_fairness.errors import ConfigError
from v2i_fairness.scenario import (
    ScenarioConfig,
    Vehicle,
    distance_to_rsu,
    lane_speeds_from_mean,
    residence_time,
    spawn_arrivals,
    vehicle_position,
)


@pytest.mark.parametrize("speed, rng, expected", [
    (25.0, 500.0, 20.0),
    (1.0, 1.0, 1.0),
    (30.0, 600.0, 20.0),
])
def test_residence_time_values(speed, rng, expected):
    assert residence_time(speed, rng) == pytest.approx(expected)


@pytest.mark.parametrize("speed, rng", [(0.0, 500.0), (-5.0, 500.0), (25.0, 0.0), (25.0, -1.0)])
def test_residence_time_rejects_nonpositive(speed, rng):
    with pytest.raises(ValueError):
        residence_time(speed, rng)


@given(st.floats(20.0, 30.0), st.floats(20.0, 30.0), st.floats(1.0, 5000.0))
def test_residence_time_decreasing_in_speed(v1, v2, length):
    if v1 == v2:
        return
    lo, hi = sorted([v1, v2])
    assert residence_time(hi, length) < residence_time(lo, length)


@pytest.mark.parametrize("speed, t, expected", [
    (25.0, 0.0, (0.0, 0.0, 0.0)),
    (25.0, 2.0, (50.0, 0.0, 0.0)),
    (20.0, 10.0, (200.0, 0.0, 0.0)),
])
def test_vehicle_position_values(speed, t, expected):
    np.testing.assert_allclose(vehicle_position(speed, t), expected)


def test_vehicle_position_lane_offset_and_direction():
    pos = vehicle_position(25.0, 2.0, lane_offset=3.5, direction=-1)
    np.testing.assert_allclose(pos, (-50.0, 3.5, 0.0))


def test_vehicle_position_rejects_negative_time():
    with pytest.raises(ValueError):
        vehicle_position(25.0, -0.1)


@pytest.mark.parametrize("a, b, expected", [
    ((0, 0, 0), (0, 0, 0), 0.0),
    ((3, 4, 0), (0, 0, 0), 5.0),
    ((250, 0, 0), (250, 10, 5), np.sqrt(125.0)),
])
def test_distance_to_rsu_values(a, b, expected):
    assert distance_to_rsu(np.array(a, dtype=float), b) == pytest.approx(expected)


coords = st.floats(-1e3, 1e3, allow_nan=False)
points = st.tuples(coords, coords, coords)


@given(points, points)
def test_distance_symmetric_nonnegative(a, b):
    d_ab = distance_to_rsu(np.array(a), b)
    d_ba = distance_to_rsu(np.array(b), a)
    assert d_ab == pytest.approx(d_ba)
    assert d_ab >= 0.0


@given(points, points, points)
def test_distance_triangle_inequality(a, b, c):
    d_ac = distance_to_rsu(np.array(a), c)
    d_ab = distance_to_rsu(np.array(a), b)
    d_bc = distance_to_rsu(np.array(b), c)
    assert d_ac <= d_ab + d_bc + 1e-9


def test_spawn_arrivals_zero_rate_empty():
    assert spawn_arrivals(0.0, 100.0, rng=1).size == 0


def test_spawn_arrivals_count_within_3_sigma():
    # lam * horizon = 1000 expected arrivals, sigma = sqrt(1000)
    times = spawn_arrivals(0.1, 10_000.0, rng=7)
    assert abs(times.size - 1000) < 3 * np.sqrt(1000)


def test_spawn_arrivals_sorted_within_horizon():
    times = spawn_arrivals(0.5, 200.0, rng=3)
    assert np.all(np.diff(times) > 0)
    assert times[0] >= 0.0 and times[-1] < 200.0


def test_spawn_arrivals_deterministic_per_seed():
    a = spawn_arrivals(0.1, 10_000.0, rng=42)
    b = spawn_arrivals(0.1, 10_000.0, rng=42)
    np.testing.assert_array_equal(a, b)
    c = spawn_arrivals(0.1, 10_000.0, rng=43)
    assert a.size != c.size or not np.array_equal(a, c)


@settings(max_examples=25)
@given(st.floats(0.01, 2.0), st.floats(10.0, 500.0), st.integers(0, 2**31))
def test_spawn_arrivals_properties(rate, horizon, seed):
    times = spawn_arrivals(rate, horizon, rng=seed)
    assert np.all(times >= 0.0) and np.all(times < horizon)
    assert np.all(np.diff(times) >= 0.0)


def test_spawn_arrivals_rejects_bad_args():
    with pytest.raises(ValueError):
        spawn_arrivals(-0.1, 10.0, rng=0)
    with pytest.raises(ValueError):
        spawn_arrivals(0.1, 0.0, rng=0)


class TestScenarioConfig:
    def test_defaults_valid(self):
        cfg = ScenarioConfig()
        assert cfg.num_lanes == 4
        assert cfg.mean_speed == pytest.approx(25.0)

    def test_rejects_nonpositive_range(self):
        with pytest.raises(ConfigError, match="coverage_range"):
            ScenarioConfig(coverage_range=0.0)

    def test_rejects_out_of_band_speed(self):
        with pytest.raises(ConfigError, match="lane_speeds"):
            ScenarioConfig(lane_speeds=(19.0, 22.0, 26.0, 28.0))

    def test_rejects_wide_adjacent_gap(self):
        with pytest.raises(ConfigError, match="adjacent"):
            ScenarioConfig(lane_speeds=(20.0, 25.0, 28.0, 30.0))

    def test_rejects_negative_arrival_rate(self):
        with pytest.raises(ConfigError, match="arrival_rate"):
            ScenarioConfig(arrival_rate=-1.0)

    def test_rejects_mismatched_lane_vectors(self):
        with pytest.raises(ConfigError, match="lane_offsets"):
            ScenarioConfig(lane_offsets=(0.0, 3.5))
        with pytest.raises(ConfigError, match="lane_directions"):
            ScenarioConfig(lane_directions=(1, -1, 1))

    def test_rejects_bad_direction_entries(self):
        with pytest.raises(ConfigError, match="lane_directions"):
            ScenarioConfig(lane_directions=(1, -1, 0, 1))


def test_lane_speeds_from_mean_default_offsets():
    assert lane_speeds_from_mean(25.0) == (22.0, 24.0, 26.0, 28.0)
    cfg = ScenarioConfig(lane_speeds=lane_speeds_from_mean(23.0))
    assert cfg.mean_speed == pytest.approx(23.0)


def test_vehicle_validation():
    v = Vehicle(vehicle_id=0, lane=1, speed=25.0)
    assert v.entry_time == 0.0
    with pytest.raises(ConfigError):
        Vehicle(vehicle_id=0, lane=0, speed=0.0)
    with pytest.raises(ConfigError):
        Vehicle(vehicle_id=0, lane=0, speed=25.0, entry_time=-1.0)
    with pytest.raises(ConfigError):
        Vehicle(vehicle_id=0, lane=0, speed=25.0, packet_rate=0.0)
