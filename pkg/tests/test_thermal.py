import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from heatgen import seeding
from heatgen.config import EngineConfig
from heatgen.errors import CalibrationError, ConfigError, DimensioningError, SimulationError
from heatgen.occupancy import OccupancyProfile
from heatgen.thermal import (
    SimConfig,
    ThermalParams,
    clamp_setpoints,
    degree_hours,
    estimate_capacity,
    estimate_conductance,
    heat_demand,
    heat_losses,
    heating_power,
    indoor_temperature,
    internal_gains,
    max_heating_power,
    reference_setpoint_schedule,
    run_model,
    sample_setpoints,
    simulate_building,
)
from heatgen.weather import Calendar, WeatherSeries

import oracles

START = dt.datetime(2023, 1, 2)  # a Monday


def _run_one(G, k, q_max, t_day, t_night, temp_out, active, ga=0.1, gi=0.02, n=1, spinup=0, keep=True):
    heat, temps = run_model(
        np.array([G]), np.array([k]), np.array([q_max]), np.array([t_day]), np.array([t_night]),
        np.asarray(temp_out, dtype=float), np.asarray(active, dtype=bool)[:, None],
        np.array([ga]), np.array([gi]), np.array([float(n)]), keep_temps=keep, spinup=spinup,
    )
    return heat[:, 0], None if temps is None else temps[:, 0]


# -- worked examples ---------------------------------------------------------


def test_indoor_temperature_step_example():
    assert indoor_temperature(20.0, 2.0, 0.1, 1.1, 10.0, 1.0) == pytest.approx(20.1)


def test_losses_zero_at_equal_temperatures():
    assert heat_losses(1.0, 21.0, 21.0) == 0.0


@pytest.mark.parametrize("demand,expected", [(-2.0, 0.0), (6.5, 5.0), (3.0, 3.0)])
def test_heating_power_cases(demand, expected):
    assert heating_power(np.array(demand), 5.0) == expected


def test_reference_schedule_values():
    cal = Calendar.from_start(START, 24)
    ref = reference_setpoint_schedule(SimConfig(), cal)
    assert ref[12] == 21.0
    assert ref[3] == 16.0
    assert ref[7] == 21.0 and ref[22] == 21.0 and ref[23] == 16.0
    flat = reference_setpoint_schedule(SimConfig(day_window=(0, 24)), cal)
    assert (flat == 21.0).all()


def test_conductance_example():
    t_out = np.where(np.arange(8760) < 1000, 10.0, 25.0)
    ref = np.full(8760, 20.0)
    assert degree_hours(t_out, ref) == 10_000.0
    assert estimate_conductance(10_000.0, t_out, ref) == pytest.approx(1.0)


def test_conductance_errors():
    ref = np.full(10, 20.0)
    with pytest.raises(CalibrationError):
        estimate_conductance(0.0, np.zeros(10), ref)
    with pytest.raises(CalibrationError):
        estimate_conductance(1000.0, np.full(10, 20.0), ref)


def test_degree_hours_matches_oracle(rng):
    t_out = rng.normal(10, 8, 500)
    ref = np.where(np.arange(500) % 24 >= 7, 21.0, 16.0)
    assert degree_hours(t_out, ref) == pytest.approx(oracles.degree_hours(ref, t_out), rel=1e-12)


def test_capacity_examples():
    assert estimate_capacity(100.0) == pytest.approx(5.0)
    assert estimate_capacity(115.0, 0.04) == pytest.approx(4.6)
    with pytest.raises(ConfigError):
        estimate_capacity(100.0, 0.0)
    with pytest.raises(ConfigError):
        EngineConfig(c_spec=0.0)


def test_max_heating_power_examples():
    assert max_heating_power(1.0, -4.0, 21.0) == pytest.approx(30.0)
    assert max_heating_power(1.0, -4.0, 21.0, safety=1.0) == pytest.approx(25.0)
    with pytest.raises(DimensioningError):
        max_heating_power(1.0, np.full(8760, 25.0), 21.0)


def test_max_heating_power_uses_first_percentile():
    t_out = np.linspace(-10, 30, 1001)
    t_design = np.percentile(t_out, 1)
    assert max_heating_power(2.0, t_out, 21.0) == pytest.approx(1.2 * 2.0 * (21.0 - t_design))


def test_setpoint_clamp_examples():
    assert clamp_setpoints(21.0, 16.0) == (21.0, 16.0)
    assert clamp_setpoints(18.0, 19.5) == (18.0, 17.0)
    assert clamp_setpoints(30.0, 5.0) == (26.0, 10.0)
    assert clamp_setpoints(15.0, 16.5) == (17.0, 16.0)


def test_setpoint_sampling_moments():
    draws = np.array(
        [sample_setpoints(seeding.setpoint_seed(seeding.building_seed(42, f"b{i}"))) for i in range(10_000)]
    )
    day, night = draws[:, 0], draws[:, 1]
    assert abs(day.mean() - 21.0) <= 0.1
    assert abs(day.std(ddof=1) - 2.0) <= 0.1
    assert (night < day).all() and (night >= 10.0).all()
    assert ((day >= 17.0) & (day <= 26.0)).all()
    # share of draws at the day clamp bounds follows the normal tails
    tail = norm.cdf(-2.0) + norm.sf(2.5)
    observed = ((day == 17.0) | (day == 26.0)).mean()
    assert abs(observed - tail) < 4 * np.sqrt(tail * (1 - tail) / day.size)


def test_setpoints_deterministic_per_seed():
    assert sample_setpoints(123) == sample_setpoints(123)
    assert sample_setpoints(123) != sample_setpoints(124)


# -- frozen oracle series ----------------------------------------------------

T_OUT6 = [0.0, 2.0, 4.0, -2.0, 1.0, 3.0]
ACT6 = [0, 1, 1, 0, 1, 1]


def test_run_model_frozen_series_unclipped():
    heat, t_in = _run_one(0.5, 5.0, 40.0, 21.0, 16.0, T_OUT6, ACT6)
    # values from the scalar reference implementation
    np.testing.assert_allclose(heat, [0.0, 39.182, 8.41, 0.0, 20.251, 8.91], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(t_in, [16.0, 14.404, 21.02, 21.02, 18.722, 21.02], rtol=1e-12)


def test_run_model_frozen_series_with_heater_limit():
    t_out = T_OUT6 + [8.0, 10.0]
    act = [0, 1, 1, 0, 0, 1, 1, 0]
    heat, t_in = _run_one(0.5, 5.0, 30.0, 21.0, 16.0, t_out, act)
    np.testing.assert_allclose(
        heat, [0.0, 30.0, 16.6738, 0.0, 0.0, 27.2079, 6.41, 0.0], rtol=1e-12, atol=1e-12
    )
    np.testing.assert_allclose(t_in, [16.0, 14.404, 19.1836, 21.02, 18.722, 16.9538, 21.02, 21.02], rtol=1e-12)


building_params = st.fixed_dictionaries(
    {
        "G": st.floats(0.05, 5.0),
        "tau": st.floats(2.0, 100.0),  # k / G, hours
        "q_factor": st.floats(0.2, 3.0),
        "t_day": st.floats(17.0, 26.0),
        "gap": st.floats(1.0, 7.0),
        "ga": st.floats(0.0, 0.5),
        "gi": st.floats(0.0, 0.1),
        "n": st.integers(1, 20),
    }
)


@settings(max_examples=60, deadline=None)
@given(p=building_params, seed=st.integers(0, 2**32 - 1), T=st.integers(2, 200))
def test_run_model_matches_scalar_oracle(p, seed, T):
    rng = np.random.default_rng(seed)
    t_out = rng.normal(8.0, 8.0, T)
    active = rng.random(T) < 0.5
    k = p["tau"] * p["G"]
    q_max = p["q_factor"] * p["G"] * 25.0
    t_night = p["t_day"] - p["gap"]
    heat, t_in = _run_one(p["G"], k, q_max, p["t_day"], t_night, t_out, active, p["ga"], p["gi"], p["n"])
    ref_heat, ref_t, _ = oracles.thermal_reference(
        p["G"], k, q_max, p["t_day"], t_night, t_out, active, p["ga"], p["gi"], p["n"]
    )
    np.testing.assert_allclose(heat, ref_heat, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(t_in, ref_t, rtol=1e-12)


# -- invariants --------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(
    demand=st.floats(-1e6, 1e6, allow_nan=False),
    q_max=st.floats(1e-6, 1e5),
)
def test_clipping_three_cases(demand, q_max):
    h = float(heating_power(np.array(demand), q_max))
    assert 0.0 <= h <= q_max
    if demand < 0:
        assert h == 0.0
    elif demand > q_max:
        assert h == q_max
    else:
        assert h == demand


@settings(max_examples=60, deadline=None)
@given(p=building_params, seed=st.integers(0, 2**32 - 1), data=st.data())
def test_discrete_energy_balance(p, seed, data):
    T = 168
    rng = np.random.default_rng(seed)
    t_out = rng.normal(6.0, 7.0, T)
    active = rng.random(T) < 0.5
    k = p["tau"] * p["G"]
    q_max = p["q_factor"] * p["G"] * 25.0
    heat, t_in = _run_one(p["G"], k, q_max, p["t_day"], p["t_day"] - p["gap"], t_out, active, p["ga"], p["gi"], p["n"])
    gains = p["n"] * np.where(active, p["ga"], p["gi"])
    losses = p["G"] * (t_in - t_out)
    t1 = data.draw(st.integers(0, T - 2))
    t2 = data.draw(st.integers(t1 + 1, T - 1))
    lhs = k * (t_in[t2] - t_in[t1])
    rhs = float(np.sum(heat[t1:t2] + gains[t1:t2] - losses[t1:t2]))
    scale = max(abs(lhs), float(np.sum(np.abs(heat[t1:t2]) + gains[t1:t2] + np.abs(losses[t1:t2]))))
    assert abs(lhs - rhs) <= 1e-9 * scale


@settings(max_examples=200, deadline=None)
@given(
    G=st.floats(0.01, 10.0),
    k=st.floats(0.1, 500.0),
    t_in=st.floats(0.0, 30.0),
    t_out=st.floats(-20.0, 30.0),
    t_set=st.floats(10.0, 26.0),
    inflow=st.floats(0.0, 5.0),
)
def test_setpoint_tracking(G, k, t_in, t_out, t_set, inflow):
    loss = heat_losses(G, t_in, t_out)
    demand = heat_demand(loss, k, t_set, t_in)
    if demand < 0:
        return
    h = float(heating_power(np.array(demand), np.inf))
    # with no gains the next state lands on the setpoint
    nxt0 = indoor_temperature(t_in, h, 0.0, loss, k)
    assert nxt0 == pytest.approx(t_set, abs=1e-9 * max(1.0, abs(loss) / k + abs(t_set)))
    # gains shift it by inflow / k
    nxt = indoor_temperature(t_in, h, inflow, loss, k)
    assert nxt == pytest.approx(t_set + inflow / k, abs=1e-9 * max(1.0, abs(loss) / k + abs(t_set)))


@settings(max_examples=40, deadline=None)
@given(p=building_params, seed=st.integers(0, 2**32 - 1), shift=st.floats(0.0, 3.0))
def test_warmer_weather_never_increases_demand(p, seed, shift):
    T = 240
    rng = np.random.default_rng(seed)
    t_night = p["t_day"] - p["gap"]
    # stays well below the night setpoint even after the shift
    t_out = t_night - 4.0 - shift - np.abs(rng.normal(0.0, 5.0, T))
    active = rng.random(T) < 0.5
    k = p["tau"] * p["G"]
    base, _ = _run_one(p["G"], k, np.inf, p["t_day"], t_night, t_out, active, 0.0, 0.0, keep=False)
    warm, _ = _run_one(p["G"], k, np.inf, p["t_day"], t_night, t_out + shift, active, 0.0, 0.0, keep=False)
    assert warm.sum() <= base.sum() * (1 + 1e-12) + 1e-9


def test_determinism_and_batch_independence(rng):
    T, n = 300, 7
    G = rng.uniform(0.1, 2.0, n)
    k = G * rng.uniform(5, 60, n)
    q = G * 30
    day = rng.uniform(19, 23, n)
    night = day - 4
    t_out = rng.normal(5, 6, T)
    active = rng.random((T, n)) < 0.5
    args = (G, k, q, day, night, t_out, active, np.full(n, 0.1), np.full(n, 0.02), np.ones(n))
    h1, _ = run_model(*args)
    h2, _ = run_model(*args)
    assert h1.tobytes() == h2.tobytes()
    for j in range(n):
        sl = slice(j, j + 1)
        one, _ = run_model(G[sl], k[sl], q[sl], day[sl], night[sl], t_out, active[:, sl],
                           np.full(1, 0.1), np.full(1, 0.02), np.ones(1))
        assert one[:, 0].tobytes() == h1[:, j].tobytes()


def test_spinup_equals_wrapped_run(rng):
    T, S = 100, 30
    t_out = rng.normal(5, 6, T)
    active = rng.random(T) < 0.5
    heat, t_in = _run_one(0.4, 8.0, 12.0, 21.0, 16.0, t_out, active, spinup=S)
    ext_heat, ext_t = _run_one(0.4, 8.0, 12.0, 21.0, 16.0, np.r_[t_out[-S:], t_out], np.r_[active[-S:], active])
    assert heat.tobytes() == ext_heat[S:].tobytes()
    assert t_in.tobytes() == ext_t[S:].tobytes()


def test_spinup_longer_than_horizon_wraps_repeatedly(rng):
    T, S = 24, 60
    t_out = rng.normal(5, 6, T)
    active = rng.random(T) < 0.5
    heat, _ = _run_one(0.4, 8.0, 12.0, 21.0, 16.0, t_out, active, spinup=S)
    idx = np.arange(-S, T) % T
    ext, _ = _run_one(0.4, 8.0, 12.0, 21.0, 16.0, t_out[idx], active[idx])
    assert heat.tobytes() == ext[S:].tobytes()


def test_nan_weather_is_a_hard_error():
    t_out = np.array([0.0, 1.0, np.nan, 2.0])
    with pytest.raises(SimulationError, match="t=2"):
        _run_one(0.5, 5.0, 10.0, 21.0, 16.0, t_out, [1, 1, 1, 1])


def test_length_mismatch_is_an_error():
    with pytest.raises(SimulationError):
        run_model(np.ones(1), np.ones(1), np.ones(1), np.full(1, 21.0), np.full(1, 16.0), np.zeros(5),
                  np.ones((4, 1), bool), np.zeros(1), np.zeros(1), np.ones(1))


def test_simulate_building_wraps_run_model(rng):
    T = 72
    w = WeatherSeries(START, rng.normal(5, 5, T))
    occ = OccupancyProfile("b1", 1, rng.random(T) < 0.5)
    p = ThermalParams("b1", G=0.3, k=6.0, q_max=9.0, t_set_day=21.0, t_set_night=16.0, n_dwellings=2)
    s = simulate_building(p, w, occ)
    ref, ref_t, _ = oracles.thermal_reference(0.3, 6.0, 9.0, 21.0, 16.0, w.temp_out, occ.values, 0.1, 0.02, 2)
    np.testing.assert_allclose(s.values, ref, rtol=1e-9, atol=1e-12)
    assert s.values[0] == 0.0
    assert s.indoor_temp[0] == (21.0 if occ.values[0] else 16.0)
    assert ((s.values >= 0) & (s.values <= p.q_max)).all()
    np.testing.assert_array_equal(internal_gains(p, occ), np.where(occ.values, 0.2, 0.04))
    with pytest.raises(SimulationError):
        simulate_building(p, WeatherSeries(START, np.zeros(T - 1)), occ)


def test_solar_gains_reduce_demand(rng):
    T = 72
    w = WeatherSeries(START, rng.normal(0, 3, T), ghi=np.tile(np.r_[np.zeros(8), np.full(8, 600.0), np.zeros(8)], 3))
    occ = OccupancyProfile("b1", 1, np.ones(T, bool))
    p = ThermalParams("b1", G=0.3, k=6.0, q_max=20.0, t_set_day=21.0, t_set_night=16.0, solar_aperture=5.0)
    off = simulate_building(p, w, occ, SimConfig())
    on = simulate_building(p, w, occ, SimConfig(solar_enabled=True, g_factor=0.5))
    assert on.values.sum() < off.values.sum()
    solar = 5.0 * 0.5 * w.ghi / 1000.0
    ref, _, _ = oracles.thermal_reference(0.3, 6.0, 20.0, 21.0, 16.0, w.temp_out, occ.values, 0.1, 0.02, 1, solar=solar)
    np.testing.assert_allclose(on.values, ref, rtol=1e-9, atol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        ThermalParams("b", G=0.0, k=1.0, q_max=1.0, t_set_day=21.0, t_set_night=16.0)
    with pytest.raises(ValueError):
        ThermalParams("b", G=1.0, k=1.0, q_max=1.0, t_set_day=16.0, t_set_night=16.0)
    assert ThermalParams("b", G=1.0, k=1.0, q_max=np.inf, t_set_day=21.0, t_set_night=16.0).q_max == np.inf
    with pytest.raises(ConfigError):
        SimConfig(dt=0.0)
