"""One-node thermal building model.

Each building is a single heat capacity ``k`` (kWh/K) losing heat to the
outdoors through a conductance ``G`` (kW/K).  Every hour the heater tries
to bring the indoor temperature back to the occupancy-dependent setpoint
within one step, limited to ``[0, q_max]``.  Above the setpoint the
building floats freely; there is no cooling.

The time loop is vectorized across buildings: every per-building quantity
is an array of length N and each hour is a handful of elementwise numpy
operations.  Elementwise IEEE arithmetic gives the same bits for a
building whether it is simulated alone or in a batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ConfigError, DimensioningError, SimulationError
from .occupancy import OccupancyProfile
from .weather import Calendar, WeatherSeries

T_SET_DAY_NOMINAL = 21.0
T_SET_NIGHT_NOMINAL = 16.0
SETPOINT_STD = 2.0
DAY_CLAMP = (17.0, 26.0)
NIGHT_MIN = 10.0
NIGHT_MARGIN = 1.0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1.0  # hours
    horizon: int = 8760
    day_window: tuple[int, int] = (7, 23)  # [start, end) hours for the reference schedule
    solar_enabled: bool = False
    g_factor: float = 0.5
    spinup: int = 0  # wrapped-around warm-up steps, discarded

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.spinup < 0:
            raise ConfigError("spinup must be >= 0")

    @classmethod
    def from_config(cls, cfg) -> "SimConfig":
        return cls(cfg.dt_h, cfg.horizon_h, tuple(cfg.day_window), cfg.solar_enabled, cfg.solar_g_factor, cfg.spinup_h)


@dataclass(frozen=True)
class ThermalParams:
    building_id: str
    G: float  # kW/K
    k: float  # kWh/K
    q_max: float  # kW
    t_set_day: float
    t_set_night: float
    gain_active: float = 0.10  # kW per dwelling
    gain_inactive: float = 0.02  # kW per dwelling
    n_dwellings: int = 1
    solar_aperture: float = 0.0  # m2 effective

    def __post_init__(self):
        if not (self.G > 0 and self.k > 0 and self.q_max > 0):
            raise ValueError(f"{self.building_id}: G, k and q_max must be > 0")
        if not self.t_set_night < self.t_set_day:
            raise ValueError(f"{self.building_id}: night setpoint must be below the day setpoint")


@dataclass(frozen=True)
class HeatDemandSeries:
    building_id: str
    values: np.ndarray  # kW per step
    indoor_temp: np.ndarray | None = None  # degC per step


def reference_setpoint_schedule(cfg: SimConfig, cal: Calendar) -> np.ndarray:
    """Nominal 21/16 degC schedule used for conductance calibration."""
    start, end = cfg.day_window
    hour = cal.hour_of_day
    return np.where((hour >= start) & (hour < end), T_SET_DAY_NOMINAL, T_SET_NIGHT_NOMINAL)


def degree_hours(temp_out: np.ndarray, t_set: np.ndarray, dt: float = 1.0) -> float:
    """Sum of positive setpoint-outdoor differences, K h."""
    diff = np.asarray(t_set, dtype=float) - np.asarray(temp_out, dtype=float)
    return float(np.sum(diff[diff > 0]) * dt)


def estimate_conductance(ahd: float, weather: WeatherSeries | np.ndarray, ref_schedule: np.ndarray, dt: float = 1.0) -> float:
    """G = annual demand / degree hours below the reference setpoint (kW/K)."""
    if not ahd > 0:
        raise CalibrationError(f"annual heating demand must be > 0, got {ahd}")
    temp = weather.temp_out if isinstance(weather, WeatherSeries) else np.asarray(weather)
    denom = degree_hours(temp, ref_schedule, dt)
    if not denom > 0:
        raise CalibrationError("outdoor temperature never falls below the reference setpoint")
    return ahd / denom


def estimate_capacity(residential_area: float, c_spec: float = 0.05) -> float:
    if not c_spec > 0:
        raise ConfigError(f"c_spec must be > 0, got {c_spec}")
    if not residential_area > 0:
        raise ValueError("residential area must be > 0")
    return c_spec * residential_area


def design_temperature(temp_out: np.ndarray, percentile: float = 1.0) -> float:
    return float(np.percentile(temp_out, percentile))


def max_heating_power(
    G: float,
    weather: WeatherSeries | np.ndarray | float,
    t_set_day: float,
    safety: float = 1.2,
    percentile: float = 1.0,
) -> float:
    """Heater size: ``safety * G * (t_set_day - T_design)``.

    ``weather`` may be a series or an already computed design temperature.
    """
    if not G > 0:
        raise DimensioningError(f"G must be > 0, got {G}")
    if isinstance(weather, WeatherSeries):
        t_design = design_temperature(weather.temp_out, percentile)
    elif np.ndim(weather) == 0:
        t_design = float(weather)
    else:
        t_design = design_temperature(np.asarray(weather), percentile)
    if t_set_day <= t_design:
        raise DimensioningError(f"design temperature {t_design:.2f} degC is not below the setpoint {t_set_day:.2f}")
    return safety * G * (t_set_day - t_design)


def clamp_setpoints(day: float, night: float) -> tuple[float, float]:
    day = min(max(day, DAY_CLAMP[0]), DAY_CLAMP[1])
    night = min(max(night, NIGHT_MIN), day - NIGHT_MARGIN)
    return day, night


def sample_setpoints(
    seed: int,
    day_mean: float = T_SET_DAY_NOMINAL,
    night_mean: float = T_SET_NIGHT_NOMINAL,
    std: float = SETPOINT_STD,
) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    day = float(rng.normal(day_mean, std))
    night = float(rng.normal(night_mean, std))
    return clamp_setpoints(day, night)


def indoor_temperature(t_in_prev, heat_prev, inflow_prev, loss_prev, k, dt=1.0):
    """Indoor temperature after one step; ``inflow`` is internal plus solar gains."""
    return t_in_prev + dt * (heat_prev + inflow_prev - loss_prev) / k


def heat_losses(G, t_in, t_out):
    return G * (t_in - t_out)


def heat_demand(loss, k, t_set, t_in, dt=1.0):
    """Losses plus the storage deficit ``k (t_set - t_in)`` spread over one step."""
    return loss + k * (t_set - t_in) / dt


def heating_power(demand, q_max):
    """Clip demand to ``[0, q_max]``: no negative heating, bounded by heater size."""
    return np.minimum(np.maximum(demand, 0.0), q_max)


def run_model(
    G: np.ndarray,
    k: np.ndarray,
    q_max: np.ndarray,
    t_set_day: np.ndarray,
    t_set_night: np.ndarray,
    temp_out: np.ndarray,
    active: np.ndarray,
    gain_active: np.ndarray,
    gain_inactive: np.ndarray,
    n_dwellings: np.ndarray,
    active_count: np.ndarray | None = None,
    solar_kw: np.ndarray | None = None,
    dt: float = 1.0,
    keep_temps: bool = False,
    spinup: int = 0,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Simulate N buildings over T steps.

    Per-building arrays have shape (N,); ``active`` and ``active_count`` are
    (T, N); ``solar_kw`` is (T, N) or None.  Returns heating power (T, N)
    in kW and, with ``keep_temps``, indoor temperature (T, N).

    Step t: the state update uses the flows of step t-1, then losses,
    setpoint deficit and demand are evaluated at the new state, and demand
    is clipped to ``[0, q_max]``.  At the first step the indoor
    temperature equals the setpoint and heating is zero.

    With ``spinup`` > 0 the run starts that many steps before t = 0, on
    inputs wrapped around from the end of the series, and the warm-up
    steps are dropped.  This removes the start-up transient of the fixed
    initial values from the returned series.
    """
    T, n = active.shape
    if temp_out.shape != (T,):
        raise SimulationError(f"weather has {temp_out.size} steps, occupancy has {T}")
    heat = np.empty((T, n))
    temps = np.empty((T, n)) if keep_temps else None
    ga_total = n_dwellings * gain_active
    gi_total = n_dwellings * gain_inactive

    steps = np.arange(-spinup, T) % T
    t_in = np.where(active[steps[0]], t_set_day, t_set_night)
    h = np.zeros(n)
    inflow = None
    loss = None
    for i, t in enumerate(steps):
        a = active[t]
        t_set = np.where(a, t_set_day, t_set_night)
        if i:
            t_in = indoor_temperature(t_in, h, inflow, loss, k, dt)
        loss = heat_losses(G, t_in, temp_out[t])
        if i:
            h = heating_power(heat_demand(loss, k, t_set, t_in, dt), q_max)
        if i >= spinup:
            heat[t] = h
            if keep_temps:
                temps[t] = t_in
        if active_count is None:
            inflow = np.where(a, ga_total, gi_total)
        else:
            c = active_count[t]
            inflow = c * gain_active + (n_dwellings - c) * gain_inactive
        if solar_kw is not None:
            inflow = inflow + solar_kw[t]

    bad = ~np.isfinite(heat)
    if bad.any():
        t_bad, j_bad = np.argwhere(bad)[0]
        raise SimulationError(f"non-finite heating power at step t={t_bad} (building index {j_bad})")
    return heat, temps


def internal_gains(p: ThermalParams, occ: OccupancyProfile) -> np.ndarray:
    """Internal gain series (kW), as used inside :func:`run_model`."""
    if occ.active_count is None:
        return np.where(occ.values, p.n_dwellings * p.gain_active, p.n_dwellings * p.gain_inactive)
    c = occ.active_count
    return c * p.gain_active + (p.n_dwellings - c) * p.gain_inactive


def solar_gains(aperture: float, g_factor: float, ghi: np.ndarray) -> np.ndarray:
    return aperture * g_factor * ghi / 1000.0


def simulate_building(
    p: ThermalParams, w: WeatherSeries, occ: OccupancyProfile, cfg: SimConfig = SimConfig(), keep_temps: bool = True
) -> HeatDemandSeries:
    if occ.values.size != len(w):
        raise SimulationError(f"occupancy has {occ.values.size} steps, weather has {len(w)}")
    solar = None
    if cfg.solar_enabled and w.ghi is not None and p.solar_aperture > 0:
        solar = solar_gains(p.solar_aperture, cfg.g_factor, w.ghi)[:, None]
    count = None if occ.active_count is None else occ.active_count[:, None].astype(float)
    heat, temps = run_model(
        np.array([p.G]),
        np.array([p.k]),
        np.array([p.q_max]),
        np.array([p.t_set_day]),
        np.array([p.t_set_night]),
        w.temp_out,
        occ.values[:, None],
        np.array([p.gain_active]),
        np.array([p.gain_inactive]),
        np.array([float(p.n_dwellings)]),
        active_count=count,
        solar_kw=solar,
        dt=cfg.dt,
        keep_temps=keep_temps,
        spinup=cfg.spinup,
    )
    return HeatDemandSeries(p.building_id, heat[:, 0], None if temps is None else temps[:, 0])
