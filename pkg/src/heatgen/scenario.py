"""Aggregation, validation statistics and retrofit strategy experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.signal import find_peaks
from scipy.stats import pearsonr

from . import seeding
from .archetype import BuildingEnergy
from .config import EngineConfig
from .errors import InputError
from .fixedpoint import HEAT_SCALE, quantize
from .ingest import BuildingRecord
from .occupancy import TransitionMatrixSet
from .pipeline import RunSpec, Stock, conductance_and_power, run_stock
from .thermal import HeatDemandSeries
from .weather import DAY_TYPES, Calendar, WeatherSeries

STRATEGIES = ("random", "worst_first")
MORNING_HOURS = (6, 10)
EVENING_HOURS = (17, 22)
SCENARIO_COLUMNS = ["strategy", "fraction", "repetition", "annual_kwh", "peak_kw"]


@dataclass(frozen=True)
class AggregateSeries:
    """Hourly sum over member buildings, held as exact integer watts."""

    quanta: np.ndarray  # int64, W
    member_ids: frozenset = field(default_factory=frozenset)

    @property
    def values(self) -> np.ndarray:
        return self.quanta / HEAT_SCALE

    def __len__(self) -> int:
        return int(self.quanta.size)

    def __add__(self, other: "AggregateSeries") -> "AggregateSeries":
        if len(self) != len(other):
            raise ValueError(f"series lengths differ: {len(self)} vs {len(other)}")
        return AggregateSeries(self.quanta + other.quanta, self.member_ids | other.member_ids)

    @property
    def peak_kw(self) -> float:
        return float(self.quanta.max()) / HEAT_SCALE

    def annual_kwh(self, dt: float = 1.0) -> float:
        return float(self.quanta.sum()) * dt / HEAT_SCALE


def aggregate(series: Sequence[HeatDemandSeries]) -> AggregateSeries:
    """Sum building series hour by hour in ascending id order.

    Each series is rounded to whole watts first, so the result does not
    depend on the order or grouping of the inputs.
    """
    if not series:
        raise ValueError("aggregate needs at least one series")
    lengths = {s.values.size for s in series}
    if len(lengths) != 1:
        raise ValueError(f"series have unequal lengths {sorted(lengths)}")
    total = np.zeros(lengths.pop(), dtype=np.int64)
    for s in sorted(series, key=lambda s: s.building_id):
        total += quantize(s.values)
    return AggregateSeries(total, frozenset(s.building_id for s in series))


# -- selection ---------------------------------------------------------------


def _check_fraction(fraction: float) -> None:
    if not 0.0 <= fraction <= 1.0:
        raise InputError(f"fraction must be in [0, 1], got {fraction}")


def prefix_by_area(ordered_ids: Sequence[str], areas: Sequence[float], fraction: float) -> set[str]:
    """Smallest prefix of ``ordered_ids`` whose area reaches ``fraction`` of the total."""
    _check_fraction(fraction)
    if fraction == 0 or not len(ordered_ids):
        return set()
    cum = np.cumsum(np.asarray(areas, dtype=float))
    target = fraction * cum[-1]
    n = int(np.searchsorted(cum, target, side="left")) + 1
    return set(ordered_ids[: min(n, len(ordered_ids))])


def select_random_by_area(buildings: Sequence[BuildingRecord], fraction: float, seed: int) -> set[str]:
    ordered = sorted(buildings, key=lambda b: b.id)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    shuffled = [ordered[i] for i in perm]
    return prefix_by_area([b.id for b in shuffled], [b.residential_area for b in shuffled], fraction)


def select_worst_by_area(
    buildings: Sequence[BuildingRecord], energies: Sequence[BuildingEnergy], fraction: float
) -> set[str]:
    q = {e.building_id: e.q_spec for e in energies}
    ordered = sorted(buildings, key=lambda b: (-q[b.id], -b.residential_area, b.id))
    return prefix_by_area([b.id for b in ordered], [b.residential_area for b in ordered], fraction)


# -- scenarios ---------------------------------------------------------------


@dataclass
class ScenarioResult:
    strategy: str
    fraction_by_area: float
    repetitions: int
    annual_demand: np.ndarray  # kWh/a per run
    peak: np.ndarray  # kW per run
    baseline_annual: float
    baseline_peak: float
    selected_counts: np.ndarray = field(default=None)

    @property
    def annual_reduction_pct(self) -> np.ndarray:
        return 100.0 * (1.0 - self.annual_demand / self.baseline_annual)

    @property
    def peak_reduction_pct(self) -> np.ndarray:
        return 100.0 * (1.0 - self.peak / self.baseline_peak)

    def summary(self) -> dict[str, float]:
        def std(x):
            return float(np.std(x, ddof=1)) if x.size > 1 else 0.0

        return {
            "mean_annual": float(np.mean(self.annual_demand)),
            "std_annual": std(self.annual_demand),
            "mean_peak": float(np.mean(self.peak)),
            "std_peak": std(self.peak),
            "baseline_annual": self.baseline_annual,
            "baseline_peak": self.baseline_peak,
            "mean_annual_reduction_pct": float(np.mean(self.annual_reduction_pct)),
            "mean_peak_reduction_pct": float(np.mean(self.peak_reduction_pct)),
        }

    def to_csv(self) -> str:
        lines = [",".join(SCENARIO_COLUMNS)]
        for r, (a, p) in enumerate(zip(self.annual_demand, self.peak)):
            lines.append(f"{self.strategy},{self.fraction_by_area!r},{r},{a:.3f},{p:.3f}")
        s = self.summary()
        keys = ["mean_annual", "std_annual", "mean_peak", "std_peak", "baseline_annual", "baseline_peak"]
        lines.append("# summary: " + ",".join(keys))
        lines.append("# " + ",".join(f"{s[k]:.3f}" for k in keys))
        lines.append(
            f"# reduction_pct: annual {s['mean_annual_reduction_pct']:.3f}, peak {s['mean_peak_reduction_pct']:.3f}"
        )
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def select(stock: Stock, strategy: str, fraction: float, global_seed: int, repetition: int) -> set[str]:
    if strategy == "random":
        return select_random_by_area(stock.records, fraction, seeding.selection_seed(global_seed, repetition))
    if strategy == "worst_first":
        return select_worst_by_area(stock.records, stock.energies, fraction)
    raise InputError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")


def retrofit_demand(stock: Stock, selected: Iterable[str]) -> np.ndarray:
    chosen = set(selected)
    mask = np.array([r.id in chosen for r in stock.records], dtype=bool)
    return np.where(mask, stock.ahd_retrofit, stock.ahd)


def run_scenario(
    stock: Stock,
    weather: WeatherSeries,
    matrices: TransitionMatrixSet,
    cfg: EngineConfig,
    strategy: str,
    fraction: float,
    repetitions: int,
    global_seed: int,
    jobs: int = 1,
    baseline=None,
    progress=None,
) -> ScenarioResult:
    """Retrofit a share of the stock and resimulate ``repetitions`` times.

    Run ``r`` uses occupancy stream ``r + 1`` for every building; the
    baseline uses stream 0.  Passing a previous ``baseline`` summary skips
    the baseline simulation.
    """
    if repetitions < 1:
        raise InputError(f"repetitions must be >= 1, got {repetitions}")
    if strategy not in STRATEGIES:
        raise InputError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    _check_fraction(fraction)
    if baseline is None:
        baseline = run_stock(RunSpec(stock, weather, matrices, cfg, repetition=0), jobs)
    base_annual = float(baseline.aggregate_q.sum()) * cfg.dt_h / HEAT_SCALE
    base_peak = float(baseline.aggregate_q.max()) / HEAT_SCALE

    annual = np.empty(repetitions)
    peak = np.empty(repetitions)
    counts = np.empty(repetitions, dtype=np.int64)
    for r in range(repetitions):
        chosen = select(stock, strategy, fraction, global_seed, r)
        G, q_max = conductance_and_power(retrofit_demand(stock, chosen), stock, cfg)
        res = run_stock(RunSpec(stock, weather, matrices, cfg, repetition=r + 1, G=G, q_max=q_max), jobs)
        annual[r] = float(res.aggregate_q.sum()) * cfg.dt_h / HEAT_SCALE
        peak[r] = float(res.aggregate_q.max()) / HEAT_SCALE
        counts[r] = len(chosen)
        if progress is not None:
            progress(r + 1, repetitions)
    return ScenarioResult(strategy, fraction, repetitions, annual, peak, base_annual, base_peak, counts)


# -- validation statistics ---------------------------------------------------


def stats_daily(agg: AggregateSeries, weather: WeatherSeries, cal: Calendar) -> pd.DataFrame:
    """Daily demand (kWh), daily mean outdoor temperature and day type."""
    n = len(agg)
    if n != len(weather) or n != len(cal):
        raise ValueError("aggregate, weather and calendar lengths differ")
    if n % 24:
        raise ValueError(f"horizon of {n} h is not a whole number of days")
    days = n // 24
    # integer daily sums keep daily totals exact
    demand = agg.quanta.reshape(days, 24).sum(axis=1) / HEAT_SCALE
    temp = weather.temp_out.reshape(days, 24).mean(axis=1)
    first = np.arange(days) * 24
    return pd.DataFrame(
        {
            "date": cal.date[first].astype(str),
            "demand_kwh": demand,
            "temp_mean_c": temp,
            "day_type": [DAY_TYPES[d] for d in cal.day_type[first]],
            "month": cal.month[first].astype(int),
        }
    )


def stats_avg_day(
    agg: AggregateSeries,
    cal: Calendar,
    day_type: int | str | None = None,
    months: Iterable[int] | None = None,
) -> np.ndarray:
    """Mean 24-hour profile (kW) over the days matching the filters."""
    if len(agg) != len(cal):
        raise ValueError("aggregate and calendar lengths differ")
    mask = np.ones(len(cal), dtype=bool)
    if day_type is not None:
        d = DAY_TYPES.index(day_type) if isinstance(day_type, str) else int(day_type)
        mask &= cal.day_type == d
    if months is not None:
        mask &= np.isin(cal.month, list(months))
    hours = cal.hour_of_day[mask]
    counts = np.bincount(hours, minlength=24)
    if not mask.any() or (counts == 0).any():
        raise ValueError("no complete day matches the filter")
    return np.bincount(hours, weights=agg.values[mask], minlength=24) / counts


def local_maxima(profile: np.ndarray) -> np.ndarray:
    """Hours of strict interior local maxima of a 24-hour profile."""
    peaks, _ = find_peaks(np.asarray(profile, dtype=float))
    return peaks


def double_peak(profile: np.ndarray) -> tuple[bool, int | None, int | None]:
    """Whether the profile peaks both in the morning and in the evening window.

    Returns the flag and the highest morning and evening peak hours.
    """
    profile = np.asarray(profile, dtype=float)
    peaks = local_maxima(profile)

    def best(lo, hi):
        inside = [p for p in peaks if lo <= p <= hi]
        return max(inside, key=lambda p: profile[p]) if inside else None

    morning = best(*MORNING_HOURS)
    evening = best(*EVENING_HOURS)
    return morning is not None and evening is not None, morning, evening


def temperature_correlation(daily: pd.DataFrame, months: Iterable[int]) -> float:
    """Pearson r between daily demand and daily mean temperature on the selected months."""
    sub = daily[daily["month"].isin(list(months))]
    if len(sub) < 3:
        raise ValueError("need at least 3 days to correlate")
    if sub["demand_kwh"].nunique() < 2 or sub["temp_mean_c"].nunique() < 2:
        return math.nan
    return float(pearsonr(sub["demand_kwh"], sub["temp_mean_c"])[0])
