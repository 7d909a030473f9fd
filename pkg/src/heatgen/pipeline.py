"""Stock assembly and batched simulation.

:func:`prepare_stock` turns normalized building records into per-building
model parameters (classification, annual demand, conductance, capacity,
setpoints, heater size).  :func:`iter_results` simulates the stock in
fixed-size batches, optionally on worker processes, and yields results in
building order so that parallelism never changes any output.
"""
from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import seeding
from .archetype import (
    ArchetypeTable,
    BuildingEnergy,
    ClassRules,
    annual_demand,
    classify,
    dataset_share_weights,
    fallback_archetype,
    year_out_of_range,
)
from .config import EngineConfig
from .errors import ClassificationError, DimensioningError
from .fixedpoint import HEAT_SCALE, TEMP_SCALE, long_csv_rows, quantize
from .ingest import BuildingRecord, Diagnostic
from .occupancy import TransitionMatrixSet, default_initial_state, sample_chains
from .thermal import (
    SimConfig,
    ThermalParams,
    degree_hours,
    design_temperature,
    estimate_capacity,
    reference_setpoint_schedule,
    run_model,
    sample_setpoints,
)
from .weather import Calendar, WeatherSeries

MAX_CHAINS_PER_DRAW = 4000


@dataclass
class Stock:
    """Residential buildings with model parameters, sorted by id."""

    records: list[BuildingRecord]
    energies: list[BuildingEnergy]
    G: np.ndarray
    k: np.ndarray
    q_max: np.ndarray
    t_set_day: np.ndarray
    t_set_night: np.ndarray
    seeds: np.ndarray  # building seeds, uint64
    degree_hours: float
    t_design: float
    ahd_used: np.ndarray = field(repr=False)  # annual demand the conductance was calibrated on

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def area(self) -> np.ndarray:
        return np.array([r.residential_area for r in self.records], dtype=float)

    @property
    def n_dwellings(self) -> np.ndarray:
        return np.array([r.n_dwellings for r in self.records], dtype=float)

    @property
    def ahd(self) -> np.ndarray:
        return np.array([e.annual_demand for e in self.energies])

    @property
    def ahd_retrofit(self) -> np.ndarray:
        return np.array([e.annual_demand_retrofit for e in self.energies])

    @property
    def q_spec(self) -> np.ndarray:
        return np.array([e.q_spec for e in self.energies])

    def params(self, i: int, cfg: EngineConfig) -> ThermalParams:
        r = self.records[i]
        return ThermalParams(
            building_id=r.id,
            G=float(self.G[i]),
            k=float(self.k[i]),
            q_max=float(self.q_max[i]),
            t_set_day=float(self.t_set_day[i]),
            t_set_night=float(self.t_set_night[i]),
            gain_active=cfg.gain_active_kw,
            gain_inactive=cfg.gain_inactive_kw,
            n_dwellings=r.n_dwellings,
            solar_aperture=cfg.solar_aperture_per_m2 * r.residential_area,
        )

    def subset(self, index) -> "Stock":
        index = np.asarray(index, dtype=np.int64)
        return Stock(
            records=[self.records[i] for i in index],
            energies=[self.energies[i] for i in index],
            G=self.G[index],
            k=self.k[index],
            q_max=self.q_max[index],
            t_set_day=self.t_set_day[index],
            t_set_night=self.t_set_night[index],
            seeds=self.seeds[index],
            degree_hours=self.degree_hours,
            t_design=self.t_design,
            ahd_used=self.ahd_used[index],
        )


def conductance_and_power(ahd: np.ndarray, stock: Stock, cfg: EngineConfig) -> tuple[np.ndarray, np.ndarray]:
    """Calibrate G from annual demand and size the heater from G."""
    G = ahd / stock.degree_hours
    q_max = cfg.safety_factor * G * (stock.t_set_day - stock.t_design)
    return G, q_max


def prepare_stock(
    buildings: list[BuildingRecord],
    table: ArchetypeTable,
    weather: WeatherSeries,
    cfg: EngineConfig,
    global_seed: int,
    retrofit: bool = False,
) -> tuple[Stock, list[Diagnostic], int]:
    """Classify and parameterize residential buildings.

    Returns the stock, diagnostics, and the number of residential buildings
    that failed (classification, calibration or dimensioning).
    """
    rules = ClassRules.from_config(cfg)
    sim = SimConfig.from_config(cfg)
    cal = Calendar.for_weather(weather)
    ref = reference_setpoint_schedule(sim, cal)
    denom = degree_hours(weather.temp_out, ref, sim.dt)
    t_design = design_temperature(weather.temp_out, cfg.design_percentile)

    residential = sorted((b for b in buildings if b.is_residential), key=lambda b: b.id)
    fallbacks = {}
    share = dataset_share_weights(residential, table, rules) if cfg.fallback_weighting == "dataset_share" else {}
    for cls_name in table.classes:
        fallbacks[cls_name] = fallback_archetype(table, cls_name, share.get(cls_name))

    diagnostics: list[Diagnostic] = []
    kept, energies, day, night, seeds = [], [], [], [], []
    failed = 0
    for b in residential:
        try:
            arch, used_fallback = classify(b, table, rules, fallbacks)
            energy = annual_demand(b, arch, used_fallback)
            if year_out_of_range(b, table, rules):
                diagnostics.append(
                    Diagnostic("warning", b.id, "classify", f"year {b.construction_year} outside table range; nearest band {arch.id} used")
                )
            if not denom > 0:
                raise DimensioningError("calibration failed: outdoor temperature never below the reference setpoint")
            bseed = seeding.building_seed(global_seed, b.id)
            t_day, t_night = sample_setpoints(
                seeding.setpoint_seed(bseed), cfg.setpoint_day_mean, cfg.setpoint_night_mean, cfg.setpoint_std
            )
            if t_day <= t_design:
                raise DimensioningError(f"design temperature {t_design:.2f} degC not below setpoint {t_day:.2f}")
        except (ClassificationError, DimensioningError) as exc:
            diagnostics.append(Diagnostic("error", b.id, "simulate", str(exc)))
            failed += 1
            continue
        kept.append(b)
        energies.append(energy)
        day.append(t_day)
        night.append(t_night)
        seeds.append(bseed)

    area = np.array([b.residential_area for b in kept], dtype=float)
    stock = Stock(
        records=kept,
        energies=energies,
        G=np.empty(len(kept)),
        k=np.array([estimate_capacity(a, cfg.c_spec) for a in area]),
        q_max=np.empty(len(kept)),
        t_set_day=np.array(day, dtype=float),
        t_set_night=np.array(night, dtype=float),
        seeds=np.array(seeds, dtype=np.uint64),
        degree_hours=denom,
        t_design=t_design,
        ahd_used=np.empty(len(kept)),
    )
    ahd = stock.ahd_retrofit if retrofit else stock.ahd
    stock.ahd_used = ahd
    stock.G, stock.q_max = conductance_and_power(ahd, stock, cfg)
    return stock, diagnostics, failed


# -- batched simulation ------------------------------------------------------


@dataclass
class RunSpec:
    """Everything a worker needs to simulate any batch of a stock."""

    stock: Stock
    weather: WeatherSeries
    matrices: TransitionMatrixSet
    cfg: EngineConfig
    repetition: int = 0
    G: np.ndarray | None = None  # overrides (scenario recalibration)
    q_max: np.ndarray | None = None
    emit_csv: bool = False
    emit_temps: bool = False
    keep_heat: bool = False


@dataclass
class BatchResult:
    start: int
    stop: int
    annual_kwh: np.ndarray
    peak_kw: np.ndarray
    aggregate_q: np.ndarray  # int64 W, summed over the batch
    csv: bytes | None = None
    heat_q: np.ndarray | None = None


def batch_occupancy(spec: RunSpec, sl: slice, cal: Calendar) -> tuple[np.ndarray, np.ndarray | None]:
    """Active flags (T, n) and, in per-dwelling mode, active dwelling counts."""
    stock, rep = spec.stock, spec.repetition
    seeds = stock.seeds[sl]
    init = default_initial_state(cal)
    if not spec.cfg.per_dwelling:
        occ_seeds = [seeding.occupancy_seed(int(s), rep) for s in seeds]
        return sample_chains(spec.matrices, cal, occ_seeds, init), None
    n_dw = [r.n_dwellings for r in stock.records[sl]]
    counts = np.empty((len(cal), len(n_dw)), dtype=np.int64)
    chain_seeds, owners = [], []
    for j, (s, n) in enumerate(zip(seeds, n_dw)):
        for d in range(n):
            chain_seeds.append(seeding.occupancy_seed(int(s), rep, d))
            owners.append(j)
    owners = np.asarray(owners)
    counts[:] = 0
    for lo in range(0, len(chain_seeds), MAX_CHAINS_PER_DRAW):
        hi = lo + MAX_CHAINS_PER_DRAW
        chains = sample_chains(spec.matrices, cal, chain_seeds[lo:hi], init)
        own = owners[lo:hi]
        # owners are sorted, so each building's chains are contiguous
        starts = np.flatnonzero(np.r_[True, own[1:] != own[:-1]])
        counts[:, own[starts]] += np.add.reduceat(chains, starts, axis=1)
    return counts > 0, counts


def simulate_batch(spec: RunSpec, start: int, stop: int) -> BatchResult:
    stock, cfg = spec.stock, spec.cfg
    sl = slice(start, stop)
    cal = Calendar.for_weather(spec.weather)
    active, counts = batch_occupancy(spec, sl, cal)
    G = (spec.G if spec.G is not None else stock.G)[sl]
    q_max = (spec.q_max if spec.q_max is not None else stock.q_max)[sl]
    solar = None
    if cfg.solar_enabled and spec.weather.ghi is not None and cfg.solar_aperture_per_m2 > 0:
        aperture = cfg.solar_aperture_per_m2 * stock.area[sl]
        solar = aperture[None, :] * cfg.solar_g_factor * spec.weather.ghi[:, None] / 1000.0
    heat, temps = run_model(
        G,
        stock.k[sl],
        q_max,
        stock.t_set_day[sl],
        stock.t_set_night[sl],
        spec.weather.temp_out,
        active,
        np.full(stop - start, cfg.gain_active_kw),
        np.full(stop - start, cfg.gain_inactive_kw),
        stock.n_dwellings[sl],
        active_count=None if counts is None else counts.astype(float),
        solar_kw=solar,
        dt=cfg.dt_h,
        keep_temps=spec.emit_temps,
        spinup=cfg.spinup_h,
    )
    heat_q = quantize(heat, HEAT_SCALE)
    csv = None
    if spec.emit_csv:
        temps_q = quantize(temps, TEMP_SCALE) if temps is not None else None
        csv = long_csv_rows(stock.ids[start:stop], heat_q, temps_q)
    return BatchResult(
        start=start,
        stop=stop,
        annual_kwh=heat_q.sum(axis=0) * cfg.dt_h / HEAT_SCALE,
        peak_kw=heat_q.max(axis=0) / HEAT_SCALE,
        aggregate_q=heat_q.sum(axis=1),
        csv=csv,
        heat_q=heat_q if spec.keep_heat else None,
    )


_WORKER_SPEC: RunSpec | None = None


def _init_worker(spec: RunSpec) -> None:
    global _WORKER_SPEC
    _WORKER_SPEC = spec


def _run_worker(bounds: tuple[int, int]) -> BatchResult:
    return simulate_batch(_WORKER_SPEC, *bounds)


def batch_bounds(n: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def iter_results(spec: RunSpec, jobs: int = 1) -> Iterator[BatchResult]:
    """Yield batch results in building order, whatever the worker count."""
    bounds = batch_bounds(len(spec.stock), spec.cfg.chunk_size)
    if jobs <= 1 or len(bounds) <= 1:
        for lo, hi in bounds:
            yield simulate_batch(spec, lo, hi)
        return
    with cf.ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(spec,)) as pool:
        # map() preserves submission order
        yield from pool.map(_run_worker, bounds)


@dataclass
class RunSummary:
    annual_kwh: np.ndarray
    peak_kw: np.ndarray
    aggregate_q: np.ndarray
    heat_q: np.ndarray | None = None


def run_stock(spec: RunSpec, jobs: int = 1, sink=None) -> RunSummary:
    """Simulate the whole stock; ``sink`` receives each batch's CSV bytes in order."""
    n = len(spec.stock)
    T = len(spec.weather)
    annual = np.zeros(n)
    peak = np.zeros(n)
    agg = np.zeros(T, dtype=np.int64)
    heat = np.empty((T, n), dtype=np.int64) if spec.keep_heat else None
    for res in iter_results(spec, jobs):
        annual[res.start:res.stop] = res.annual_kwh
        peak[res.start:res.stop] = res.peak_kw
        agg += res.aggregate_q
        if heat is not None:
            heat[:, res.start:res.stop] = res.heat_q
        if sink is not None and res.csv is not None:
            sink(res.csv)
    return RunSummary(annual, peak, agg, heat)
