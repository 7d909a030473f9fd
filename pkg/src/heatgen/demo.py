"""Synthetic demo town: buildings, cadaster, weather, archetypes, matrices.

All values are synthetic.  The archetype table and the occupancy target
curves are illustrative stand-ins for a national typology and time-use
survey data; they are shaped to be plausible for a mild continental
climate, not taken from any published dataset.
"""
from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .archetype import Archetype, ArchetypeTable, parse_archetypes, write_archetypes
from .ingest import BuildingRecord, CadasterUnit, write_buildings
from .occupancy import TransitionMatrixSet, calibrate_matrices, parse_matrices, write_matrices
from .weather import Calendar, WeatherSeries, write_weather

CENTER = (38.69, -4.11)  # lat, lon of the synthetic town
ARCHETYPE_FILE = "archetypes_demo_synthetic.csv"
MATRIX_FILE = "matrices_demo_synthetic.csv"

YEAR_BANDS = [(1500, 1900), (1901, 1940), (1941, 1960), (1961, 1979), (1980, 2007), (2008, 2100)]
# kWh/(m2 a), original and retrofit, one value per band
Q_SPEC = {
    "SFH": ([260, 232, 210, 178, 122, 86], [110, 100, 92, 80, 58, 42]),
    "TH": ([236, 208, 188, 160, 112, 85], [102, 92, 86, 74, 54, 42]),
    "MFH": ([204, 184, 168, 146, 102, 85], [92, 84, 78, 68, 50, 42]),
    "AB": ([186, 168, 152, 132, 96, 85], [86, 80, 72, 62, 48, 42]),
}
CLASS_SHARES = {"SFH": 0.55, "TH": 0.20, "MFH": 0.15, "AB": 0.10}


def demo_archetypes() -> ArchetypeTable:
    rows = []
    for cls_name, (orig, retro) in Q_SPEC.items():
        for i, ((lo, hi), q, qr) in enumerate(zip(YEAR_BANDS, orig, retro)):
            rows.append(Archetype(f"{cls_name}_{i + 1}", cls_name, lo, hi, float(q), float(qr)))
    return ArchetypeTable(rows)


def _smooth_bump(hours: np.ndarray, centre: float, width: float) -> np.ndarray:
    d = (hours - centre + 12) % 24 - 12
    return np.exp(-0.5 * (d / width) ** 2)


def target_activity() -> np.ndarray:
    """Synthetic active-occupancy share per hour, shape (24, 2) weekday/weekend."""
    h = np.arange(24, dtype=float)
    weekday = 0.06 + 0.50 * _smooth_bump(h, 7.5, 1.2) + 0.24 * _smooth_bump(h, 13.5, 2.0) + 0.72 * _smooth_bump(h, 20.0, 2.2)
    weekend = 0.06 + 0.46 * _smooth_bump(h, 9.5, 1.8) + 0.34 * _smooth_bump(h, 14.0, 2.2) + 0.70 * _smooth_bump(h, 20.5, 2.4)
    return np.clip(np.column_stack([weekday, weekend]), 0.03, 0.92)


def feasible_mobility(target: np.ndarray, base: float = 0.6, margin: float = 1e-6) -> np.ndarray:
    """Per-hour mobility: ``base`` where feasible, raised where the curve moves fast."""
    keep = np.full(24, 1.0 - base)
    for d in range(2):
        now, nxt = target[:, d], np.roll(target[:, d], -1)
        keep = np.minimum(keep, nxt / now - margin)
        keep = np.minimum(keep, (1.0 - nxt) / (1.0 - now) - margin)
    return 1.0 - np.clip(keep, 0.0, 1.0)


def demo_matrices() -> TransitionMatrixSet:
    target = target_activity()
    return calibrate_matrices(target, feasible_mobility(target))


def packaged_archetypes() -> ArchetypeTable:
    with resources.as_file(resources.files("heatgen") / "data" / ARCHETYPE_FILE) as path:
        return parse_archetypes(path)


def packaged_matrices() -> TransitionMatrixSet:
    with resources.as_file(resources.files("heatgen") / "data" / MATRIX_FILE) as path:
        return parse_matrices(path)


def demo_weather(year: int = 2023, seed: int = 7, mean: float = 15.0, annual_amp: float = 10.5,
                 diurnal_amp: float = 6.5) -> WeatherSeries:
    """Hourly temperature and GHI for one year of a mild continental climate."""
    start = _dt.datetime(year, 1, 1)
    n = 8760
    cal = Calendar.from_start(start, n)
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    day = t // 24
    hour = cal.hour_of_day.astype(float)
    seasonal = mean - annual_amp * np.cos(2 * np.pi * (day - 15) / 365.0)
    # daily weather anomalies: AR(1) with a correlation of a few days
    anomaly = np.empty(n // 24)
    anomaly[0] = 0.0
    eps = rng.normal(0.0, 1.6, size=anomaly.size)
    for i in range(1, anomaly.size):
        anomaly[i] = 0.75 * anomaly[i - 1] + eps[i]
    daily = np.repeat(anomaly, 24)
    # the diurnal swing is wider in summer
    swing = diurnal_amp * (1.0 + 0.2 * np.sin(2 * np.pi * (day - 105) / 365.0))
    diurnal = swing * np.cos(2 * np.pi * (hour - 15) / 24.0)
    temp = np.round(seasonal + daily + diurnal + rng.normal(0.0, 0.3, size=n), 2)

    decl = np.radians(23.44) * np.sin(2 * np.pi * (day + 284) / 365.0)
    lat = np.radians(CENTER[0])
    omega = np.radians(15.0 * (hour + 0.5 - 12.0))
    sin_elev = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(omega)
    clearness = np.repeat(np.clip(rng.normal(0.75, 0.15, size=n // 24), 0.2, 1.0), 24)
    ghi = np.round(np.maximum(sin_elev, 0.0) * 1000.0 * clearness, 1)
    return WeatherSeries(start=start, temp_out=temp, ghi=ghi)


@dataclass
class DemoTown:
    buildings: list[BuildingRecord]
    cadaster: list[CadasterUnit]
    footprints: dict[str, list[list[float]]]  # polygon ring (lon, lat) per id


def _square_ring(lat: float, lon: float, area: float) -> list[list[float]]:
    half = np.sqrt(area) / 2.0
    dlat = np.degrees(half / 6371008.8)
    dlon = np.degrees(half / (6371008.8 * np.cos(np.radians(lat))))
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1), (-1, -1)]
    return [[lon + sx * dlon, lat + sy * dlat] for sx, sy in corners]


def demo_town(n: int = 1000, seed: int = 11) -> DemoTown:
    """A synthetic building inventory with a matching cadaster extract.

    About 5 % of buildings are non-residential, 5 % of residential ones lack
    a construction year and 10 % lack a residential area (to be estimated
    from footprint and floors).  The cadaster covers about a third of the
    residential buildings.
    """
    rng = np.random.default_rng(seed)
    classes = list(CLASS_SHARES)
    shares = np.array(list(CLASS_SHARES.values()))
    width = len(str(n))
    buildings, units, rings = [], [], {}
    for i in range(n):
        bid = f"B{i:0{width}d}"
        lat = CENTER[0] + rng.normal(0, 0.006)
        lon = CENTER[1] + rng.normal(0, 0.008)
        cls_name = classes[rng.choice(len(classes), p=shares)]
        if cls_name == "SFH":
            dwellings, floors = 1, int(rng.integers(1, 3))
            per_dw = rng.uniform(80, 170)
        elif cls_name == "TH":
            dwellings, floors = int(rng.integers(2, 5)), int(rng.integers(1, 3))
            per_dw = rng.uniform(70, 120)
        elif cls_name == "MFH":
            dwellings, floors = int(rng.integers(5, 13)), int(rng.integers(3, 5))
            per_dw = rng.uniform(60, 100)
        else:
            dwellings, floors = int(rng.integers(13, 41)), int(rng.integers(5, 9))
            per_dw = rng.uniform(55, 90)
        area = round(dwellings * per_dw, 1)
        footprint = round(area / floors / 0.8 * rng.uniform(0.95, 1.05), 1)
        year = int(np.clip(rng.normal(1972, 28), 1860, 2022))
        usage = "non_residential" if rng.random() < 0.05 else "residential"
        if rng.random() < 0.05:
            year = None
        res_area = area if usage == "residential" else 0.0
        if usage == "residential" and rng.random() < 0.10:
            res_area = None
        b = BuildingRecord(
            id=bid,
            lat=round(lat, 6),
            lon=round(lon, 6),
            footprint_area=footprint,
            n_floors=floors,
            residential_area=res_area,
            n_dwellings=dwellings,
            construction_year=year,
            usage=usage,
            address=f"Calle Sintetica {i + 1}",
        )
        buildings.append(b)
        rings[bid] = _square_ring(b.lat, b.lon, footprint)
        if usage == "residential" and res_area is not None and rng.random() < 0.33:
            unit_areas = np.round(rng.dirichlet(np.full(dwellings, 8.0)) * area, 1)
            for a in unit_areas:
                units.append(CadasterUnit(bid, float(a), "residential", year))
            if rng.random() < 0.3:
                units.append(CadasterUnit(bid, round(float(rng.uniform(20, 80)), 1), "non_residential", year))
    return DemoTown(buildings, units, rings)


def write_geojson(town: DemoTown, path: str | Path) -> None:
    features = []
    for b in town.buildings:
        props = {
            "id": b.id,
            "n_floors": b.n_floors,
            "residential_area_m2": b.residential_area,
            "n_dwellings": b.n_dwellings,
            "construction_year": b.construction_year,
            "usage": b.usage,
            "address": b.address,
        }
        features.append(
            {
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": [town.footprints[b.id]]},
            }
        )
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": features}), encoding="utf-8")


def write_cadaster(units: list[CadasterUnit], path: str | Path) -> None:
    lines = ["building_id,unit_area_m2,unit_usage,unit_construction_year"]
    for u in units:
        lines.append(f"{u.building_id},{u.area!r},{u.usage},{'' if u.year is None else u.year}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_demo_inputs(out_dir: str | Path, n: int = 1000, seed: int = 11) -> dict[str, Path]:
    """Write a complete input set for the pipeline; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    town = demo_town(n, seed)
    paths = {
        "buildings": out / "buildings.csv",
        "geojson": out / "buildings.geojson",
        "cadaster": out / "cadaster.csv",
        "weather": out / "weather.csv",
        "archetypes": out / "archetypes.csv",
        "matrices": out / "matrices.csv",
    }
    write_buildings(town.buildings, paths["buildings"])
    write_geojson(town, paths["geojson"])
    write_cadaster(town.cadaster, paths["cadaster"])
    write_weather(demo_weather(), paths["weather"])
    write_archetypes(demo_archetypes(), paths["archetypes"])
    write_matrices(demo_matrices(), paths["matrices"])
    return paths
