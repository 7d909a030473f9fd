"""Building inventory ingestion.

Reads the canonical buildings CSV or a GeoJSON export, merges unit-level
cadaster rows, and fills in missing residential areas from footprint and
floor count.  Rows that fail validation are rejected with a
:class:`Diagnostic` rather than silently dropped.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import EmptyDatasetError, InputError, ParseError, ValidationError

BUILDING_COLUMNS = [
    "id",
    "lat",
    "lon",
    "footprint_area_m2",
    "n_floors",
    "residential_area_m2",
    "n_dwellings",
    "construction_year",
    "usage",
    "address",
]
FLAG_COLUMN = "area_estimated"
CADASTER_COLUMNS = ["building_id", "unit_area_m2", "unit_usage", "unit_construction_year"]
USAGES = ("residential", "non_residential")
EARTH_RADIUS_M = 6371008.8
MIN_YEAR = 1500

# OSM tag spellings accepted as GeoJSON property aliases
_GEOJSON_ALIASES = {
    "building:levels": "n_floors",
    "building:flats": "n_dwellings",
}


@dataclass(frozen=True)
class BuildingRecord:
    id: str
    lat: float
    lon: float
    footprint_area: float | None = None
    n_floors: int | None = None
    residential_area: float | None = None
    n_dwellings: int = 1
    construction_year: int | None = None
    usage: str = "residential"
    address: str | None = None
    area_estimated: bool = False

    @property
    def is_residential(self) -> bool:
        return self.usage == "residential"


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" (record excluded) or "warning"
    building_id: str
    source: str
    message: str

    def as_row(self) -> list[str]:
        return [self.level, self.building_id, self.source, self.message]


DIAGNOSTIC_COLUMNS = ["level", "building_id", "source", "message"]


def write_diagnostics(diagnostics: Iterable[Diagnostic], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for d in diagnostics:
            writer.writerow(d.as_row())


def validate_record(b: BuildingRecord, current_year: int | None = None) -> None:
    """Raise :class:`ValidationError` if ``b`` violates a record invariant.

    A residential building without an area passes here; it is resolved
    (or excluded) later by :func:`estimate_missing_area`.
    """
    current_year = current_year or _dt.date.today().year
    if not b.id:
        raise ValidationError("empty building id")
    if not (-90 <= b.lat <= 90 and -180 <= b.lon <= 180):
        raise ValidationError(f"coordinates out of range: lat={b.lat}, lon={b.lon}")
    if b.usage not in USAGES:
        raise ValidationError(f"unknown usage {b.usage!r}")
    if b.residential_area is not None and not b.residential_area > 0 and b.is_residential:
        raise ValidationError(f"residential_area must be > 0 for residential usage, got {b.residential_area}")
    if b.residential_area is not None and b.residential_area < 0:
        raise ValidationError(f"negative residential_area {b.residential_area}")
    if b.footprint_area is not None and not b.footprint_area > 0:
        raise ValidationError(f"footprint_area must be > 0, got {b.footprint_area}")
    if b.n_dwellings < 1:
        raise ValidationError(f"n_dwellings must be >= 1, got {b.n_dwellings}")
    if b.n_floors is not None and b.n_floors < 1:
        raise ValidationError(f"n_floors must be >= 1, got {b.n_floors}")
    if b.construction_year is not None and not MIN_YEAR <= b.construction_year <= current_year:
        raise ValidationError(
            f"construction_year {b.construction_year} outside [{MIN_YEAR}, {current_year}]"
        )


# -- field conversion --------------------------------------------------------


def _opt_float(text: str, name: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"{name}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"{name}: not finite: {text!r}")
    return value


def _opt_int(text, name: str) -> int | None:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        if float(text) != int(text):
            raise ValidationError(f"{name}: not an integer: {text!r}")
        return int(text)
    text = str(text).strip() if text is not None else ""
    if not text:
        return None
    try:
        return int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise ValidationError(f"{name}: not an integer: {text!r}") from None
        if value != int(value):
            raise ValidationError(f"{name}: not an integer: {text!r}") from None
        return int(value)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("", "false", "0"):
        return False
    if low in ("true", "1"):
        return True
    raise ValidationError(f"{FLAG_COLUMN}: expected true/false, got {text!r}")


def _text(value) -> str:
    return "" if value is None else str(value)


def _record_from_fields(values: dict) -> BuildingRecord:
    lat = _opt_float(_text(values.get("lat")), "lat")
    lon = _opt_float(_text(values.get("lon")), "lon")
    if lat is None or lon is None:
        raise ValidationError("lat and lon are required")
    usage = _text(values.get("usage")).strip()
    if usage not in USAGES:
        raise ValidationError(f"unknown usage {usage!r}")
    n_dwellings = _opt_int(values.get("n_dwellings"), "n_dwellings")
    address = values.get("address")
    address = str(address) if address not in (None, "") else None
    return BuildingRecord(
        id=_text(values.get("id")).strip(),
        lat=lat,
        lon=lon,
        footprint_area=_opt_float(_text(values.get("footprint_area_m2")), "footprint_area_m2"),
        n_floors=_opt_int(values.get("n_floors"), "n_floors"),
        residential_area=_opt_float(_text(values.get("residential_area_m2")), "residential_area_m2"),
        n_dwellings=1 if n_dwellings is None else n_dwellings,
        construction_year=_opt_int(values.get("construction_year"), "construction_year"),
        usage=usage,
        address=address,
        area_estimated=_parse_bool(_text(values.get(FLAG_COLUMN))),
    )


# -- readers -----------------------------------------------------------------


def parse_buildings(
    path: str | Path, source_kind: str | None = None
) -> tuple[list[BuildingRecord], list[Diagnostic]]:
    """Parse a buildings file into validated records.

    ``source_kind`` is ``"csv"`` or ``"geojson"``; inferred from the file
    suffix when omitted.  Returns the accepted records and one diagnostic
    per rejected row.  Raises :class:`ParseError` for structural problems
    and :class:`EmptyDatasetError` if no row is valid.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"buildings file not found: {path}")
    if source_kind is None:
        source_kind = "geojson" if path.suffix.lower() in (".geojson", ".json") else "csv"
    if source_kind == "csv":
        rows = _iter_csv_rows(path)
    elif source_kind == "geojson":
        rows = _iter_geojson_rows(path)
    else:
        raise InputError(f"unknown source kind {source_kind!r}")

    records: list[BuildingRecord] = []
    diagnostics: list[Diagnostic] = []
    seen: set[str] = set()
    for location, values in rows:
        bid = _text(values.get("id")).strip()
        try:
            record = _record_from_fields(values)
            validate_record(record)
            if record.id in seen:
                raise ValidationError("duplicate building id")
        except ValidationError as exc:
            diagnostics.append(Diagnostic("error", bid, location, str(exc)))
            continue
        seen.add(record.id)
        records.append(record)
    if not records:
        raise EmptyDatasetError(f"no valid buildings in {path}", diagnostics)
    return records, diagnostics


def _iter_csv_rows(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", f"{path}:1") from None
        if header not in (BUILDING_COLUMNS, BUILDING_COLUMNS + [FLAG_COLUMN]):
            raise ParseError(
                f"unexpected header {header}; expected {','.join(BUILDING_COLUMNS)}", f"{path}:1"
            )
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", f"{path}:{lineno}")
            yield f"line {lineno}", dict(zip(header, row))


def _iter_geojson_rows(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("expected a GeoJSON FeatureCollection", str(path))
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParseError("FeatureCollection without a features list", str(path))
    for index, feature in enumerate(features):
        location = f"feature {index}"
        if not isinstance(feature, dict) or feature.get("type") != "Feature":
            raise ParseError("not a GeoJSON Feature", location)
        props = dict(feature.get("properties") or {})
        for alias, name in _GEOJSON_ALIASES.items():
            if alias in props and props.get(name) in (None, ""):
                props[name] = props.pop(alias)
        if props.get("id") in (None, ""):
            props["id"] = feature.get("id", props.get("@id", ""))
        geometry = feature.get("geometry")
        if geometry:
            try:
                area, (clat, clon) = geometry_area_centroid(geometry)
            except ValueError as exc:
                raise ParseError(str(exc), location) from None
            if area is not None:
                props["footprint_area_m2"] = repr(area)
            if props.get("lat") in (None, ""):
                props["lat"] = clat
            if props.get("lon") in (None, ""):
                props["lon"] = clon
        yield location, {k: ("" if v is None else v) for k, v in props.items()}


# -- geometry ----------------------------------------------------------------


def _ring_area_centroid(xy: np.ndarray) -> tuple[float, float, float]:
    x, y = xy[:, 0], xy[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y1 - x1 * y
    a = 0.5 * cross.sum()
    if a == 0:
        return 0.0, float(x.mean()), float(y.mean())
    cx = ((x + x1) * cross).sum() / (6 * a)
    cy = ((y + y1) * cross).sum() / (6 * a)
    return float(a), float(cx), float(cy)


def geometry_area_centroid(geometry: dict) -> tuple[float | None, tuple[float, float]]:
    """Planar area (m²) and centroid (lat, lon) of a GeoJSON geometry.

    Coordinates are projected on a local equirectangular plane centred on
    the mean vertex latitude.  Holes are subtracted.  Points have no area.
    """
    kind = geometry.get("type")
    coords = geometry.get("coordinates")
    if kind == "Point":
        lon, lat = coords[:2]
        return None, (float(lat), float(lon))
    if kind == "Polygon":
        polygons = [coords]
    elif kind == "MultiPolygon":
        polygons = coords
    else:
        raise ValueError(f"unsupported geometry type {kind!r}")
    try:
        rings = [[np.asarray(r, dtype=float)[:, :2] for r in poly] for poly in polygons]
    except (TypeError, ValueError, IndexError):
        raise ValueError("malformed polygon coordinates") from None
    allpts = np.concatenate([r for poly in rings for r in poly])
    lat0 = float(allpts[:, 1].mean())
    lon0 = float(allpts[:, 0].mean())
    kx = EARTH_RADIUS_M * math.cos(math.radians(lat0)) * math.pi / 180
    ky = EARTH_RADIUS_M * math.pi / 180

    total = 0.0
    mx = my = 0.0
    for poly in rings:
        for i, ring in enumerate(poly):
            if len(ring) < 3:
                raise ValueError("polygon ring with fewer than 3 positions")
            if np.array_equal(ring[0], ring[-1]):
                ring = ring[:-1]
            xy = np.column_stack(((ring[:, 0] - lon0) * kx, (ring[:, 1] - lat0) * ky))
            a, cx, cy = _ring_area_centroid(xy)
            a = abs(a) if i == 0 else -abs(a)
            total += a
            mx += a * cx
            my += a * cy
    if total <= 0:
        return None, (lat0, lon0)
    return total, (lat0 + my / total / ky, lon0 + mx / total / kx)


# -- writer ------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def buildings_to_csv(records: Iterable[BuildingRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BUILDING_COLUMNS + [FLAG_COLUMN])
    for b in records:
        writer.writerow(
            [
                b.id,
                _fmt(b.lat),
                _fmt(b.lon),
                _fmt(b.footprint_area),
                _fmt(b.n_floors),
                _fmt(b.residential_area),
                _fmt(b.n_dwellings),
                _fmt(b.construction_year),
                b.usage,
                _fmt(b.address),
                _fmt(b.area_estimated),
            ]
        )
    return buf.getvalue()


def write_buildings(records: Iterable[BuildingRecord], path: str | Path) -> None:
    Path(path).write_text(buildings_to_csv(records), encoding="utf-8")


# -- cadaster ----------------------------------------------------------------


@dataclass(frozen=True)
class CadasterUnit:
    building_id: str
    area: float
    usage: str
    year: int | None


def parse_cadaster(path: str | Path) -> tuple[list[CadasterUnit], list[Diagnostic]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"cadaster file not found: {path}")
    units, diagnostics = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CADASTER_COLUMNS:
            raise ParseError(f"unexpected header {header}; expected {','.join(CADASTER_COLUMNS)}", f"{path}:1")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(CADASTER_COLUMNS):
                raise ParseError(f"expected {len(CADASTER_COLUMNS)} fields, got {len(row)}", f"{path}:{lineno}")
            bid, area_s, usage, year_s = row
            try:
                area = _opt_float(area_s, "unit_area_m2")
                if area is None or area < 0:
                    raise ValidationError(f"unit_area_m2 must be >= 0, got {area_s!r}")
                if usage not in USAGES:
                    raise ValidationError(f"unknown unit_usage {usage!r}")
                year = _opt_int(year_s, "unit_construction_year")
            except ValidationError as exc:
                diagnostics.append(Diagnostic("warning", bid, f"cadaster line {lineno}", f"unit row skipped: {exc}"))
                continue
            units.append(CadasterUnit(bid.strip(), area, usage, year))
    return units, diagnostics


def _modal_year(years: list[int]) -> int | None:
    if not years:
        return None
    counts = Counter(years)
    best = max(counts.values())
    return min(y for y, c in counts.items() if c == best)


def merge_cadaster(
    buildings: list[BuildingRecord], cadaster: str | Path | list[CadasterUnit]
) -> tuple[list[BuildingRecord], list[Diagnostic]]:
    """Aggregate unit-level cadaster rows onto buildings.

    Per building with residential units: ``n_dwellings`` is the number of
    residential units, ``residential_area`` their summed area and
    ``construction_year`` the most frequent unit year (ties resolve to the
    oldest).  A building whose units are all non-residential becomes
    ``non_residential``.  Buildings without cadaster rows are unchanged.
    Rows for unknown building ids are skipped with a warning.
    """
    diagnostics: list[Diagnostic] = []
    if isinstance(cadaster, (str, Path)):
        units, diagnostics = parse_cadaster(cadaster)
    else:
        units = list(cadaster)
    known = {b.id for b in buildings}
    by_building: dict[str, list[CadasterUnit]] = defaultdict(list)
    for u in units:
        if u.building_id not in known:
            diagnostics.append(
                Diagnostic("warning", u.building_id, "cadaster", "building id not in inventory; unit row skipped")
            )
            continue
        by_building[u.building_id].append(u)

    merged = []
    for b in buildings:
        rows = by_building.get(b.id)
        if not rows:
            merged.append(b)
            continue
        res = [u for u in rows if u.usage == "residential"]
        if not res:
            year = _modal_year([u.year for u in rows if u.year is not None])
            merged.append(
                replace(
                    b,
                    usage="non_residential",
                    construction_year=year if year is not None else b.construction_year,
                )
            )
            continue
        area = math.fsum(u.area for u in res)
        year = _modal_year([u.year for u in res if u.year is not None])
        merged.append(
            replace(
                b,
                usage="residential",
                n_dwellings=len(res),
                residential_area=area,
                construction_year=year if year is not None else b.construction_year,
                area_estimated=False,
            )
        )
    return merged, diagnostics


# -- area estimation ---------------------------------------------------------


def estimate_missing_area(b: BuildingRecord, usable_fraction: float = 0.8) -> BuildingRecord:
    """Fill ``residential_area`` from footprint × floors × usable fraction.

    A record that already has an area is returned unchanged.  Raises
    :class:`ValidationError` when neither the area nor both footprint and
    floor count are available.
    """
    if b.residential_area is not None:
        return b
    if b.footprint_area is None or b.n_floors is None:
        raise ValidationError("residential area unknown and footprint/floors unavailable for estimation")
    return replace(b, residential_area=b.footprint_area * b.n_floors * usable_fraction, area_estimated=True)


def normalize_buildings(
    buildings: list[BuildingRecord],
    cadaster: str | Path | list[CadasterUnit] | None = None,
    usable_fraction: float = 0.8,
) -> tuple[list[BuildingRecord], list[Diagnostic]]:
    """Cadaster merge, area estimation and final validation, in that order.

    Output is sorted by building id.
    """
    diagnostics: list[Diagnostic] = []
    if cadaster is not None:
        buildings, diags = merge_cadaster(buildings, cadaster)
        diagnostics.extend(diags)
    out = []
    for b in sorted(buildings, key=lambda r: r.id):
        if b.is_residential:
            try:
                b = estimate_missing_area(b, usable_fraction)
                validate_record(b)
            except ValidationError as exc:
                diagnostics.append(Diagnostic("error", b.id, "normalize", str(exc)))
                continue
        out.append(b)
    if not out:
        raise EmptyDatasetError("no buildings left after normalization", diagnostics)
    return out, diagnostics
