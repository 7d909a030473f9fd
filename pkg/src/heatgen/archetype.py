"""Typology archetypes and annual heating demand.

A building is mapped to a building class (SFH, TH, MFH, AB) from its
dwelling and floor counts, then to the construction-year band of that
class.  Annual demand is residential area times specific demand.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ClassificationError, InputError, ParseError
from .ingest import BuildingRecord

ARCHETYPE_COLUMNS = ["id", "building_class", "year_min", "year_max", "q_spec_kwh_m2a", "q_spec_retrofit_kwh_m2a"]
BUILDING_CLASSES = ("SFH", "TH", "MFH", "AB")


@dataclass(frozen=True)
class Archetype:
    id: str
    building_class: str
    year_min: int
    year_max: int
    q_spec: float  # kWh/(m2 a), original state
    q_spec_retrofit: float  # kWh/(m2 a)

    def contains(self, year: int) -> bool:
        return self.year_min <= year <= self.year_max


@dataclass(frozen=True)
class BuildingEnergy:
    building_id: str
    archetype_id: str
    building_class: str
    q_spec: float
    q_spec_retrofit: float
    annual_demand: float  # kWh/a
    annual_demand_retrofit: float  # kWh/a
    fallback_used: bool = False


@dataclass(frozen=True)
class ClassRules:
    """Thresholds for deriving the building class; overridable via config."""

    th_max_floors: int = 2
    th_max_dwellings: int = 4
    ab_min_dwellings: int = 13
    ab_min_floors: int = 5

    @classmethod
    def from_config(cls, cfg) -> "ClassRules":
        return cls(cfg.th_max_floors, cfg.th_max_dwellings, cfg.ab_min_dwellings, cfg.ab_min_floors)


class ArchetypeTable:
    """Validated archetype rows indexed by building class."""

    def __init__(self, archetypes: Iterable[Archetype]):
        self.archetypes = list(archetypes)
        if not self.archetypes:
            raise InputError("archetype table is empty")
        self._by_class: dict[str, list[Archetype]] = defaultdict(list)
        ids = set()
        for a in self.archetypes:
            if a.id in ids:
                raise InputError(f"duplicate archetype id {a.id!r}")
            ids.add(a.id)
            if a.building_class not in BUILDING_CLASSES:
                raise InputError(f"archetype {a.id}: unknown building class {a.building_class!r}")
            if a.year_min > a.year_max:
                raise InputError(f"archetype {a.id}: year_min > year_max")
            if not a.q_spec > 0:
                raise InputError(f"archetype {a.id}: q_spec must be > 0")
            if not 0 < a.q_spec_retrofit <= a.q_spec:
                raise InputError(f"archetype {a.id}: need 0 < q_spec_retrofit <= q_spec")
            self._by_class[a.building_class].append(a)
        for cls_name, bands in self._by_class.items():
            bands.sort(key=lambda a: a.year_min)
            for prev, nxt in zip(bands, bands[1:]):
                if nxt.year_min <= prev.year_max:
                    raise InputError(f"{cls_name}: overlapping year bands {prev.id} and {nxt.id}")
                if nxt.year_min != prev.year_max + 1:
                    raise InputError(
                        f"{cls_name}: gap between bands {prev.id} ({prev.year_max}) and {nxt.id} ({nxt.year_min})"
                    )

    @property
    def classes(self) -> list[str]:
        return [c for c in BUILDING_CLASSES if c in self._by_class]

    def bands(self, building_class: str) -> list[Archetype]:
        bands = self._by_class.get(building_class)
        if not bands:
            raise ClassificationError(
                f"no archetype for building class {building_class}; table has {', '.join(self.classes)}"
            )
        return bands

    def by_id(self, archetype_id: str) -> Archetype:
        for a in self.archetypes:
            if a.id == archetype_id:
                return a
        raise KeyError(archetype_id)


def parse_archetypes(path: str | Path) -> ArchetypeTable:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"archetype table not found: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ARCHETYPE_COLUMNS:
            raise ParseError(f"unexpected header {header}; expected {','.join(ARCHETYPE_COLUMNS)}", f"{path}:1")
        for row in reader:
            if not row:
                continue
            location = f"{path}:{reader.line_num}"
            if len(row) != len(ARCHETYPE_COLUMNS):
                raise ParseError(f"expected {len(ARCHETYPE_COLUMNS)} fields, got {len(row)}", location)
            try:
                rows.append(
                    Archetype(row[0], row[1], int(row[2]), int(row[3]), float(row[4]), float(row[5]))
                )
            except ValueError as exc:
                raise ParseError(str(exc), location) from None
    return ArchetypeTable(rows)


def write_archetypes(table: ArchetypeTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ARCHETYPE_COLUMNS)
        for a in table.archetypes:
            writer.writerow([a.id, a.building_class, a.year_min, a.year_max, repr(a.q_spec), repr(a.q_spec_retrofit)])


def derive_class(b: BuildingRecord, rules: ClassRules = ClassRules()) -> str:
    n, floors = b.n_dwellings, b.n_floors
    if n == 1:
        return "SFH"
    if n >= rules.ab_min_dwellings or (floors is not None and floors >= rules.ab_min_floors):
        return "AB"
    if n == 2 or (floors is not None and floors <= rules.th_max_floors and n <= rules.th_max_dwellings):
        return "TH"
    return "MFH"


def fallback_archetype(
    table: ArchetypeTable, building_class: str, weights: Sequence[float] | None = None
) -> Archetype:
    """Year-agnostic archetype for buildings with unknown construction year.

    Specific demand is the mean over the class's bands, arithmetic by
    default or weighted by ``weights`` (one per band, in band order).
    """
    bands = table.bands(building_class)
    if weights is None or sum(weights) <= 0:
        weights = [1.0] * len(bands)
    total = float(sum(weights))
    q = sum(w * a.q_spec for w, a in zip(weights, bands)) / total
    q_r = sum(w * a.q_spec_retrofit for w, a in zip(weights, bands)) / total
    return Archetype(
        id=f"{building_class}_fallback",
        building_class=building_class,
        year_min=bands[0].year_min,
        year_max=bands[-1].year_max,
        q_spec=q,
        q_spec_retrofit=min(q_r, q),
    )


def dataset_share_weights(
    buildings: Iterable[BuildingRecord], table: ArchetypeTable, rules: ClassRules = ClassRules()
) -> dict[str, list[float]]:
    """Residential-area share of year-known buildings per band, by class."""
    weights = {c: [0.0] * len(table.bands(c)) for c in table.classes}
    for b in buildings:
        if not b.is_residential or b.construction_year is None:
            continue
        cls_name = derive_class(b, rules)
        if cls_name not in weights:
            continue
        band = _band_index(table.bands(cls_name), b.construction_year)
        weights[cls_name][band] += b.residential_area or 0.0
    return weights


def _band_index(bands: list[Archetype], year: int) -> int:
    if year < bands[0].year_min:
        return 0
    if year > bands[-1].year_max:
        return len(bands) - 1
    for i, a in enumerate(bands):
        if a.contains(year):
            return i
    raise AssertionError("bands are contiguous")


def classify(
    b: BuildingRecord,
    table: ArchetypeTable,
    rules: ClassRules = ClassRules(),
    fallbacks: dict[str, Archetype] | None = None,
) -> tuple[Archetype, bool]:
    """Assign an archetype; returns ``(archetype, fallback_used)``.

    Years outside the class's declared range are mapped to the nearest band.
    """
    if not b.is_residential:
        raise ClassificationError(f"{b.id}: non-residential building cannot be classified")
    cls_name = derive_class(b, rules)
    bands = table.bands(cls_name)
    if b.construction_year is None:
        if fallbacks and cls_name in fallbacks:
            return fallbacks[cls_name], True
        return fallback_archetype(table, cls_name), True
    return bands[_band_index(bands, b.construction_year)], False


def year_out_of_range(b: BuildingRecord, table: ArchetypeTable, rules: ClassRules = ClassRules()) -> bool:
    if b.construction_year is None:
        return False
    bands = table.bands(derive_class(b, rules))
    return not bands[0].year_min <= b.construction_year <= bands[-1].year_max


def annual_demand(b: BuildingRecord, a: Archetype, fallback_used: bool = False) -> BuildingEnergy:
    if b.residential_area is None or not b.residential_area > 0:
        raise ClassificationError(f"{b.id}: residential area must be > 0")
    return BuildingEnergy(
        building_id=b.id,
        archetype_id=a.id,
        building_class=a.building_class,
        q_spec=a.q_spec,
        q_spec_retrofit=a.q_spec_retrofit,
        annual_demand=b.residential_area * a.q_spec,
        annual_demand_retrofit=b.residential_area * a.q_spec_retrofit,
        fallback_used=fallback_used,
    )
