import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatgen import demo
from heatgen.archetype import (
    Archetype,
    ArchetypeTable,
    ClassRules,
    annual_demand,
    classify,
    dataset_share_weights,
    derive_class,
    fallback_archetype,
    parse_archetypes,
    write_archetypes,
    year_out_of_range,
)
from heatgen.errors import ClassificationError, InputError, ParseError
from heatgen.ingest import BuildingRecord


def small_table():
    return ArchetypeTable([
        Archetype("SFH_60s", "SFH", 1960, 1969, 180.0, 80.0),
        Archetype("SFH_70s", "SFH", 1970, 1979, 140.0, 60.0),
        Archetype("AB_old", "AB", 1900, 1979, 120.0, 50.0),
        Archetype("AB_new", "AB", 1980, 2030, 80.0, 40.0),
    ])


def rec(bid="b1", n=1, floors=None, year=1975, area=100.0):
    return BuildingRecord(id=bid, lat=38.0, lon=-4.0, residential_area=area, n_dwellings=n, n_floors=floors,
                          construction_year=year)


def test_classify_direct_band_lookup():
    a, fallback = classify(rec(year=1975), small_table())
    assert a.id == "SFH_70s" and a.q_spec == 140.0 and not fallback


def test_classify_missing_year_uses_class_fallback():
    a, fallback = classify(rec(n=20, floors=6, year=None), small_table())
    assert fallback and a.building_class == "AB"
    assert a.q_spec == pytest.approx(100.0)
    assert a.q_spec_retrofit == pytest.approx(45.0)


def test_classify_inclusive_upper_bound():
    assert classify(rec(year=1969), small_table())[0].id == "SFH_60s"
    assert classify(rec(year=1970), small_table())[0].id == "SFH_70s"


def test_classify_clamps_years_outside_declared_range():
    table = small_table()
    assert classify(rec(year=1900), table)[0].id == "SFH_60s"
    assert classify(rec(year=2005), table)[0].id == "SFH_70s"
    assert year_out_of_range(rec(year=2005), table)
    assert not year_out_of_range(rec(year=1965), table)
    assert not year_out_of_range(rec(year=None), table)


def test_classify_unknown_class_lists_it():
    with pytest.raises(ClassificationError, match="MFH"):
        classify(rec(n=8, floors=3), small_table())
    with pytest.raises(ClassificationError):
        classify(BuildingRecord("x", 38, -4, residential_area=50, usage="non_residential"), small_table())


@pytest.mark.parametrize(
    "n, floors, expected",
    [
        (1, None, "SFH"),
        (1, 9, "SFH"),
        (2, None, "TH"),
        (2, 4, "TH"),
        (4, 2, "TH"),
        (3, None, "MFH"),
        (5, 2, "MFH"),
        (12, 4, "MFH"),
        (13, None, "AB"),
        (6, 5, "AB"),
    ],
)
def test_derive_class_thresholds(n, floors, expected):
    assert derive_class(rec(n=n, floors=floors)) == expected


def test_class_rules_are_overridable():
    rules = ClassRules(ab_min_dwellings=8)
    assert derive_class(rec(n=9, floors=3), rules) == "AB"
    assert derive_class(rec(n=9, floors=3)) == "MFH"


def test_annual_demand_examples():
    a = Archetype("a", "SFH", 1900, 2000, 100.0, 50.0)
    e = annual_demand(rec(area=100.0), a)
    assert e.annual_demand == pytest.approx(10_000.0)
    b = Archetype("b", "SFH", 1900, 2000, 140.0, 60.0)
    e = annual_demand(rec(area=115.0), b)
    assert (e.annual_demand, e.annual_demand_retrofit) == pytest.approx((16_100.0, 6_900.0))
    with pytest.raises(ClassificationError):
        annual_demand(BuildingRecord("z", 38, -4, residential_area=None), b)


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(1, 60),
    floors=st.none() | st.integers(1, 20),
    year=st.none() | st.integers(1500, 2024),
    area=st.floats(5.0, 1e4),
)
def test_classification_deterministic_and_retrofit_monotone(n, floors, year, area):
    table = demo.demo_archetypes()
    b = rec(n=n, floors=floors, year=year, area=area)
    a1, f1 = classify(b, table)
    a2, f2 = classify(b, table)
    assert a1 == a2 and f1 == f2
    e = annual_demand(b, a1, f1)
    assert e.annual_demand_retrofit <= e.annual_demand
    assert e.annual_demand == area * a1.q_spec


def test_fallback_weighting():
    table = small_table()
    assert fallback_archetype(table, "SFH").q_spec == pytest.approx(160.0)
    weighted = fallback_archetype(table, "SFH", [3.0, 1.0])
    assert weighted.q_spec == pytest.approx(170.0)
    assert fallback_archetype(table, "SFH", [0.0, 0.0]).q_spec == pytest.approx(160.0)
    buildings = [rec("a", year=1965, area=300.0), rec("b", year=1972, area=100.0), rec("c", year=None)]
    w = dataset_share_weights(buildings, table)
    assert w["SFH"] == [300.0, 100.0] and w["AB"] == [0.0, 0.0]


def test_table_validation():
    with pytest.raises(InputError, match="overlapping"):
        ArchetypeTable([Archetype("a", "SFH", 1900, 1970, 100, 50), Archetype("b", "SFH", 1965, 1990, 90, 40)])
    with pytest.raises(InputError, match="gap"):
        ArchetypeTable([Archetype("a", "SFH", 1900, 1960, 100, 50), Archetype("b", "SFH", 1965, 1990, 90, 40)])
    with pytest.raises(InputError, match="q_spec_retrofit"):
        ArchetypeTable([Archetype("a", "SFH", 1900, 1960, 100, 150)])
    with pytest.raises(InputError, match="q_spec"):
        ArchetypeTable([Archetype("a", "SFH", 1900, 1960, 0, 0)])
    with pytest.raises(InputError, match="class"):
        ArchetypeTable([Archetype("a", "VILLA", 1900, 1960, 100, 50)])
    with pytest.raises(InputError, match="duplicate"):
        ArchetypeTable([Archetype("a", "SFH", 1900, 1960, 100, 50), Archetype("a", "TH", 1900, 1960, 100, 50)])
    with pytest.raises(InputError):
        ArchetypeTable([])


def test_archetype_csv_round_trip(tmp_path):
    table = demo.demo_archetypes()
    write_archetypes(table, tmp_path / "a.csv")
    assert parse_archetypes(tmp_path / "a.csv").archetypes == table.archetypes
    (tmp_path / "bad.csv").write_text("id,class\n")
    with pytest.raises(ParseError):
        parse_archetypes(tmp_path / "bad.csv")
    with pytest.raises(InputError):
        parse_archetypes(tmp_path / "missing.csv")


def test_packaged_table_matches_generator():
    assert demo.packaged_archetypes().archetypes == demo.demo_archetypes().archetypes


def test_demo_table_has_heterogeneous_demand():
    q = np.array([a.q_spec for a in demo.demo_archetypes().archetypes])
    assert q.max() / q.min() >= 2.0


def test_stock_total_demand_is_exact_sum(demo_stock):
    total = sum(r.residential_area * e.q_spec for r, e in zip(demo_stock.records, demo_stock.energies))
    assert demo_stock.ahd.sum() == pytest.approx(total, rel=1e-15)
    assert np.array_equal(demo_stock.ahd_used, demo_stock.ahd)
