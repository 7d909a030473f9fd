"""Hourly weather series and the derived weekday/weekend calendar."""
from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError

WEATHER_COLUMNS = ["timestamp", "temp_c", "ghi_wm2"]
MAX_GAP_H = 3
TEMP_RANGE_C = (-60.0, 60.0)

WEEKDAY, WEEKEND = 0, 1
DAY_TYPES = ("weekday", "weekend")


@dataclass(frozen=True)
class WeatherSeries:
    start: _dt.datetime
    temp_out: np.ndarray
    ghi: np.ndarray | None = None
    interpolated: int = 0

    def __len__(self) -> int:
        return int(self.temp_out.size)


@dataclass(frozen=True)
class Calendar:
    """Per-hour day type and hour of day, derived from the start timestamp.

    Saturdays and Sundays are weekend days; holidays are not modelled.
    """

    start: _dt.datetime
    hour_of_day: np.ndarray = field(repr=False)
    day_type: np.ndarray = field(repr=False)  # WEEKDAY / WEEKEND
    date: np.ndarray = field(repr=False)  # datetime64[D]

    @classmethod
    def from_start(cls, start: _dt.datetime, length: int) -> "Calendar":
        base = np.datetime64(start.replace(tzinfo=None), "h")
        stamps = base + np.arange(length).astype("timedelta64[h]")
        days = stamps.astype("datetime64[D]")
        hour = (stamps - days).astype(np.int64)
        # 1970-01-01 was a Thursday (weekday index 3, Monday = 0)
        weekday = (days.astype(np.int64) + 3) % 7
        return cls(
            start=start,
            hour_of_day=hour.astype(np.int8),
            day_type=np.where(weekday >= 5, WEEKEND, WEEKDAY).astype(np.int8),
            date=days,
        )

    @classmethod
    def for_weather(cls, weather: WeatherSeries) -> "Calendar":
        return cls.from_start(weather.start, len(weather))

    def __len__(self) -> int:
        return int(self.hour_of_day.size)

    @property
    def month(self) -> np.ndarray:
        return (self.date.astype("datetime64[M]").astype(np.int64) % 12 + 1).astype(np.int8)


def _parse_timestamp(text: str, location: str) -> _dt.datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        return _dt.datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"invalid ISO-8601 timestamp {text!r}", location) from None


def _fill_gaps(values: np.ndarray, stamps: list[_dt.datetime], name: str) -> int:
    """Linearly interpolate NaN runs of at most MAX_GAP_H hours in place."""
    missing = np.isnan(values)
    if not missing.any():
        return 0
    idx = np.flatnonzero(missing)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    filled = 0
    for run in runs:
        lo, hi = run[0] - 1, run[-1] + 1
        interval = f"{stamps[run[0]].isoformat()} .. {stamps[run[-1]].isoformat()}"
        if len(run) > MAX_GAP_H:
            raise ParseError(f"{name}: gap of {len(run)} h exceeds {MAX_GAP_H} h ({interval})")
        if lo < 0 or hi >= values.size:
            raise ParseError(f"{name}: missing values at series boundary ({interval})")
        frac = (run - lo) / (hi - lo)
        values[run] = values[lo] + frac * (values[hi] - values[lo])
        filled += len(run)
    return filled


def parse_weather(path: str | Path, horizon: int | None = None) -> WeatherSeries:
    """Read ``timestamp,temp_c[,ghi_wm2]`` hourly rows.

    Timestamps must ascend in whole-hour steps.  Missing hours (absent rows
    or empty cells) are linearly interpolated when a run is at most three
    hours long; longer gaps are an error.  With ``horizon`` set, the filled
    series must have exactly that many hours.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"weather file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header not in (WEATHER_COLUMNS[:2], WEATHER_COLUMNS):
            raise ParseError(f"unexpected header {header}; expected timestamp,temp_c[,ghi_wm2]", f"{path}:1")
        has_ghi = len(header) == 3
        stamps: list[_dt.datetime] = []
        temps: list[float] = []
        ghis: list[float] = []
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            location = f"{path}:{lineno}"
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", location)
            ts = _parse_timestamp(row[0], location)
            if stamps:
                step = (ts - stamps[-1]).total_seconds() / 3600
                if step <= 0:
                    raise ParseError(f"timestamps not strictly ascending at {ts.isoformat()}", location)
                if step != int(step):
                    raise ParseError(f"timestamp {ts.isoformat()} is not on the hourly grid", location)
                for _ in range(1, int(step)):
                    stamps.append(stamps[-1] + _dt.timedelta(hours=1))
                    temps.append(np.nan)
                    ghis.append(np.nan)
            stamps.append(ts)
            temps.append(_cell(row[1], location))
            ghis.append(_cell(row[2], location) if has_ghi else np.nan)
    if not stamps:
        raise ParseError("no weather rows", str(path))

    temp = np.asarray(temps, dtype=float)
    filled = _fill_gaps(temp, stamps, "temp_c")
    lo, hi = TEMP_RANGE_C
    bad = np.flatnonzero((temp < lo) | (temp > hi))
    if bad.size:
        raise ParseError(f"temp_c {temp[bad[0]]} outside [{lo}, {hi}] at {stamps[bad[0]].isoformat()}", str(path))
    ghi = None
    if has_ghi:
        ghi = np.asarray(ghis, dtype=float)
        _fill_gaps(ghi, stamps, "ghi_wm2")
        if (ghi < 0).any():
            raise ParseError("negative ghi_wm2", str(path))
    if horizon is not None and temp.size != horizon:
        raise InputError(f"weather series has {temp.size} hours but the simulation horizon is {horizon} h")
    return WeatherSeries(start=stamps[0], temp_out=temp, ghi=ghi, interpolated=filled)


def _cell(text: str, location: str) -> float:
    text = text.strip()
    if not text:
        return np.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", location) from None
    if not np.isfinite(value):
        raise ParseError(f"not finite: {text!r}", location)
    return value


def write_weather(weather: WeatherSeries, path: str | Path) -> None:
    cal_stamps = np.datetime64(weather.start.replace(tzinfo=None), "h") + np.arange(len(weather)).astype(
        "timedelta64[h]"
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WEATHER_COLUMNS if weather.ghi is not None else WEATHER_COLUMNS[:2])
        for i, stamp in enumerate(cal_stamps):
            row = [str(stamp) + ":00", repr(float(weather.temp_out[i]))]
            if weather.ghi is not None:
                row.append(repr(float(weather.ghi[i])))
            writer.writerow(row)
