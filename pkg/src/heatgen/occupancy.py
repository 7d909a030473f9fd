"""Two-state Markov chain occupancy profiles.

State 1 means residents are at home and awake ("active"), state 0 means
away or asleep.  Transition probabilities depend on the hour of day and on
weekday vs. weekend; the matrix for hour ``h`` maps the state at ``h`` to
the state at ``h + 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError
from .weather import DAY_TYPES, Calendar

MATRIX_COLUMNS = ["day_type", "hour", "p_ii", "p_ia", "p_ai", "p_aa"]
ROW_TOL = 1e-9
DAY_START, DAY_END = 7, 22  # inclusive hour range where a run starts active by default


@dataclass(frozen=True)
class TransitionMatrixSet:
    """``p[d, h, s, s2]``: probability of state ``s2`` at h+1 given ``s`` at h.

    ``d`` is the day type index (0 weekday, 1 weekend).
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 24, 2, 2):
            raise InputError(f"transition matrices must have shape (2, 24, 2, 2), got {p.shape}")
        if not np.isfinite(p).all() or (p < 0).any() or (p > 1).any():
            d, h = np.argwhere(~((p >= 0) & (p <= 1)).all(axis=(2, 3)))[0]
            raise InputError(f"{DAY_TYPES[d]} hour {h}: probabilities outside [0, 1]")
        err = np.abs(p.sum(axis=3) - 1.0)
        if (err > ROW_TOL).any():
            d, h, s = np.argwhere(err > ROW_TOL)[0]
            raise InputError(f"{DAY_TYPES[d]} hour {h}: row {'ia'[s]}* sums to {p[d, h, s].sum():.12g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def p_active(self) -> np.ndarray:
        """``[d, h, s]`` probability of being active next hour."""
        return self.p[..., 1]

    def matrix(self, day_type: int, hour: int) -> np.ndarray:
        return self.p[day_type, hour]


@dataclass(frozen=True)
class OccupancyProfile:
    building_id: str
    seed: int
    values: np.ndarray  # bool, length T
    active_count: np.ndarray | None = None  # active dwellings per hour (per-dwelling mode)
    n_dwellings: int = 1


def parse_matrices(path: str | Path) -> TransitionMatrixSet:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"transition matrix file not found: {path}")
    p = np.full((2, 24, 2, 2), np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MATRIX_COLUMNS:
            raise ParseError(f"unexpected header {header}; expected {','.join(MATRIX_COLUMNS)}", f"{path}:1")
        for row in reader:
            if not row:
                continue
            location = f"{path}:{reader.line_num}"
            if len(row) != len(MATRIX_COLUMNS):
                raise ParseError(f"expected {len(MATRIX_COLUMNS)} fields, got {len(row)}", location)
            if row[0] not in DAY_TYPES:
                raise ParseError(f"unknown day_type {row[0]!r}", location)
            try:
                hour = int(row[1])
                p_ii, p_ia, p_ai, p_aa = (float(v) for v in row[2:])
            except ValueError as exc:
                raise ParseError(str(exc), location) from None
            if not 0 <= hour <= 23:
                raise ParseError(f"hour {hour} outside 0..23", location)
            d = DAY_TYPES.index(row[0])
            if not np.isnan(p[d, hour]).all():
                raise ParseError(f"duplicate entry for {row[0]} hour {hour}", location)
            p[d, hour] = [[p_ii, p_ia], [p_ai, p_aa]]
    missing = np.argwhere(np.isnan(p).any(axis=(2, 3)))
    if missing.size:
        listed = ", ".join(f"{DAY_TYPES[d]} {h}" for d, h in missing[:5])
        raise InputError(f"{path}: incomplete matrix set, {len(missing)} of 48 missing ({listed} ...)")
    return TransitionMatrixSet(p)


def write_matrices(m: TransitionMatrixSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MATRIX_COLUMNS)
        for d, name in enumerate(DAY_TYPES):
            for h in range(24):
                (a, b), (c, e) = m.p[d, h]
                writer.writerow([name, h, repr(float(a)), repr(float(b)), repr(float(c)), repr(float(e))])


def calibrate_matrices(target_share, mobility) -> TransitionMatrixSet:
    """Build matrices reproducing a target hourly activity curve.

    ``target_share`` has shape (24, 2): the active fraction per hour of day
    for weekday and weekend.  ``mobility`` (scalar or length 24) sets the
    chain's lag-one persistence, ``p_aa - p_ia = 1 - mobility``: 1 gives
    independent hours, values near 0 give nearly frozen states.  Hour 23
    transitions to hour 0 of the same day type.
    """
    target = np.asarray(target_share, dtype=float)
    if target.shape != (24, 2):
        raise InputError(f"target_share must have shape (24, 2), got {target.shape}")
    if ((target <= 0) | (target >= 1)).any():
        raise InputError("target_share values must lie in (0, 1)")
    mob = np.broadcast_to(np.asarray(mobility, dtype=float), (24,))
    if ((mob <= 0) | (mob > 1)).any():
        raise InputError("mobility values must lie in (0, 1]")

    p = np.empty((2, 24, 2, 2))
    for d in range(2):
        for h in range(24):
            now, nxt = target[h, d], target[(h + 1) % 24, d]
            keep = 1.0 - mob[h]
            p_ia = nxt - now * keep
            p_aa = p_ia + keep
            if not (0 <= p_ia <= 1 and 0 <= p_aa <= 1):
                raise InputError(
                    f"{DAY_TYPES[d]} hour {h}: target {now:.4f} -> {nxt:.4f} infeasible at mobility {mob[h]:.4f}"
                )
            p[d, h] = [[1.0 - p_ia, p_ia], [1.0 - p_aa, p_aa]]
    return TransitionMatrixSet(p)


def default_initial_state(cal: Calendar) -> bool:
    return bool(DAY_START <= int(cal.hour_of_day[0]) <= DAY_END)


def sample_chains(
    m: TransitionMatrixSet,
    cal: Calendar,
    seeds,
    initial_active=None,
) -> np.ndarray:
    """Sample one chain per seed; returns a bool array of shape (T, len(seeds)).

    Each chain draws its uniforms from a private generator built from its
    own seed, so a chain's values do not depend on which other chains are
    sampled alongside it.
    """
    seeds = [int(s) for s in seeds]
    T, n = len(cal), len(seeds)
    if initial_active is None:
        initial_active = default_initial_state(cal)
    state = np.broadcast_to(np.asarray(initial_active, dtype=bool), (n,)).copy()
    out = np.empty((T, n), dtype=bool)
    out[0] = state
    if T == 1 or n == 0:
        return out
    u = np.empty((T - 1, n))
    for j, s in enumerate(seeds):
        u[:, j] = np.random.default_rng(s).random(T - 1)
    pa = m.p_active
    day, hour = cal.day_type, cal.hour_of_day
    for t in range(T - 1):
        row = pa[day[t], hour[t]]
        state = u[t] < np.where(state, row[1], row[0])
        out[t + 1] = state
    return out


def generate_profile(
    m: TransitionMatrixSet,
    cal: Calendar,
    seed: int,
    initial_active: bool | None = None,
    building_id: str = "",
) -> OccupancyProfile:
    values = sample_chains(m, cal, [seed], initial_active)[:, 0]
    return OccupancyProfile(building_id, int(seed), values)


def average_activity(profiles, cal: Calendar) -> np.ndarray:
    """Mean activity per (day type, hour of day), shape (2, 24).

    ``profiles`` is a list of :class:`OccupancyProfile` or a (T, N) array.
    Buckets with no samples are NaN.
    """
    if isinstance(profiles, np.ndarray):
        values = profiles.astype(float)
        if values.ndim == 1:
            values = values[:, None]
    else:
        if not profiles:
            raise ValueError("average_activity needs at least one profile")
        lengths = {p.values.size for p in profiles}
        if len(lengths) != 1:
            raise ValueError(f"profiles have unequal lengths {sorted(lengths)}")
        values = np.column_stack([p.values for p in profiles]).astype(float)
    if values.shape[1] == 0:
        raise ValueError("average_activity needs at least one profile")
    if values.shape[0] != len(cal):
        raise ValueError("profile length does not match the calendar")
    return bucket_mean(values.mean(axis=1), cal)


def bucket_mean(series: np.ndarray, cal: Calendar) -> np.ndarray:
    """Average a length-T series into (day type, hour of day) buckets."""
    key = cal.day_type.astype(np.int64) * 24 + cal.hour_of_day
    sums = np.bincount(key, weights=series, minlength=48)
    counts = np.bincount(key, minlength=48)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (sums / counts).reshape(2, 24)


def propagate_marginals(m: TransitionMatrixSet, cal: Calendar, initial_active: bool | None = None) -> np.ndarray:
    """Exact probability of being active at each hour, starting from a fixed state."""
    if initial_active is None:
        initial_active = default_initial_state(cal)
    dist = np.array([0.0, 1.0]) if initial_active else np.array([1.0, 0.0])
    out = np.empty(len(cal))
    out[0] = dist[1]
    for t in range(len(cal) - 1):
        dist = dist @ m.p[cal.day_type[t], cal.hour_of_day[t]]
        out[t + 1] = dist[1]
    return out
