"""Engine configuration: a flat ``key = value`` text file.

Lines starting with ``#`` and blank lines are ignored.  Unknown keys are an
error so that typos do not silently fall back to defaults.

Example::

    c_spec = 0.05
    safety_factor = 1.2
    day_window = 7,23
    solar.enabled = false
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

# config key -> dataclass attribute
_KEYS = {
    "c_spec": "c_spec",
    "safety_factor": "safety_factor",
    "design_percentile": "design_percentile",
    "gain_active_kw": "gain_active_kw",
    "gain_inactive_kw": "gain_inactive_kw",
    "usable_fraction": "usable_fraction",
    "day_window": "day_window",
    "global_seed": "global_seed",
    "dt_h": "dt_h",
    "horizon_h": "horizon_h",
    "spinup_h": "spinup_h",
    "setpoint.day_mean": "setpoint_day_mean",
    "setpoint.night_mean": "setpoint_night_mean",
    "setpoint.std": "setpoint_std",
    "solar.enabled": "solar_enabled",
    "solar.g_factor": "solar_g_factor",
    "solar.aperture_per_m2": "solar_aperture_per_m2",
    "occupancy.per_dwelling": "per_dwelling",
    "archetype.fallback_weighting": "fallback_weighting",
    "class.th_max_floors": "th_max_floors",
    "class.th_max_dwellings": "th_max_dwellings",
    "class.ab_min_dwellings": "ab_min_dwellings",
    "class.ab_min_floors": "ab_min_floors",
    "failure_threshold": "failure_threshold",
    "heating_season_months": "heating_season_months",
    "chunk_size": "chunk_size",
}


@dataclass(frozen=True)
class EngineConfig:
    c_spec: float = 0.05  # kWh/(K m2)
    safety_factor: float = 1.2
    design_percentile: float = 1.0
    gain_active_kw: float = 0.10  # per dwelling, synthetic default
    gain_inactive_kw: float = 0.02  # per dwelling, synthetic default
    usable_fraction: float = 0.8
    day_window: tuple[int, int] = (7, 23)
    global_seed: int | None = None
    dt_h: float = 1.0
    horizon_h: int = 8760
    # warm-up hours wrapped from the end of the year, discarded from output
    spinup_h: int = 168
    setpoint_day_mean: float = 21.0
    setpoint_night_mean: float = 16.0
    setpoint_std: float = 2.0
    solar_enabled: bool = False
    solar_g_factor: float = 0.5  # synthetic default
    solar_aperture_per_m2: float = 0.0  # effective aperture per m2 residential area
    per_dwelling: bool = False
    fallback_weighting: str = "arithmetic"
    th_max_floors: int = 2
    th_max_dwellings: int = 4
    ab_min_dwellings: int = 13
    ab_min_floors: int = 5
    failure_threshold: float = 0.10
    heating_season_months: tuple[int, ...] = (10, 11, 12, 1, 2, 3, 4)
    # buildings per simulation batch; results do not depend on it
    chunk_size: int = 500

    def __post_init__(self):
        if not self.c_spec > 0:
            raise ConfigError(f"c_spec must be > 0, got {self.c_spec}")
        if not self.safety_factor > 0:
            raise ConfigError(f"safety_factor must be > 0, got {self.safety_factor}")
        if not 0 < self.design_percentile < 100:
            raise ConfigError("design_percentile must be in (0, 100)")
        if self.gain_active_kw < 0 or self.gain_inactive_kw < 0:
            raise ConfigError("internal gains must be >= 0")
        if not 0 < self.usable_fraction <= 1:
            raise ConfigError("usable_fraction must be in (0, 1]")
        if len(self.day_window) != 2:
            raise ConfigError("day_window must be 'start,end'")
        start, end = self.day_window
        if not 0 <= start <= end <= 24:
            raise ConfigError(f"day_window must satisfy 0 <= start <= end <= 24, got {self.day_window}")
        if self.global_seed is not None and not 0 <= self.global_seed < 2**64:
            raise ConfigError("global_seed must be an unsigned 64-bit integer")
        if not self.dt_h > 0:
            raise ConfigError("dt_h must be > 0")
        if self.horizon_h < 1:
            raise ConfigError("horizon_h must be >= 1")
        if self.spinup_h < 0:
            raise ConfigError("spinup_h must be >= 0")
        if self.setpoint_std < 0:
            raise ConfigError("setpoint.std must be >= 0")
        if self.fallback_weighting not in ("arithmetic", "dataset_share"):
            raise ConfigError("archetype.fallback_weighting must be 'arithmetic' or 'dataset_share'")
        if not 0 <= self.failure_threshold <= 1:
            raise ConfigError("failure_threshold must be in [0, 1]")
        if any(not 1 <= m <= 12 for m in self.heating_season_months):
            raise ConfigError("heating_season_months must be month numbers 1..12")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")

    @classmethod
    def from_mapping(cls, items: Mapping[str, str]) -> "EngineConfig":
        defaults = cls()
        kwargs: dict[str, Any] = {}
        for key, raw in items.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            attr = _KEYS[key]
            kwargs[attr] = _coerce(key, raw, getattr(defaults, attr))
        return replace(defaults, **kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_mapping(read_key_values(path))

    def to_items(self) -> list[tuple[str, str]]:
        """Serialize to ``(key, value)`` pairs; round-trips through from_mapping."""
        out = []
        for key, attr in _KEYS.items():
            value = getattr(self, attr)
            out.append((key, _format(value)))
        return out


def read_key_values(path: str | Path) -> dict[str, str]:
    items: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            items[key.strip()] = value.strip()
    return items


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _coerce(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if key == "global_seed":
            return int(raw) if raw else None
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
