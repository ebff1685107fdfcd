"""Pipeline configuration: a versioned JSON schema. Out of the box: 75/3000 m
cleaning bounds, 07:00-21:00 operating hours, 8x8 harvest and 15x15 densify
grids, 50 m association cutoff, America/New_York local time."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig
from .geo import Bbox, GeoPoint
from .trips import CleaningRules, DEFAULT_TIMEZONE

CONFIG_VERSION = 1

# Default analysis region: midtown/downtown Atlanta.
DEFAULT_REGION = Bbox(
    GeoPoint(33.74837933333333, -84.40562333333332),
    GeoPoint(33.789279, -84.35961499999999),
)


def parse_bbox(spec) -> Bbox:
    """Accept 'minlat,minlon,maxlat,maxlon' or a {min_lat,...} mapping."""
    if isinstance(spec, Bbox):
        return spec
    if isinstance(spec, str):
        parts = [float(x) for x in spec.split(",")]
        if len(parts) != 4:
            raise InvalidConfig(f"bbox must have 4 comma-separated numbers, got {spec!r}")
        return Bbox(GeoPoint(parts[0], parts[1]), GeoPoint(parts[2], parts[3]))
    if isinstance(spec, dict):
        return Bbox(
            GeoPoint(float(spec["min_lat"]), float(spec["min_lon"])),
            GeoPoint(float(spec["max_lat"]), float(spec["max_lon"])),
        )
    raise InvalidConfig(f"unsupported bbox spec: {spec!r}")


def parse_thresholds(spec) -> list[float]:
    """Accept 'start:stop:step' (stop inclusive) or a comma list."""
    if isinstance(spec, (list, tuple)):
        out = [float(x) for x in spec]
    elif ":" in str(spec):
        start, stop, step = (float(x) for x in str(spec).split(":"))
        if step <= 0 or stop < start:
            raise InvalidConfig(f"bad threshold range {spec!r}")
        out = []
        t = start
        while t <= stop + 1e-9:
            out.append(round(t, 9))
            t += step
    else:
        out = [float(x) for x in str(spec).split(",")]
    if sorted(out) != out or any(t < 0 for t in out):
        raise InvalidConfig("thresholds must be ascending and non-negative")
    return out


@dataclass
class PipelineConfig:
    feed: str | None = None
    scenario: str | None = None
    fixtures_dir: str | None = None
    feed_format: str = "jsonl"
    bbox: Bbox = field(default_factory=lambda: DEFAULT_REGION)
    harvest_rows: int = 8
    harvest_cols: int = 8
    densify: bool = True
    densify_rows: int = 15
    densify_cols: int = 15
    densify_fraction: float = 0.25
    plan: str | None = None
    taxonomy: str | None = None
    buffers: str | None = None
    manual_pois: str | None = None
    cleaning: CleaningRules = field(default_factory=CleaningRules)
    cutoff_m: float = 50.0
    thresholds: list[float] = field(default_factory=lambda: parse_thresholds("0:100:5"))
    timezone: str = DEFAULT_TIMEZONE
    query_budget: int = 10_000
    drilldowns: list[str] = field(default_factory=lambda: ["Business:Business"])
    ingest_bbox: bool = False  # crop observations at ingest instead of trips post-clean

    def __post_init__(self):
        if self.cutoff_m < 0:
            raise InvalidConfig("cutoff_m must be >= 0")
        if self.query_budget < 1:
            raise InvalidConfig("query_budget must be >= 1")
        for name in ("harvest_rows", "harvest_cols", "densify_rows", "densify_cols"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if not 0 < self.densify_fraction <= 1:
            raise InvalidConfig("densify_fraction must be in (0, 1]")
        for d in self.drilldowns:
            if ":" not in d:
                raise InvalidConfig(f"drilldown must be 'OriginGroup:DestGroup', got {d!r}")

    def resolve_path(self, value: str | None, base: Path) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else (base / p)


def load_config(path) -> tuple[PipelineConfig, dict]:
    """Load and validate a pipeline config; returns (config, raw dict for hashing).

    Relative paths inside the file resolve against the file's directory.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidConfig("config root must be an object")
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise InvalidConfig(f"unsupported config version {version}; this build reads version {CONFIG_VERSION}")

    base = path.parent
    kwargs: dict = {}
    paths = raw.get("paths", {})
    for key in ("feed", "scenario", "fixtures_dir", "plan", "taxonomy", "buffers", "manual_pois"):
        if paths.get(key) is not None:
            p = Path(paths[key])
            kwargs[key] = str(p if p.is_absolute() else base / p)
    for key in (
        "feed_format",
        "harvest_rows",
        "harvest_cols",
        "densify",
        "densify_rows",
        "densify_cols",
        "densify_fraction",
        "cutoff_m",
        "timezone",
        "query_budget",
        "drilldowns",
        "ingest_bbox",
    ):
        if key in raw:
            kwargs[key] = raw[key]
    if "bbox" in raw and raw["bbox"] is not None:
        kwargs["bbox"] = parse_bbox(raw["bbox"])
    if "cleaning" in raw:
        cleaning = dict(raw["cleaning"])
        cleaning.setdefault("timezone", raw.get("timezone", DEFAULT_TIMEZONE))
        kwargs["cleaning"] = CleaningRules.from_dict(cleaning)
    elif "timezone" in raw:
        kwargs["cleaning"] = CleaningRules(timezone=raw["timezone"])
    if "thresholds" in raw:
        kwargs["thresholds"] = parse_thresholds(raw["thresholds"])
    try:
        cfg = PipelineConfig(**kwargs)
    except TypeError as exc:
        raise InvalidConfig(f"bad config field: {exc}") from None
    return cfg, raw


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()
