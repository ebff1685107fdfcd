"""Synthetic fleet scenarios: ground-truth trips plus the snapshot feed they imply.

The feed lists every idle scooter at its (rounded) position on each cadence
tick; scooters mid-trip are absent. Generation is seed-deterministic, so the
same config always produces byte-identical feeds.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from typing import Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .errors import InvalidConfig
from .geo import Bbox, GeoPoint, haversine_m, offset_azimuthal
from .ingest import ScooterObservation, SnapshotBatch, write_snapshot_stream
from .trips import COLOCATION_EPS_M, DEFAULT_TIMEZONE, RawTrip

log = logging.getLogger(__name__)

SLOT_WINDOWS = {
    "morning": (7 * 3600, 11 * 3600),
    "lunch": (11 * 3600, 14 * 3600),
    "afternoon": (14 * 3600, 17 * 3600),
    "evening": (17 * 3600, 19 * 3600),
    "night": (19 * 3600, 21 * 3600),
}
DEFAULT_TRIP_RATES = {"morning": 0.4, "lunch": 0.5, "afternoon": 0.7, "evening": 0.6, "night": 0.5}



@dataclass
class ScenarioConfig:
    rng_seed: int = 7
    fleet_size: int = 25
    days: int = 2
    start_date: date = date(2019, 2, 4)
    cadence_s: int = 600
    timezone: str = DEFAULT_TIMEZONE
    bbox: Bbox = field(
        default_factory=lambda: Bbox(
            GeoPoint(33.74837933333333, -84.40562333333332), GeoPoint(33.789279, -84.35961499999999)
        )
    )
    trip_rates: dict = field(default_factory=lambda: dict(DEFAULT_TRIP_RATES))
    displacement_min_m: float = 100.0
    displacement_max_m: float = 2500.0
    speed_min_mps: float = 2.0
    speed_max_mps: float = 5.0
    anchors: list[GeoPoint] | None = None
    anchor_jitter_m: float = 25.0
    position_jitter_m: float = 0.0
    charging_relocation: bool = True

    def __post_init__(self):
        if self.cadence_s <= 0:
            raise InvalidConfig("cadence_s must be positive")
        if self.fleet_size < 1 or self.days < 1:
            raise InvalidConfig("fleet_size and days must be >= 1")
        if not 0 < self.displacement_min_m < self.displacement_max_m:
            raise InvalidConfig("displacement bounds must satisfy 0 < min < max")
        if not 0 < self.speed_min_mps <= self.speed_max_mps:
            raise InvalidConfig("speed bounds must satisfy 0 < min <= max")
        unknown = set(self.trip_rates) - set(SLOT_WINDOWS)
        if unknown:
            raise InvalidConfig(f"unknown trip-rate slots: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        kwargs = dict(obj)
        if "start_date" in kwargs:
            kwargs["start_date"] = date.fromisoformat(kwargs["start_date"])
        if "bbox" in kwargs:
            b = kwargs["bbox"]
            kwargs["bbox"] = Bbox(GeoPoint(b["min_lat"], b["min_lon"]), GeoPoint(b["max_lat"], b["max_lon"]))
        if kwargs.get("anchors"):
            kwargs["anchors"] = [GeoPoint(a[0], a[1]) for a in kwargs["anchors"]]
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TruthTrip:
    scooter_id: str
    origin: GeoPoint
    destination: GeoPoint
    start_epoch_s: float  # continuous, not quantized to the feed cadence
    end_epoch_s: float


@dataclass
class ScoreReport:
    n_truth: int = 0
    n_recoverable: int = 0
    n_matched: int = 0
    n_unrecoverable: int = 0
    n_extra_extracted: int = 0
    endpoint_mismatches: int = 0
    max_start_error_s: float = 0.0
    max_end_error_s: float = 0.0

    @property
    def recall(self) -> float:
        return self.n_matched / self.n_recoverable if self.n_recoverable else 1.0

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["recall"] = self.recall
        return out


def _round_point(lat: float, lon: float) -> GeoPoint:
    return GeoPoint(float(round(lat, 6)), float(round(lon, 6)))


def _local_epoch(tz: ZoneInfo, day: date, seconds_of_day: float) -> float:
    base = datetime.combine(day, time(0, 0), tzinfo=tz).timestamp()
    return base + seconds_of_day


class _Sampler:
    def __init__(self, cfg: ScenarioConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng

    def initial_position(self) -> GeoPoint:
        if self.cfg.anchors:
            anchor = self.cfg.anchors[int(self.rng.integers(len(self.cfg.anchors)))]
            return self._near(anchor)
        b = self.cfg.bbox
        return _round_point(self.rng.uniform(b.min.lat, b.max.lat), self.rng.uniform(b.min.lon, b.max.lon))

    def _near(self, anchor: GeoPoint) -> GeoPoint:
        jitter = self.cfg.anchor_jitter_m
        p = offset_azimuthal(anchor, float(self.rng.uniform(0, 360)), float(self.rng.uniform(0, jitter)))
        return _round_point(p.lat, p.lon)

    def destination(self, pos: GeoPoint) -> GeoPoint | None:
        cfg = self.cfg
        if cfg.anchors:
            margin = cfg.anchor_jitter_m + 1.0
            lo, hi = cfg.displacement_min_m + margin, cfg.displacement_max_m - margin
            candidates = [a for a in cfg.anchors if lo <= haversine_m(pos, a) <= hi]
            if not candidates:
                return None
            return self._near(candidates[int(self.rng.integers(len(candidates)))])
        for _ in range(32):
            bearing = float(self.rng.uniform(0, 360))
            disp = float(self.rng.uniform(cfg.displacement_min_m, cfg.displacement_max_m))
            dest = offset_azimuthal(pos, bearing, disp)
            if cfg.bbox.contains(dest.lat, dest.lon):
                return _round_point(dest.lat, dest.lon)
        return None


def generate(config: ScenarioConfig) -> tuple[list[TruthTrip], list[SnapshotBatch]]:
    """Produce ground-truth trips and the quantized snapshot feed they imply."""
    cfg = config
    tz = ZoneInfo(cfg.timezone)
    rng = np.random.default_rng(cfg.rng_seed)
    sampler = _Sampler(cfg, rng)

    day_list = [cfg.start_date + timedelta(days=d) for d in range(cfg.days + 1)]
    midnights = [datetime.combine(d, time(0, 0), tzinfo=tz).timestamp() for d in day_list]
    t0 = int(midnights[0])
    t_end = int(midnights[-1])
    ticks = np.arange(t0, t_end, cfg.cadence_s, dtype=np.int64)
    n_ticks = ticks.shape[0]

    def first_tick_gt(t: float) -> int:
        return min(n_ticks, int(math.floor((t - t0) / cfg.cadence_s)) + 1)

    def first_tick_ge(t: float) -> int:
        return min(n_ticks, int(math.ceil((t - t0) / cfg.cadence_s)))

    ids = [f"S{i:05d}" for i in range(cfg.fleet_size)]
    lat_m = np.empty((cfg.fleet_size, n_ticks), dtype=np.float64)
    lon_m = np.empty((cfg.fleet_size, n_ticks), dtype=np.float64)
    present = np.ones((cfg.fleet_size, n_ticks), dtype=bool)

    truth: list[TruthTrip] = []
    slot_order = [s for s in SLOT_WINDOWS if cfg.trip_rates.get(s, 0) > 0]

    for si, sid in enumerate(ids):
        pos = sampler.initial_position()
        disappear_idx: int | None = None
        for d in range(cfg.days):
            day = day_list[d]
            day_start_idx = int(np.searchsorted(ticks, midnights[d], side="left"))
            if d > 0 and cfg.charging_relocation:
                pos = sampler.initial_position()
                # redeployed well before 07:00 so the first trip's origin is observed
                reappear_idx = int(
                    np.searchsorted(ticks, _local_epoch(tz, day, float(rng.uniform(5 * 3600, 6.5 * 3600))), side="left")
                )
                if disappear_idx is not None:
                    present[si, disappear_idx:reappear_idx] = False
            lat_m[si, day_start_idx:] = pos.lat
            lon_m[si, day_start_idx:] = pos.lon

            starts: list[float] = []
            for slot in slot_order:
                lo, hi = SLOT_WINDOWS[slot]
                k = int(rng.poisson(cfg.trip_rates[slot]))
                for _ in range(k):
                    starts.append(_local_epoch(tz, day, float(rng.uniform(lo, hi))))
            starts.sort()
            # trips must end at least one cadence before 21:00 so the quantized
            # end tick still falls inside operating hours
            day_end_limit = _local_epoch(tz, day, 21 * 3600) - cfg.cadence_s - 1.0
            cursor = midnights[d]
            for s in starts:
                if s <= cursor + 1.0:
                    continue
                dest = sampler.destination(pos)
                if dest is None:
                    continue
                speed = float(rng.uniform(cfg.speed_min_mps, cfg.speed_max_mps))
                e = s + haversine_m(pos, dest) / speed
                if e >= day_end_limit:
                    continue
                truth.append(TruthTrip(sid, pos, dest, s, e))
                a = first_tick_gt(s)
                b = first_tick_ge(e)
                present[si, a:b] = False
                lat_m[si, b:] = dest.lat
                lon_m[si, b:] = dest.lon
                pos = dest
                cursor = e
            if cfg.charging_relocation:
                # pickup strictly after 21:00 (first candidate one tick later)
                pickup = _local_epoch(tz, day, float(rng.uniform(21.2 * 3600, 23.8 * 3600)))
                disappear_idx = first_tick_ge(pickup)
            else:
                disappear_idx = None
        if disappear_idx is not None and cfg.charging_relocation:
            present[si, disappear_idx:] = False

    if cfg.position_jitter_m > 0:
        bearings = rng.uniform(0, 360, size=present.shape)
        radii = np.abs(rng.normal(0, cfg.position_jitter_m, size=present.shape))
        for si in range(cfg.fleet_size):
            for j in range(n_ticks):
                if present[si, j]:
                    p = offset_azimuthal(GeoPoint(lat_m[si, j], lon_m[si, j]), bearings[si, j], radii[si, j])
                    lat_m[si, j] = round(p.lat, 6)
                    lon_m[si, j] = round(p.lon, 6)

    utc = timezone.utc
    batches: list[SnapshotBatch] = []
    for j in range(n_ticks):
        rows = np.nonzero(present[:, j])[0]
        col_lat = lat_m[:, j]
        col_lon = lon_m[:, j]
        observations = [
            ScooterObservation(ids[i], GeoPoint(float(col_lat[i]), float(col_lon[i]))) for i in rows
        ]
        batches.append(SnapshotBatch(ts=datetime.fromtimestamp(int(ticks[j]), tz=utc), observations=observations))
    return truth, batches


def write_feed(batches: Sequence[SnapshotBatch], path, *, null_fill_to: int | None = None) -> int:
    """Write the feed as JSONL; null_fill_to pads each batch with null-id records
    up to the fleet size, mirroring a server that reports in-use scooters as null."""
    if null_fill_to is None:
        return write_snapshot_stream(batches, path, format="jsonl")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        n = 0
        for batch in batches:
            scooters = [
                {"id": o.scooter_id, "lat": o.position.lat, "lon": o.position.lon} for o in batch.observations
            ]
            for _ in range(max(0, null_fill_to - len(scooters))):
                scooters.append({"id": None, "lat": 0.0, "lon": 0.0})
            fh.write(
                json.dumps(
                    {"ts": batch.ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"), "scooters": scooters},
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            n += 1
    return n


def save_truth(truth: Sequence[TruthTrip], path, *, cadence_s: int, timezone_name: str) -> None:
    payload = {
        "cadence_s": cadence_s,
        "timezone": timezone_name,
        "trips": [
            {
                "scooter_id": t.scooter_id,
                "origin_lat": t.origin.lat,
                "origin_lon": t.origin.lon,
                "dest_lat": t.destination.lat,
                "dest_lon": t.destination.lon,
                "start_epoch_s": t.start_epoch_s,
                "end_epoch_s": t.end_epoch_s,
            }
            for t in truth
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_truth(path) -> tuple[list[TruthTrip], int, str]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    trips = [
        TruthTrip(
            scooter_id=o["scooter_id"],
            origin=GeoPoint(o["origin_lat"], o["origin_lon"]),
            destination=GeoPoint(o["dest_lat"], o["dest_lon"]),
            start_epoch_s=float(o["start_epoch_s"]),
            end_epoch_s=float(o["end_epoch_s"]),
        )
        for o in payload["trips"]
    ]
    return trips, int(payload.get("cadence_s", 600)), str(payload.get("timezone", DEFAULT_TIMEZONE))


def score(
    truth: Sequence[TruthTrip],
    extracted: Sequence[RawTrip],
    cadence_s: int,
    *,
    timezone_name: str = DEFAULT_TIMEZONE,
    colocation_eps_m: float = COLOCATION_EPS_M,
) -> ScoreReport:
    """Compare extraction output against ground truth.

    A truth trip is recoverable when its endpoints fall in distinct snapshot
    intervals (no same-scooter trip crowds either boundary tick), both
    boundary ticks land on the same local day, and the displacement exceeds
    the colocation epsilon. Every recoverable trip must reappear as exactly
    one extracted trip with exact endpoints and sub-cadence timing error.
    """
    report = ScoreReport(n_truth=len(truth))
    tz = ZoneInfo(timezone_name)

    phase = 0
    if extracted:
        phase = int(min(int(t.start_ts.timestamp()) for t in extracted)) % cadence_s

    def tick_floor(t: float) -> int:
        return phase + int(math.floor((t - phase) / cadence_s)) * cadence_s

    def tick_ceil(t: float) -> int:
        return phase + int(math.ceil((t - phase) / cadence_s)) * cadence_s

    by_key = {}
    for t in extracted:
        by_key[(t.scooter_id, int(t.start_ts.timestamp()), int(t.end_ts.timestamp()))] = t

    per_scooter: dict[str, list[TruthTrip]] = {}
    for t in truth:
        per_scooter.setdefault(t.scooter_id, []).append(t)

    matched_keys = set()
    for sid, trips in per_scooter.items():
        trips.sort(key=lambda t: t.start_epoch_s)
        for i, t in enumerate(trips):
            t1 = tick_floor(t.start_epoch_s)
            t2 = tick_ceil(t.end_epoch_s)
            prev_end = trips[i - 1].end_epoch_s if i > 0 else None
            next_start = trips[i + 1].start_epoch_s if i + 1 < len(trips) else None
            recoverable = (
                (prev_end is None or prev_end <= t1)
                and (next_start is None or next_start >= t2)
                and datetime.fromtimestamp(t1, tz=tz).toordinal() == datetime.fromtimestamp(t2, tz=tz).toordinal()
                and haversine_m(t.origin, t.destination) > colocation_eps_m
            )
            if not recoverable:
                report.n_unrecoverable += 1
                continue
            report.n_recoverable += 1
            hit = by_key.get((sid, t1, t2))
            if hit is None:
                continue
            if hit.origin != t.origin or hit.destination != t.destination:
                report.endpoint_mismatches += 1
                continue
            matched_keys.add((sid, t1, t2))
            report.n_matched += 1
            report.max_start_error_s = max(report.max_start_error_s, t.start_epoch_s - t1)
            report.max_end_error_s = max(report.max_end_error_s, t2 - t.end_epoch_s)
    report.n_extra_extracted = len(by_key) - len(matched_keys)
    return report
