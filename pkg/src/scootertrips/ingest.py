"""Parse fleet-availability snapshot feeds into an ordered stream of batches.

Feed formats:
  jsonl - one JSON object per server update:
          {"ts": "<RFC3339>", "scooters": [{"id": "<str|null>", "lat": <f64>, "lon": <f64>}, ...]}
  csv   - columns ts,id,lat,lon; consecutive rows sharing ts form one batch.

Records whose id is null (the feed's marker for a scooter in use) are counted
and dropped; duplicate ids within a batch keep the first occurrence.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

from .errors import MalformedRecord, NonMonotonicTimestamp
from .geo import Bbox, GeoPoint, is_valid_point

log = logging.getLogger(__name__)

FORMATS = ("jsonl", "csv")


class ScooterObservation(NamedTuple):
    scooter_id: str
    position: GeoPoint


@dataclass
class SnapshotBatch:
    ts: datetime  # UTC, second resolution
    observations: list[ScooterObservation]


@dataclass
class IngestStats:
    batches: int = 0
    retained: int = 0
    dropped_null_id: int = 0  # scooters in use at update time
    dropped_duplicate_id: int = 0

    @property
    def input_records(self) -> int:
        return self.retained + self.dropped_null_id + self.dropped_duplicate_id

    def to_dict(self) -> dict:
        return {
            "batches": self.batches,
            "retained": self.retained,
            "dropped_null_id": self.dropped_null_id,
            "dropped_duplicate_id": self.dropped_duplicate_id,
            "input_records": self.input_records,
        }


class SnapshotStream:
    """Single-pass iterable of SnapshotBatch; stats fill in as the stream is consumed."""

    def __init__(self, gen: Iterator[SnapshotBatch], stats: IngestStats):
        self._gen = gen
        self.stats = stats

    def __iter__(self) -> Iterator[SnapshotBatch]:
        return self._gen


def _is_null_id(raw) -> bool:
    return raw is None or str(raw).strip().lower() in ("", "null")


def parse_ts(raw: str, line_no: int) -> datetime:
    try:
        ts = datetime.fromisoformat(str(raw).replace("Z", "+00:00"))
    except ValueError:
        raise MalformedRecord(line_no, f"bad timestamp {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _check_coord(lat, lon, line_no: int) -> GeoPoint:
    try:
        lat = float(lat)
        lon = float(lon)
    except (TypeError, ValueError):
        raise MalformedRecord(line_no, f"non-numeric coordinates ({lat!r}, {lon!r})") from None
    if not is_valid_point(lat, lon):
        raise MalformedRecord(line_no, f"coordinates out of range ({lat}, {lon})")
    return GeoPoint(lat, lon)


def _build_batch(ts: datetime, records: Iterable[tuple], stats: IngestStats) -> SnapshotBatch:
    seen: set[str] = set()
    observations: list[ScooterObservation] = []
    for raw_id, position in records:
        if _is_null_id(raw_id):
            stats.dropped_null_id += 1
            continue
        sid = str(raw_id)
        if sid in seen:
            stats.dropped_duplicate_id += 1
            log.warning("duplicate scooter id %s in batch %s; keeping first occurrence", sid, ts)
            continue
        seen.add(sid)
        observations.append(ScooterObservation(sid, position))
        stats.retained += 1
    stats.batches += 1
    return SnapshotBatch(ts=ts, observations=observations)


def _check_monotonic(prev: datetime | None, ts: datetime) -> None:
    if prev is not None and ts <= prev:
        raise NonMonotonicTimestamp(format_ts(prev), format_ts(ts))


def _parse_jsonl(fh: IO[str], stats: IngestStats) -> Iterator[SnapshotBatch]:
    prev: datetime | None = None
    for line_no, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict) or "ts" not in obj or "scooters" not in obj:
            raise MalformedRecord(line_no, "expected object with 'ts' and 'scooters'")
        ts = parse_ts(obj["ts"], line_no)
        _check_monotonic(prev, ts)
        prev = ts
        scooters = obj["scooters"]
        if not isinstance(scooters, list):
            raise MalformedRecord(line_no, "'scooters' must be a list")
        records = []
        for rec in scooters:
            if not isinstance(rec, dict):
                raise MalformedRecord(line_no, "scooter record must be an object")
            records.append((rec.get("id"), _check_coord(rec.get("lat"), rec.get("lon"), line_no)))
        yield _build_batch(ts, records, stats)


def _parse_csv(fh: IO[str], stats: IngestStats) -> Iterator[SnapshotBatch]:
    reader = csv.reader(fh)
    prev: datetime | None = None
    current_ts: datetime | None = None
    current_raw_ts: str | None = None
    records: list[tuple] = []
    line_no = 0
    for row in reader:
        line_no += 1
        if not row:
            continue
        if line_no == 1 and row[0].strip().lower() == "ts":
            continue  # header
        if len(row) != 4:
            raise MalformedRecord(line_no, f"expected 4 columns, got {len(row)}")
        raw_ts, raw_id, lat, lon = row
        if raw_ts != current_raw_ts:
            if current_ts is not None:
                yield _build_batch(current_ts, records, stats)
            ts = parse_ts(raw_ts, line_no)
            _check_monotonic(prev, ts)
            prev = ts
            current_ts = ts
            current_raw_ts = raw_ts
            records = []
        records.append((raw_id, _check_coord(lat, lon, line_no)))
    if current_ts is not None:
        yield _build_batch(current_ts, records, stats)


def parse_snapshot_stream(source, format: str = "jsonl") -> SnapshotStream:
    """Lazily parse a feed into SnapshotBatch values.

    source may be a path or an open text file. Raises MalformedRecord for
    undecodable records and NonMonotonicTimestamp when batch timestamps do
    not strictly increase.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown feed format {format!r}; expected one of {FORMATS}")
    stats = IngestStats()

    def gen() -> Iterator[SnapshotBatch]:
        close = False
        if isinstance(source, (str, Path)):
            fh = open(source, "r", encoding="utf-8")
            close = True
        elif isinstance(source, io.TextIOBase):
            fh = source
        else:
            fh = io.TextIOWrapper(source, encoding="utf-8")  # raw byte stream
        try:
            inner = _parse_jsonl(fh, stats) if format == "jsonl" else _parse_csv(fh, stats)
            yield from inner
        finally:
            if close:
                fh.close()

    return SnapshotStream(gen(), stats)


def write_snapshot_stream(batches: Iterable[SnapshotBatch], sink, format: str = "jsonl") -> int:
    """Serialize batches back to feed form; returns the number of batches written."""
    if format not in FORMATS:
        raise ValueError(f"unknown feed format {format!r}; expected one of {FORMATS}")
    if isinstance(sink, (str, Path)):
        fh = open(sink, "w", encoding="utf-8", newline="")
        close = True
    else:
        fh = sink
        close = False
    n = 0
    try:
        if format == "jsonl":
            for batch in batches:
                line = json.dumps(
                    {
                        "ts": format_ts(batch.ts),
                        "scooters": [
                            {"id": o.scooter_id, "lat": o.position.lat, "lon": o.position.lon}
                            for o in batch.observations
                        ],
                    },
                    separators=(",", ":"),
                )
                fh.write(line)
                fh.write("\n")
                n += 1
        else:
            writer = csv.writer(fh)
            writer.writerow(["ts", "id", "lat", "lon"])
            for batch in batches:
                ts = format_ts(batch.ts)
                for o in batch.observations:
                    writer.writerow([ts, o.scooter_id, repr(float(o.position.lat)), repr(float(o.position.lon))])
                n += 1
    finally:
        if close:
            fh.close()
    return n


def bounding_box_filter(batches: Iterable[SnapshotBatch], bbox: Bbox) -> Iterator[SnapshotBatch]:
    """Drop observations outside bbox; batch timestamps survive even when emptied."""
    for batch in batches:
        kept = [o for o in batch.observations if bbox.contains(o.position.lat, o.position.lon)]
        yield SnapshotBatch(ts=batch.ts, observations=kept)
