import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scootertrips.errors import InvalidBbox, MalformedRecord, NonMonotonicTimestamp
from scootertrips.geo import Bbox, GeoPoint
from scootertrips.ingest import (
    bounding_box_filter,
    parse_snapshot_stream,
    write_snapshot_stream,
)

from conftest import batch, obs

STUDY = Bbox(GeoPoint(33.748379, -84.405623), GeoPoint(33.789279, -84.359615))


def parse_all(text: str, format: str = "jsonl"):
    stream = parse_snapshot_stream(io.StringIO(text), format=format)
    return list(stream), stream.stats


class TestJsonl:
    def test_simple_batch(self):
        line = json.dumps(
            {
                "ts": "2019-02-02T12:00:00Z",
                "scooters": [
                    {"id": "a1", "lat": 33.77, "lon": -84.39},
                    {"id": "b2", "lat": 33.78, "lon": -84.38},
                ],
            }
        )
        batches, stats = parse_all(line + "\n")
        assert len(batches) == 1
        assert len(batches[0].observations) == 2
        assert batches[0].observations[0].scooter_id == "a1"
        assert stats.retained == 2

    def test_null_id_dropped_and_counted(self):
        line = json.dumps(
            {
                "ts": "2019-02-02T12:00:00Z",
                "scooters": [
                    {"id": None, "lat": 33.77, "lon": -84.39},
                    {"id": "null", "lat": 33.77, "lon": -84.39},
                    {"id": "ok", "lat": 33.77, "lon": -84.39},
                ],
            }
        )
        batches, stats = parse_all(line + "\n")
        assert [o.scooter_id for o in batches[0].observations] == ["ok"]
        assert stats.dropped_null_id == 2

    def test_duplicate_keeps_first(self):
        line = json.dumps(
            {
                "ts": "2019-02-02T12:00:00Z",
                "scooters": [
                    {"id": "x", "lat": 33.77, "lon": -84.39},
                    {"id": "x", "lat": 33.78, "lon": -84.38},
                ],
            }
        )
        batches, stats = parse_all(line + "\n")
        assert len(batches[0].observations) == 1
        assert batches[0].observations[0].position.lat == 33.77
        assert stats.dropped_duplicate_id == 1

    def test_non_monotonic_fatal(self):
        lines = "\n".join(
            json.dumps({"ts": ts, "scooters": []})
            for ts in ("2019-02-02T12:00:00Z", "2019-02-02T11:50:00Z")
        )
        with pytest.raises(NonMonotonicTimestamp):
            parse_all(lines)

    def test_equal_timestamps_fatal(self):
        lines = "\n".join(
            json.dumps({"ts": "2019-02-02T12:00:00Z", "scooters": []}) for _ in range(2)
        )
        with pytest.raises(NonMonotonicTimestamp):
            parse_all(lines)

    def test_malformed_json_carries_line_number(self):
        good = json.dumps({"ts": "2019-02-02T12:00:00Z", "scooters": []})
        with pytest.raises(MalformedRecord) as err:
            parse_all(good + "\n{not json\n")
        assert err.value.line_no == 2

    def test_out_of_range_coords_rejected(self):
        line = json.dumps({"ts": "2019-02-02T12:00:00Z", "scooters": [{"id": "a", "lat": 91.0, "lon": 0.0}]})
        with pytest.raises(MalformedRecord):
            parse_all(line)

    def test_counters_reconcile(self):
        rows = [
            {"id": "a", "lat": 33.77, "lon": -84.39},
            {"id": "a", "lat": 33.77, "lon": -84.39},
            {"id": None, "lat": 33.77, "lon": -84.39},
            {"id": "b", "lat": 33.77, "lon": -84.39},
        ]
        line = json.dumps({"ts": "2019-02-02T12:00:00Z", "scooters": rows})
        _, stats = parse_all(line)
        assert stats.input_records == len(rows)
        assert stats.retained + stats.dropped_null_id + stats.dropped_duplicate_id == len(rows)


class TestCsv:
    def test_rows_sharing_ts_form_batches(self):
        text = (
            "ts,id,lat,lon\n"
            "2019-02-02T12:00:00Z,a,33.77,-84.39\n"
            "2019-02-02T12:00:00Z,b,33.78,-84.38\n"
            "2019-02-02T12:10:00Z,a,33.77,-84.39\n"
        )
        batches, stats = parse_all(text, format="csv")
        assert [len(b.observations) for b in batches] == [2, 1]
        assert stats.batches == 2

    def test_empty_id_counts_as_null(self):
        text = "ts,id,lat,lon\n2019-02-02T12:00:00Z,,33.77,-84.39\n"
        batches, stats = parse_all(text, format="csv")
        assert batches[0].observations == []
        assert stats.dropped_null_id == 1

    def test_csv_non_monotonic(self):
        text = (
            "ts,id,lat,lon\n"
            "2019-02-02T12:00:00Z,a,33.77,-84.39\n"
            "2019-02-02T11:50:00Z,a,33.77,-84.39\n"
        )
        with pytest.raises(NonMonotonicTimestamp):
            parse_all(text, format="csv")

    def test_csv_repeated_ts_after_advancing_is_fatal(self):
        # a ts run may not resume once a later batch has started
        text = (
            "ts,id,lat,lon\n"
            "2019-02-02T12:00:00Z,a,33.77,-84.39\n"
            "2019-02-02T12:10:00Z,a,33.77,-84.39\n"
            "2019-02-02T12:00:00Z,b,33.77,-84.39\n"
        )
        with pytest.raises(NonMonotonicTimestamp):
            parse_all(text, format="csv")


class TestBboxFilter:
    def test_point_inside_retained(self):
        batches = [batch(0, [obs("a", GeoPoint(33.77, -84.39))])]
        out = list(bounding_box_filter(batches, STUDY))
        assert len(out[0].observations) == 1

    def test_point_outside_removed_empty_batch_kept(self):
        batches = [batch(0, [obs("a", GeoPoint(34.0, -84.39))])]
        out = list(bounding_box_filter(batches, STUDY))
        assert out[0].observations == []
        assert out[0].ts == batches[0].ts

    def test_invalid_bbox_raises(self):
        with pytest.raises(InvalidBbox):
            Bbox(GeoPoint(33.8, -84.4), GeoPoint(33.7, -84.3))

    def test_idempotent(self):
        batches = [
            batch(0, [obs("a", GeoPoint(33.77, -84.39)), obs("b", GeoPoint(34.0, -84.39))]),
            batch(600, [obs("a", GeoPoint(33.75, -84.40))]),
        ]
        once = list(bounding_box_filter(batches, STUDY))
        twice = list(bounding_box_filter(once, STUDY))
        assert [b.observations for b in once] == [b.observations for b in twice]


feed_points = st.builds(
    GeoPoint,
    st.floats(33.7484, 33.7892).map(lambda v: round(v, 6)),
    st.floats(-84.4056, -84.3597).map(lambda v: round(v, 6)),
)


@given(
    data=st.lists(
        st.lists(st.tuples(st.sampled_from(["a", "b", "c", "d"]), feed_points), max_size=4),
        min_size=1,
        max_size=6,
    )
)
@settings(max_examples=50, deadline=None)
def test_round_trip_lossless_for_retained_records(data):
    batches = []
    for i, rows in enumerate(data):
        seen = set()
        kept = []
        for sid, p in rows:
            if sid in seen:
                continue
            seen.add(sid)
            kept.append(obs(sid, p))
        batches.append(batch(i * 600, kept))
    buf = io.StringIO()
    write_snapshot_stream(batches, buf)
    reparsed = list(parse_snapshot_stream(io.StringIO(buf.getvalue())))
    assert len(reparsed) == len(batches)
    for orig, back in zip(batches, reparsed):
        assert back.ts == orig.ts
        assert back.observations == orig.observations


def test_parses_binary_byte_stream():
    line = json.dumps({"ts": "2019-02-02T12:00:00Z", "scooters": [{"id": "a", "lat": 33.77, "lon": -84.39}]})
    stream = parse_snapshot_stream(io.BytesIO(line.encode("utf-8")))
    batches = list(stream)
    assert len(batches) == 1 and stream.stats.retained == 1


def test_csv_round_trip_lossless(tmp_path):
    batches = [
        batch(0, [obs("a", GeoPoint(33.771234, -84.391111)), obs("b", GeoPoint(33.78, -84.38))]),
        batch(600, [obs("a", GeoPoint(33.772, -84.392))]),
    ]
    path = tmp_path / "feed.csv"
    write_snapshot_stream(batches, path, format="csv")
    back = list(parse_snapshot_stream(path, format="csv"))
    assert [b.observations for b in back] == [b.observations for b in batches]
