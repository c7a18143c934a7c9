"""Event ingestion, occupancy series, synthetic streets, and splits."""

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camduty.data import (
    DataError,
    DatasetSplit,
    OccupancyCategory,
    OccupancySeries,
    OccupancyThresholds,
    ParkingEvent,
    ProfileCluster,
    SyntheticProfile,
    build_occupancy,
    categorize,
    dataset_statistics,
    generate_synthetic,
    ingest_events,
    read_bay_counts,
    read_occupancy_csv,
    series_from_events,
    split_dataset,
    write_occupancy_csv,
)
from helpers import MONDAY, block_series, flat_series

WEEK = (MONDAY, MONDAY + dt.timedelta(days=7))


# ---------------------------------------------------------------------------
# Thresholds and categories
# ---------------------------------------------------------------------------

def test_categorize_boundaries(thresholds):
    assert categorize(0.8, thresholds) is OccupancyCategory.HIGH
    assert categorize(0.95, thresholds) is OccupancyCategory.HIGH
    assert categorize(0.79, thresholds) is OccupancyCategory.MEDIUM
    assert categorize(0.6, thresholds) is OccupancyCategory.MEDIUM
    assert categorize(0.59, thresholds) is OccupancyCategory.LOW
    assert categorize(0.0, thresholds) is OccupancyCategory.LOW


def test_categorize_rejects_out_of_range(thresholds):
    with pytest.raises(ValueError):
        categorize(-0.01, thresholds)
    with pytest.raises(ValueError):
        categorize(1.01, thresholds)


def test_threshold_validation():
    with pytest.raises(ValueError):
        OccupancyThresholds(high=0.6, medium=0.8)
    with pytest.raises(ValueError):
        OccupancyThresholds(high=1.2, medium=0.6)
    with pytest.raises(ValueError):
        OccupancyThresholds(high=0.8, medium=0.0)


# ---------------------------------------------------------------------------
# OccupancySeries basics
# ---------------------------------------------------------------------------

def test_series_calendar_lookups():
    s = flat_series(0.5, minutes=3 * 1440)
    assert len(s) == 3 * 1440
    assert s.end == MONDAY + dt.timedelta(days=3)
    assert s.minute_of_day(0) == 0
    assert s.minute_of_day(1441) == 1
    assert s.day_of_week(0) == 0  # Monday
    assert s.day_of_week(2 * 1440) == 2
    ts = s.timestamp_at(90)
    assert ts == MONDAY + dt.timedelta(minutes=90)
    assert s.index_of(ts) == 90


def test_series_rejects_bad_inputs():
    with pytest.raises(ValueError):
        OccupancySeries("s", MONDAY + dt.timedelta(seconds=30), 10, np.zeros(10))
    with pytest.raises(ValueError):
        OccupancySeries("s", MONDAY, 0, np.zeros(10))
    with pytest.raises(ValueError):
        OccupancySeries("s", MONDAY, 10, np.array([0.5, 1.2]))
    with pytest.raises(ValueError):
        OccupancySeries("s", MONDAY, 10, np.array([-0.1, 0.2]))


def test_slice_range_returns_window():
    s = block_series([(660, 780)], minutes=2 * 1440)
    cut = s.slice_range(MONDAY + dt.timedelta(minutes=600), MONDAY + dt.timedelta(minutes=800))
    assert len(cut) == 200
    assert cut.start == MONDAY + dt.timedelta(minutes=600)
    assert np.array_equal(cut.values, s.values[600:800])


def test_high_mask_counts_block(thresholds):
    s = block_series([(660, 780)])
    assert int(s.high_mask(thresholds).sum()) == 120


# ---------------------------------------------------------------------------
# Event ingestion
# ---------------------------------------------------------------------------

def _write_events(path, rows):
    lines = ["street_id,arrival,departure"] + rows
    path.write_text("\n".join(lines) + "\n")


def test_ingest_parses_and_sorts(tmp_path):
    f = tmp_path / "ev.csv"
    _write_events(f, [
        "b-st,2014-03-03T10:00,2014-03-03T11:00",
        "a-st,2014-03-03T09:00,2014-03-03T12:00",
        "a-st,2014-03-03T09:00,2014-03-03T10:00",
    ])
    summary = ingest_events(f, WEEK)
    assert [e.street_id for e in summary.events] == ["a-st", "a-st", "b-st"]
    assert summary.events[0].departure < summary.events[1].departure
    assert summary.rejected == 0


def test_ingest_rejects_backwards_events_with_count(tmp_path):
    f = tmp_path / "ev.csv"
    _write_events(f, [
        "a-st,2014-03-03T12:00,2014-03-03T10:00",
        "a-st,2014-03-03T09:00,2014-03-03T10:00",
    ])
    summary = ingest_events(f, WEEK)
    assert summary.rejected == 1
    assert len(summary.events) == 1


def test_ingest_counts_out_of_range(tmp_path):
    f = tmp_path / "ev.csv"
    _write_events(f, [
        "a-st,2014-02-01T09:00,2014-02-01T10:00",
        "a-st,2014-03-03T09:00,2014-03-03T10:00",
    ])
    summary = ingest_events(f, WEEK)
    assert summary.out_of_range == 1
    assert len(summary.events) == 1


def test_ingest_errors_name_the_line(tmp_path):
    f = tmp_path / "ev.csv"
    _write_events(f, [
        "a-st,2014-03-03T09:00,2014-03-03T10:00",
        "a-st,not-a-time,2014-03-03T10:00",
    ])
    with pytest.raises(DataError, match="line 3"):
        ingest_events(f, WEEK)


def test_ingest_rejects_wrong_header(tmp_path):
    f = tmp_path / "ev.csv"
    f.write_text("street,from,to\n")
    with pytest.raises(DataError, match="header"):
        ingest_events(f, WEEK)


def test_parking_event_validation():
    with pytest.raises(ValueError):
        ParkingEvent("s", MONDAY, MONDAY - dt.timedelta(minutes=1))


# ---------------------------------------------------------------------------
# Occupancy construction against a per-minute counting oracle
# ---------------------------------------------------------------------------

def _count_occupancy(events, bays, start, minutes):
    """Brute force: count cars present at each minute, divide by capacity, clip."""
    out = np.zeros(minutes)
    for i in range(minutes):
        t = start + dt.timedelta(minutes=i)
        present = sum(1 for e in events if e.arrival <= t < e.departure)
        out[i] = min(present / bays, 1.0)
    return out


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_build_occupancy_matches_counting_oracle(data):
    minutes = 180
    bays = data.draw(st.integers(min_value=1, max_value=4))
    n_events = data.draw(st.integers(min_value=0, max_value=12))
    events = []
    for _ in range(n_events):
        a = data.draw(st.integers(min_value=0, max_value=minutes - 1))
        d = data.draw(st.integers(min_value=a, max_value=minutes))
        events.append(ParkingEvent(
            "s",
            MONDAY + dt.timedelta(minutes=a),
            MONDAY + dt.timedelta(minutes=d),
        ))
    rng_range = (MONDAY, MONDAY + dt.timedelta(minutes=minutes))
    series = build_occupancy(events, bays, rng_range, street_id="s")
    expected = _count_occupancy(events, bays, MONDAY, minutes)
    assert np.array_equal(series.values, expected)


def test_build_occupancy_half_open_interval():
    ev = [ParkingEvent("s", MONDAY + dt.timedelta(minutes=10), MONDAY + dt.timedelta(minutes=12))]
    series = build_occupancy(ev, 1, (MONDAY, MONDAY + dt.timedelta(minutes=20)), street_id="s")
    assert series.values[9] == 0.0
    assert series.values[10] == 1.0
    assert series.values[11] == 1.0
    assert series.values[12] == 0.0  # departure minute is free again


def test_build_occupancy_clips_overbooking():
    evs = [
        ParkingEvent("s", MONDAY, MONDAY + dt.timedelta(minutes=5)),
        ParkingEvent("s", MONDAY, MONDAY + dt.timedelta(minutes=5)),
        ParkingEvent("s", MONDAY, MONDAY + dt.timedelta(minutes=5)),
    ]
    series = build_occupancy(evs, 2, (MONDAY, MONDAY + dt.timedelta(minutes=10)), street_id="s")
    assert series.values.max() == 1.0


def test_build_occupancy_rejects_zero_bays():
    with pytest.raises(ValueError):
        build_occupancy([], 0, WEEK, street_id="s")


def test_series_from_events_filters_small_streets():
    evs = [
        ParkingEvent("big", MONDAY, MONDAY + dt.timedelta(minutes=5)),
        ParkingEvent("small", MONDAY, MONDAY + dt.timedelta(minutes=5)),
    ]
    out = series_from_events(evs, {"big": 12, "small": 3}, WEEK, min_bays=10)
    assert set(out) == {"big"}
    with pytest.raises(DataError, match="bay count"):
        series_from_events(evs, {"big": 12}, WEEK, min_bays=0)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def test_occupancy_csv_round_trip(tmp_path, rng):
    a = OccupancySeries("a", MONDAY, 40, rng.random(200))
    b = OccupancySeries("b", MONDAY + dt.timedelta(days=1), 15, rng.random(100))
    path = tmp_path / "occ.csv"
    write_occupancy_csv([a, b], path)
    back = read_occupancy_csv(path, bay_counts={"a": 40, "b": 15})
    assert set(back) == {"a", "b"}
    assert back["a"].start == a.start
    assert back["b"].bay_count == 15
    np.testing.assert_allclose(back["a"].values, a.values, atol=5e-7)


def test_occupancy_csv_detects_gaps(tmp_path):
    path = tmp_path / "occ.csv"
    path.write_text(
        "street_id,timestamp,occupancy\n"
        "a,2014-03-03T00:00,0.5\n"
        "a,2014-03-03T00:02,0.5\n"
    )
    with pytest.raises(DataError, match="contiguous"):
        read_occupancy_csv(path)


def test_read_bay_counts(tmp_path):
    path = tmp_path / "bays.csv"
    path.write_text("street_id,bay_count\na,12\nb,3\n")
    assert read_bay_counts(path) == {"a": 12, "b": 3}

    path.write_text("street_id,bay_count\na,12\na,13\n")
    with pytest.raises(DataError, match="duplicate"):
        read_bay_counts(path)
    path.write_text("street_id,bay_count\na,twelve\n")
    with pytest.raises(DataError):
        read_bay_counts(path)
    path.write_text("id,bays\n")
    with pytest.raises(DataError, match="header"):
        read_bay_counts(path)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def test_dataset_statistics(thresholds):
    a = block_series([(0, 100)], street="a")
    b = block_series([(0, 300)], street="b")
    stats = dataset_statistics([a, b], thresholds)
    assert stats.min_high_minutes == 100
    assert stats.max_high_minutes == 300
    assert stats.avg_high_minutes == 200.0
    expected_pct = (100 / 1440 + 300 / 1440) / 2 * 100
    assert stats.avg_high_pct == pytest.approx(expected_pct)


# ---------------------------------------------------------------------------
# Synthetic streets
# ---------------------------------------------------------------------------

def test_generate_synthetic_shape_and_range():
    s = generate_synthetic(SyntheticProfile(ProfileCluster.BIMODAL_NOON, seed=3), days=5)
    assert len(s) == 5 * 1440
    assert s.street_id == "syn-bimodal_noon-3"
    assert s.values.min() >= 0.0 and s.values.max() <= 1.0


def test_generate_synthetic_deterministic():
    p = SyntheticProfile(ProfileCluster.UNIFORM, seed=7)
    a = generate_synthetic(p, days=3)
    b = generate_synthetic(p, days=3)
    assert np.array_equal(a.values, b.values)
    c = generate_synthetic(SyntheticProfile(ProfileCluster.UNIFORM, seed=8), days=3)
    assert not np.array_equal(a.values, c.values)


def test_weekday_profile_confines_high_minutes(thresholds):
    s = generate_synthetic(SyntheticProfile(ProfileCluster.WEEKDAY, seed=0), days=14)
    mask = s.high_mask(thresholds)
    for day in range(14):
        dow = (MONDAY + dt.timedelta(days=day)).weekday()
        count = int(mask[day * 1440:(day + 1) * 1440].sum())
        if dow >= 5:
            assert count == 0, f"weekend day {day} has {count} high minutes"
        else:
            assert count > 0, f"weekday {day} has no high minutes"


def test_weekend_profile_mirrors_weekday(thresholds):
    s = generate_synthetic(SyntheticProfile(ProfileCluster.WEEKEND, seed=0), days=14)
    mask = s.high_mask(thresholds)
    by_dow = {}
    for day in range(14):
        dow = (MONDAY + dt.timedelta(days=day)).weekday()
        by_dow.setdefault(dow, 0)
        by_dow[dow] += int(mask[day * 1440:(day + 1) * 1440].sum())
    assert all(by_dow[d] == 0 for d in range(5))
    assert by_dow[5] > 0 and by_dow[6] > 0


def test_generate_synthetic_rejects_zero_days():
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticProfile(ProfileCluster.UNIFORM, seed=0), days=0)


# ---------------------------------------------------------------------------
# Chronological split
# ---------------------------------------------------------------------------

def test_split_dataset_day_aligned():
    s = generate_synthetic(SyntheticProfile(ProfileCluster.BIMODAL_NOON, seed=0), days=8)
    split = split_dataset({"s": s}, (0.5, 0.25, 0.25))
    t0, t1 = split.train["s"]
    v0, v1 = split.validation["s"]
    e0, e1 = split.test["s"]
    assert t0 == s.start and e1 == s.end
    assert t1 == v0 and v1 == e0
    assert (t1 - t0) == dt.timedelta(days=4)
    assert (v1 - v0) == dt.timedelta(days=2)
    assert (e1 - e0) == dt.timedelta(days=2)


def test_split_dataset_ratio_and_length_validation():
    s = generate_synthetic(SyntheticProfile(ProfileCluster.BIMODAL_NOON, seed=0), days=8)
    with pytest.raises(ValueError, match="sum"):
        split_dataset({"s": s}, (0.5, 0.5, 0.5))
    short = flat_series(0.1, minutes=2 * 1440)
    with pytest.raises(ValueError, match="4 days"):
        split_dataset({"short": short})


def test_split_dataset_cityscale_overlap_rejected():
    s = generate_synthetic(SyntheticProfile(ProfileCluster.BIMODAL_NOON, seed=0), days=8)
    with pytest.raises(ValueError, match="cityscale"):
        split_dataset({"s": s}, cityscale={"s"})
    split = split_dataset({"s": s}, cityscale={"other"})
    assert isinstance(split, DatasetSplit)
    assert split.cityscale == {"other"}
