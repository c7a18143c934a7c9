"""Parking event ingestion, minute-resolution occupancy series, and synthetic streets."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
MIN_BAYS_DEFAULT = 10

#: Default calendar anchor for synthetic streets (a Monday).
SYNTHETIC_START = dt.datetime(2014, 3, 3)


class DataError(ValueError):
    """Raised for malformed input files or inconsistent series arguments."""


@dataclass(frozen=True)
class ParkingEvent:
    """One vehicle stay: occupies a bay over [arrival, departure)."""

    street_id: str
    arrival: dt.datetime
    departure: dt.datetime

    def __post_init__(self):
        if self.departure < self.arrival:
            raise DataError(
                f"event departure {self.departure} precedes arrival {self.arrival}"
            )


@dataclass(frozen=True)
class OccupancyThresholds:
    """Occupancy-category boundaries (fractions of capacity)."""

    high: float = 0.8
    medium: float = 0.6

    def __post_init__(self):
        if not (0.0 < self.medium < self.high <= 1.0):
            raise ValueError(
                f"need 0 < medium < high <= 1, got medium={self.medium} high={self.high}"
            )


class OccupancyCategory(enum.Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


def categorize(value: float, thresholds: OccupancyThresholds) -> OccupancyCategory:
    """Map an occupancy fraction to its category (high >= 0.8 > medium >= 0.6 > low)."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"occupancy {value} outside [0, 1]")
    if value >= thresholds.high:
        return OccupancyCategory.HIGH
    if value >= thresholds.medium:
        return OccupancyCategory.MEDIUM
    return OccupancyCategory.LOW


@dataclass
class OccupancySeries:
    """Per-street fraction-occupied time series at a fixed one-minute resolution.

    ``values[i]`` is the fraction of bays occupied during the minute starting at
    ``start + i minutes``. Values always lie in [0, 1].
    """

    street_id: str
    start: dt.datetime
    bay_count: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("series values must be one-dimensional")
        if self.bay_count < 1:
            raise ValueError("bay_count must be >= 1")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("occupancy values must lie in [0, 1]")
        if self.start.second or self.start.microsecond:
            raise ValueError("series must start on a whole minute")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> dt.datetime:
        """Exclusive end timestamp."""
        return self.start + dt.timedelta(minutes=len(self))

    def index_of(self, ts: dt.datetime) -> int:
        delta = ts - self.start
        minutes, rem = divmod(int(delta.total_seconds()), 60)
        if rem:
            raise ValueError(f"{ts} is not minute-aligned with series start")
        if not 0 <= minutes < len(self):
            raise ValueError(f"{ts} outside series range [{self.start}, {self.end})")
        return minutes

    def timestamp_at(self, index: int) -> dt.datetime:
        return self.start + dt.timedelta(minutes=index)

    def minute_of_day(self, index: int) -> int:
        return (self.start.hour * 60 + self.start.minute + index) % MINUTES_PER_DAY

    def day_of_week(self, index: int) -> int:
        """Monday = 0."""
        offset = (self.start.hour * 60 + self.start.minute + index) // MINUTES_PER_DAY
        return (self.start.weekday() + offset) % 7

    def slice_range(self, start: dt.datetime, end: dt.datetime) -> "OccupancySeries":
        """Contiguous sub-series over [start, end)."""
        i = self.index_of(start)
        j = i + int((end - start).total_seconds() // 60)
        if j > len(self):
            raise ValueError(f"slice end {end} beyond series end {self.end}")
        return OccupancySeries(self.street_id, start, self.bay_count, self.values[i:j].copy())

    def with_values(self, values: np.ndarray) -> "OccupancySeries":
        """Same street/calendar, replacement value vector of equal length."""
        if len(values) != len(self):
            raise ValueError("replacement values must match series length")
        return OccupancySeries(self.street_id, self.start, self.bay_count, np.asarray(values))

    def high_mask(self, thresholds: OccupancyThresholds) -> np.ndarray:
        return self.values >= thresholds.high


# ---------------------------------------------------------------------------
# Event CSV ingestion
# ---------------------------------------------------------------------------

EVENT_CSV_HEADER = ["street_id", "arrival", "departure"]


@dataclass
class IngestSummary:
    """Result of parsing an event CSV: kept events plus per-file rejection counts."""

    events: list[ParkingEvent]
    rejected: int = 0
    out_of_range: int = 0


def _parse_minute(text: str, line: int, column: str) -> dt.datetime:
    try:
        ts = dt.datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"line {line}: bad {column} timestamp {text!r}: {exc}") from None
    if ts.second or ts.microsecond:
        raise DataError(f"line {line}: {column} {text!r} is not minute precision")
    return ts


def ingest_events(
    path: str | Path, date_range: tuple[dt.datetime, dt.datetime]
) -> IngestSummary:
    """Parse an event CSV (header ``street_id,arrival,departure``, ISO-8601 minutes).

    Events whose stay falls outside ``date_range`` (half-open) are dropped and
    counted. Rows with departure before arrival are rejected with a warning
    count; structurally malformed rows raise ``DataError`` naming the line.
    """
    lo, hi = date_range
    path = Path(path)
    if not path.exists():
        raise DataError(f"event file not found: {path}")

    events: list[ParkingEvent] = []
    rejected = 0
    out_of_range = 0
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return IngestSummary(events=[])
        if [h.strip() for h in header] != EVENT_CSV_HEADER:
            raise DataError(f"line 1: expected header {','.join(EVENT_CSV_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise DataError(f"line {line}: expected 3 columns, got {len(row)}")
            street = row[0].strip()
            if not street:
                raise DataError(f"line {line}: empty street_id")
            arrival = _parse_minute(row[1], line, "arrival")
            departure = _parse_minute(row[2], line, "departure")
            if departure < arrival:
                rejected += 1
                continue
            if departure <= lo or arrival >= hi:
                out_of_range += 1
                continue
            events.append(ParkingEvent(street, arrival, departure))
    if rejected:
        log.warning("%s: rejected %d rows with departure before arrival", path, rejected)
    events.sort(key=lambda e: (e.arrival, e.departure, e.street_id))
    return IngestSummary(events=events, rejected=rejected, out_of_range=out_of_range)


def build_occupancy(
    events: Sequence[ParkingEvent],
    bay_count: int,
    date_range: tuple[dt.datetime, dt.datetime],
    street_id: str | None = None,
) -> OccupancySeries:
    """Count, per minute of ``date_range``, the stays covering it, over ``bay_count``.

    A stay occupies the half-open minute interval [arrival, departure); counts
    above capacity are clipped to occupancy 1.0.
    """
    if bay_count < 1:
        raise ValueError("bay_count must be >= 1")
    lo, hi = date_range
    n = int((hi - lo).total_seconds() // 60)
    if n <= 0:
        raise ValueError("empty date range")
    # Difference array: +1 at arrival minute, -1 at departure minute.
    diff = np.zeros(n + 1, dtype=np.int64)
    for ev in events:
        a = max(0, int((ev.arrival - lo).total_seconds() // 60))
        d = min(n, int((ev.departure - lo).total_seconds() // 60))
        if d > a:
            diff[a] += 1
            diff[d] -= 1
    counts = np.cumsum(diff[:-1])
    values = np.clip(counts / bay_count, 0.0, 1.0)
    sid = street_id if street_id is not None else (events[0].street_id if events else "street")
    return OccupancySeries(sid, lo, bay_count, values)


def series_from_events(
    summary_events: Sequence[ParkingEvent],
    bay_counts: Mapping[str, int],
    date_range: tuple[dt.datetime, dt.datetime],
    min_bays: int = MIN_BAYS_DEFAULT,
) -> dict[str, OccupancySeries]:
    """Group events by street and build one series per admitted street.

    All bays of a street_id aggregate into one series. Streets with fewer than
    ``min_bays`` bays are excluded (pass ``min_bays=0`` to keep everything).
    """
    by_street: dict[str, list[ParkingEvent]] = {}
    for ev in summary_events:
        by_street.setdefault(ev.street_id, []).append(ev)
    out: dict[str, OccupancySeries] = {}
    for sid, evs in sorted(by_street.items()):
        bays = bay_counts.get(sid)
        if bays is None:
            raise DataError(f"no bay count supplied for street {sid!r}")
        if bays < min_bays:
            log.info("skipping street %s: %d bays < %d", sid, bays, min_bays)
            continue
        out[sid] = build_occupancy(evs, bays, date_range, street_id=sid)
    return out


# ---------------------------------------------------------------------------
# Occupancy CSV interchange format
# ---------------------------------------------------------------------------

OCCUPANCY_CSV_HEADER = ["street_id", "timestamp", "occupancy"]


def write_occupancy_csv(series: Iterable[OccupancySeries], path: str | Path) -> None:
    """Write series as ``street_id,timestamp,occupancy`` rows (6-decimal fractions)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OCCUPANCY_CSV_HEADER)
        for s in series:
            for i, v in enumerate(s.values):
                writer.writerow([s.street_id, s.timestamp_at(i).isoformat(timespec="minutes"), f"{v:.6f}"])


def read_occupancy_csv(path: str | Path, bay_counts: Mapping[str, int] | None = None) -> dict[str, OccupancySeries]:
    """Read the occupancy interchange CSV back into per-street series.

    Rows must be contiguous minutes per street. ``bay_counts`` defaults every
    street to the admission minimum since capacity is not carried by the format.
    """
    rows: dict[str, list[tuple[dt.datetime, float]]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != OCCUPANCY_CSV_HEADER:
            raise DataError(f"{path}: expected header {','.join(OCCUPANCY_CSV_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"line {line}: expected 3 columns")
            try:
                ts = dt.datetime.fromisoformat(row[1])
                occ = float(row[2])
            except ValueError as exc:
                raise DataError(f"line {line}: {exc}") from None
            rows.setdefault(row[0], []).append((ts, occ))
    out: dict[str, OccupancySeries] = {}
    for sid, pairs in rows.items():
        pairs.sort(key=lambda p: p[0])
        start = pairs[0][0]
        values = np.array([p[1] for p in pairs])
        expected = [start + dt.timedelta(minutes=i) for i in range(len(pairs))]
        if [p[0] for p in pairs] != expected:
            raise DataError(f"street {sid}: rows are not contiguous minutes")
        bays = (bay_counts or {}).get(sid, MIN_BAYS_DEFAULT)
        out[sid] = OccupancySeries(sid, start, bays, values)
    return out


BAYS_CSV_HEADER = ["street_id", "bay_count"]


def read_bay_counts(path: str | Path) -> dict[str, int]:
    """Read the ``street_id,bay_count`` capacity table used during ingest."""
    out: dict[str, int] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != BAYS_CSV_HEADER:
            raise DataError(f"{path}: expected header {','.join(BAYS_CSV_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"line {line}: expected 2 columns")
            try:
                bays = int(row[1])
            except ValueError:
                raise DataError(f"line {line}: bay_count {row[1]!r} is not an integer") from None
            if bays < 0:
                raise DataError(f"line {line}: bay_count must be >= 0")
            if row[0] in out:
                raise DataError(f"line {line}: duplicate street {row[0]!r}")
            out[row[0]] = bays
    return out


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------

@dataclass
class StreetStatistics:
    street_id: str
    total_minutes: int
    high_minutes: int

    @property
    def high_pct(self) -> float:
        return 100.0 * self.high_minutes / self.total_minutes if self.total_minutes else 0.0


@dataclass
class DatasetStatistics:
    per_street: list[StreetStatistics]
    min_high_minutes: int
    max_high_minutes: int
    avg_high_minutes: float
    avg_high_pct: float


def dataset_statistics(
    series: Iterable[OccupancySeries], thresholds: OccupancyThresholds
) -> DatasetStatistics:
    """Per-street minute totals and high-occupancy counts, with cross-street aggregates."""
    per_street = [
        StreetStatistics(s.street_id, len(s), int(s.high_mask(thresholds).sum()))
        for s in series
    ]
    if not per_street:
        raise ValueError("no series supplied")
    highs = [s.high_minutes for s in per_street]
    return DatasetStatistics(
        per_street=per_street,
        min_high_minutes=min(highs),
        max_high_minutes=max(highs),
        avg_high_minutes=float(np.mean(highs)),
        avg_high_pct=float(np.mean([s.high_pct for s in per_street])),
    )


# ---------------------------------------------------------------------------
# Synthetic streets
# ---------------------------------------------------------------------------

class ProfileCluster(enum.Enum):
    """The five qualitative street shapes used by the synthetic generator."""

    BIMODAL_NOON = "bimodal_noon"
    BIMODAL_7PM = "bimodal_7pm"
    WEEKDAY = "weekday"
    WEEKEND = "weekend"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class SyntheticProfile:
    cluster: ProfileCluster
    peak_occupancy: float = 0.95
    noise_scale: float = 0.04
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.peak_occupancy <= 1.0:
            raise ValueError("peak_occupancy must be in (0, 1]")
        if self.noise_scale < 0.0:
            raise ValueError("noise_scale must be >= 0")


_MINUTES = np.arange(MINUTES_PER_DAY, dtype=np.float64)


def _bump(center: float, sigma: float, height: float) -> np.ndarray:
    return height * np.exp(-0.5 * ((_MINUTES - center) / sigma) ** 2)


def generate_synthetic(
    profile: SyntheticProfile,
    days: int,
    start: dt.datetime = SYNTHETIC_START,
    bay_count: int = 40,
) -> OccupancySeries:
    """Generate a deterministic synthetic street matching the profile's shape.

    Each day is a base load plus Gaussian activity bumps whose center jitters
    day to day, plus bounded uniform noise. Off-days of the weekday/weekend
    profiles keep a reduced bump that never crosses the high threshold, so
    their high-occupancy minutes stay confined to the active days.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    if not isinstance(profile.cluster, ProfileCluster):
        raise ValueError(f"unknown profile cluster: {profile.cluster!r}")
    rng = np.random.default_rng(profile.seed)
    peak = profile.peak_occupancy
    cluster = profile.cluster
    base = 0.40 if cluster is ProfileCluster.UNIFORM else 0.35
    span = peak - base

    daily: list[np.ndarray] = []
    for d in range(days):
        dow = (start + dt.timedelta(days=d)).weekday()
        if cluster is ProfileCluster.WEEKDAY:
            active = dow < 5
        elif cluster is ProfileCluster.WEEKEND:
            active = dow >= 5
        else:
            active = True
        scale = 1.0 if active else 0.3

        if cluster is ProfileCluster.BIMODAL_7PM:
            main_center = 1140.0 + rng.uniform(-45, 45)
            values = base + scale * (
                _bump(main_center, 90.0 + rng.uniform(-10, 10), span)
                + _bump(780.0 + rng.uniform(-30, 30), 60.0, 0.72 * span)
            )
        elif cluster is ProfileCluster.UNIFORM:
            main_center = rng.uniform(600, 960)
            values = base + scale * _bump(main_center, 90.0, span)
        else:
            # Noon-peaked shape shared by bimodal-noon, weekday and weekend
            # profiles; the latter two differ only in which days are active.
            main_center = 720.0 + rng.uniform(-60, 60)
            values = base + scale * (
                _bump(main_center, 100.0 + rng.uniform(-15, 15), span)
                + _bump(1020.0 + rng.uniform(-30, 30), 70.0, 0.55 * span)
            )
        values = values + rng.uniform(-profile.noise_scale, profile.noise_scale, MINUTES_PER_DAY)
        daily.append(np.clip(values, 0.0, 1.0))

    sid = f"syn-{cluster.value}-{profile.seed}"
    return OccupancySeries(sid, start, bay_count, np.concatenate(daily))


# ---------------------------------------------------------------------------
# Chronological dataset split
# ---------------------------------------------------------------------------

SplitRange = tuple[dt.datetime, dt.datetime]


@dataclass
class DatasetSplit:
    """Per-street chronological train/validation/test ranges plus held-out streets."""

    train: dict[str, SplitRange]
    validation: dict[str, SplitRange]
    test: dict[str, SplitRange]
    cityscale: set[str] = field(default_factory=set)


def split_dataset(
    series_by_street: Mapping[str, OccupancySeries],
    ratios: tuple[float, float, float] = (0.5, 0.25, 0.25),
    cityscale: Iterable[str] = (),
) -> DatasetSplit:
    """Split every street's series into contiguous train < validation < test ranges.

    Splits are chronological so the test period is genuinely future data. Split
    points snap to whole days when the series covers whole days, otherwise to
    whole minutes. Streets shorter than four days are rejected.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    cityscale = set(cityscale)
    overlap = cityscale & set(series_by_street)
    if overlap:
        raise ValueError(f"cityscale streets also in experiment set: {sorted(overlap)}")

    train: dict[str, SplitRange] = {}
    validation: dict[str, SplitRange] = {}
    test: dict[str, SplitRange] = {}
    for sid, series in series_by_street.items():
        n = len(series)
        if n < 4 * MINUTES_PER_DAY:
            raise ValueError(f"street {sid}: series shorter than 4 days ({n} minutes)")
        if n % MINUTES_PER_DAY == 0:
            days = n // MINUTES_PER_DAY
            a = int(days * ratios[0]) * MINUTES_PER_DAY
            b = a + int(days * ratios[1]) * MINUTES_PER_DAY
        else:
            a = int(n * ratios[0])
            b = a + int(n * ratios[1])
        t0 = series.start
        cut1 = t0 + dt.timedelta(minutes=a)
        cut2 = t0 + dt.timedelta(minutes=b)
        train[sid] = (t0, cut1)
        validation[sid] = (cut1, cut2)
        test[sid] = (cut2, series.end)
    return DatasetSplit(train=train, validation=validation, test=test, cityscale=cityscale)
