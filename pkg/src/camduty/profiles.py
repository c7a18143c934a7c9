"""Street activity profiles: high-occupancy histograms, k-means clustering, cyclical time features."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import MINUTES_PER_DAY, OccupancySeries, OccupancyThresholds

HOURS_PER_DAY = 24
DAYS_PER_WEEK = 7


class HistogramAxis(enum.Enum):
    HOUR_OF_DAY = "hour_of_day"
    DAY_OF_WEEK = "day_of_week"


@dataclass
class OccupancyHistogram:
    """Max-normalized count of high-occupancy minutes per hour-of-day or day-of-week.

    Normalization divides by the largest bin so every street compares on shape
    rather than volume; an all-zero histogram stays all zero.
    """

    street_id: str
    axis: HistogramAxis
    values: np.ndarray

    def __post_init__(self):
        expected = HOURS_PER_DAY if self.axis is HistogramAxis.HOUR_OF_DAY else DAYS_PER_WEEK
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (expected,):
            raise ValueError(f"{self.axis.value} histogram needs {expected} bins")

    @property
    def peak_bin(self) -> int:
        return int(np.argmax(self.values))


def high_occupancy_histogram(
    series: OccupancySeries, axis: HistogramAxis, thresholds: OccupancyThresholds
) -> OccupancyHistogram:
    """Histogram the street's high-occupancy minutes along the chosen calendar axis."""
    mask = series.high_mask(thresholds)
    n = len(series)
    start_minute = series.start.hour * 60 + series.start.minute
    abs_minutes = start_minute + np.arange(n, dtype=np.int64)
    if axis is HistogramAxis.HOUR_OF_DAY:
        bins = (abs_minutes % MINUTES_PER_DAY) // 60
        counts = np.bincount(bins[mask], minlength=HOURS_PER_DAY).astype(np.float64)
    else:
        days = abs_minutes // MINUTES_PER_DAY
        dow = (series.start.weekday() + days) % DAYS_PER_WEEK
        counts = np.bincount(dow[mask], minlength=DAYS_PER_WEEK).astype(np.float64)
    peak = counts.max()
    if peak > 0:
        counts /= peak
    return OccupancyHistogram(series.street_id, axis, counts)


HISTOGRAM_CSV_HEADER = ["street_id", "axis", "bin", "weight"]


def write_histogram_csv(histograms: Iterable[OccupancyHistogram], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_CSV_HEADER)
        for h in histograms:
            for b, w in enumerate(h.values):
                writer.writerow([h.street_id, h.axis.value, b, f"{w:.6f}"])


# ---------------------------------------------------------------------------
# k-means on histogram shapes
# ---------------------------------------------------------------------------

@dataclass
class ClusterAssignment:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float

    def members(self, street_ids: list[str]) -> dict[int, list[str]]:
        """Street ids grouped per cluster label, in input order."""
        if len(street_ids) != len(self.labels):
            raise ValueError("street_ids length must match labels")
        out: dict[int, list[str]] = {c: [] for c in range(self.k)}
        for sid, lab in zip(street_ids, self.labels):
            out[int(lab)].append(sid)
        return out


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centroids proportional to squared distance."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[j] = points[rng.integers(n)]
            continue
        centroids[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    k = centroids.shape[0]
    labels = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            member = points[new_labels == j]
            if len(member):
                centroids[j] = member.mean(axis=0)
            else:
                # Re-seed an empty cluster at the point farthest from its centroid.
                worst = int(np.argmax(d2[np.arange(len(points)), new_labels]))
                centroids[j] = points[worst]
                new_labels[worst] = j
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    inertia = float(np.sum((points - centroids[labels]) ** 2))
    return centroids, labels, inertia


def kmeans_cluster(
    histograms: list[OccupancyHistogram],
    k: int,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 300,
) -> ClusterAssignment:
    """Cluster histogram shapes with restarted Lloyd iterations.

    Runs ``restarts`` seeded k-means++ initializations and keeps the result
    with the lowest inertia (ties resolved toward the earliest restart), so the
    same inputs and seed always give the same assignment.
    """
    if not histograms:
        raise ValueError("no histograms supplied")
    if not 1 <= k <= len(histograms):
        raise ValueError(f"k={k} outside [1, {len(histograms)}]")
    axes = {h.axis for h in histograms}
    if len(axes) != 1:
        raise ValueError("histograms mix axes")
    points = np.stack([h.values for h in histograms])
    best: ClusterAssignment | None = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        centroids = _kmeans_pp_init(points, k, rng)
        centroids, labels, inertia = _lloyd(points, centroids.copy(), max_iter)
        if best is None or inertia < best.inertia:
            best = ClusterAssignment(k=k, centroids=centroids, labels=labels, inertia=inertia)
    assert best is not None
    return best


def scan_inertia(
    histograms: list[OccupancyHistogram],
    k_range: range = range(1, 9),
    seed: int = 0,
) -> dict[int, float]:
    """Inertia per candidate k, for elbow inspection."""
    out: dict[int, float] = {}
    for k in k_range:
        if k > len(histograms):
            break
        out[k] = kmeans_cluster(histograms, k, seed=seed).inertia
    return out


# ---------------------------------------------------------------------------
# Cyclical time-of-day / day-of-week features
# ---------------------------------------------------------------------------

def cyclical_encode(minute_of_day: int, day_of_week: int) -> np.ndarray:
    """Encode calendar position as (sin, cos) pairs so 23:59 sits next to 00:00.

    Returns [hour_sin, hour_cos, day_sin, day_cos]; the day angle treats
    Monday as 0.
    """
    if not 0 <= minute_of_day < MINUTES_PER_DAY:
        raise ValueError(f"minute_of_day {minute_of_day} outside [0, 1440)")
    if not 0 <= day_of_week < DAYS_PER_WEEK:
        raise ValueError(f"day_of_week {day_of_week} outside [0, 7)")
    ha = 2.0 * np.pi * minute_of_day / MINUTES_PER_DAY
    da = 2.0 * np.pi * day_of_week / DAYS_PER_WEEK
    return np.array([np.sin(ha), np.cos(ha), np.sin(da), np.cos(da)])


class CyclicalTable:
    """Precomputed cyclical features for every (minute, weekday), for fast env steps."""

    def __init__(self):
        minutes = np.arange(MINUTES_PER_DAY)
        ha = 2.0 * np.pi * minutes / MINUTES_PER_DAY
        self.hour_sin = np.sin(ha)
        self.hour_cos = np.cos(ha)
        days = np.arange(DAYS_PER_WEEK)
        da = 2.0 * np.pi * days / DAYS_PER_WEEK
        self.day_sin = np.sin(da)
        self.day_cos = np.cos(da)

    def features(self, minute_of_day: int, day_of_week: int) -> np.ndarray:
        return np.array(
            [
                self.hour_sin[minute_of_day],
                self.hour_cos[minute_of_day],
                self.day_sin[day_of_week],
                self.day_cos[day_of_week],
            ]
        )
