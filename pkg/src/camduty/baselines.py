"""Reference standby policies: oracle, fixed daily window, and a linear SVM."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .data import MINUTES_PER_DAY, OccupancySeries, OccupancyThresholds
from .env import Action
from .profiles import CyclicalTable

log = logging.getLogger(__name__)


class Policy(Protocol):
    """Anything that maps a series to one camera action per minute."""

    def actions_for(
        self, series: OccupancySeries, thresholds: OccupancyThresholds
    ) -> np.ndarray: ...


def _minutes_and_days(series: OccupancySeries) -> tuple[np.ndarray, np.ndarray]:
    start_minute = series.start.hour * 60 + series.start.minute
    abs_minutes = start_minute + np.arange(len(series), dtype=np.int64)
    mod = abs_minutes % MINUTES_PER_DAY
    dow = (series.start.weekday() + abs_minutes // MINUTES_PER_DAY) % 7
    return mod, dow


class OptimalPolicy:
    """Hindsight oracle: camera on exactly during high-occupancy minutes.

    Unreachable in deployment (it reads the future), but it fixes the best
    trade-off any policy could hit: perfect accuracy at the maximum savings.
    """

    def actions_for(
        self, series: OccupancySeries, thresholds: OccupancyThresholds
    ) -> np.ndarray:
        high = series.high_mask(thresholds)
        return np.where(high, Action.TURN_ON, Action.STANDBY).astype(np.int64)


@dataclass(frozen=True)
class Schedule:
    """Camera on during an inclusive minute-of-day window, every day.

    Windows do not wrap midnight: 0 <= start <= end < 1440. The degenerate
    never-on schedule from ``Schedule.never()`` has ``on_minutes == 0``.
    """

    start_minute: int
    end_minute: int
    always_off: bool = False

    def __post_init__(self):
        if not self.always_off:
            if not 0 <= self.start_minute <= self.end_minute < MINUTES_PER_DAY:
                raise ValueError(
                    f"need 0 <= start <= end < 1440, got "
                    f"[{self.start_minute}, {self.end_minute}]"
                )

    @classmethod
    def never(cls) -> "Schedule":
        return cls(start_minute=0, end_minute=0, always_off=True)

    @property
    def on_minutes(self) -> int:
        if self.always_off:
            return 0
        return self.end_minute - self.start_minute + 1

    def is_on(self, minute_of_day: int) -> bool:
        if self.always_off:
            return False
        return self.start_minute <= minute_of_day <= self.end_minute

    def actions_for(
        self, series: OccupancySeries, thresholds: OccupancyThresholds
    ) -> np.ndarray:
        mod, _ = _minutes_and_days(series)
        if self.always_off:
            on = np.zeros(len(series), dtype=bool)
        else:
            on = (mod >= self.start_minute) & (mod <= self.end_minute)
        return np.where(on, Action.TURN_ON, Action.STANDBY).astype(np.int64)


@dataclass(frozen=True)
class WeeklySchedule:
    """One window per weekday (Monday = 0)."""

    days: tuple[Schedule, ...]

    def __post_init__(self):
        if len(self.days) != 7:
            raise ValueError("need exactly 7 daily schedules")

    def actions_for(
        self, series: OccupancySeries, thresholds: OccupancyThresholds
    ) -> np.ndarray:
        mod, dow = _minutes_and_days(series)
        on = np.zeros(len(series), dtype=bool)
        for d, sched in enumerate(self.days):
            sel = dow == d
            if sel.any():
                day_actions = np.array([sched.is_on(int(m)) for m in range(MINUTES_PER_DAY)])
                on[sel] = day_actions[mod[sel]]
        return np.where(on, Action.TURN_ON, Action.STANDBY).astype(np.int64)


def fit_naive(
    train_series: OccupancySeries | Sequence[OccupancySeries],
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    per_weekday: bool = False,
) -> Schedule | WeeklySchedule:
    """Fix a daily on-window spanning the earliest to latest observed high minute.

    The window is inclusive on both ends. With ``per_weekday`` each weekday
    gets its own window; days that never saw a high minute stay off. No high
    minutes anywhere yields the never-on schedule.
    """
    if isinstance(train_series, OccupancySeries):
        train_series = [train_series]

    def window(mask_minutes: np.ndarray) -> Schedule:
        if mask_minutes.size == 0:
            return Schedule.never()
        return Schedule(int(mask_minutes.min()), int(mask_minutes.max()))

    if not per_weekday:
        highs = [
            _minutes_and_days(s)[0][s.high_mask(thresholds)] for s in train_series
        ]
        return window(np.concatenate(highs) if highs else np.array([], dtype=np.int64))

    per_day: list[np.ndarray] = [np.array([], dtype=np.int64) for _ in range(7)]
    for s in train_series:
        mod, dow = _minutes_and_days(s)
        mask = s.high_mask(thresholds)
        for d in range(7):
            sel = mask & (dow == d)
            per_day[d] = np.concatenate([per_day[d], mod[sel]])
    return WeeklySchedule(tuple(window(m) for m in per_day))


# ---------------------------------------------------------------------------
# Linear SVM on cyclical time features
# ---------------------------------------------------------------------------

@dataclass
class SvmPolicy:
    """Linear separator over [hour_sin, hour_cos, day_sin, day_cos, 1].

    Predicts "high minute" from calendar position only; the camera turns on
    for minutes scored positive. ``constant`` short-circuits the score when
    training ever saw only one class.
    """

    weights: np.ndarray
    constant: int | None = None

    def scores(self, series: OccupancySeries) -> np.ndarray:
        mod, dow = _minutes_and_days(series)
        t = CyclicalTable()
        x = np.column_stack(
            [
                t.hour_sin[mod],
                t.hour_cos[mod],
                t.day_sin[dow],
                t.day_cos[dow],
                np.ones(len(series)),
            ]
        )
        return x @ self.weights

    def actions_for(
        self, series: OccupancySeries, thresholds: OccupancyThresholds
    ) -> np.ndarray:
        if self.constant is not None:
            return np.full(len(series), self.constant, dtype=np.int64)
        on = self.scores(series) > 0.0
        return np.where(on, Action.TURN_ON, Action.STANDBY).astype(np.int64)


def fit_svm(
    train_series: OccupancySeries | Sequence[OccupancySeries],
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    lambda_reg: float = 1e-4,
    epochs: int = 5,
    seed: int = 0,
) -> SvmPolicy:
    """Train the linear separator with hinge-loss SGD (Pegasos-style steps).

    Every training minute is a sample: label +1 when high-occupancy, -1
    otherwise. Hinge updates are scaled by inverse class frequency so the rare
    positive class is not drowned out. The learning rate is the standard
    1 / (lambda * t) decay, which needs no tuning.
    """
    if isinstance(train_series, OccupancySeries):
        train_series = [train_series]
    feats = []
    labels = []
    t = CyclicalTable()
    for s in train_series:
        mod, dow = _minutes_and_days(s)
        feats.append(
            np.column_stack(
                [t.hour_sin[mod], t.hour_cos[mod], t.day_sin[dow], t.day_cos[dow], np.ones(len(s))]
            )
        )
        labels.append(np.where(s.high_mask(thresholds), 1.0, -1.0))
    x = np.concatenate(feats)
    y = np.concatenate(labels)
    n = len(y)
    n_pos = int((y > 0).sum())
    if n_pos == 0 or n_pos == n:
        label = Action.TURN_ON if n_pos == n else Action.STANDBY
        log.warning("svm training data has a single class; fitting constant %s", label.name)
        return SvmPolicy(weights=np.zeros(5), constant=int(label))
    # Inverse-frequency class weights, normalized to average 1.
    c_pos = n / (2.0 * n_pos)
    c_neg = n / (2.0 * (n - n_pos))
    c = np.where(y > 0, c_pos, c_neg)

    rng = np.random.default_rng(seed)
    w = np.zeros(5)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            step += 1
            eta = 1.0 / (lambda_reg * step)
            margin = y[i] * (x[i] @ w)
            w *= 1.0 - eta * lambda_reg
            if margin < 1.0:
                w += eta * c[i] * y[i] * x[i]
    return SvmPolicy(weights=w)


def run_policy(
    policy: Policy,
    series: OccupancySeries,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
) -> np.ndarray:
    """One camera action per minute of ``series`` under ``policy``."""
    actions = np.asarray(policy.actions_for(series, thresholds), dtype=np.int64)
    if actions.shape != (len(series),):
        raise ValueError(
            f"policy returned {actions.shape} actions for a {len(series)}-minute series"
        )
    return actions
