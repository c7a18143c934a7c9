"""Accuracy/energy metrics, demand-pattern transforms, and evaluation reports."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .agent import AgentConfig, train
from .data import MINUTES_PER_DAY, OccupancySeries, OccupancyThresholds
from .env import Action, RewardParams, normalize_reward_params
from .baselines import Policy, run_policy

log = logging.getLogger(__name__)


def camera_on_mask(actions: np.ndarray) -> np.ndarray:
    return np.asarray(actions) == Action.TURN_ON


def accuracy(
    actions: np.ndarray,
    series: OccupancySeries,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
) -> float:
    """Percentage of high-occupancy minutes the camera was on for.

    A street with no high minutes scores 100: there was nothing to miss.
    """
    high = series.high_mask(thresholds)
    n_high = int(high.sum())
    if n_high == 0:
        return 100.0
    covered = int((camera_on_mask(actions) & high).sum())
    return 100.0 * covered / n_high


def energy_savings(actions: np.ndarray) -> float:
    """Percentage of minutes spent in standby."""
    actions = np.asarray(actions)
    if actions.size == 0:
        raise ValueError("empty action sequence")
    return 100.0 * float((actions == Action.STANDBY).sum()) / actions.size


@dataclass
class PolicyMetrics:
    street_id: str
    accuracy: float
    savings: float
    high_minutes: int
    total_minutes: int


@dataclass
class EvalReport:
    """Per-street metrics plus cross-street aggregates for one policy.

    Standard deviations are population (divide by N), since street sets here
    are the whole population of interest, not a sample.
    """

    policy_name: str
    per_street: list[PolicyMetrics]
    mean_accuracy: float
    mean_savings: float
    std_accuracy: float
    std_savings: float
    min_accuracy: float
    max_accuracy: float
    min_savings: float
    max_savings: float

    def __str__(self) -> str:
        return (
            f"{self.policy_name}: accuracy {self.mean_accuracy:.2f}% "
            f"(std {self.std_accuracy:.2f}), savings {self.mean_savings:.2f}% "
            f"(std {self.std_savings:.2f}) over {len(self.per_street)} street(s)"
        )


def _aggregate(
    rows: list[PolicyMetrics], policy_name: str, skip_zero_high: bool = False
) -> EvalReport:
    agg = [r for r in rows if not (skip_zero_high and r.high_minutes == 0)]
    if not agg:
        agg = rows
    accs = np.array([r.accuracy for r in agg])
    savs = np.array([r.savings for r in agg])
    return EvalReport(
        policy_name=policy_name,
        per_street=rows,
        mean_accuracy=float(accs.mean()),
        mean_savings=float(savs.mean()),
        std_accuracy=float(accs.std()),
        std_savings=float(savs.std()),
        min_accuracy=float(accs.min()),
        max_accuracy=float(accs.max()),
        min_savings=float(savs.min()),
        max_savings=float(savs.max()),
    )


def evaluate(
    policy: Policy,
    series_list: OccupancySeries | Sequence[OccupancySeries],
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    policy_name: str = "policy",
    skip_zero_high: bool = False,
) -> EvalReport:
    """Run a policy over each street and aggregate accuracy and savings.

    Streets average with equal weight regardless of length. ``skip_zero_high``
    drops streets with no high minutes from the aggregates (their accuracy is
    the vacuous 100) while keeping their rows in the report.
    """
    if isinstance(series_list, OccupancySeries):
        series_list = [series_list]
    series_list = list(series_list)
    if not series_list:
        raise ValueError("no series to evaluate")
    rows = []
    for s in series_list:
        actions = run_policy(policy, s, thresholds)
        rows.append(
            PolicyMetrics(
                street_id=s.street_id,
                accuracy=accuracy(actions, s, thresholds),
                savings=energy_savings(actions),
                high_minutes=int(s.high_mask(thresholds).sum()),
                total_minutes=len(s),
            )
        )
    return _aggregate(rows, policy_name, skip_zero_high)


REPORT_CSV_HEADER = ["street_id", "policy", "accuracy_pct", "savings_pct",
                     "high_minutes", "total_minutes"]
AGGREGATE_CSV_HEADER = ["policy",
                        "accuracy_avg", "accuracy_min", "accuracy_max", "accuracy_std",
                        "savings_avg", "savings_min", "savings_max", "savings_std"]


def write_report_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    """Per-street rows for every policy, one row per (street, policy)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_HEADER)
        for rep in reports:
            for r in rep.per_street:
                writer.writerow(
                    [r.street_id, rep.policy_name, f"{r.accuracy:.4f}", f"{r.savings:.4f}",
                     r.high_minutes, r.total_minutes]
                )


def write_aggregate_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    """Average/min/max/standard deviation of both metrics, one row per policy."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_CSV_HEADER)
        for rep in reports:
            writer.writerow(
                [rep.policy_name,
                 f"{rep.mean_accuracy:.4f}", f"{rep.min_accuracy:.4f}",
                 f"{rep.max_accuracy:.4f}", f"{rep.std_accuracy:.4f}",
                 f"{rep.mean_savings:.4f}", f"{rep.min_savings:.4f}",
                 f"{rep.max_savings:.4f}", f"{rep.std_savings:.4f}"]
            )


# ---------------------------------------------------------------------------
# Demand-pattern transforms
# ---------------------------------------------------------------------------

def transform_shift(series: OccupancySeries, hours: int) -> OccupancySeries:
    """Rotate the whole series by whole hours; positive moves activity later.

    The rotation is circular over the full series, so total occupancy mass is
    preserved exactly.
    """
    if not isinstance(hours, (int, np.integer)):
        raise TypeError("shift must be a whole number of hours")
    shifted = np.roll(series.values, int(hours) * 60)
    return replace(
        series, street_id=f"{series.street_id}+shift{hours:+d}h", values=shifted
    )


MORNING_EDGE = 5 * 60       # transformed activity never starts before 05:00
EVENING_EDGE = 23 * 60      # nor runs past 23:00
_EXTEND = 120               # each side of the day moves out by two hours


def transform_extend(series: OccupancySeries) -> OccupancySeries:
    """Stretch each day's activity window by two hours on both sides.

    The morning half of the day (up to noon) is pulled two hours earlier and
    the afternoon half pushed two hours later, clamped to 05:00 and 23:00. The
    midday gap the stretch opens is held at the last morning value, and the
    out-of-window night minutes take the series' nightly baseline (the median
    occupancy over 00:00-05:00 and 23:00-24:00).
    """
    n = len(series)
    if n % MINUTES_PER_DAY != 0:
        raise ValueError("extend transform needs whole days")
    days = series.values.reshape(-1, MINUTES_PER_DAY)
    minutes = np.arange(MINUTES_PER_DAY)
    night_mask = (minutes < MORNING_EDGE) | (minutes >= EVENING_EDGE)
    baseline = float(np.median(days[:, night_mask]))

    noon = 12 * 60
    out = np.full_like(days, baseline)
    # Morning side: dest [05:00, 10:00) reads two hours ahead of itself.
    dest_m = np.arange(MORNING_EDGE, noon - _EXTEND)
    out[:, dest_m] = days[:, dest_m + _EXTEND]
    # Afternoon side: dest [14:00, 23:00) reads two hours behind itself.
    dest_a = np.arange(noon + _EXTEND, EVENING_EDGE)
    out[:, dest_a] = days[:, dest_a - _EXTEND]
    # Stretch gap [10:00, 14:00): hold the last morning value.
    out[:, noon - _EXTEND : noon + _EXTEND] = out[:, noon - _EXTEND - 1][:, None]
    return replace(
        series, street_id=f"{series.street_id}+extend", values=np.clip(out.reshape(-1), 0.0, 1.0)
    )


def perturb_noise(
    series: OccupancySeries, delta_pct: float, rng: np.random.Generator
) -> OccupancySeries:
    """Scale each minute by an independent factor drawn from +-delta percent.

    o_i becomes clip(o_i * (1 + x_i / 100), 0, 1) with x_i uniform on
    [-delta_pct, +delta_pct]. delta 0 returns the values unchanged.
    """
    if delta_pct < 0.0:
        raise ValueError("delta_pct must be >= 0")
    x = rng.uniform(-delta_pct, delta_pct, len(series))
    noisy = np.clip(series.values * (1.0 + x / 100.0), 0.0, 1.0)
    return replace(series, street_id=f"{series.street_id}+noise{delta_pct:g}", values=noisy)


# ---------------------------------------------------------------------------
# Evaluation suites
# ---------------------------------------------------------------------------

def evaluate_shifts(
    policy: Policy,
    series_list: Sequence[OccupancySeries],
    hours: Sequence[int] = tuple(range(-6, 7)),
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    policy_name: str = "policy",
) -> dict[int, EvalReport]:
    """Fixed policy against time-shifted demand, one report per shift."""
    out: dict[int, EvalReport] = {}
    for h in hours:
        shifted = [transform_shift(s, h) for s in series_list]
        out[h] = evaluate(policy, shifted, thresholds, policy_name=f"{policy_name}@shift{h:+d}h")
    return out


def evaluate_extend(
    policy: Policy,
    series_list: Sequence[OccupancySeries],
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    policy_name: str = "policy",
) -> EvalReport:
    extended = [transform_extend(s) for s in series_list]
    return evaluate(policy, extended, thresholds, policy_name=f"{policy_name}@extend")


def evaluate_noise(
    policy: Policy,
    series_list: Sequence[OccupancySeries],
    deltas: Sequence[float] = (0.0, 10.0, 20.0, 30.0),
    seed: int = 0,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    policy_name: str = "policy",
) -> dict[float, EvalReport]:
    """Fixed policy against sensor noise of increasing magnitude.

    Accuracy is still judged against the clean series: noise corrupts what the
    policy sees, not what actually happened on the street.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6E6F6973)))
    out: dict[float, EvalReport] = {}
    for d in deltas:
        rows = []
        for s in series_list:
            noisy = perturb_noise(s, d, rng)
            actions = run_policy(policy, noisy, thresholds)
            rows.append(
                PolicyMetrics(
                    street_id=s.street_id,
                    accuracy=accuracy(actions, s, thresholds),
                    savings=energy_savings(actions),
                    high_minutes=int(s.high_mask(thresholds).sum()),
                    total_minutes=len(s),
                )
            )
        out[d] = _aggregate(rows, f"{policy_name}@noise{d:g}")
    return out


@dataclass
class SweepPoint:
    w: float
    reward: RewardParams
    accuracy: float
    savings: float


def sweep_missed_detection_weight(
    train_series: Sequence[OccupancySeries],
    test_series: Sequence[OccupancySeries],
    w_values: Sequence[float],
    e1: float = 1.0,
    e2: float = 1.0,
    config: AgentConfig = AgentConfig(),
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    validation_series: Sequence[OccupancySeries] | None = None,
    train_fn: Callable | None = None,
) -> list[SweepPoint]:
    """Retrain at each missed-detection weight and measure the trade-off moved.

    Raw weights (e1, e2, w) are renormalized per point. Larger w buys accuracy
    with energy; the sweep traces that frontier. ``train_fn`` exists so tests
    can substitute a cheaper trainer; it must accept the same arguments as
    :func:`camduty.agent.train`.
    """
    if not w_values:
        raise ValueError("no w values to sweep")
    trainer = train_fn if train_fn is not None else train
    points = []
    for w in w_values:
        reward = normalize_reward_params(e1, e2, w)
        result = trainer(
            list(train_series), reward, config, thresholds, validation_series
        )
        report = evaluate(result.checkpoint, list(test_series), thresholds,
                          policy_name=f"rl@w{w:g}")
        log.info("sweep w=%g: %s", w, report)
        points.append(
            SweepPoint(w=float(w), reward=reward,
                       accuracy=report.mean_accuracy, savings=report.mean_savings)
        )
    return points


def write_sweep_csv(points: Sequence[SweepPoint], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w_raw", "w_hat", "accuracy_pct", "savings_pct"])
        for p in points:
            writer.writerow(
                [f"{p.w:g}", f"{p.reward.w_hat:.6f}", f"{p.accuracy:.4f}", f"{p.savings:.4f}"]
            )
