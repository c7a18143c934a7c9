"""Oracle, window-schedule, and SVM baseline behavior."""

import logging

import numpy as np
import pytest

from camduty.baselines import (
    OptimalPolicy,
    Schedule,
    SvmPolicy,
    WeeklySchedule,
    fit_naive,
    fit_svm,
    run_policy,
)
from camduty.env import Action
from helpers import MONDAY, block_series, flat_series


def test_optimal_matches_high_mask(thresholds):
    s = block_series([(660, 780)], minutes=2 * 1440)
    actions = OptimalPolicy().actions_for(s, thresholds)
    high = s.high_mask(thresholds)
    np.testing.assert_array_equal(actions == Action.TURN_ON, high)
    np.testing.assert_array_equal(actions == Action.STANDBY, ~high)


def test_optimal_all_low_never_on(thresholds):
    s = flat_series(0.2, minutes=1440)
    assert (OptimalPolicy().actions_for(s, thresholds) == Action.STANDBY).all()


# ---------------------------------------------------------------------------
# Fixed windows
# ---------------------------------------------------------------------------

def test_schedule_window_is_inclusive(thresholds):
    sched = Schedule(600, 720)
    assert sched.on_minutes == 121
    assert sched.is_on(600) and sched.is_on(720)
    assert not sched.is_on(599) and not sched.is_on(721)
    s = flat_series(0.2, minutes=1440)
    actions = sched.actions_for(s, thresholds)
    on_idx = np.flatnonzero(actions == Action.TURN_ON)
    np.testing.assert_array_equal(on_idx, np.arange(600, 721))


def test_schedule_rejects_wrapping_and_out_of_range():
    with pytest.raises(ValueError):
        Schedule(700, 600)  # end before start: no midnight wrap allowed
    with pytest.raises(ValueError):
        Schedule(-1, 100)
    with pytest.raises(ValueError):
        Schedule(0, 1440)


def test_schedule_never(thresholds):
    sched = Schedule.never()
    assert sched.on_minutes == 0
    assert not sched.is_on(0)
    s = flat_series(0.9, minutes=1440)
    assert (sched.actions_for(s, thresholds) == Action.STANDBY).all()


def test_schedule_respects_series_start_offset(thresholds):
    # Series starting at 06:00: minute index 0 is minute-of-day 360.
    s = flat_series(0.2, minutes=120, start=MONDAY.replace(hour=6))
    actions = Schedule(400, 410).actions_for(s, thresholds)
    on_idx = np.flatnonzero(actions == Action.TURN_ON)
    np.testing.assert_array_equal(on_idx, np.arange(40, 51))


def test_fit_naive_spans_observed_highs(thresholds):
    s = block_series([(660, 780), (1000, 1100)], minutes=3 * 1440)
    sched = fit_naive(s, thresholds)
    assert isinstance(sched, Schedule)
    assert sched.start_minute == 660
    assert sched.end_minute == 1099  # half-open block, inclusive window


def test_fit_naive_multiple_series_merge(thresholds):
    a = block_series([(600, 700)], minutes=1440, street="a")
    b = block_series([(800, 900)], minutes=1440, street="b")
    sched = fit_naive([a, b], thresholds)
    assert (sched.start_minute, sched.end_minute) == (600, 899)


def test_fit_naive_no_high_minutes(thresholds):
    sched = fit_naive(flat_series(0.3, minutes=1440), thresholds)
    assert sched.on_minutes == 0
    assert sched.always_off


def test_fit_naive_per_weekday(thresholds):
    # High block only on the second day (Tuesday for a Monday start).
    values = np.full(2 * 1440, 0.1)
    values[1440 + 540 : 1440 + 660] = 0.95
    from camduty.data import OccupancySeries

    s = OccupancySeries(street_id="wk", start=MONDAY, bay_count=20, values=values)
    weekly = fit_naive(s, thresholds, per_weekday=True)
    assert isinstance(weekly, WeeklySchedule)
    assert weekly.days[0].on_minutes == 0  # Monday saw nothing
    assert (weekly.days[1].start_minute, weekly.days[1].end_minute) == (540, 659)
    for d in range(2, 7):
        assert weekly.days[d].on_minutes == 0
    actions = weekly.actions_for(s, thresholds)
    on_idx = np.flatnonzero(actions == Action.TURN_ON)
    np.testing.assert_array_equal(on_idx, np.arange(1440 + 540, 1440 + 660))


def test_weekly_schedule_needs_seven_days():
    with pytest.raises(ValueError):
        WeeklySchedule(days=tuple(Schedule.never() for _ in range(5)))


# ---------------------------------------------------------------------------
# Linear SVM
# ---------------------------------------------------------------------------

def test_fit_svm_learns_separable_daytime_block(thresholds):
    # Highs centered near noon every day are separable on hour features.
    s = block_series([(660, 780)], minutes=7 * 1440)
    policy = fit_svm(s, thresholds, epochs=3)
    assert policy.constant is None
    actions = policy.actions_for(s, thresholds)
    high = s.high_mask(thresholds)
    agree = (actions == np.where(high, Action.TURN_ON, Action.STANDBY)).mean()
    assert agree > 0.9


def test_fit_svm_single_class_constant(thresholds, caplog):
    s = flat_series(0.1, minutes=1440)
    with caplog.at_level(logging.WARNING, logger="camduty.baselines"):
        policy = fit_svm(s, thresholds)
    assert policy.constant == int(Action.STANDBY)
    assert any("single class" in r.message for r in caplog.records)
    assert (policy.actions_for(s, thresholds) == Action.STANDBY).all()

    always = fit_svm(flat_series(0.95, minutes=1440), thresholds)
    assert always.constant == int(Action.TURN_ON)


def test_fit_svm_deterministic(thresholds):
    s = block_series([(600, 720)], minutes=2 * 1440)
    a = fit_svm(s, thresholds, seed=3)
    b = fit_svm(s, thresholds, seed=3)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_svm_scores_shape(thresholds):
    s = flat_series(0.2, minutes=300)
    policy = SvmPolicy(weights=np.array([0.0, 0.0, 0.0, 0.0, 1.0]))
    assert policy.scores(s).shape == (300,)
    assert (policy.actions_for(s, thresholds) == Action.TURN_ON).all()


# ---------------------------------------------------------------------------
# run_policy
# ---------------------------------------------------------------------------

class _BrokenPolicy:
    def actions_for(self, series, thresholds):
        return np.zeros(len(series) - 1, dtype=np.int64)


def test_run_policy_validates_shape(thresholds):
    s = flat_series(0.2, minutes=100)
    with pytest.raises(ValueError, match="100-minute"):
        run_policy(_BrokenPolicy(), s, thresholds)
    out = run_policy(OptimalPolicy(), s, thresholds)
    assert out.dtype == np.int64
    assert out.shape == (100,)
