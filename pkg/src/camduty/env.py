"""Minute-stepped standby-control environment over an occupancy series."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import OccupancySeries, OccupancyThresholds
from .profiles import CyclicalTable

TEMPORAL_FEATURES = 4
DEFAULT_HISTORY = 9


class CameraState(enum.IntEnum):
    STANDBY = 0
    ON = 1


class Action(enum.IntEnum):
    """Index order matters: argmax over Q-values breaks ties toward TURN_ON."""

    TURN_ON = 0
    STANDBY = 1


def state_dim(history: int = DEFAULT_HISTORY) -> int:
    """Flat state width: (history+1) camera/occupancy pairs plus temporal features."""
    return 2 * (history + 1) + TEMPORAL_FEATURES


def camera_history(state: np.ndarray, history: int = DEFAULT_HISTORY) -> np.ndarray:
    """Camera-state entries of a flat state vector, oldest first."""
    return state[0 : 2 * (history + 1) : 2]

def occupancy_history(state: np.ndarray, history: int = DEFAULT_HISTORY) -> np.ndarray:
    """Observed-occupancy entries of a flat state vector, oldest first."""
    return state[1 : 2 * (history + 1) : 2]

def temporal_features(state: np.ndarray) -> np.ndarray:
    """The trailing [hour_sin, hour_cos, day_sin, day_cos] block."""
    return state[-TEMPORAL_FEATURES:]


@dataclass(frozen=True)
class RewardParams:
    """Normalized penalty weights for the per-minute reward.

    ``e1_hat``/``e2_hat`` are the camera's operating and processing energy
    rates, ``w_hat`` weighs a missed high-occupancy minute. With the default
    ``energy_always_on=False`` the energy term is charged only while the camera
    runs, so standby minutes cost nothing unless they miss a high minute;
    setting it charges energy every minute regardless of camera state.
    """

    e1_hat: float
    e2_hat: float
    w_hat: float
    duration: float = 1.0
    energy_always_on: bool = False

    def __post_init__(self):
        for name in ("e1_hat", "e2_hat", "w_hat"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.e1_hat + self.e2_hat > 1.0 + 1e-12:
            raise ValueError("e1_hat + e2_hat must not exceed 1")
        if self.duration <= 0.0:
            raise ValueError("duration must be > 0")

    @property
    def energy_penalty(self) -> float:
        return (self.e1_hat + self.e2_hat) * self.duration


def normalize_reward_params(
    e1: float, e2: float, w: float, ceiling: float | None = None, **kwargs
) -> RewardParams:
    """Scale raw penalty weights so they sum to 1.

    Raw weights can come in any unit (joules, dollars); only their ratio
    matters. If ``ceiling`` is given, the normalized weights are rescaled so
    the largest equals it. The energy rates must not both be zero: a camera
    that is free to run has nothing to trade off.
    """
    if min(e1, e2, w) < 0.0:
        raise ValueError("reward weights must be >= 0")
    if e1 + e2 <= 0.0:
        raise ValueError("energy rates e1 + e2 must be > 0")
    total = e1 + e2 + w
    e1n, e2n, wn = e1 / total, e2 / total, w / total
    if ceiling is not None:
        if not 0.0 < ceiling <= 1.0:
            raise ValueError("ceiling must be in (0, 1]")
        scale = ceiling / max(e1n, e2n, wn)
        e1n, e2n, wn = e1n * scale, e2n * scale, wn * scale
    return RewardParams(e1_hat=e1n, e2_hat=e2n, w_hat=wn, **kwargs)


def _penalty(standby: bool, high: bool, params: RewardParams) -> float:
    missed = params.w_hat if (standby and high) else 0.0
    if params.energy_always_on:
        return -(params.energy_penalty + missed)
    if standby:
        return -missed
    return -params.energy_penalty


def reward_fn(
    action: Action,
    true_occupancy: float,
    params: RewardParams,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
) -> float:
    """Per-minute penalty for taking ``action`` at a minute with this occupancy.

    Always <= 0: running the camera costs energy, sleeping through a
    high-occupancy minute costs a missed detection.
    """
    if not 0.0 <= true_occupancy <= 1.0:
        raise ValueError(f"occupancy {true_occupancy} outside [0, 1]")
    return _penalty(
        Action(action) is Action.STANDBY, true_occupancy >= thresholds.high, params
    )


class StandbyEnv:
    """Steps through an occupancy series one minute at a time.

    ``reset()`` observes minute 0 with the camera on (history before the series
    is padded as standby/zero) and each subsequent ``step(action)`` governs the
    next minute: TURN_ON sees the true occupancy, STANDBY observes zero. The
    agent therefore only learns about current demand by spending energy to
    look, which is the whole control problem.

    An episode of ``length`` steps consumes ``length + 1`` minutes of data.
    """

    def __init__(
        self,
        series: OccupancySeries,
        params: RewardParams,
        thresholds: OccupancyThresholds = OccupancyThresholds(),
        history: int = DEFAULT_HISTORY,
        start: dt.datetime | int | None = None,
        length: int | None = None,
        table: CyclicalTable | None = None,
    ):
        if history < 0:
            raise ValueError("history must be >= 0")
        self.series = series
        self.params = params
        self.thresholds = thresholds
        self.history = history
        self._start_index = (
            0 if start is None else start if isinstance(start, int) else series.index_of(start)
        )
        if not 0 <= self._start_index < len(series):
            raise ValueError(f"start index {self._start_index} outside series")
        max_len = len(series) - 1 - self._start_index
        self.length = max_len if length is None else length
        if not 1 <= self.length <= max_len:
            raise ValueError(
                f"length {self.length} needs {self.length + 1} minutes from index "
                f"{self._start_index}, series has {len(series)}"
            )
        table = table if table is not None else CyclicalTable()
        # Per-minute lookups for the slice this episode can touch.
        lo, hi = self._start_index, self._start_index + self.length + 1
        self._values = series.values[lo:hi]
        self._high = self._values >= thresholds.high
        base_minute = series.start.hour * 60 + series.start.minute + lo
        abs_minutes = base_minute + np.arange(self.length + 1)
        mod = abs_minutes % 1440
        dow = (series.start.weekday() + abs_minutes // 1440) % 7
        self._temporal = np.column_stack(
            [table.hour_sin[mod], table.hour_cos[mod], table.day_sin[dow], table.day_cos[dow]]
        )
        self._state = np.zeros(state_dim(history))
        self._step = 0
        self._done = True

    @property
    def state(self) -> np.ndarray:
        return self._state.copy()

    @property
    def steps_taken(self) -> int:
        return self._step

    def reset(self) -> np.ndarray:
        """Observe minute 0 with the camera on; pre-series history is standby/zero."""
        pairs = 2 * (self.history + 1)
        self._state[:pairs] = 0.0
        self._state[pairs - 2] = float(CameraState.ON)
        self._state[pairs - 1] = self._values[0]
        self._state[pairs:] = self._temporal[0]
        self._step = 0
        self._done = False
        return self.state

    def step(self, action: Action) -> tuple[np.ndarray, float, bool, dict]:
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        self._step += 1
        i = self._step
        standby = action != Action.TURN_ON
        high = self._high[i]
        reward = _penalty(standby, high, self.params)
        pairs = 2 * (self.history + 1)
        state = self._state
        state[: pairs - 2] = state[2:pairs]
        if standby:
            state[pairs - 2] = 0.0
            state[pairs - 1] = 0.0
        else:
            state[pairs - 2] = 1.0
            state[pairs - 1] = self._values[i]
        state[pairs:] = self._temporal[i]
        self._done = i >= self.length
        info = {
            "camera": CameraState.STANDBY if standby else CameraState.ON,
            "true_occupancy": float(self._values[i]),
            "missed": bool(standby and high),
        }
        return state.copy(), reward, self._done, info


# ---------------------------------------------------------------------------
# Rollout traces
# ---------------------------------------------------------------------------

@dataclass
class TraceRow:
    step: int
    timestamp: dt.datetime
    action: Action
    camera: CameraState
    true_occupancy: float
    observed_occupancy: float
    reward: float


def rollout_trace(
    series: OccupancySeries,
    actions: Sequence[Action],
    params: RewardParams,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
) -> list[TraceRow]:
    """Reconstruct the per-minute trace of running ``actions`` over ``series``.

    ``actions[i]`` governs minute i; rollouts start with the camera on, so
    ``actions[0]`` is expected to be TURN_ON.
    """
    if len(actions) != len(series):
        raise ValueError(f"need one action per minute: {len(actions)} != {len(series)}")
    rows = []
    for i, action in enumerate(actions):
        action = Action(action)
        camera = CameraState.ON if action is Action.TURN_ON else CameraState.STANDBY
        true_occ = float(series.values[i])
        rows.append(
            TraceRow(
                step=i,
                timestamp=series.timestamp_at(i),
                action=action,
                camera=camera,
                true_occupancy=true_occ,
                observed_occupancy=true_occ if camera is CameraState.ON else 0.0,
                reward=reward_fn(action, true_occ, params, thresholds),
            )
        )
    return rows


def write_trace_csv(rows: Sequence[TraceRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "timestamp", "action", "camera", "true_occupancy", "observed_occupancy", "reward"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.step,
                    r.timestamp.isoformat(timespec="minutes"),
                    r.action.name,
                    r.camera.name,
                    f"{r.true_occupancy:.6f}",
                    f"{r.observed_occupancy:.6f}",
                    f"{r.reward:.9f}",
                ]
            )
