"""Standby-policy learner: double Q-learning with a dueling network and prioritized replay."""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .data import OccupancySeries, OccupancyThresholds
from .env import Action, DEFAULT_HISTORY, RewardParams, StandbyEnv, state_dim
from .nn import Adam, QNetwork
from .profiles import CyclicalTable
from .replay import Experience, PerBuffer

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CAMDUTY1"
CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class LinearSchedule:
    """Linear ramp from ``start`` to ``end`` over ``steps``, then flat.

    ``value(steps)`` equals ``end`` exactly; no asymptotic tail.
    """

    start: float
    end: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    def value(self, step: int) -> float:
        if step <= 0:
            return self.start
        if step >= self.steps:
            return self.end
        return self.start + (self.end - self.start) * step / self.steps


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters for training; defaults are the package's desk-scale setup."""

    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 64
    target_sync: int = 1000
    buffer_capacity: int = 100_000
    warmup: int = 5000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 200_000
    per_alpha: float = 0.6
    per_beta_start: float = 0.4
    per_beta_end: float = 1.0
    per_eps: float = 1e-3
    episodes: int = 300
    episode_length: int = 2880
    history: int = DEFAULT_HISTORY
    hidden: tuple[int, ...] = (32, 16)
    validation_interval: int = 25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ValueError("epsilon bounds must be in [0, 1]")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        if self.warmup < self.batch_size:
            raise ValueError("warmup must cover at least one batch")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    @property
    def total_steps(self) -> int:
        return self.episodes * self.episode_length

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (32, 16)))
        return cls(**d)


def select_action(
    network: QNetwork, state: np.ndarray, epsilon: float, rng: np.random.Generator
) -> Action:
    """Epsilon-greedy action choice; exact Q ties resolve to TURN_ON.

    The exploration draw happens first, so exploring steps skip the forward
    pass entirely.
    """
    if epsilon > 0.0 and rng.random() < epsilon:
        return Action(int(rng.integers(network.n_actions)))
    return Action(int(np.argmax(network.q_values(state))))


def double_q_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    next_q_online: np.ndarray,
    next_q_target: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """Bootstrap targets where the online net picks and the target net scores.

    y = r + gamma * Q_target(s', argmax_a Q_online(s', a)), zeroed past episode
    ends. The decoupling keeps the max from chasing its own overestimates.
    """
    best = np.argmax(next_q_online, axis=1)
    bootstrap = next_q_target[np.arange(len(best)), best]
    return rewards + gamma * np.where(dones, 0.0, bootstrap)


@njit(cache=True)
def _td_and_grad(
    q_all: np.ndarray,
    next_q_target: np.ndarray,
    rewards: np.ndarray,
    dones: np.ndarray,
    actions: np.ndarray,
    weights: np.ndarray,
    gamma: float,
    dq: np.ndarray,
    td: np.ndarray,
) -> None:
    """Fused per-step training math over a stacked forward's output.

    ``q_all`` holds the online net's Q-values for the sampled states (first
    half) and next states (second half). Writes the raw TD errors into ``td``
    and the weighted squared-error gradient with respect to Q into ``dq``,
    matching double_q_target plus the loss_and_grads scatter exactly: argmax
    ties keep the lowest action index, done rows drop the bootstrap term.
    """
    n, n_actions = dq.shape
    for k in range(n):
        best = 0
        for a in range(1, n_actions):
            if q_all[n + k, a] > q_all[n + k, best]:
                best = a
        bootstrap = 0.0 if dones[k] else next_q_target[k, best]
        target = rewards[k] + gamma * bootstrap
        err = q_all[k, actions[k]] - target
        td[k] = err
        for a in range(n_actions):
            dq[k, a] = 0.0
        dq[k, actions[k]] = 2.0 * weights[k] * err / n


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    """A trained policy: online and target weights plus everything to rerun them."""

    network: QNetwork
    target_network: QNetwork
    reward: RewardParams
    config: AgentConfig
    metadata: dict = field(default_factory=dict)

    @property
    def history(self) -> int:
        return self.config.history

    def actions_for(
        self, series: OccupancySeries, thresholds: OccupancyThresholds = OccupancyThresholds()
    ) -> np.ndarray:
        """Greedy per-minute actions, making a checkpoint usable as a policy."""
        return act_greedy(self, series, thresholds)

    def _array_names(self) -> list[str]:
        names = []
        for prefix in ("online", "target"):
            for i in range(len(self.network.trunk)):
                names.extend((f"{prefix}.trunk{i}.w", f"{prefix}.trunk{i}.b"))
            names.extend(
                (f"{prefix}.value.w", f"{prefix}.value.b",
                 f"{prefix}.advantage.w", f"{prefix}.advantage.b")
            )
        return names

    def save(self, path: str | Path) -> None:
        """Write the binary checkpoint: magic, header length, JSON header, raw arrays.

        Layout: 8-byte magic ``CAMDUTY1``, little-endian uint32 JSON header
        length, the UTF-8 JSON header, then each parameter array as row-major
        little-endian float64 in the order the header's ``arrays`` list names
        (online network first, then target network).
        """
        params = self.network.parameters() + self.target_network.parameters()
        names = self._array_names()
        header = {
            "format": CHECKPOINT_FORMAT,
            "state_size": self.network.state_size,
            "n_actions": self.network.n_actions,
            "hidden": list(self.network.hidden),
            "feature_layout": "interleaved camera/occupancy pairs oldest-first, "
            "then hour_sin, hour_cos, day_sin, day_cos",
            "reward": dataclasses.asdict(self.reward),
            "config": self.config.to_dict(),
            "metadata": self.metadata,
            "arrays": [{"name": n, "shape": list(p.shape)} for n, p in zip(names, params)],
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with Path(path).open("wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for p in params:
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        raw = Path(path).read_bytes()
        if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        off = len(CHECKPOINT_MAGIC)
        (hlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')}")
        off += hlen
        config = AgentConfig.from_dict(header["config"])
        arrays = []
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
            arrays.append(arr.astype(np.float64))
            off += 8 * n
        if off != len(raw):
            raise ValueError(f"{path}: {len(raw) - off} trailing bytes after arrays")
        online = QNetwork(header["state_size"], header["n_actions"], tuple(header["hidden"]), seed=0)
        target = online.copy()
        half = len(arrays) // 2
        online.set_parameters(arrays[:half])
        target.set_parameters(arrays[half:])
        return cls(
            network=online,
            target_network=target,
            reward=RewardParams(**header["reward"]),
            config=config,
            metadata=header.get("metadata", {}),
        )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    epsilon: float
    train_return: float
    validation_return: float | None


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    episodes: list[EpisodeRecord]
    wall_seconds: float

    def write_log_csv(self, path: str | Path) -> None:
        import csv

        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "steps", "epsilon", "train_return", "validation_return"])
            for r in self.episodes:
                writer.writerow(
                    [r.episode, r.steps, f"{r.epsilon:.6f}", f"{r.train_return:.6f}",
                     "" if r.validation_return is None else f"{r.validation_return:.6f}"]
                )


def _episode_starts(series: OccupancySeries, episode_length: int) -> np.ndarray:
    """Day-aligned episode start indices leaving room for length + 1 minutes."""
    last = len(series) - episode_length - 1
    if last < 0:
        raise ValueError(
            f"series {series.street_id} too short for {episode_length}-step episodes"
        )
    starts = np.arange(0, last + 1, 1440)
    return starts if starts.size else np.array([0])


def greedy_rollout(
    network: QNetwork,
    series: OccupancySeries,
    reward: RewardParams,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    history: int = DEFAULT_HISTORY,
    table: CyclicalTable | None = None,
) -> tuple[np.ndarray, float]:
    """Run the greedy policy over a whole series.

    Returns one action per minute (the first is TURN_ON by the rollout
    convention: the camera wakes to take its first look) and the total reward.
    """
    env = StandbyEnv(series, reward, thresholds, history=history, table=table)
    state = env.reset()
    actions = np.empty(len(series), dtype=np.int64)
    actions[0] = Action.TURN_ON
    total = -reward.energy_penalty  # the initial on-minute is charged like any other
    for i in range(1, len(series)):
        a = Action(int(np.argmax(network.q_values(state))))
        state, r, _, _ = env.step(a)
        actions[i] = a
        total += r
    return actions, float(total)


def act_greedy(
    checkpoint: Checkpoint,
    series: OccupancySeries,
    thresholds: OccupancyThresholds = OccupancyThresholds(),
) -> np.ndarray:
    """Greedy per-minute actions of a trained policy over ``series``."""
    actions, _ = greedy_rollout(
        checkpoint.network, series, checkpoint.reward, thresholds, checkpoint.history
    )
    return actions


def train(
    train_series: OccupancySeries | Sequence[OccupancySeries],
    reward: RewardParams,
    config: AgentConfig = AgentConfig(),
    thresholds: OccupancyThresholds = OccupancyThresholds(),
    validation_series: OccupancySeries | Sequence[OccupancySeries] | None = None,
) -> TrainResult:
    """Train a standby policy on one or more streets.

    Episodes draw a random street and a random day-aligned window from it, so a
    multi-street corpus yields a single policy covering all their patterns.
    When validation series are given, the weights with the best mean validation
    reward are kept; otherwise the final weights are returned.

    Seeding: the config seed feeds four fixed substreams, in order: network
    init, exploration, episode placement, replay sampling. Two runs with the
    same data and config produce bit-identical weights.
    """
    if isinstance(train_series, OccupancySeries):
        train_series = [train_series]
    train_series = list(train_series)
    if not train_series:
        raise ValueError("no training series")
    if isinstance(validation_series, OccupancySeries):
        validation_series = [validation_series]

    root = np.random.SeedSequence(config.seed)
    init_ss, explore_ss, data_ss, sample_ss = root.spawn(4)
    explore_rng = np.random.default_rng(explore_ss)
    data_rng = np.random.default_rng(data_ss)
    sample_rng = np.random.default_rng(sample_ss)

    dim = state_dim(config.history)
    online = QNetwork(dim, len(Action), config.hidden, seed=init_ss)
    target = online.copy()
    optimizer = Adam([online.flat], lr=config.lr)
    buffer = PerBuffer(config.buffer_capacity, dim, config.per_alpha, config.per_eps)
    eps_sched = LinearSchedule(config.epsilon_start, config.epsilon_end, config.epsilon_decay_steps)
    beta_sched = LinearSchedule(
        config.per_beta_start, config.per_beta_end, max(config.total_steps, 1)
    )
    table = CyclicalTable()
    starts_per_street = [_episode_starts(s, config.episode_length) for s in train_series]

    td_buf = np.empty(config.batch_size)
    dq_buf = np.empty((config.batch_size, len(Action)))
    best_flat: np.ndarray | None = None
    best_score = -np.inf
    best_episode = -1
    records: list[EpisodeRecord] = []
    global_step = 0
    t0 = time.monotonic()

    def validation_score() -> float:
        assert validation_series is not None
        return float(
            np.mean(
                [
                    greedy_rollout(online, s, reward, thresholds, config.history, table)[1]
                    for s in validation_series
                ]
            )
        )

    for episode in range(config.episodes):
        street = int(data_rng.integers(len(train_series)))
        start = int(data_rng.choice(starts_per_street[street]))
        env = StandbyEnv(
            train_series[street],
            reward,
            thresholds,
            history=config.history,
            start=start,
            length=config.episode_length,
            table=table,
        )
        state = env.reset()
        ep_reward = 0.0
        for _ in range(config.episode_length):
            epsilon = eps_sched.value(global_step)
            action = select_action(online, state, epsilon, explore_rng)
            next_state, r, done, _ = env.step(action)
            buffer.add(Experience(state, int(action), r, next_state, done))
            state = next_state
            ep_reward += r
            global_step += 1
            if len(buffer) >= config.warmup:
                batch = buffer.sample(
                    config.batch_size, beta_sched.value(global_step), sample_rng
                )
                # One stacked forward serves both the TD errors (first half)
                # and the online argmax over next states (second half); the
                # second half carries no gradient, so backward only sees the
                # first half of the batch.
                q_all = online.forward(batch.stacked_states)
                _td_and_grad(
                    q_all,
                    target.forward(batch.next_states),
                    batch.rewards,
                    batch.dones,
                    batch.actions,
                    batch.weights,
                    config.gamma,
                    dq_buf,
                    td_buf,
                )
                optimizer.step([online.backward_from(dq_buf)])
                buffer.update_priorities(batch.indices, td_buf)
            if global_step % config.target_sync == 0:
                target.copy_weights_from(online)
        val_return: float | None = None
        if validation_series is not None and (episode + 1) % config.validation_interval == 0:
            val_return = validation_score()
            if val_return > best_score:
                best_score = val_return
                best_episode = episode + 1
                best_flat = online.flat.copy()
            log.info(
                "episode %d/%d return %.3f validation %.3f",
                episode + 1, config.episodes, ep_reward, val_return,
            )
        records.append(
            EpisodeRecord(
                episode=episode + 1,
                steps=config.episode_length,
                epsilon=eps_sched.value(global_step),
                train_return=ep_reward,
                validation_return=val_return,
            )
        )

    if (
        validation_series is not None
        and config.episodes
        and config.episodes % config.validation_interval != 0
    ):
        final_score = validation_score()
        if final_score > best_score:
            best_score = final_score
            best_episode = config.episodes
            best_flat = online.flat.copy()
    if best_flat is not None:
        online.flat[...] = best_flat

    wall = time.monotonic() - t0
    metadata = {
        "trained_episodes": config.episodes,
        "global_steps": global_step,
        "streets": [s.street_id for s in train_series],
        "best_validation_return": None if best_episode < 0 else best_score,
        "best_validation_episode": None if best_episode < 0 else best_episode,
        "created": dt.datetime.now().isoformat(timespec="seconds"),
        "wall_seconds": round(wall, 3),
    }
    checkpoint = Checkpoint(
        network=online, target_network=target, reward=reward, config=config, metadata=metadata
    )
    return TrainResult(checkpoint=checkpoint, episodes=records, wall_seconds=wall)
