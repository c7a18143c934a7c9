"""Prioritized experience replay over a sum-tree, with importance-sampling weights.

The per-step hot paths (stratified sampling, priority updates, inserts) run as
compiled kernels; the arithmetic in each kernel mirrors the numpy expressions
in the corresponding public methods operation for operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True)
def _refresh_sum(tree: np.ndarray, leaf_pos: np.ndarray) -> None:
    """Recompute every ancestor of the given leaf positions from its children.

    Each leaf walks its whole root chain. Walks may repeat shared ancestors,
    but all leaves are written before any walk starts, so by the time the last
    walk through a node recomputes it, both children already hold their final
    values; the repeats are idempotent.
    """
    for k in range(leaf_pos.shape[0]):
        pos = leaf_pos[k] >> 1
        while pos >= 1:
            left = 2 * pos
            tree[pos] = tree[left] + tree[left + 1]
            pos >>= 1


@njit(cache=True)
def _refresh_max(tree: np.ndarray, leaf_pos: np.ndarray) -> None:
    for k in range(leaf_pos.shape[0]):
        pos = leaf_pos[k] >> 1
        while pos >= 1:
            left = 2 * pos
            a = tree[left]
            b = tree[left + 1]
            tree[pos] = a if a >= b else b
            pos >>= 1


@njit(cache=True)
def _set_pair(ts: np.ndarray, tm: np.ndarray, leaf_pos: np.ndarray, values: np.ndarray) -> None:
    """Write leaves into a sum tree and a max tree, then refresh both.

    Leaf writes complete before any ancestor walk begins (see _refresh_sum for
    why that ordering matters); duplicate positions resolve last-wins, same as
    a numpy fancy-index assignment.
    """
    n = leaf_pos.shape[0]
    for k in range(n):
        p = leaf_pos[k]
        ts[p] = values[k]
        tm[p] = values[k]
    for k in range(n):
        pos = leaf_pos[k] >> 1
        while pos >= 1:
            left = 2 * pos
            ts[pos] = ts[left] + ts[left + 1]
            a = tm[left]
            b = tm[left + 1]
            tm[pos] = a if a >= b else b
            pos >>= 1


@njit(cache=True)
def _add_pair(ts: np.ndarray, tm: np.ndarray, pos: int, priority: float) -> None:
    """Write one leaf in both trees and walk the shared ancestor chain once."""
    ts[pos] = priority
    tm[pos] = priority
    pos >>= 1
    while pos >= 1:
        left = 2 * pos
        ts[pos] = ts[left] + ts[left + 1]
        a = tm[left]
        b = tm[left + 1]
        tm[pos] = a if a >= b else b
        pos >>= 1


@njit(cache=True)
def _sample_rows(
    tree: np.ndarray,
    leaves: int,
    capacity: int,
    total: float,
    hi: float,
    rand: np.ndarray,
    states: np.ndarray,
    next_states: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    dones: np.ndarray,
    out_indices: np.ndarray,
    out_stacked: np.ndarray,
    out_actions: np.ndarray,
    out_rewards: np.ndarray,
    out_dones: np.ndarray,
) -> None:
    """Stratified prefix search plus row gathers, one pass per batch lane.

    Lane k draws its mass from segment k of the total priority mass, descends
    the sum tree (ties at interval boundaries go left, exactly like
    prefix_find), and copies the chosen transition into the output slots.
    States land in the first half of ``out_stacked`` and next states in the
    second half.
    """
    n = rand.shape[0]
    segment = total / n
    width = states.shape[1]
    for k in range(n):
        m = (k + rand[k]) * segment
        if m < 0.0:
            m = 0.0
        if m > hi:
            m = hi
        idx = 1
        while idx < leaves:
            idx <<= 1
            left_sum = tree[idx]
            if m > left_sum:
                m -= left_sum
                idx += 1
        row = idx - leaves
        if row > capacity - 1:
            row = capacity - 1
        out_indices[k] = row
        out_actions[k] = actions[row]
        out_rewards[k] = rewards[row]
        out_dones[k] = dones[row]
        for j in range(width):
            out_stacked[k, j] = states[row, j]
            out_stacked[n + k, j] = next_states[row, j]


class SumTree:
    """Binary segment tree over leaf priorities supporting prefix-mass lookup.

    Leaves are padded to a power of two; internal node i holds the sum of its
    children 2i and 2i+1, with the root at index 1. Writes recompute ancestors
    from their children instead of adding deltas, so float error cannot
    accumulate across millions of updates.
    """

    op = np.add
    _refresh = staticmethod(_refresh_sum)

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.leaves = 1
        while self.leaves < capacity:
            self.leaves *= 2
        self.tree = np.zeros(2 * self.leaves)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def get(self, index: int) -> float:
        if not 0 <= index < self.capacity:
            raise IndexError(index)
        return float(self.tree[self.leaves + index])

    def values(self, indices: np.ndarray) -> np.ndarray:
        return self.tree[self.leaves + np.asarray(indices, dtype=np.int64)]

    def set(self, index: int, value: float) -> None:
        """Scalar write with a plain walk to the root (no array temporaries)."""
        if not 0 <= index < self.capacity:
            raise IndexError(index)
        if value < 0.0:
            raise ValueError("priorities must be >= 0")
        t = self.tree
        pos = self.leaves + index
        t[pos] = value
        pos >>= 1
        op = self.op
        while pos >= 1:
            t[pos] = op(t[2 * pos], t[2 * pos + 1])
            pos >>= 1

    def set_many(self, indices: np.ndarray, values: np.ndarray) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if indices.size == 0:
            return
        if indices.min() < 0 or indices.max() >= self.capacity:
            raise IndexError("leaf index out of range")
        if values.min() < 0.0:
            raise ValueError("priorities must be >= 0")
        pos = self.leaves + indices
        self.tree[pos] = values
        self._refresh(self.tree, pos)

    def prefix_find(self, mass: np.ndarray) -> np.ndarray:
        """Leaf indices whose cumulative-priority interval contains each mass.

        Masses are clamped into [0, total); ties at interval boundaries resolve
        to the left leaf.
        """
        mass = np.asarray(mass, dtype=np.float64)
        if self.total <= 0.0:
            raise ValueError("cannot search an empty tree")
        mass = np.clip(mass, 0.0, np.nextafter(self.total, 0.0))
        t = self.tree
        idx = np.ones(mass.shape, dtype=np.int64)
        while idx[0] < self.leaves:
            idx <<= 1
            left_sum = t[idx]
            go_right = mass > left_sum
            mass = mass - left_sum * go_right
            idx += go_right
        return np.minimum(idx - self.leaves, self.capacity - 1)


class MaxTree(SumTree):
    """Same layout as :class:`SumTree` but tracking the maximum leaf priority."""

    op = np.maximum
    _refresh = staticmethod(_refresh_max)

    @property
    def max_value(self) -> float:
        return float(self.tree[1])


@dataclass(frozen=True)
class Experience:
    """One environment transition. Rewards are penalties, so never positive."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        if self.reward > 0.0:
            raise ValueError(f"rewards are penalties and must be <= 0, got {self.reward}")


@dataclass
class SampleBatch:
    """One replay draw. ``states`` and ``next_states`` are views into
    ``stacked_states`` (states first), so callers that want both in a single
    network forward can use the stacked array without re-copying."""

    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    weights: np.ndarray
    stacked_states: np.ndarray


class PerBuffer:
    """Ring buffer sampling transitions proportional to (|td_error| + eps)^alpha.

    New transitions enter at the current maximum leaf priority so everything
    gets replayed at least once. Sampling is stratified: the total priority
    mass is cut into batch-size equal segments and one draw lands in each,
    which keeps batch coverage broad without changing per-sample probability.
    """

    def __init__(
        self,
        capacity: int,
        state_size: int,
        alpha: float = 0.6,
        eps_priority: float = 1e-3,
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if eps_priority <= 0.0:
            raise ValueError("eps_priority must be > 0")
        self.capacity = capacity
        self.alpha = alpha
        self.eps_priority = eps_priority
        self._sum = SumTree(capacity)
        self._max = MaxTree(capacity)
        self._states = np.zeros((capacity, state_size))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_size))
        self._dones = np.zeros(capacity, dtype=bool)
        self._pos = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def max_priority(self) -> float:
        """Largest priority currently stored (in sampling space, exponent applied)."""
        return self._max.max_value

    def add(self, exp: Experience) -> None:
        i = self._pos
        self._states[i] = exp.state
        self._actions[i] = exp.action
        self._rewards[i] = exp.reward
        self._next_states[i] = exp.next_state
        self._dones[i] = exp.done
        priority = self._max.max_value if self._size else 0.0
        if priority <= 0.0:
            priority = 1.0
        _add_pair(self._sum.tree, self._max.tree, self._sum.leaves + i, priority)
        self._pos = (self._pos + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def priorities(self, indices: np.ndarray) -> np.ndarray:
        """Stored sampling priorities, i.e. (|td| + eps) ** alpha."""
        return self._sum.values(indices)

    def importance_weights(self, indices: np.ndarray, beta: float) -> np.ndarray:
        """Correction weights (N * P(i))^-beta, normalized by the batch maximum."""
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        p = self._sum.values(indices) / self._sum.total
        w = (self._size * p) ** (-beta)
        return w / w.max()

    def sample(self, batch_size: int, beta: float, rng: np.random.Generator) -> SampleBatch:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if batch_size > self._size:
            raise ValueError(f"batch {batch_size} exceeds stored {self._size}")
        total = self._sum.total
        if total <= 0.0:
            raise ValueError("cannot search an empty tree")
        indices = np.empty(batch_size, dtype=np.int64)
        stacked = np.empty((2 * batch_size, self._states.shape[1]))
        actions = np.empty(batch_size, dtype=np.int64)
        rewards = np.empty(batch_size)
        dones = np.empty(batch_size, dtype=bool)
        _sample_rows(
            self._sum.tree,
            self._sum.leaves,
            self.capacity,
            total,
            np.nextafter(total, 0.0),
            rng.random(batch_size),
            self._states,
            self._next_states,
            self._actions,
            self._rewards,
            self._dones,
            indices,
            stacked,
            actions,
            rewards,
            dones,
        )
        return SampleBatch(
            indices=indices,
            states=stacked[:batch_size],
            actions=actions,
            rewards=rewards,
            next_states=stacked[batch_size:],
            dones=dones,
            weights=self.importance_weights(indices, beta),
            stacked_states=stacked,
        )

    def update_priorities(self, indices: np.ndarray, td_errors: np.ndarray) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return
        if indices.min() < 0 or indices.max() >= self.capacity:
            raise IndexError("experience index out of range")
        td_errors = np.asarray(td_errors, dtype=np.float64)
        if td_errors.shape != indices.shape:
            raise ValueError("td_errors must match indices element for element")
        values = (np.abs(td_errors) + self.eps_priority) ** self.alpha
        _set_pair(self._sum.tree, self._max.tree, self._sum.leaves + indices, values)
