"""Small dense Q-network in plain numpy: dueling head, weighted-MSE loss, Adam."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numba import njit


@njit(cache=True)
def _adam_update(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    b1t: float,
    b2t: float,
) -> None:
    """One fused Adam step over flat views, same arithmetic as the numpy path."""
    for i in range(p.shape[0]):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + ((1.0 - beta2) * gi) * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / b1t) / (np.sqrt(vi / b2t) + eps)


@njit(cache=True)
def _q_two_layer(
    x: np.ndarray,
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    wv: np.ndarray,
    bv: np.ndarray,
    wa: np.ndarray,
    ba: np.ndarray,
    out: np.ndarray,
) -> None:
    """Single-state dueling forward for the common two-layer trunk.

    Rollouts call this once per simulated minute, so the whole chain runs as
    one compiled pass with two small scratch vectors instead of five separate
    matrix products.
    """
    h1 = np.empty(w1.shape[1])
    for j in range(w1.shape[1]):
        acc = b1[j]
        for i in range(w1.shape[0]):
            acc += x[i] * w1[i, j]
        h1[j] = acc if acc > 0.0 else 0.0
    h2 = np.empty(w2.shape[1])
    for j in range(w2.shape[1]):
        acc = b2[j]
        for i in range(w2.shape[0]):
            acc += h1[i] * w2[i, j]
        h2[j] = acc if acc > 0.0 else 0.0
    v = bv[0]
    for i in range(wv.shape[0]):
        v += h2[i] * wv[i, 0]
    mean = 0.0
    for a in range(wa.shape[1]):
        acc = ba[a]
        for i in range(wa.shape[0]):
            acc += h2[i] * wa[i, a]
        out[a] = acc
        mean += acc
    mean /= wa.shape[1]
    for a in range(wa.shape[1]):
        out[a] = v + out[a] - mean


class DenseLayer:
    """Fully connected layer y = x @ w + b.

    Parameter and gradient arrays are views into the owning network's flat
    buffers, so the optimizer can treat the whole network as one vector.
    """

    def __init__(self, w: np.ndarray, b: np.ndarray, dw: np.ndarray, db: np.ndarray):
        self.w = w
        self.b = b
        self.dw = dw
        self.db = db
        self._x: np.ndarray | None = None

    def init_he_uniform(self, rng: np.random.Generator) -> None:
        limit = np.sqrt(6.0 / self.w.shape[0])
        self.w[...] = rng.uniform(-limit, limit, size=self.w.shape)
        self.b[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w + self.b

    def backward(self, dout: np.ndarray, rows: int | None = None) -> np.ndarray:
        """Accumulate parameter grads; ``rows`` restricts to the first cached rows."""
        assert self._x is not None, "backward before forward"
        x = self._x if rows is None else self._x[:rows]
        np.matmul(x.T, dout, out=self.dw)
        np.sum(dout, axis=0, out=self.db)
        return dout @ self.w.T


class QNetwork:
    """State -> action-value map with a shared trunk and a dueling split.

    The trunk is two ReLU layers by default; the value head scores the state
    overall and the advantage head scores each action relative to the others.
    Combining as Q = V + A - mean(A) pins the advantage mean to zero so the
    two heads cannot trade a constant back and forth.

    All parameters live in one flat float64 buffer (``flat``), with layer
    weights as reshaped views; gradients mirror that in ``grad_flat``.
    """

    def __init__(
        self,
        state_size: int,
        n_actions: int = 2,
        hidden: Sequence[int] = (32, 16),
        seed: int | np.random.SeedSequence = 0,
    ):
        if len(hidden) < 1:
            raise ValueError("need at least one hidden layer")
        self.state_size = state_size
        self.n_actions = n_actions
        self.hidden = tuple(hidden)

        shapes: list[tuple[int, ...]] = []
        fan_in = state_size
        for width in self.hidden:
            shapes.extend([(fan_in, width), (width,)])
            fan_in = width
        shapes.extend([(fan_in, 1), (1,), (fan_in, n_actions), (n_actions,)])
        total = sum(int(np.prod(s)) for s in shapes)
        self.flat = np.zeros(total)
        self.grad_flat = np.zeros(total)

        views_p: list[np.ndarray] = []
        views_g: list[np.ndarray] = []
        off = 0
        for s in shapes:
            n = int(np.prod(s))
            views_p.append(self.flat[off : off + n].reshape(s))
            views_g.append(self.grad_flat[off : off + n].reshape(s))
            off += n

        def make_layer(i: int) -> DenseLayer:
            return DenseLayer(views_p[2 * i], views_p[2 * i + 1], views_g[2 * i], views_g[2 * i + 1])

        self.trunk = [make_layer(i) for i in range(len(self.hidden))]
        self.value_head = make_layer(len(self.hidden))
        self.advantage_head = make_layer(len(self.hidden) + 1)
        rng = np.random.default_rng(seed)
        for layer in self._layers():
            layer.init_he_uniform(rng)
        self._relu_masks: list[np.ndarray] = []

    # -- forward / backward -------------------------------------------------

    def forward(self, states: np.ndarray) -> np.ndarray:
        """Q-values for a batch of states, shape (batch, n_actions)."""
        x = np.asarray(states, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.state_size:
            raise ValueError(f"expected (batch, {self.state_size}) states, got {x.shape}")
        self._relu_masks = []
        for layer in self.trunk:
            x = layer.forward(x)
            mask = x > 0.0
            self._relu_masks.append(mask)
            x = x * mask
        value = self.value_head.forward(x)
        adv = self.advantage_head.forward(x)
        return value + adv - adv.mean(axis=1, keepdims=True)

    def q_values(self, state: np.ndarray) -> np.ndarray:
        """Q-values for a single state, shape (n_actions,).

        Inference-only fast path: skips the caching that ``forward`` does for
        backprop, since rollouts never differentiate. Two-layer trunks (the
        default) run through a compiled kernel; other depths fall back to the
        numpy chain.
        """
        x = np.asarray(state, dtype=np.float64)
        if len(self.trunk) == 2 and x.ndim == 1:
            out = np.empty(self.n_actions)
            t1, t2 = self.trunk
            _q_two_layer(
                x, t1.w, t1.b, t2.w, t2.b,
                self.value_head.w, self.value_head.b,
                self.advantage_head.w, self.advantage_head.b, out,
            )
            return out
        for layer in self.trunk:
            x = np.maximum(x @ layer.w + layer.b, 0.0)
        v = x @ self.value_head.w + self.value_head.b
        a = x @ self.advantage_head.w + self.advantage_head.b
        return v + a - a.mean()

    def backward_from(self, dq: np.ndarray) -> np.ndarray:
        """Backpropagate a loss gradient with respect to the last forward's Q output.

        Fills ``grad_flat`` (and the per-layer ``dw``/``db`` views) and returns
        it. ``dq`` may cover only the first rows of the last forward's batch;
        the rest backpropagate as exact zeros, so a caller can fold auxiliary
        inference rows into the same stacked forward and skip their cost here.
        """
        n = dq.shape[0]
        dvalue = dq.sum(axis=1, keepdims=True)
        dadv = dq - dq.mean(axis=1, keepdims=True)
        dx = self.value_head.backward(dvalue, n)
        dx += self.advantage_head.backward(dadv, n)
        for layer, mask in zip(reversed(self.trunk), reversed(self._relu_masks)):
            dx *= mask[:n]
            dx = layer.backward(dx, n)
        return self.grad_flat

    def loss_and_grads(
        self,
        states: np.ndarray,
        actions: np.ndarray,
        targets: np.ndarray,
        weights: np.ndarray | None = None,
    ) -> tuple[float, list[np.ndarray], np.ndarray]:
        """Weighted squared Bellman error and its parameter gradients.

        Returns (loss, grads aligned with ``parameters()``, td_errors). The
        td_errors are the raw per-sample errors q(s, a) - target before the
        importance weights touch them, which is what replay prioritization
        wants.
        """
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.float64)
        batch = states.shape[0]
        if weights is None:
            weights = np.ones(batch)
        weights = np.asarray(weights, dtype=np.float64)
        if actions.shape != (batch,) or targets.shape != (batch,) or weights.shape != (batch,):
            raise ValueError("actions, targets and weights must be 1-D of batch length")

        q = self.forward(states)
        rows = np.arange(batch)
        td_errors = q[rows, actions] - targets
        loss = float(np.mean(weights * td_errors**2))
        if not np.isfinite(loss):
            raise FloatingPointError("training loss is not finite")
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * weights * td_errors / batch
        self.backward_from(dq)
        return loss, self.gradients(), td_errors

    # -- parameter plumbing -------------------------------------------------

    def _layers(self) -> list[DenseLayer]:
        return [*self.trunk, self.value_head, self.advantage_head]

    def parameters(self) -> list[np.ndarray]:
        """Live parameter arrays in a fixed order (trunk, value head, advantage head)."""
        out: list[np.ndarray] = []
        for layer in self._layers():
            out.extend((layer.w, layer.b))
        return out

    def gradients(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self._layers():
            out.extend((layer.dw, layer.db))
        return out

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        own = self.parameters()
        if len(params) != len(own):
            raise ValueError(f"expected {len(own)} parameter arrays, got {len(params)}")
        for dst, src in zip(own, params):
            if dst.shape != np.shape(src):
                raise ValueError(f"shape mismatch: {dst.shape} vs {np.shape(src)}")
            dst[...] = src

    def copy_weights_from(self, other: "QNetwork") -> None:
        """Overwrite this network's parameters with another's (one flat copy)."""
        if other.flat.size != self.flat.size:
            raise ValueError("networks have different parameter counts")
        self.flat[...] = other.flat

    def copy(self) -> "QNetwork":
        clone = QNetwork(self.state_size, self.n_actions, self.hidden, seed=0)
        clone.copy_weights_from(self)
        return clone

    def parameter_count(self) -> int:
        return self.flat.size


class Adam:
    """Adam with bias correction, operating in place on a parameter list."""

    def __init__(
        self,
        params: Sequence[np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr <= 0.0:
            raise ValueError("lr must be > 0")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameters")
        for p, g in zip(self.params, grads):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match {p.shape}")
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if (
                p.dtype == np.float64
                and g.dtype == np.float64
                and p.flags.c_contiguous
                and g.flags.c_contiguous
            ):
                # m and v are zeros_like(p) copies, contiguous whenever p is.
                _adam_update(
                    p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
                    self.lr, self.beta1, self.beta2, self.eps, b1t, b2t,
                )
            else:
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def gradient_check(
    network: QNetwork,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray | None = None,
    h: float = 1e-5,
    max_full: int = 2000,
    samples: int = 200,
    seed: int = 0,
) -> float:
    """Compare analytic gradients to central finite differences.

    Checks every parameter when the network has at most ``max_full`` of them,
    otherwise a seeded random subset of ``samples``. Returns the worst relative
    error, where the error is taken relative for magnitudes above 1 and
    absolute below, so tiny gradients do not blow the ratio up.
    """
    if h <= 0.0:
        raise ValueError("step size h must be > 0")
    network.loss_and_grads(states, actions, targets, weights)
    analytic = network.grad_flat.copy()
    flat = network.flat
    if network.parameter_count() <= max_full:
        idx = np.arange(flat.size)
    else:
        rng = np.random.default_rng(seed)
        idx = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
    worst = 0.0
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        lo_plus, _, _ = network.loss_and_grads(states, actions, targets, weights)
        flat[i] = orig - h
        lo_minus, _, _ = network.loss_and_grads(states, actions, targets, weights)
        flat[i] = orig
        numeric = (lo_plus - lo_minus) / (2.0 * h)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), abs(numeric), 1.0)
        worst = max(worst, err)
    network.loss_and_grads(states, actions, targets, weights)
    return worst
