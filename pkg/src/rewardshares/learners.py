"""Decentralized actor-critic learners.

``TabularActorCritic`` drives the matrix games; ``MlpActorCritic`` is a
one-hidden-layer network (tanh trunk, softmax policy head, scalar value head)
trained with hand-written backpropagation and Adam for the gridworld.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ExplorationSchedule:
    """Linear epsilon decay from ``start`` to ``end`` over ``decay_episodes``."""

    start: float = 1.0
    end: float = 0.01
    decay_episodes: int = 1

    @classmethod
    def for_budget(cls, episodes: int, fraction: float = 0.5, start: float = 1.0, end: float = 0.01):
        return cls(start, end, max(1, int(episodes * fraction)))

    def epsilon(self, episode: int) -> float:
        if episode >= self.decay_episodes:
            return self.end
        frac = episode / self.decay_episodes
        return max(self.end, self.start + (self.end - self.start) * frac)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sample_index(probs: Sequence[float], eps: float, u_explore: float, u_pick: float) -> int:
    """Epsilon-softmax draw from two uniforms; keeps training loops free of RNG calls."""
    n = len(probs)
    if u_explore < eps:
        return min(int(u_pick * n), n - 1)
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u_pick < acc:
            return i
    return n - 1


def select_action(policy, state, eps: float, rng: np.random.Generator) -> int:
    """With probability ``eps`` act uniformly, otherwise sample the policy's softmax."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    u = rng.random(2)
    return sample_index(policy.probs(state), eps, float(u[0]), float(u[1]))


class TabularActorCritic:
    """Softmax preferences per state with a TD(0) state-value critic.

    Stored as plain Python lists: per-step work is a handful of scalars and
    list arithmetic is several times faster than tiny numpy arrays here.
    """

    def __init__(
        self,
        n_states: int,
        n_actions: int,
        actor_lr: float = 1e-3,
        critic_lr: float = 0.1,
        gamma: float = 0.99,
    ):
        self.n_states = n_states
        self.n_actions = n_actions
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.gamma = gamma
        self.prefs = [[0.0] * n_actions for _ in range(n_states)]
        self.values = [0.0] * n_states

    def probs(self, s: int) -> list[float]:
        row = self.prefs[s]
        top = max(row)
        e = [math.exp(x - top) for x in row]
        z = sum(e)
        return [x / z for x in e]

    def td_update(self, s: int, a: int, r: float, s_next: int, done: bool) -> float:
        """One actor-critic step on the effective reward; returns the TD error."""
        v_next = 0.0 if done else self.values[s_next]
        delta = r + self.gamma * v_next - self.values[s]
        self.values[s] += self.critic_lr * delta
        if self.actor_lr:
            pi = self.probs(s)
            row = self.prefs[s]
            step = self.actor_lr * delta
            for b in range(self.n_actions):
                row[b] -= step * pi[b]
            row[a] += step
        return delta

    def greedy(self, s: int) -> int:
        row = self.prefs[s]
        return row.index(max(row))

    def policy_table(self) -> np.ndarray:
        return np.array([self.probs(s) for s in range(self.n_states)])

    def get_params(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.prefs, dtype=float).ravel(), np.asarray(self.values)])

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        k = self.n_states * self.n_actions
        if flat.shape != (k + self.n_states,):
            raise ValueError("parameter vector has the wrong length")
        self.prefs = flat[:k].reshape(self.n_states, self.n_actions).tolist()
        self.values = flat[k:].tolist()

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        return [(self.n_states, self.n_actions), (self.n_states,)]


class MlpActorCritic:
    """Shared tanh hidden layer feeding softmax policy heads and a value head.

    ``heads`` lists the size of each policy head, e.g. ``(6,)`` for movement
    only or ``(6, 6)`` when a separate first-step choice is learned. All heads
    share one logit layer; a row's head index selects its slice.

    Parameters live in one flat vector ``params``; ``W1, b1, Wp, bp, wv, bv``
    are views into it, so the optimizer and snapshots work on the flat array.
    """

    def __init__(
        self,
        n_inputs: int,
        heads: Sequence[int] | int = (6,),
        hidden: int = 64,
        lr: float = 1e-3,
        value_coef: float = 0.5,
        entropy_coef: float = 0.0,
        gamma: float = 0.99,
        init_scale: float = 0.05,
        rng: np.random.Generator | None = None,
    ):
        self.n_inputs = n_inputs
        self.heads = (heads,) if isinstance(heads, int) else tuple(heads)
        self.offsets = np.concatenate([[0], np.cumsum(self.heads)]).astype(int)
        self.n_logits = int(self.offsets[-1])
        self.hidden = hidden
        self.lr = lr
        self.value_coef = value_coef
        self.entropy_coef = entropy_coef
        self.gamma = gamma
        size = sum(int(np.prod(s)) for s in self.shapes)
        if rng is None:
            self.params = np.zeros(size)
        else:
            self.params = rng.uniform(-init_scale, init_scale, size)
        self._bind()
        self._m = np.zeros(size)
        self._v = np.zeros(size)
        self._t = 0

    @property
    def n_actions(self) -> int:
        return self.heads[0]

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        d, h, k = self.n_inputs, self.hidden, self.n_logits
        return [(d, h), (h,), (h, k), (k,), (h,), (1,)]

    def _bind(self) -> None:
        views, off = [], 0
        for shape in self.shapes:
            size = int(np.prod(shape))
            views.append(self.params[off : off + size].reshape(shape))
            off += size
        self.W1, self.b1, self.Wp, self.bp, self.wv, self.bv = views

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != self.params.shape:
            raise ValueError("parameter vector has the wrong length")
        self.params[:] = flat

    def get_params(self) -> np.ndarray:
        return self.params.copy()

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_inputs:
            raise ValueError(f"observation width {x.shape[-1]} != network input {self.n_inputs}")
        return x

    def forward(self, x: np.ndarray, head: int = 0) -> tuple[np.ndarray, np.ndarray | float]:
        """Action distribution of ``head`` and state value, for one row or a batch."""
        x = self._check(x)
        h = np.tanh(x @ self.W1 + self.b1)
        lo, hi = self.offsets[head], self.offsets[head + 1]
        probs = softmax(h @ self.Wp[:, lo:hi] + self.bp[lo:hi])
        value = h @ self.wv + self.bv[0]
        return probs, value

    def probs(self, x: np.ndarray, head: int = 0) -> np.ndarray:
        return self.forward(x, head)[0]

    def _batch(self, obs, actions, advantages, targets, heads):
        x = np.atleast_2d(self._check(obs))
        n = x.shape[0]
        actions = np.asarray(actions, dtype=int).reshape(-1)
        adv = np.asarray(advantages, dtype=float).reshape(-1)
        tgt = np.asarray(targets, dtype=float).reshape(-1)
        heads = np.zeros(n, dtype=int) if heads is None else np.asarray(heads, dtype=int).reshape(-1)
        h = np.tanh(x @ self.W1 + self.b1)
        logits = h @ self.Wp + self.bp
        # per-row softmax restricted to the row's head; other logits get probability 0
        probs = np.zeros_like(logits)
        for k in np.unique(heads):
            rows = heads == k
            lo, hi = self.offsets[k], self.offsets[k + 1]
            probs[np.ix_(rows, np.arange(lo, hi))] = softmax(logits[rows, lo:hi])
        cols = self.offsets[heads] + actions
        values = h @ self.wv + self.bv[0]
        return x, h, probs, values, cols, adv, tgt

    def loss(self, obs, actions, advantages, targets, heads=None) -> float:
        """Objective whose gradient :meth:`backward` returns (advantages/targets held fixed)."""
        _, _, probs, values, cols, adv, tgt = self._batch(obs, actions, advantages, targets, heads)
        idx = np.arange(cols.size)
        logp = np.log(probs[idx, cols])
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.where(probs > 0, probs * np.log(probs), 0.0).sum(axis=1)
        pg = -(adv * logp).sum()
        vl = 0.5 * ((tgt - values) ** 2).sum()
        return float(pg + self.value_coef * vl - self.entropy_coef * ent.sum())

    def backward(self, obs, actions, advantages, targets, heads=None) -> np.ndarray:
        """Flat gradient of :meth:`loss`, summed over the batch."""
        x, h, probs, values, cols, adv, tgt = self._batch(obs, actions, advantages, targets, heads)
        idx = np.arange(cols.size)

        # d(-A log pi_a)/dlogits = A (pi - onehot)
        dlogits = probs * adv[:, None]
        dlogits[idx, cols] -= adv
        if self.entropy_coef:
            with np.errstate(divide="ignore", invalid="ignore"):
                logp = np.where(probs > 0, np.log(probs), 0.0)
            ent = -(probs * logp).sum(axis=1, keepdims=True)
            # dH/dlogits = -pi (log pi + H), zero outside the row's head
            dlogits += self.entropy_coef * probs * (logp + ent)
        dvalue = self.value_coef * (values - tgt)

        gWp = h.T @ dlogits
        gbp = dlogits.sum(axis=0)
        gwv = h.T @ dvalue
        gbv = np.array([dvalue.sum()])
        dh = dlogits @ self.Wp.T + np.outer(dvalue, self.wv)
        dz = dh * (1.0 - h * h)
        gW1 = x.T @ dz
        gb1 = dz.sum(axis=0)
        return np.concatenate([g.ravel() for g in (gW1, gb1, gWp, gbp, gwv, gbv)])

    def transition_terms(self, obs, action, reward, next_obs, done, head: int = 0) -> tuple[float, float]:
        """TD error and bootstrapped target for a single transition."""
        _, v = self.forward(obs, head)
        v_next = 0.0 if done else float(self.forward(next_obs)[1])
        target = reward + self.gamma * v_next
        return target - float(v), target

    def apply_gradient(self, grad: np.ndarray, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        """One Adam step."""
        self._t += 1
        self._m *= beta1
        self._m += (1 - beta1) * grad
        self._v *= beta2
        self._v += (1 - beta2) * grad * grad
        mhat = self._m / (1 - beta1**self._t)
        vhat = self._v / (1 - beta2**self._t)
        self.params -= self.lr * mhat / (np.sqrt(vhat) + eps)

    def td_update(self, obs, action, reward, next_obs, done, head: int = 0) -> float:
        delta, target = self.transition_terms(obs, action, reward, next_obs, done, head)
        self.apply_gradient(self.backward(obs, [action], [delta], [target], [head]))
        return delta


def mlp_backward(policy: MlpActorCritic, transition: tuple) -> np.ndarray:
    """Gradient of the actor-critic loss for one ``(s, a, r, s', done)`` transition."""
    obs, action, reward, next_obs, done = transition[:5]
    head = transition[5] if len(transition) > 5 else 0
    delta, target = policy.transition_terms(obs, action, reward, next_obs, done, head)
    return policy.backward(obs, [action], [delta], [target], [head])


def save_params(path, learner) -> None:
    """Write a flat parameter vector with a one-line shape header."""
    header = ";".join("x".join(str(d) for d in s) for s in learner.shapes)
    buf = io.StringIO()
    np.savetxt(buf, learner.get_params()[None, :], fmt="%.17g", delimiter=",")
    with open(path, "w") as fh:
        fh.write(f"# shapes {header}\n")
        fh.write(buf.getvalue())


def load_params(path) -> tuple[list[tuple[int, ...]], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# shapes "):
            raise ValueError(f"{path}: missing shape header")
        shapes = [tuple(int(d) for d in part.split("x")) for part in header[len("# shapes ") :].split(";")]
        flat = np.loadtxt(fh, delimiter=",", ndmin=1)
    expected = sum(int(np.prod(s)) for s in shapes)
    if flat.size != expected:
        raise ValueError(f"{path}: {flat.size} values for shapes totalling {expected}")
    return shapes, flat
