"""Reward-share allocations and the mechanisms that redistribute rewards.

An allocation is an n x n column-stochastic matrix ``w``: ``w[i, j]`` is the
fraction of agent ``j``'s environmental reward that agent ``i`` receives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

COLUMN_TOL = 1e-12
PRE_TRADE_LEVELS = 6  # choices 0..5 -> 0%, 20%, ..., 100% own share
POOL_THRESHOLD = 3  # first-step choices >= 3 opt into the common pool


class TradeIntent(IntEnum):
    HOLD = 0
    BUY_OWN = 1
    BUY_OTHER = 2


class TradeOutcome(IntEnum):
    NONE = 0
    OWN_UP = 1
    OWN_DOWN = 2


@dataclass(frozen=True)
class ShareAllocation:
    """Ownership matrix; construct through :meth:`identity` or validated arrays."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
            raise ValueError(f"allocation must be a non-empty square matrix, got shape {w.shape}")
        if np.any(w < -COLUMN_TOL) or np.any(w > 1 + COLUMN_TOL):
            raise ValueError("allocation entries must lie in [0, 1]")
        if np.any(np.abs(w.sum(axis=0) - 1.0) > COLUMN_TOL):
            raise ValueError("allocation columns must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def identity(cls, n: int) -> "ShareAllocation":
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n: int) -> "ShareAllocation":
        return cls(np.full((n, n), 1.0 / n))

    @classmethod
    def from_own_share(cls, n: int, own: float) -> "ShareAllocation":
        """Every agent keeps ``own`` of itself; the rest is split evenly over the others."""
        if n == 1:
            return cls.identity(1)
        w = np.full((n, n), (1.0 - own) / (n - 1))
        np.fill_diagonal(w, own)
        return cls(w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def own_shares(self) -> np.ndarray:
        return np.diag(self.w).copy()

    def __eq__(self, other):
        if not isinstance(other, ShareAllocation):
            return NotImplemented
        return self.w.shape == other.w.shape and bool(np.array_equal(self.w, other.w))

    def __hash__(self):
        return hash(self.w.tobytes())


def apply_participation(alloc: ShareAllocation, r: Sequence[float]) -> np.ndarray:
    """Effective reward of agent i is ``sum_j w[i, j] * r[j]``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (alloc.n,):
        raise ValueError(f"reward vector of shape {r.shape} does not match {alloc.n} agents")
    return alloc.w @ r


def equal_split(r: Sequence[float]) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("equal_split needs a non-empty reward vector")
    return np.full(r.size, r.sum() / r.size)


def _ticks(value: float, per_unit: int) -> int:
    t = value * per_unit
    k = int(round(t))
    if abs(t - k) > 1e-9:
        raise ValueError(f"share {value} is not on the grid of step 1/{per_unit}")
    return k


def trade_execute(
    alloc: ShareAllocation, intents: Sequence[int], delta: float
) -> tuple[ShareAllocation, TradeOutcome]:
    """Settle one step of the two-agent share market.

    A trade only happens when both agents want the same direction. Shares are
    swapped one-for-one (no price), so columns keep summing to 1 and own
    shares stay on the grid ``{0, delta, ..., 1}``.
    """
    if alloc.n != 2 or len(intents) != 2:
        raise ValueError("trade_execute is defined for two agents only")
    per_unit = int(round(1.0 / delta))
    if abs(per_unit * delta - 1.0) > 1e-9:
        raise ValueError(f"delta={delta} must divide 1")
    a, b = (TradeIntent(i) for i in intents)
    own = [_ticks(alloc.w[0, 0], per_unit), _ticks(alloc.w[1, 1], per_unit)]

    if a == b == TradeIntent.BUY_OWN and max(own) <= per_unit - 1:
        step, outcome = 1, TradeOutcome.OWN_UP
    elif a == b == TradeIntent.BUY_OTHER and min(own) >= 1:
        step, outcome = -1, TradeOutcome.OWN_DOWN
    else:
        return alloc, TradeOutcome.NONE

    k0, k1 = own[0] + step, own[1] + step
    w = np.array(
        [
            [k0 / per_unit, (per_unit - k1) / per_unit],
            [(per_unit - k0) / per_unit, k1 / per_unit],
        ]
    )
    return ShareAllocation(w), outcome


def pre_trade_resolve(choices: Sequence[int]) -> ShareAllocation:
    """The most conservative (largest) declared own share wins for everyone."""
    choices = [int(c) for c in choices]
    if not choices:
        raise ValueError("need at least one choice")
    for c in choices:
        if not 0 <= c < PRE_TRADE_LEVELS:
            raise ValueError(f"pre-trade choice {c} outside 0..{PRE_TRADE_LEVELS - 1}")
    own = max(choices) / (PRE_TRADE_LEVELS - 1)
    return ShareAllocation.from_own_share(len(choices), own)


def pool_flags(choices: Sequence[int]) -> np.ndarray:
    """Map first-step choices 0..5 to opt-in flags (0-2 out, 3-5 in)."""
    choices = np.asarray(choices, dtype=int)
    if np.any(choices < 0) or np.any(choices >= PRE_TRADE_LEVELS):
        raise ValueError("pool choices must lie in 0..5")
    return choices >= POOL_THRESHOLD


def pool_allocation(participants: Sequence[bool]) -> ShareAllocation:
    """Allocation matrix equivalent to :func:`common_pool_resolve`."""
    flags = np.asarray(participants, dtype=bool)
    n = flags.size
    w = np.eye(n)
    k = int(flags.sum())
    if k:
        idx = np.flatnonzero(flags)
        w[np.ix_(idx, idx)] = 1.0 / k
    return ShareAllocation(w)


def common_pool_resolve(participants: Sequence[bool], r: Sequence[float]) -> np.ndarray:
    flags = np.asarray(participants, dtype=bool)
    r = np.asarray(r, dtype=float)
    if flags.shape != r.shape:
        raise ValueError("participant flags and rewards differ in length")
    out = r.copy()
    if flags.any():
        out[flags] = r[flags].sum() / flags.sum()
    return out
