"""Iterated Prisoner's Dilemma with the five participation variants.

Actions are integers. The environment action is ``a % 2`` (0 = cooperate,
1 = defect); the variant-specific extra choice is ``a // 2`` (share flag for
``choose_share``, :class:`TradeIntent` for the trading variants).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .learners import select_action
from .participation import (
    ShareAllocation,
    TradeOutcome,
    apply_participation,
    equal_split,
    trade_execute,
)

C, D = 0, 1
PAYOFFS = {
    (C, C): (-1.0, -1.0),
    (C, D): (-3.0, 0.0),
    (D, C): (0.0, -3.0),
    (D, D): (-2.0, -2.0),
}
TAGS = ("no_participation", "equal_split", "choose_share", "trade50", "trade10")


def pd_step(a1: int, a2: int) -> np.ndarray:
    return np.array(PAYOFFS[(a1, a2)])


@dataclass(frozen=True)
class IpdVariant:
    tag: str
    max_steps: int
    delta: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown IPD variant {self.tag!r}")
        if self.trading and self.delta is None:
            raise ValueError(f"{self.tag} needs a trade step")

    @property
    def trading(self) -> bool:
        return self.tag in ("trade50", "trade10")

    @property
    def ticks(self) -> int:
        """Number of share increments in a whole reward (own share = tick / ticks)."""
        return int(round(1.0 / self.delta)) if self.trading else 1

    @property
    def n_actions(self) -> int:
        if self.tag == "choose_share":
            return 4
        if self.trading:
            return 6
        return 2

    @property
    def n_states(self) -> int:
        if self.tag == "choose_share":
            return 8
        if self.trading:
            return 4 * (self.ticks + 1) * 3
        return 4


VARIANTS = {
    "no_participation": IpdVariant("no_participation", 5),
    "equal_split": IpdVariant("equal_split", 5),
    "choose_share": IpdVariant("choose_share", 5),
    "trade50": IpdVariant("trade50", 40, 0.5),
    "trade10": IpdVariant("trade10", 40, 0.1),
}


@dataclass(frozen=True)
class IpdState:
    """What both agents observe. Before the first move ``last_actions`` is (C, C)."""

    last_actions: tuple[int, int] = (C, C)
    own_tick: int = 0
    outcome: TradeOutcome = TradeOutcome.NONE
    shared: bool = False


def encode_state(variant: IpdVariant, s: IpdState) -> int:
    a1, a2 = s.last_actions
    if a1 not in (C, D) or a2 not in (C, D):
        raise ValueError(f"invalid joint action {s.last_actions}")
    joint = 2 * a1 + a2
    if variant.tag == "choose_share":
        return 4 * int(bool(s.shared)) + joint
    if variant.trading:
        if not 0 <= s.own_tick <= variant.ticks:
            raise ValueError(f"own tick {s.own_tick} outside 0..{variant.ticks}")
        return (joint * (variant.ticks + 1) + s.own_tick) * 3 + int(s.outcome)
    if s.shared or s.own_tick or s.outcome:
        raise ValueError(f"{variant.tag} states carry only the last joint action")
    return joint


def decode_state(variant: IpdVariant, index: int) -> IpdState:
    if not 0 <= index < variant.n_states:
        raise ValueError(f"state index {index} outside 0..{variant.n_states - 1}")
    if variant.tag == "choose_share":
        shared, joint = divmod(index, 4)
        return IpdState(divmod(joint, 2), shared=bool(shared))
    if variant.trading:
        rest, outcome = divmod(index, 3)
        joint, tick = divmod(rest, variant.ticks + 1)
        return IpdState(divmod(joint, 2), own_tick=tick, outcome=TradeOutcome(outcome))
    return IpdState(divmod(index, 2))


@dataclass
class IpdStep:
    state: int
    env_rewards: tuple[float, float]
    rewards: tuple[float, float]
    done: bool
    outcome: TradeOutcome = TradeOutcome.NONE
    shared: bool = False


class IpdEnv:
    """Two-agent IPD; participation rules are compiled into lookup tables on construction.

    The allocation resets to the identity at every :meth:`reset`. Within a step
    trades are settled first and the payoff is then split with the updated
    allocation.
    """

    def __init__(self, variant: IpdVariant | str):
        if isinstance(variant, str):
            variant = VARIANTS[variant]
        self.variant = variant
        v = variant
        k = v.ticks
        self._allocs = [
            ShareAllocation(np.array([[t / k, (k - t) / k], [(k - t) / k, t / k]])) for t in range(k + 1)
        ]
        # effective reward tables
        self._eff = {}
        for joint, r in PAYOFFS.items():
            if v.tag == "equal_split":
                self._eff[joint] = tuple(equal_split(r))
            elif v.tag == "choose_share":
                self._eff[(False, joint)] = r
                self._eff[(True, joint)] = tuple(equal_split(r))
            elif v.trading:
                for t in range(k + 1):
                    self._eff[(t, joint)] = tuple(apply_participation(self._allocs[t], r))
            else:
                self._eff[joint] = tuple(apply_participation(ShareAllocation.identity(2), r))
        self._trade = {}
        if v.trading:
            for t in range(k + 1):
                for i1 in range(3):
                    for i2 in range(3):
                        new, outcome = trade_execute(self._allocs[t], (i1, i2), v.delta)
                        self._trade[(t, i1, i2)] = (int(round(new.w[0, 0] * k)), outcome)
        self.reset()

    @property
    def allocation(self) -> ShareAllocation:
        if self.variant.tag == "equal_split":
            return ShareAllocation.uniform(2)
        return self._allocs[self.own_tick] if self.variant.trading else ShareAllocation.identity(2)

    def reset(self) -> int:
        self.t = 0
        self.last = (C, C)
        self.own_tick = self.variant.ticks if self.variant.trading else 0
        self.outcome = TradeOutcome.NONE
        self.shared = False
        return self.state_index()

    def state(self) -> IpdState:
        if self.variant.trading:
            return IpdState(self.last, self.own_tick, self.outcome)
        return IpdState(self.last, shared=self.shared)

    def state_index(self) -> int:
        j = 2 * self.last[0] + self.last[1]
        v = self.variant
        if v.trading:
            return (j * (v.ticks + 1) + self.own_tick) * 3 + int(self.outcome)
        if v.tag == "choose_share":
            return 4 * self.shared + j
        return j

    def step(self, actions: Sequence[int]) -> IpdStep:
        a1, a2 = int(actions[0]), int(actions[1])
        n = self.variant.n_actions
        if not (0 <= a1 < n and 0 <= a2 < n):
            raise ValueError(f"actions {actions} outside 0..{n - 1}")
        joint = (a1 % 2, a2 % 2)
        tag = self.variant.tag
        if self.variant.trading:
            self.own_tick, self.outcome = self._trade[(self.own_tick, a1 // 2, a2 // 2)]
            eff = self._eff[(self.own_tick, joint)]
        elif tag == "choose_share":
            self.shared = a1 // 2 == 1 and a2 // 2 == 1
            eff = self._eff[(self.shared, joint)]
        else:
            eff = self._eff[joint]
        self.last = joint
        self.t += 1
        done = self.t >= self.variant.max_steps
        return IpdStep(self.state_index(), PAYOFFS[joint], eff, done, self.outcome, self.shared)


@dataclass
class IpdEpisode:
    states: list[int] = field(default_factory=list)
    actions: list[tuple[int, int]] = field(default_factory=list)
    env_rewards: list[tuple[float, float]] = field(default_factory=list)
    rewards: list[tuple[float, float]] = field(default_factory=list)
    own_shares: list[float] = field(default_factory=list)
    final_allocation: ShareAllocation | None = None


def ipd_episode(variant, policies, rng: np.random.Generator, eps: float = 0.0) -> IpdEpisode:
    """Roll out one episode with two policies exposing ``probs(state)``."""
    env = IpdEnv(variant)
    s = env.reset()
    rec = IpdEpisode()
    done = False
    while not done:
        acts = tuple(select_action(p, s, eps, rng) for p in policies)
        out = env.step(acts)
        rec.states.append(s)
        rec.actions.append(acts)
        rec.env_rewards.append(out.env_rewards)
        rec.rewards.append(out.rewards)
        rec.own_shares.append(float(env.allocation.w[0, 0]))
        s, done = out.state, out.done
    rec.final_allocation = env.allocation
    return rec
