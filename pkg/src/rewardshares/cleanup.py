"""Cleanup gridworld: a polluted river, an orchard, and a cleaning beam.

Waste accumulates in the river; the orchard's apple spawn rate falls linearly
to zero as the wasted fraction of the river approaches a depletion threshold.
Agents collect apples (+1) by stepping on them and may clear waste only while
standing in the river.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .learners import sample_index
from .participation import (
    ShareAllocation,
    apply_participation,
    common_pool_resolve,
    equal_split,
    pool_flags,
    pre_trade_resolve,
)

MAP_VERSION = 1


class Cell(IntEnum):
    WALL = 0
    EMPTY = 1
    RIVER = 2
    WASTE = 3
    ORCHARD = 4
    APPLE = 5


N_KINDS = len(Cell)
CHARS = {"#": Cell.WALL, ".": Cell.EMPTY, "R": Cell.RIVER, "W": Cell.WASTE, "O": Cell.ORCHARD, "A": Cell.APPLE}
KIND_CHAR = {v: k for k, v in CHARS.items()}

LEFT, RIGHT, UP, DOWN, NOOP, CLEAN = range(6)
N_ACTIONS = 6
ACTION_NAMES = ("left", "right", "up", "down", "noop", "clean")
_MOVES = {LEFT: (0, -1), RIGHT: (0, 1), UP: (-1, 0), DOWN: (1, 0)}

# Agent spawns are (row, col); row 0 is the top wall.
MAPS = {
    "small7x7": (
        (
            "#######",
            "#WR..O#",
            "#WR..O#",
            "#RR..O#",
            "#RR..O#",
            "#RR..O#",
            "#######",
        ),
        ((5, 2), (1, 4)),
    ),
    "big10x10": (
        (
            "##########",
            "#WW.....O#",
            "#RR....OO#",
            "#WW.....O#",
            "#RR....OO#",
            "#WW.....O#",
            "#RR....OO#",
            "#WW.....O#",
            "#RR....OO#",
            "##########",
        ),
        ((8, 2), (5, 4), (1, 7)),
    ),
}


@dataclass(frozen=True)
class CleanupConfig:
    map_id: str = "small7x7"
    horizon: int = 50
    apple_prob: float = 0.3
    waste_prob: float = 0.5
    depletion: float = 0.4
    n_agents: int | None = None

    def __post_init__(self):
        if self.map_id not in MAPS:
            raise ValueError(f"unknown map {self.map_id!r}; choose from {sorted(MAPS)}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for name in ("apple_prob", "waste_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.depletion <= 1.0:
            raise ValueError("depletion threshold must lie in (0, 1]")
        spawns = MAPS[self.map_id][1]
        if self.n_agents is not None and not 1 <= self.n_agents <= len(spawns):
            raise ValueError(f"{self.map_id} has room for 1..{len(spawns)} agents")

    @property
    def agents(self) -> int:
        return self.n_agents or len(MAPS[self.map_id][1])

    @property
    def spawns(self) -> tuple[tuple[int, int], ...]:
        return MAPS[self.map_id][1][: self.agents]


def parse_grid(rows: Sequence[str]) -> np.ndarray:
    return np.array([[CHARS[ch] for ch in row] for row in rows], dtype=np.int8)


def dump_grid(grid: np.ndarray, positions: Sequence[tuple[int, int]] = ()) -> str:
    """Plain-text rendering, one character per cell; agents drawn as 1, 2, ..."""
    rows = [[KIND_CHAR[Cell(int(v))] for v in row] for row in grid]
    for i, (r, c) in enumerate(positions):
        rows[r][c] = str(i + 1)
    return "\n".join("".join(r) for r in rows) + "\n"


@dataclass
class CleanupState:
    grid: np.ndarray
    positions: list[tuple[int, int]]
    t: int = 0
    apples: list[int] = field(default_factory=list)
    waste_cleared: list[int] = field(default_factory=list)

    def copy(self) -> "CleanupState":
        return copy.deepcopy(self)

    def waste_fraction(self, river_cells: int) -> float:
        return int(np.count_nonzero(self.grid == Cell.WASTE)) / river_cells


class CleanupEnv:
    """Stateful Cleanup simulator. Agents act in index order within a step."""

    def __init__(self, config: CleanupConfig | None = None):
        self.config = config or CleanupConfig()
        rows, _ = MAPS[self.config.map_id]
        self.base = parse_grid(rows)
        self.height, self.width = self.base.shape
        river = (self.base == Cell.RIVER) | (self.base == Cell.WASTE)
        self.river_mask = river
        self.river_cells = [tuple(map(int, rc)) for rc in np.argwhere(river)]
        self.orchard_mask = (self.base == Cell.ORCHARD) | (self.base == Cell.APPLE)
        self.orchard_cells = [tuple(map(int, rc)) for rc in np.argwhere(self.orchard_mask)]
        self.n_agents = self.config.agents
        self.obs_size = (N_KINDS + 2) * self.height * self.width
        self.state: CleanupState | None = None
        self.rng: np.random.Generator | None = None

    def reset(self, rng: np.random.Generator) -> CleanupState:
        self.rng = rng
        self.state = CleanupState(
            grid=self.base.copy(),
            positions=list(self.config.spawns),
            apples=[0] * self.n_agents,
            waste_cleared=[0] * self.n_agents,
        )
        self._n_waste = int(np.count_nonzero(self.base == Cell.WASTE))
        return self.state

    @property
    def waste_fraction(self) -> float:
        return self._n_waste / len(self.river_cells)

    def apple_spawn_prob(self) -> float:
        cfg = self.config
        return cfg.apple_prob * max(0.0, 1.0 - self.waste_fraction / cfg.depletion)

    def step(self, actions: Sequence[int]) -> tuple[np.ndarray, bool]:
        """Advance one step; returns (per-agent environmental rewards, done)."""
        s = self.state
        if s is None:
            raise RuntimeError("call reset() before step()")
        if s.t >= self.config.horizon:
            raise RuntimeError("episode is over; call reset()")
        if len(actions) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {len(actions)}")
        grid = s.grid
        rewards = np.zeros(self.n_agents)
        for i, a in enumerate(actions):
            a = int(a)
            if not 0 <= a < N_ACTIONS:
                raise ValueError(f"action {a} outside 0..{N_ACTIONS - 1}")
            r, c = s.positions[i]
            if a in _MOVES:
                dr, dc = _MOVES[a]
                nr, nc = r + dr, c + dc
                if grid[nr, nc] == Cell.WALL or (nr, nc) in s.positions:
                    continue
                s.positions[i] = (nr, nc)
                if grid[nr, nc] == Cell.APPLE:
                    grid[nr, nc] = Cell.ORCHARD
                    rewards[i] += 1.0
                    s.apples[i] += 1
            elif a == CLEAN and self.river_mask[r, c]:
                column = grid[: r + 1, c]
                hit = column == Cell.WASTE
                n = int(hit.sum())
                if n:
                    column[hit] = Cell.RIVER
                    self._n_waste -= n
                    s.waste_cleared[i] += n
        rng = self.rng
        if self._n_waste < len(self.river_cells) and rng.random() < self.config.waste_prob:
            clean = [rc for rc in self.river_cells if grid[rc] == Cell.RIVER]
            grid[clean[int(rng.integers(len(clean)))]] = Cell.WASTE
            self._n_waste += 1
        p = self.apple_spawn_prob()
        draws = rng.random(len(self.orchard_cells))
        if p > 0.0:
            occupied = set(s.positions)
            for rc, u in zip(self.orchard_cells, draws):
                if u < p and grid[rc] == Cell.ORCHARD and rc not in occupied:
                    grid[rc] = Cell.APPLE
        s.t += 1
        return rewards, s.t >= self.config.horizon

    def observations(self, phase: float = 0.0) -> np.ndarray:
        """One row per agent: kind one-hot planes, self plane, others plane, phase flag."""
        s = self.state
        hw = self.height * self.width
        kinds = np.zeros((N_KINDS, hw))
        kinds[s.grid.ravel(), np.arange(hw)] = 1.0
        flat_pos = [r * self.width + c for r, c in s.positions]
        out = np.zeros((self.n_agents, self.obs_size + 1))
        out[:, : N_KINDS * hw] = kinds.ravel()
        for i in range(self.n_agents):
            for j, p in enumerate(flat_pos):
                out[i, (N_KINDS + (0 if i == j else 1)) * hw + p] = 1.0
        out[:, -1] = phase
        return out


def reset(config: CleanupConfig, rng: np.random.Generator) -> CleanupState:
    return CleanupEnv(config).reset(rng).copy()


def step(config: CleanupConfig, state: CleanupState, actions: Sequence[int], rng: np.random.Generator):
    """Pure variant of :meth:`CleanupEnv.step`: the input state is left untouched.

    Returns (next state, observations, rewards, done).
    """
    env = CleanupEnv(config)
    env.state = state.copy()
    env.rng = rng
    env._n_waste = int(np.count_nonzero(state.grid == Cell.WASTE))
    rewards, done = env.step(actions)
    return env.state, env.observations(), rewards, done


MECHANISMS = ("none", "equal", "pretrade", "pool")
CHOICE_HEAD = 1


def wrap_equal_split(rewards) -> np.ndarray:
    return equal_split(rewards)


@dataclass
class CleanupEpisode:
    """Everything one episode produced, per agent where it applies.

    ``obs``/``actions``/``heads``/``rewards`` are aligned decision records; for
    the pre-trade and pool mechanisms row 0 is the choice step (head 1, zero
    reward).
    """

    obs: np.ndarray
    actions: np.ndarray
    heads: np.ndarray
    rewards: np.ndarray
    env_rewards: np.ndarray
    choices: tuple[int, ...] | None
    allocation: ShareAllocation | None
    participants: np.ndarray | None
    apples: list[int]
    waste_cleared: list[int]

    @property
    def joint_reward(self) -> float:
        return float(self.env_rewards.sum())


def run_episode(
    config: CleanupConfig,
    mechanism: str,
    policies: Sequence,
    rng: np.random.Generator,
    eps: float = 0.0,
    env: CleanupEnv | None = None,
) -> CleanupEpisode:
    """Play one episode; ``policies[i].probs(obs, head)`` gives agent i's distribution."""
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    env = env or CleanupEnv(config)
    n = env.n_agents
    if len(policies) != n:
        raise ValueError(f"{n} agents need {n} policies")
    env.reset(rng)
    first_step = mechanism in ("pretrade", "pool")
    T = config.horizon + first_step
    obs = np.empty((T, n, env.obs_size + 1))
    actions = np.empty((T, n), dtype=int)
    heads = np.zeros((T, n), dtype=int)
    rewards = np.zeros((T, n))
    env_rewards = np.zeros((config.horizon, n))
    # row 0 is reserved for the choice step so every mechanism consumes the
    # same random stream and episodes stay comparable across mechanisms
    u = rng.random((config.horizon + 1, n, 2))
    choices = allocation = flags = None
    t0 = 0
    if first_step:
        obs[0] = env.observations(phase=1.0)
        heads[0] = CHOICE_HEAD
        choices = tuple(
            sample_index(policies[i].probs(obs[0, i], CHOICE_HEAD), eps, u[0, i, 0], u[0, i, 1]) for i in range(n)
        )
        actions[0] = choices
        if mechanism == "pretrade":
            allocation = pre_trade_resolve(choices)
        else:
            flags = pool_flags(choices)
        t0 = 1
    elif mechanism == "equal":
        allocation = ShareAllocation.uniform(n)
    for k in range(config.horizon):
        t = t0 + k
        obs[t] = env.observations()
        acts = [sample_index(policies[i].probs(obs[t, i]), eps, u[k + 1, i, 0], u[k + 1, i, 1]) for i in range(n)]
        actions[t] = acts
        r, _ = env.step(acts)
        env_rewards[k] = r
        if mechanism == "equal":
            rewards[t] = wrap_equal_split(r)
        elif mechanism == "pretrade":
            rewards[t] = apply_participation(allocation, r)
        elif mechanism == "pool":
            rewards[t] = common_pool_resolve(flags, r)
        else:
            rewards[t] = r
    s = env.state
    return CleanupEpisode(
        obs, actions, heads, rewards, env_rewards, choices, allocation, flags, list(s.apples), list(s.waste_cleared)
    )


def pre_trade_episode(config, policies, rng, eps: float = 0.0) -> CleanupEpisode:
    return run_episode(config, "pretrade", policies, rng, eps)


def common_pool_episode(config, policies, rng, eps: float = 0.0) -> CleanupEpisode:
    if config.agents != 3:
        raise ValueError("the common pool is played with three agents")
    return run_episode(config, "pool", policies, rng, eps)
