"""Closed-form dynamics of the two-agent prisoner's dilemma with a share market.

Agents are summarised by cooperation probabilities ``theta1``/``theta2``;
``m`` is the fraction of agent 1's reward held by agent 2 and ``n`` the
fraction of agent 2's reward held by agent 1. Shares are traded in ticks of
``dm`` through a broker quoting the price at which the seller is exactly
indifferent, and policies follow the exact value gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

SHARE_CAP = 0.5
READINGS = ("marginal", "literal")
# d r1 / d m and d r2 / d m over (CC, CD, DC, DD); n-derivatives mirror these
_DR1_DM = np.array([1.0, 3.0, 0.0, 2.0])
_DR1_DN = np.array([-1.0, 0.0, -3.0, -2.0])


@dataclass(frozen=True)
class TheoryState:
    theta1: float
    theta2: float
    m_ticks: int = 0
    n_ticks: int = 0
    gamma: float = 0.9
    alpha: float = 0.1
    dm: float = 0.05

    @property
    def m(self) -> float:
        return self.m_ticks * self.dm

    @property
    def n(self) -> float:
        return self.n_ticks * self.dm

    @property
    def cap_ticks(self) -> int:
        return int(round(SHARE_CAP / self.dm))


def joint_probs(theta1: float, theta2: float) -> np.ndarray:
    """Probabilities of (CC, CD, DC, DD)."""
    return np.array(
        [theta1 * theta2, theta1 * (1 - theta2), (1 - theta1) * theta2, (1 - theta1) * (1 - theta2)]
    )


def reward_vectors(m: float, n: float) -> tuple[np.ndarray, np.ndarray]:
    r1 = np.array([-1 + m - n, -3 + 3 * m, -3 * n, -2 + 2 * m - 2 * n])
    r2 = np.array([-1 - m + n, -3 * m, -3 + 3 * n, -2 - 2 * m + 2 * n])
    return r1, r2


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"discount must lie in (0, 1), got {gamma}")


def value(theta1: float, theta2: float, m: float, n: float, gamma: float, agent: int) -> float:
    """Discounted value of a stationary joint policy for agent 1 or 2."""
    _check_gamma(gamma)
    if agent not in (1, 2):
        raise ValueError("agent must be 1 or 2")
    r = reward_vectors(m, n)[agent - 1]
    return float(joint_probs(theta1, theta2) @ r) / (1 - gamma)


def policy_update(s: TheoryState) -> tuple[float, float]:
    """Exact gradient ascent on each agent's own value, clipped to [0, 1]."""
    scale = s.alpha / (1 - s.gamma)
    t1 = s.theta1 + scale * (2 * s.n + s.m - 1)
    t2 = s.theta2 + scale * (2 * s.m + s.n - 1)
    return float(np.clip(t1, 0.0, 1.0)), float(np.clip(t2, 0.0, 1.0))


def broker_price(theta1: float, theta2: float, gamma: float) -> float:
    """Per-unit price of agent 1's shares that leaves the seller indifferent.

    For agent 2's shares call with the probabilities swapped.
    """
    _check_gamma(gamma)
    bracket = theta1 * theta2 + 3 * theta1 * (1 - theta2) + 2 * (1 - theta1) * (1 - theta2)
    return -bracket / (1 - gamma)


def trade_marginals(s: TheoryState, side: str, priced: bool = True, reading: str = "marginal") -> tuple[float, float]:
    """Marginal value of one more tick of ``side`` ("m" or "n") for (seller, buyer).

    ``reading="marginal"`` charges the price per unit of share; ``"literal"``
    additionally adds the ``dm * price`` cash term inside the discounted
    bracket, which leaves the seller strictly worse off at the quoted price.
    """
    if reading not in READINGS:
        raise ValueError(f"unknown price reading {reading!r}")
    p = joint_probs(s.theta1, s.theta2)
    k = 1.0 / (1 - s.gamma)
    if side == "m":
        seller_grad = k * float(p @ _DR1_DM)
        price = broker_price(s.theta1, s.theta2, s.gamma) if priced else 0.0
    elif side == "n":
        # agent 2 sells n; by symmetry its gradient mirrors agent 1's on m
        seller_grad = k * float(p[[0, 2, 1, 3]] @ _DR1_DM)
        price = broker_price(s.theta2, s.theta1, s.gamma) if priced else 0.0
    else:
        raise ValueError("side must be 'm' or 'n'")
    buyer_grad = -seller_grad
    seller = seller_grad + price
    if reading == "literal":
        seller += k * s.dm * price
    buyer = buyer_grad - price
    return seller, buyer


def share_update(
    s: TheoryState, priced: bool = True, reading: str = "marginal", tol: float = 1e-12
) -> TheoryState:
    """Trade one tick of ``m`` and of ``n`` where both counterparties are willing.

    Indifference counts as willing; ``tol`` absorbs rounding in the comparison.
    """
    out = s
    scale = tol * max(1.0, 1.0 / (1 - s.gamma))
    for side in ("m", "n"):
        ticks = out.m_ticks if side == "m" else out.n_ticks
        if ticks >= s.cap_ticks:
            continue
        seller, buyer = trade_marginals(s, side, priced, reading)
        if seller >= -scale and buyer >= -scale:
            out = replace(out, **{f"{side}_ticks": ticks + 1})
    return out


def expected_joint_reward(s: TheoryState) -> float:
    """Expected per-step sum of both agents' rewards (independent of m, n)."""
    r1, r2 = reward_vectors(s.m, s.n)
    return float(joint_probs(s.theta1, s.theta2) @ (r1 + r2))


SERIES = ("m", "n", "theta1", "theta2", "price", "joint_reward")


@dataclass
class AnalyticConfig:
    runs: int = 20
    episodes: int = 100
    gamma: float = 0.9
    alpha: float = 0.1
    dm: float = 0.05
    theta_low: float = 0.2
    theta_high: float = 0.8
    priced: bool = True
    reading: str = "marginal"


def simulate_run(cfg: AnalyticConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """One run: per episode trade shares, then update policies; record the state after."""
    t1, t2 = rng.uniform(cfg.theta_low, cfg.theta_high, 2)
    s = TheoryState(float(t1), float(t2), gamma=cfg.gamma, alpha=cfg.alpha, dm=cfg.dm)
    out = {k: np.empty(cfg.episodes) for k in SERIES}
    for ep in range(cfg.episodes):
        s = share_update(s, cfg.priced, cfg.reading)
        t1, t2 = policy_update(s)
        s = replace(s, theta1=t1, theta2=t2)
        out["m"][ep] = s.m
        out["n"][ep] = s.n
        out["theta1"][ep] = s.theta1
        out["theta2"][ep] = s.theta2
        out["price"][ep] = broker_price(s.theta1, s.theta2, s.gamma)
        out["joint_reward"][ep] = expected_joint_reward(s)
    return out


def simulate(cfg: AnalyticConfig, rngs) -> list[dict[str, np.ndarray]]:
    """Independent runs, one generator each."""
    return [simulate_run(cfg, rng) for rng in rngs]
