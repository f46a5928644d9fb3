"""Training loops: independent learners interacting through an environment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cleanup import N_ACTIONS, CleanupConfig, CleanupEnv, CleanupEpisode, run_episode
from .ipd import IpdEnv, IpdVariant, VARIANTS
from .learners import ExplorationSchedule, MlpActorCritic, TabularActorCritic, sample_index
from .participation import PRE_TRADE_LEVELS


@dataclass
class IpdHyper:
    actor_lr: float = 0.01
    critic_lr: float = 0.1
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_fraction: float = 0.5


def train_ipd(variant: IpdVariant | str, episodes: int, rng: np.random.Generator, hyper: IpdHyper | None = None):
    """Train two tabular actor-critics; returns (learners, per-episode metric arrays)."""
    hyper = hyper or IpdHyper()
    if isinstance(variant, str):
        variant = VARIANTS[variant]
    env = IpdEnv(variant)
    learners = [
        TabularActorCritic(variant.n_states, variant.n_actions, hyper.actor_lr, hyper.critic_lr, hyper.gamma)
        for _ in range(2)
    ]
    sched = ExplorationSchedule.for_budget(episodes, hyper.eps_fraction, hyper.eps_start, hyper.eps_end)
    T = variant.max_steps
    k = variant.ticks
    metrics = {
        "joint_reward": np.empty(episodes),
        "cooperation_1": np.empty(episodes),
        "cooperation_2": np.empty(episodes),
        "own_share_end": np.empty(episodes),
        "own_share_mean": np.empty(episodes),
    }
    l1, l2 = learners
    for ep in range(episodes):
        eps = sched.epsilon(ep)
        u = rng.random((T, 4)).tolist()
        s = env.reset()
        total = 0.0
        coop1 = coop2 = 0
        share_sum = 0.0
        for t in range(T):
            ut = u[t]
            a1 = sample_index(l1.probs(s), eps, ut[0], ut[1])
            a2 = sample_index(l2.probs(s), eps, ut[2], ut[3])
            out = env.step((a1, a2))
            r1, r2 = out.rewards
            l1.td_update(s, a1, r1, out.state, out.done)
            l2.td_update(s, a2, r2, out.state, out.done)
            e1, e2 = out.env_rewards
            total += e1 + e2
            coop1 += a1 % 2 == 0
            coop2 += a2 % 2 == 0
            share_sum += env.own_tick / k if variant.trading else 1.0
            s = out.state
        metrics["joint_reward"][ep] = total / T
        metrics["cooperation_1"][ep] = coop1 / T
        metrics["cooperation_2"][ep] = coop2 / T
        metrics["own_share_end"][ep] = env.own_tick / k if variant.trading else 1.0
        metrics["own_share_mean"][ep] = share_sum / T
    return learners, metrics


MECHANISMS = ("none", "equal", "pretrade", "pool")


@dataclass
class CleanupHyper:
    lr: float = 1e-3
    hidden: int = 64
    gamma: float = 0.99
    lam: float = 1.0
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_fraction: float = 0.5
    init_scale: float = 0.05


def _advantages(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float):
    """Generalised advantage estimates and lambda-returns for one finished episode."""
    n = rewards.size
    adv = np.empty(n)
    nxt_v, acc = 0.0, 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * nxt_v - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        nxt_v = values[t]
    return adv, adv + values


def make_cleanup_learners(env: CleanupEnv, mechanism: str, hyper: CleanupHyper, rng: np.random.Generator):
    heads = (N_ACTIONS, PRE_TRADE_LEVELS) if mechanism in ("pretrade", "pool") else (N_ACTIONS,)
    return [
        MlpActorCritic(
            env.obs_size + 1,
            heads,
            hidden=hyper.hidden,
            lr=hyper.lr,
            value_coef=hyper.value_coef,
            entropy_coef=hyper.entropy_coef,
            gamma=hyper.gamma,
            init_scale=hyper.init_scale,
            rng=rng,
        )
        for _ in range(env.n_agents)
    ]


def update_from_episode(learner: MlpActorCritic, ep: CleanupEpisode, agent: int, hyper: CleanupHyper) -> None:
    """Actor-critic update for one agent from its own observations and effective rewards."""
    obs = ep.obs[:, agent]
    _, values = learner.forward(obs)
    adv, targets = _advantages(ep.rewards[:, agent], values, hyper.gamma, hyper.lam)
    grad = learner.backward(obs, ep.actions[:, agent], adv, targets, ep.heads[:, agent])
    learner.apply_gradient(grad)


def train_cleanup(
    config: CleanupConfig,
    mechanism: str,
    episodes: int,
    rng: np.random.Generator,
    hyper: CleanupHyper | None = None,
    callback=None,
):
    """Independent actor-critic training in Cleanup; returns (learners, metrics)."""
    hyper = hyper or CleanupHyper()
    env = CleanupEnv(config)
    n = env.n_agents
    learners = make_cleanup_learners(env, mechanism, hyper, rng)
    sched = ExplorationSchedule.for_budget(episodes, hyper.eps_fraction, hyper.eps_start, hyper.eps_end)
    metrics = {"joint_reward": np.empty(episodes)}
    for i in range(n):
        metrics[f"apples_{i + 1}"] = np.empty(episodes)
        metrics[f"waste_cleared_{i + 1}"] = np.empty(episodes)
        if mechanism == "pretrade":
            metrics[f"own_share_{i + 1}"] = np.empty(episodes)
        if mechanism == "pool":
            metrics[f"participates_{i + 1}"] = np.empty(episodes)
    for e in range(episodes):
        ep = run_episode(config, mechanism, learners, rng, sched.epsilon(e), env)
        for i, learner in enumerate(learners):
            update_from_episode(learner, ep, i, hyper)
        metrics["joint_reward"][e] = ep.joint_reward
        for i in range(n):
            metrics[f"apples_{i + 1}"][e] = ep.apples[i]
            metrics[f"waste_cleared_{i + 1}"][e] = ep.waste_cleared[i]
            if mechanism == "pretrade":
                metrics[f"own_share_{i + 1}"][e] = ep.allocation.w[i, i]
            if mechanism == "pool":
                metrics[f"participates_{i + 1}"][e] = float(ep.participants[i])
        if callback is not None:
            callback(e, ep)
    return learners, metrics
