"""End-to-end acceptance checks at full reduced budgets.

Each test prints one PASS/FAIL line and the same lines are repeated in the
pytest terminal summary. Budgets: IPD 5 x 10,000 and 10 x 30,000 episodes,
Cleanup 3 x 10,000; the full module takes on the order of half an hour on one
core.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from rewardshares import harness
from rewardshares.analytic import AnalyticConfig, simulate
from rewardshares.harness import ExperimentConfig
from rewardshares.ipd import VARIANTS, decode_state, encode_state
from rewardshares.learners import MlpActorCritic
from rewardshares.participation import (
    ShareAllocation,
    apply_participation,
    common_pool_resolve,
    equal_split,
    pre_trade_resolve,
    trade_execute,
)


def report(capsys, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    return ok


def tail(x, frac=0.1):
    x = np.asarray(x)
    return x[-max(1, int(len(x) * frac)) :]


def run_seeds(exp, seeds, episodes):
    cfg = ExperimentConfig(exp, seeds=seeds, episodes=episodes)
    start = time.perf_counter()
    results = [harness.run_seed(cfg, k)[0] for k in range(seeds)]
    return results, time.perf_counter() - start


def ipd_summary(results):
    out = []
    for m in results:
        row = {
            "joint": tail(m["joint_reward"]).mean(),
            "coop": (tail(m["cooperation_1"]).mean(), tail(m["cooperation_2"]).mean()),
        }
        if "own_share_1" in m:
            row["own_end"] = tail(m["own_share_1"]).mean()
            row["own_mean"] = tail(m["own_share_mean_1"]).mean()
        out.append(row)
    return out


def fmt(rows, keys):
    parts = []
    for r in rows:
        parts.append(
            "(" + " ".join(f"{k}={np.round(r[k], 3).tolist()}" for k in keys if k in r) + ")"
        )
    return " ".join(parts)


@pytest.mark.slow
def test_criterion_1_ipd_no_participation(capsys):
    results, secs = run_seeds("ipd-i", 5, 10_000)
    rows = ipd_summary(results)
    good = sum(-4.2 <= r["joint"] <= -3.8 and min(1 - c for c in r["coop"]) > 0.95 for r in rows)
    ok = good >= 4 and secs < 60
    assert report(capsys, 1, ok, f"{good}/5 seeds at mutual defection, {secs:.1f}s; {fmt(rows, ['joint', 'coop'])}")


@pytest.mark.slow
def test_criterion_2_ipd_equal_split(capsys):
    results, secs = run_seeds("ipd-ii", 5, 10_000)
    rows = ipd_summary(results)
    good = sum(-2.2 <= r["joint"] <= -1.9 and min(r["coop"]) > 0.95 for r in rows)
    ok = good >= 4 and secs < 60
    assert report(capsys, 2, ok, f"{good}/5 seeds cooperate, {secs:.1f}s; {fmt(rows, ['joint', 'coop'])}")


@pytest.mark.slow
def test_criterion_3_ipd_choose_share(capsys):
    results, secs = run_seeds("ipd-iii", 5, 10_000)
    rows = ipd_summary(results)
    good = sum(-4.2 <= r["joint"] <= -3.8 for r in rows)
    ok = good == 5
    assert report(capsys, 3, ok, f"{good}/5 seeds in [-4.2, -3.8], {secs:.1f}s; {fmt(rows, ['joint'])}")


@pytest.mark.slow
def test_criterion_4_ipd_trade50(capsys):
    results, secs = run_seeds("ipd-iv", 10, 30_000)
    rows = ipd_summary(results)
    reward_ok = [-2.3 <= r["joint"] <= -1.8 for r in rows]
    holding_ok = [abs(r["own_end"] - 0.5) <= 0.1 for r in rows]
    good = sum(a and b for a, b in zip(reward_ok, holding_ok))
    ok = good >= 6 and secs < 600
    detail = (
        f"{good}/10 seeds with joint in [-2.3, -1.8] and 50/50 holding "
        f"(reward alone {sum(reward_ok)}/10, holding alone {sum(holding_ok)}/10), {secs:.0f}s; "
        f"{fmt(rows, ['joint', 'own_end'])}"
    )
    assert report(capsys, 4, ok, detail)


@pytest.mark.slow
def test_criterion_5_ipd_trade10(capsys):
    results, secs = run_seeds("ipd-v", 10, 30_000)
    rows = ipd_summary(results)
    converged = [r for r in rows if r["joint"] >= -2.3 and min(r["coop"]) > 0.85]
    own = [r["own_mean"] for r in converged]
    ok = bool(converged) and all(0.2 <= s <= 0.6 for s in own)
    detail = (
        f"{len(converged)}/10 converged seeds, own share means {np.round(own, 3).tolist()} "
        f"(target [0.2, 0.6]), {secs:.0f}s; {fmt(rows, ['joint', 'coop', 'own_mean'])}"
    )
    assert report(capsys, 5, ok, detail)


def test_criterion_6_analytic(capsys):
    start = time.perf_counter()
    rngs = harness.seed_streams(0, 20)
    runs = simulate(AnalyticConfig(runs=20, episodes=100), rngs)
    secs = time.perf_counter() - start
    fails = 0
    for r in runs:
        fails += not (
            abs(r["m"][-1] - 0.5) <= 0.01
            and abs(r["n"][-1] - 0.5) <= 0.01
            and min(r["theta1"][-1], r["theta2"][-1]) >= 0.99
            and abs(r["joint_reward"][-1] + 2) <= 0.05
        )
    ok = fails == 0 and secs < 5
    assert report(capsys, 6, ok, f"{20 - fails}/20 runs at m=n=0.5, theta>=0.99, joint=-2; {secs:.2f}s")


CLEANUP_SEEDS = 3
CLEANUP_EPISODES = 10_000
_cache = {}


def cleanup_runs(exp):
    if exp not in _cache:
        _cache[exp] = run_seeds(exp, CLEANUP_SEEDS, CLEANUP_EPISODES)
    return _cache[exp]


def final_joint(results):
    return [float(m["joint_reward"][-1000:].mean()) for m in results]


@pytest.mark.slow
def test_criterion_7_cleanup_equal_split(capsys):
    base, t_base = cleanup_runs("cleanup2-none")
    equal, t_equal = cleanup_runs("cleanup2-equal")
    b, e = final_joint(base), final_joint(equal)
    ratio = np.mean(e) / max(np.mean(b), 1e-9)
    shares = []
    for m in equal:
        w = np.array([m["waste_cleared_1"][-1000:].sum(), m["waste_cleared_2"][-1000:].sum()])
        shares.append(float(w.max() / w.sum()) if w.sum() else 0.0)
    secs = t_base + t_equal
    ok = ratio >= 3 and all(s > 0.8 for s in shares) and secs < 1800
    detail = (
        f"equal {np.round(e, 2).tolist()} vs none {np.round(b, 2).tolist()}, ratio {ratio:.1f}; "
        f"top cleaner share {np.round(shares, 3).tolist()}; {secs:.0f}s"
    )
    assert report(capsys, 7, ok, detail)


@pytest.mark.slow
def test_criterion_8_cleanup_pre_trade(capsys):
    base, _ = cleanup_runs("cleanup2-none")
    pre, secs = cleanup_runs("cleanup2-pretrade")
    b, p = final_joint(base), final_joint(pre)
    ratio = np.mean(p) / max(np.mean(b), 1e-9)
    own = [float(m["own_share_1"][-1000:].mean()) for m in pre]
    ok = ratio >= 2
    detail = (
        f"pre-trade {np.round(p, 2).tolist()} vs none {np.round(b, 2).tolist()}, ratio {ratio:.1f}; "
        f"own share {np.round(own, 2).tolist()}; {secs:.0f}s"
    )
    assert report(capsys, 8, ok, detail)


def _conservation_cases(rng, n_cases):
    worst = 0.0
    per = n_cases // 5
    for _ in range(per):
        n = int(rng.integers(2, 6))
        r = rng.uniform(-10, 10, n)
        w = rng.random((n, n))
        alloc = ShareAllocation(w / w.sum(axis=0))
        worst = max(worst, abs(apply_participation(alloc, r).sum() - r.sum()))
        worst = max(worst, abs(equal_split(r).sum() - r.sum()))
        flags = rng.random(n) < 0.5
        worst = max(worst, abs(common_pool_resolve(flags, r).sum() - r.sum()))
        worst = max(worst, abs(apply_participation(pre_trade_resolve(rng.integers(0, 6, n)), r).sum() - r.sum()))
        k = int(rng.integers(1, 11))
        tick = int(rng.integers(0, k + 1))
        two = ShareAllocation(np.array([[tick / k, 1 - tick / k], [1 - tick / k, tick / k]]))
        traded, _ = trade_execute(two, tuple(rng.integers(0, 3, 2)), 1 / k)
        worst = max(worst, abs(apply_participation(traded, r[:2]).sum() - r[:2].sum()))
    return worst


def _gradient_error(seed):
    rng = np.random.default_rng(seed)
    net = MlpActorCritic(6, (4, 3), hidden=5, entropy_coef=0.01, init_scale=0.7, rng=rng)
    obs = rng.normal(size=(3, 6))
    heads = rng.integers(0, 2, 3)
    actions = [int(rng.integers(0, net.heads[h])) for h in heads]
    adv, tgt = rng.normal(size=3), rng.normal(size=3)
    g = net.backward(obs, actions, adv, tgt, heads)
    base = net.get_params()
    fd = np.empty_like(base)
    for i in range(base.size):
        d = np.zeros_like(base)
        d[i] = 1e-6
        net.set_params(base + d)
        up = net.loss(obs, actions, adv, tgt, heads)
        net.set_params(base - d)
        fd[i] = (up - net.loss(obs, actions, adv, tgt, heads)) / 2e-6
    net.set_params(base)
    return np.linalg.norm(g - fd) / max(np.linalg.norm(g) + np.linalg.norm(fd), 1e-12)


def test_criterion_9_oracle_suites(capsys, tmp_path):
    start = time.perf_counter()
    worst_cons = _conservation_cases(np.random.default_rng(2024), 100_000)

    bijective = True
    for tag in ("no_participation", "choose_share", "trade50", "trade10"):
        v = VARIANTS[tag]
        decoded = [decode_state(v, i) for i in range(v.n_states)]
        bijective &= len(set(decoded)) == v.n_states
        bijective &= all(encode_state(v, s) == i for i, s in enumerate(decoded))

    worst_grad = max(_gradient_error(s) for s in range(100))

    identical = True
    for exp in ("ipd-v", "cleanup2-pretrade", "analytic"):
        small = exp.startswith("cleanup")
        kw = dict(seeds=2, episodes=30 if small else 300, overrides={"horizon": 10} if small else {})
        a = harness.run(ExperimentConfig(exp, out=str(tmp_path / exp / "a"), **kw))
        b = harness.run(ExperimentConfig(exp, out=str(tmp_path / exp / "b"), **kw))
        identical &= (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
        for f in (a / "params").iterdir():
            identical &= f.read_bytes() == (b / "params" / f.name).read_bytes()
    secs = time.perf_counter() - start
    ok = worst_cons <= 1e-12 and bijective and worst_grad < 1e-4 and identical and secs < 60
    detail = (
        f"conservation max err {worst_cons:.1e} over 1e5 cases, bijective={bijective}, "
        f"grad rel err {worst_grad:.1e} (100 seeds), byte-identical={identical}; {secs:.1f}s"
    )
    assert report(capsys, 9, ok, detail)
