import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from rewardshares.analytic import (
    AnalyticConfig,
    TheoryState,
    broker_price,
    expected_joint_reward,
    joint_probs,
    policy_update,
    reward_vectors,
    share_update,
    simulate,
    trade_marginals,
    value,
)

unit = st.floats(min_value=0.0, max_value=1.0)
half = st.floats(min_value=0.0, max_value=0.5)


@pytest.mark.parametrize(
    "t1, t2, expected",
    [(1, 1, [1, 0, 0, 0]), (0.5, 0.5, [0.25] * 4), (0.3, 0.8, [0.24, 0.06, 0.56, 0.14])],
)
def test_joint_probs(t1, t2, expected):
    np.testing.assert_allclose(joint_probs(t1, t2), expected, atol=1e-12)


@pytest.mark.parametrize(
    "m, n, r1",
    [(0, 0, [-1, -3, 0, -2]), (0.5, 0.5, [-1, -1.5, -1.5, -2]), (0.1, 0.2, [-1.1, -2.7, -0.6, -2.2])],
)
def test_reward_vectors(m, n, r1):
    np.testing.assert_allclose(reward_vectors(m, n)[0], r1, atol=1e-12)


def test_reward_vectors_base_agent2():
    assert reward_vectors(0, 0)[1].tolist() == [-1, 0, -3, -2]


def test_value_examples():
    assert value(1, 1, 0, 0, 0.9, 1) == pytest.approx(-10)
    assert value(0, 0, 0, 0, 0.9, 2) == pytest.approx(-20)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            value(1, 1, 0, 0, bad, 1)
    with pytest.raises(ValueError):
        value(1, 1, 0, 0, 0.9, 3)


def test_policy_update_examples():
    s = TheoryState(0.5, 0.5, 10, 10)
    assert policy_update(s)[1] == pytest.approx(1.0)
    assert policy_update(TheoryState(0.5, 0.5))[1] == 0.0
    # 2m + n = 1 keeps theta2 fixed: m = 0.25, n = 0.5
    assert policy_update(TheoryState(0.5, 0.37, 5, 10))[1] == pytest.approx(0.37)


def test_broker_price_examples():
    assert broker_price(0, 0, 0.9) == pytest.approx(-20)
    assert broker_price(1, 1, 0.9) == pytest.approx(-10)
    for g in (0.1, 0.5, 0.99):
        assert broker_price(0, 1, g) == 0.0


def test_no_trade_without_price():
    s = TheoryState(0.5, 0.5)
    seller, buyer = trade_marginals(s, "m", priced=False)
    assert buyer < 0
    assert share_update(s, priced=False) == s


def test_trade_with_broker_price():
    s = TheoryState(0.5, 0.5)
    out = share_update(s)
    assert (out.m, out.n) == (0.05, 0.05)


def test_cap():
    s = TheoryState(0.9, 0.9, 10, 10)
    assert share_update(s) == s
    out = share_update(TheoryState(0.9, 0.9, 10, 9))
    assert (out.m_ticks, out.n_ticks) == (10, 10)


def test_literal_reading_blocks_first_trade():
    s = TheoryState(0.5, 0.5)
    seller, _ = trade_marginals(s, "m", reading="literal")
    assert seller < 0
    assert share_update(s, reading="literal") == s
    with pytest.raises(ValueError):
        trade_marginals(s, "m", reading="other")


@settings(max_examples=300)
@given(unit, unit)
def test_probs_sum_to_one(t1, t2):
    assert abs(joint_probs(t1, t2).sum() - 1.0) < 1e-12


@settings(max_examples=300)
@given(unit, unit, half, half, half, half)
def test_total_value_independent_of_shares(t1, t2, m, n, m2, n2):
    a = value(t1, t2, m, n, 0.9, 1) + value(t1, t2, m, n, 0.9, 2)
    b = value(t1, t2, m2, n2, 0.9, 1) + value(t1, t2, m2, n2, 0.9, 2)
    assert a == pytest.approx(b, abs=1e-9)


def test_update_sign_over_grid():
    for mt in range(11):
        for nt in range(11):
            s = TheoryState(0.5, 0.5, mt, nt)
            t2 = policy_update(s)[1]
            g = 2 * s.m + s.n - 1
            if g > 1e-12:
                assert t2 > 0.5
            elif g < -1e-12:
                assert t2 < 0.5
            else:
                assert t2 == pytest.approx(0.5)


@settings(max_examples=300)
@given(unit, unit, st.floats(min_value=0.01, max_value=0.99))
def test_price_never_positive(t1, t2, g):
    assert broker_price(t1, t2, g) <= 0.0


def test_simulation_reaches_cooperation():
    cfg = AnalyticConfig()
    runs = simulate(cfg, [np.random.default_rng(s) for s in range(20)])
    for r in runs:
        assert np.all(np.diff(r["m"]) >= 0) and np.all(np.diff(r["n"]) >= 0)
        assert r["m"].max() <= 0.5 + 1e-12
        assert abs(r["m"][-1] - 0.5) <= 0.01 and abs(r["n"][-1] - 0.5) <= 0.01
        assert min(r["theta1"][-1], r["theta2"][-1]) >= 0.99
        assert abs(r["joint_reward"][-1] + 2) <= 0.05


def test_literal_reading_never_trades():
    runs = simulate(AnalyticConfig(reading="literal"), [np.random.default_rng(0)])
    assert runs[0]["m"].max() == 0.0


def test_joint_reward_ignores_shares():
    s = TheoryState(0.3, 0.6)
    assert expected_joint_reward(s) == pytest.approx(expected_joint_reward(replace(s, m_ticks=7, n_ticks=2)))
