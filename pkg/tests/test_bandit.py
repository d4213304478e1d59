import pytest
from hypothesis import given, settings, strategies as st

from rdgcn.bandit import BanditState, observe, reward, step, terminated
from rdgcn.errors import ConfigError, DomainError


class TestReward:
    def test_improvement(self):
        s = BanditState(last_acc=0.70)
        assert reward(s, 0.72) == 1
        assert s.last_acc == 0.72

    def test_tie_is_negative(self):
        assert reward(BanditState(last_acc=0.72), 0.72) == -1

    def test_first_interval_positive(self):
        assert reward(BanditState(), 0.1) == 1

    def test_domain(self):
        with pytest.raises(DomainError):
            reward(BanditState(), 1.5)


class TestStep:
    def test_increase(self):
        assert step(BanditState(K=0.1), 1).K == pytest.approx(0.2)

    def test_clamp_low(self):
        assert step(BanditState(K=0.1), -1).K == 0.1

    def test_clamp_high(self):
        assert step(BanditState(K=2.0), 1).K == 2.0

    def test_history_is_a_window(self):
        s = BanditState(R=3)
        for r in (1, 1, 1, 1, 1):
            step(s, r)
        assert list(s.history) == [1, 1, 1]
        assert s.b == 5


class TestTerminated:
    def test_alternating_full_window(self):
        s = BanditState(history=[1, -1] * 5)
        assert terminated(s)

    def test_all_positive(self):
        assert not terminated(BanditState(history=[1] * 10))

    def test_window_not_full(self):
        assert not terminated(BanditState(history=[1, -1, 1, -1, 1]))

    def test_odd_window_sum_one(self):
        assert terminated(BanditState(R=3, history=[1, -1, 1]))


def test_zero_window_rejected():
    with pytest.raises(ConfigError):
        BanditState(R=0)


def test_alternating_stream_freezes_at_R():
    s = BanditState()
    for b in range(1, 30):
        step(s, 1 if b % 2 else -1)
        if s.frozen:
            break
    assert s.b == s.R == 10


def test_frozen_latch():
    s = BanditState(R=2)
    step(s, 1)
    step(s, -1)
    assert s.frozen
    k = s.K
    for r in (1, 1, -1, 1):
        step(s, r)
    assert s.K == k and s.b == 2
    assert observe(s, 0.9) is None


@given(st.lists(st.sampled_from([1, -1]), max_size=200))
@settings(max_examples=200)
def test_K_in_bounds_and_deterministic(rewards):
    def run():
        s = BanditState()
        traj = []
        for r in rewards:
            step(s, r)
            assert s.K_min <= s.K <= s.K_max
            assert len(s.history) <= s.R
            traj.append(s.K)
        return traj

    assert run() == run()


def test_roundtrip():
    s = BanditState()
    observe(s, 0.5)
    observe(s, 0.4)
    t = BanditState.from_dict(s.to_dict())
    assert t.to_dict() == s.to_dict()
