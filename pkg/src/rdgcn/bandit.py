"""Two-armed bandit over the exponential curvature K.

Each reward interval the controller compares the current accuracy against
the previous interval's, moves K by +S or -S, and latches once the last R
rewards sum to at most 1 in absolute value.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError


@dataclass
class BanditState:
    K: float = 0.1
    S: float = 0.1
    K_min: float = 0.1
    K_max: float = 2.0
    R: int = 10
    history: deque = field(default_factory=deque)
    b: int = 0
    frozen: bool = False
    last_acc: float | None = None

    def __post_init__(self):
        if self.R < 1:
            raise ConfigError(f"reward window R must be >= 1, got {self.R}")
        if not self.S > 0:
            raise ConfigError(f"step S must be positive, got {self.S}")
        if not 0 < self.K_min <= self.K_max:
            raise ConfigError(f"invalid curvature bounds [{self.K_min}, {self.K_max}]")
        if not self.K_min <= self.K <= self.K_max:
            raise ConfigError(f"initial K={self.K} outside [{self.K_min}, {self.K_max}]")
        self.history = deque(self.history, maxlen=self.R)

    def to_dict(self) -> dict:
        return {
            "K": self.K, "S": self.S, "K_min": self.K_min, "K_max": self.K_max, "R": self.R,
            "history": list(self.history), "b": self.b, "frozen": self.frozen, "last_acc": self.last_acc,
        }

    @classmethod
    def from_dict(cls, d) -> "BanditState":
        return cls(**d)


def reward(state: BanditState, acc_now: float) -> int:
    """+1 if accuracy strictly improved on the previous interval, else -1."""
    if state.frozen:
        raise RuntimeError("reward requested from a frozen bandit")
    if not 0.0 <= acc_now <= 1.0:
        raise DomainError(f"accuracy {acc_now} outside [0, 1]")
    r = 1 if state.last_acc is None or acc_now > state.last_acc else -1
    state.last_acc = acc_now
    return r


def terminated(state: BanditState) -> bool:
    return len(state.history) == state.R and abs(sum(state.history)) <= 1


def step(state: BanditState, r: int) -> BanditState:
    if state.frozen:
        return state
    if r not in (1, -1):
        raise DomainError(f"reward must be +1 or -1, got {r}")
    # round away float drift so repeated +S/-S moves land on the S grid
    k = round(state.K + r * state.S, 12)
    state.K = min(max(k, state.K_min), state.K_max)
    state.history.append(r)
    state.b += 1
    state.frozen = terminated(state)
    return state


def observe(state: BanditState, acc_now: float) -> int | None:
    """One full interval: reward then step. Returns the reward, or None when frozen."""
    if state.frozen:
        return None
    r = reward(state, acc_now)
    step(state, r)
    return r
