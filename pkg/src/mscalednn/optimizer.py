"""Adam with a per-step learning-rate decay."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DECAY_KINDS = ("inverse_time", "linear", "exponential")


@dataclass(frozen=True)
class LrSchedule:
    """Learning rate as a function of the 0-based update index ``t``.

    * ``inverse_time``: ``lr0 / (1 + decay t)``
    * ``linear``:       ``lr0 (1 - decay t)``, must stay positive
    * ``exponential``:  ``lr0 (1 - decay)^t``
    """

    lr0: float
    decay: float = 0.0
    kind: str = "inverse_time"

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ConfigError("lr0 must be positive")
        if not self.decay >= 0:
            raise ConfigError("lr_decay must be non-negative")
        if self.kind not in DECAY_KINDS:
            raise ConfigError(f"decay_kind must be one of {DECAY_KINDS}")
        if self.kind == "exponential" and self.decay >= 1:
            raise ConfigError("exponential decay rate must be < 1")


def lr_at(schedule: LrSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("step index must be >= 0")
    if schedule.kind == "inverse_time":
        return schedule.lr0 / (1.0 + schedule.decay * t)
    if schedule.kind == "exponential":
        return schedule.lr0 * math.pow(1.0 - schedule.decay, t)
    lr = schedule.lr0 * (1.0 - schedule.decay * t)
    if lr <= 0:
        raise ValueError(f"linear decay reaches zero before step {t}")
    return lr


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **consts) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **consts)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray], schedule: LrSchedule):
    """One Adam update, in place.  Returns ``(params, state)``.

    The update with index ``state.t`` (before increment) uses
    ``lr_at(schedule, state.t)``; bias correction uses the incremented count.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and moment lists differ in length")
    lr = lr_at(schedule, state.t)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
