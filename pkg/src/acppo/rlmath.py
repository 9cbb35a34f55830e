"""Return, advantage, and step-limit math.

Pure functions over immutable inputs. The backward recursions run on the
selected kernel backend; the O(T^2) definition-literal sums live only in the
test suite as oracles.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class RewardTrace:
    """Per-step rewards of one episode plus how the episode ended.

    ``terminated`` is True when a terminal state was reached, False when the
    episode was cut off by a step limit (truncation). The distinction matters
    for bootstrapping: truncated episodes still have value beyond the cut.
    """

    rewards: np.ndarray
    terminated: bool

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=np.float64)
        if r.ndim != 1 or r.shape[0] < 1:
            raise ValueError("rewards must be a non-empty 1-D sequence")
        bad = np.flatnonzero(~np.isfinite(r))
        if bad.size:
            raise ValueError(f"non-finite reward at index {bad[0]}")
        object.__setattr__(self, "rewards", r)


@dataclass(frozen=True)
class DiscountSpec:
    """Discount factor and GAE decay."""

    gamma: float
    lam: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class StepLimitSpec:
    """Inputs of the extended-step-limit formula.

    ``horizon`` is the nominal episode horizon T, ``r_max`` a bound on
    per-step reward magnitude, ``tau`` the tolerated truncation error of the
    discounted return at any step before T.
    """

    horizon: int
    r_max: float
    tau: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def discounted_returns(trace, gamma):
    """Discounted return at every step: G_t = r[t] + gamma * G_{t+1}.

    Accepts a RewardTrace or a plain reward sequence. Single backward pass.
    """
    if not isinstance(trace, RewardTrace):
        trace = RewardTrace(np.asarray(trace, dtype=np.float64), terminated=True)
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    return _kernels.discount_scan(trace.rewards, gamma)


def gae_advantages(rewards, values, bootstrap_value, terminated, spec):
    """Generalized advantage estimates for one episode segment.

    ``values`` are the critic predictions v(s_t) for the segment's states;
    ``bootstrap_value`` is v(s_T) for the state after the last transition,
    used only when the segment was truncated (terminated=False). Advantages
    are the (gamma*lambda)-discounted sums of TD residuals
    delta_t = r_t + gamma * v(s_{t+1}) - v(s_t).
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if r.shape != v.shape or r.ndim != 1:
        raise ValueError(
            f"rewards and values must be equal-length 1-D arrays, "
            f"got {r.shape} and {v.shape}"
        )
    tail = 0.0 if terminated else float(bootstrap_value)
    v_next = np.empty_like(v)
    v_next[:-1] = v[1:]
    v_next[-1] = tail
    deltas = r + spec.gamma * v_next - v
    return _kernels.discount_scan(deltas, spec.gamma * spec.lam)


def value_targets(advantages, values):
    """Critic regression targets: advantage plus the old value estimate."""
    a = np.asarray(advantages, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if a.shape != v.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {v.shape}")
    return a + v


def extended_step_limit(spec, gamma):
    """Smallest horizon T_ext >= T whose truncation error is at most tau.

    Truncating an episode at T_ext leaves a discounted tail bounded by
    r_max * gamma^(T_ext - T) / (1 - gamma) for every step before T; this
    returns ceil(T + ln(tau * (1 - gamma) / r_max) / ln(gamma)).
    """
    if gamma >= 1.0:
        raise ValueError(
            "extended step limit is undefined at gamma = 1; "
            "use the environment's true finite horizon instead"
        )
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    cap = spec.r_max / (1.0 - gamma)
    if spec.tau > cap:
        raise ValueError(
            f"tau={spec.tau} exceeds r_max/(1-gamma)={cap:.6g}; "
            "the tolerance must not exceed the worst-case tail"
        )
    extension = math.log(spec.tau * (1.0 - gamma) / spec.r_max) / math.log(gamma)
    t_ext = math.ceil(spec.horizon + extension)
    return max(t_ext, spec.horizon)


def normalize_advantages(advantages, eps=1e-8):
    """Shift/scale to zero mean and unit std; constant input maps to zeros."""
    a = np.asarray(advantages, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValueError("advantages must be a non-empty 1-D sequence")
    if np.all(a == a[0]):
        return np.zeros_like(a)
    centered = a - a.mean()
    return centered / max(centered.std(), eps)
