"""Environment abstraction shared by the built-in tasks.

Environments are deterministic given (seed, action sequence): the only
randomness is the seeded initial state. The caller passes the step limit on
every step (the nominal horizon T for training/evaluation, an extended limit
for critic-target rollouts), and truncation fires exactly when the step
counter reaches that limit without termination.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    """Static description of one environment."""

    env_id: str
    obs_dim: int
    act_dim: int
    horizon: int
    r_max: float
    target_return: float
    supports_extension: bool


@dataclass(frozen=True)
class StepResult:
    next_obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool

    def __post_init__(self):
        if self.terminated and self.truncated:
            raise ValueError("terminated and truncated cannot both be set")

    @property
    def done(self):
        return self.terminated or self.truncated


class Env:
    """Base class: step counting, truncation, and input validation."""

    spec: EnvSpec

    def __init__(self):
        self._steps = None
        self._done = True
        self.lifetime_steps = 0  # every step() ever taken; never reset

    def reset(self, seed):
        """Start a new episode; deterministic for a given seed."""
        rng = np.random.default_rng(int(seed))
        self._reset_state(rng)
        self._steps = 0
        self._done = False
        return self._observe()

    def step(self, action, step_limit):
        """Advance one tick; truncate when the counter hits step_limit."""
        if self._done or self._steps is None:
            raise RuntimeError("no active episode; call reset() first")
        if step_limit < 1:
            raise ValueError(f"step_limit must be >= 1, got {step_limit}")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.spec.act_dim,):
            raise ValueError(
                f"action shape {action.shape} != ({self.spec.act_dim},)"
            )
        if np.any(np.isnan(action)):
            raise ValueError("action contains NaN")
        reward, terminated = self._advance(action)
        self._steps += 1
        self.lifetime_steps += 1
        truncated = (not terminated) and self._steps >= step_limit
        self._done = terminated or truncated
        return StepResult(self._observe(), float(reward), terminated, truncated)

    # Subclass hooks -------------------------------------------------------

    def _reset_state(self, rng):
        raise NotImplementedError

    def _observe(self):
        raise NotImplementedError

    def _advance(self, action):
        """Apply one control tick; returns (reward, terminated)."""
        raise NotImplementedError

    def describe(self):
        """Physical constants and reward coefficients, for audit output."""
        raise NotImplementedError
