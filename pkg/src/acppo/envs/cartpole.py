"""Continuous-action cart-pole balancing.

Classic cart-pole dynamics (explicit Euler, fixed tick) with the force
scaled by a continuous action in [-1, 1]. Every surviving step pays +1, and
the episode terminates when the pole leaves the angle window or the cart
leaves the track. The nominal 200-step horizon is an artificial truncation:
a policy that balances forever would keep collecting reward, which is
exactly the case where critic targets from truncated rollouts are biased
and an extended step limit pays off.
"""

import math

import numpy as np

from .base import Env, EnvSpec

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
HALF_POLE_LENGTH = 0.5
FORCE_MAG = 10.0
DT = 0.02
THETA_LIMIT = 12.0 * math.pi / 180.0
X_LIMIT = 2.4
INIT_BOUND = 0.05

SPEC = EnvSpec(
    env_id="cartpole-cont",
    obs_dim=4,
    act_dim=1,
    horizon=200,
    r_max=1.0,
    target_return=195.0,
    supports_extension=True,
)


class CartPoleContEnv(Env):
    spec = SPEC

    def _reset_state(self, rng):
        # state = [x, x_dot, theta, theta_dot]
        self._state = rng.uniform(-INIT_BOUND, INIT_BOUND, size=4)

    def _observe(self):
        return self._state.copy()

    def _advance(self, action):
        x, x_dot, theta, theta_dot = self._state
        force = FORCE_MAG * float(np.clip(action[0], -1.0, 1.0))
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        total_mass = MASS_CART + MASS_POLE
        pole_ml = MASS_POLE * HALF_POLE_LENGTH
        temp = (force + pole_ml * theta_dot**2 * sin_t) / total_mass
        theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
            HALF_POLE_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t**2 / total_mass)
        )
        x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
        x += DT * x_dot
        x_dot += DT * x_acc
        theta += DT * theta_dot
        theta_dot += DT * theta_acc
        self._state = np.array([x, x_dot, theta, theta_dot])
        terminated = abs(theta) > THETA_LIMIT or abs(x) > X_LIMIT
        return 1.0, terminated

    def describe(self):
        return {
            "dt": DT,
            "gravity": GRAVITY,
            "mass_cart": MASS_CART,
            "mass_pole": MASS_POLE,
            "half_pole_length": HALF_POLE_LENGTH,
            "force_mag": FORCE_MAG,
            "theta_limit_rad": THETA_LIMIT,
            "x_limit": X_LIMIT,
            "init_bound": INIT_BOUND,
            "alive_reward": 1.0,
            "action_bound": 1.0,
        }
