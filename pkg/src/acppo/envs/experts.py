"""Scripted expert controllers with a tunable quality knob.

Each environment ships a deterministic control law that comfortably beats
its target return at quality 1. Lower knob settings degrade the controller
monotonically (in expectation): point-reach and cart-pole blend the law with
seeded action noise, linquad detunes the feedback gain. The knob is what the
harness calibrates so the expert lands at a chosen fraction of the target.
"""

import math

import numpy as np

from . import cartpole, linquad

POINT_REACH_KP = 3.0
POINT_REACH_KD = 1.2
POINT_REACH_NOISE = 0.7

CARTPOLE_GAINS = np.array([0.9, 1.8, 18.0, 3.0])  # x, x_dot, theta, theta_dot
CARTPOLE_ENERGY_GAIN = 0.4
CARTPOLE_NOISE = 0.6

LINQUAD_MIN_GAIN_SCALE = 0.05


class ExpertController:
    """Deterministic control law plus quality-knob-scaled degradation.

    ``action(obs, rng)`` needs an RNG only for the noise-blended experts;
    at quality 1 the output is the pure control law and the RNG is unused.
    """

    def __init__(self, env_id, quality=1.0):
        if not 0.0 <= quality <= 1.0:
            raise ValueError(f"quality must be in [0, 1], got {quality}")
        if env_id not in _LAWS:
            raise ValueError(f"no expert controller for env {env_id!r}")
        self.env_id = env_id
        self.quality = float(quality)

    def action(self, obs, rng=None):
        return _LAWS[self.env_id](np.asarray(obs, dtype=np.float64),
                                  self.quality, rng)


def _noise(rng, dim, scale):
    if rng is None:
        raise ValueError("a seeded rng is required for quality < 1")
    return scale * rng.standard_normal(dim)


def _point_reach_law(obs, quality, rng):
    err, vel = obs[:2], obs[2:]
    u = POINT_REACH_KP * err - POINT_REACH_KD * vel
    u = np.clip(u, -1.0, 1.0)
    if quality < 1.0:
        u = quality * u + (1.0 - quality) * _noise(rng, 2, POINT_REACH_NOISE)
    return np.clip(u, -1.0, 1.0)


def _cartpole_law(obs, quality, rng):
    x, x_dot, theta, theta_dot = obs
    # Energy-shaping term (negligible near upright) plus full-state stabilizer.
    pole_ml = cartpole.MASS_POLE * cartpole.HALF_POLE_LENGTH
    energy_err = (
        0.5 * pole_ml * cartpole.HALF_POLE_LENGTH * theta_dot**2
        + cartpole.GRAVITY * pole_ml * (math.cos(theta) - 1.0)
    )
    u = CARTPOLE_ENERGY_GAIN * energy_err * theta_dot * math.cos(theta)
    u += float(CARTPOLE_GAINS @ np.array([x, x_dot, theta, theta_dot]))
    u = np.clip(np.array([u]), -1.0, 1.0)
    if quality < 1.0:
        u = quality * u + (1.0 - quality) * _noise(rng, 1, CARTPOLE_NOISE)
    return np.clip(u, -1.0, 1.0)


def _linquad_law(obs, quality, rng):
    scale = LINQUAD_MIN_GAIN_SCALE + (1.0 - LINQUAD_MIN_GAIN_SCALE) * quality
    k = linquad.optimal_gain()
    return np.clip(-scale * (k @ obs), -linquad.ACTION_BOUND,
                   linquad.ACTION_BOUND)


_LAWS = {
    "point-reach": _point_reach_law,
    "cartpole-cont": _cartpole_law,
    "linquad": _linquad_law,
}
