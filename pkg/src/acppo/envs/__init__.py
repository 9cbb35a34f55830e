"""Built-in environments: catalog, factory, experts."""

from .base import Env, EnvSpec, StepResult
from .cartpole import CartPoleContEnv
from .experts import ExpertController
from .linquad import LinQuadEnv, analytic_value
from .point_reach import PointReachEnv

_ENVS = {
    "point-reach": PointReachEnv,
    "cartpole-cont": CartPoleContEnv,
    "linquad": LinQuadEnv,
}


def env_catalog():
    """Specs of the built-in environments, in catalog order."""
    return [cls.spec for cls in _ENVS.values()]


def make_env(env_id):
    if env_id not in _ENVS:
        known = ", ".join(sorted(_ENVS))
        raise ValueError(f"unknown env {env_id!r}; known: {known}")
    return _ENVS[env_id]()


def expert_for(env_id, quality=1.0):
    return ExpertController(env_id, quality)


__all__ = [
    "Env",
    "EnvSpec",
    "StepResult",
    "ExpertController",
    "PointReachEnv",
    "CartPoleContEnv",
    "LinQuadEnv",
    "analytic_value",
    "env_catalog",
    "make_env",
    "expert_for",
]
