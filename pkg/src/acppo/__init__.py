"""Actor-critic pretraining for PPO on desk-scale control tasks.

The library covers the full pipeline: expert data collection, behavioral
cloning of the actor, critic pretraining on discounted rollout returns under
an extended step limit, PPO fine-tuning with a freezable residual actor, and
an experiment harness comparing the pretraining regimes.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
