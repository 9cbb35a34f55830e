"""Actor and critic pretraining from expert demonstrations.

The actor is behavior-cloned on expert state-action pairs (all parameters
trainable, exploration scale pinned at log_sigma = -2). The critic is then
regressed onto discounted returns observed in rollouts of the cloned policy:
those rollouts run under an extended step limit where the environment's
horizon is an artificial truncation, so the return targets carry at most a
chosen tail error instead of a systematic truncation bias. Rows past the
nominal horizon only serve the return computation and are not used as
critic inputs.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .data import ORIGIN_EXPERT, ORIGIN_ROLLOUT, Episode, TransitionDataset
from .rlmath import StepLimitSpec, discounted_returns, extended_step_limit
from .seeding import derive_seed, rng_for


@dataclass(frozen=True)
class PretrainConfig:
    bc_learning_rate: float = 1e-3
    bc_epochs: int = 60
    bc_batch_size: int = 64
    critic_learning_rate: float = 1e-3
    critic_epochs: int = 60
    critic_batch_size: int = 64
    gamma: float = 0.99
    step_limit_tau: float | None = None  # None: 1% of |target return|
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.bc_learning_rate <= 0 or self.critic_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.bc_epochs < 1 or self.critic_epochs < 1:
            raise ValueError("epoch counts must be positive")
        if self.bc_batch_size < 1 or self.critic_batch_size < 1:
            raise ValueError("batch sizes must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")


def default_tau(env_spec):
    """Default return-tail tolerance: 1% of the target-return scale."""
    return 0.01 * abs(env_spec.target_return)


def rollout_horizon(env_spec, gamma, tau):
    """Episode limit for critic-target rollouts.

    Extended beyond the nominal horizon when that horizon is an artificial
    truncation; equal to it otherwise.
    """
    if not env_spec.supports_extension:
        return env_spec.horizon
    spec = StepLimitSpec(env_spec.horizon, env_spec.r_max, tau)
    return extended_step_limit(spec, gamma)


def collect_expert(env, controller, n_exp, seed):
    """Run the expert for whole episodes until at least n_exp steps.

    The final episode always completes, so the dataset may overshoot n_exp
    by at most one episode; total_steps records the actual count.
    """
    if n_exp < 1:
        raise ValueError("n_exp must be >= 1")
    dataset = TransitionDataset(env.spec.env_id, ORIGIN_EXPERT, gamma=0.0, tau=0.0)
    horizon = env.spec.horizon
    index = 0
    while dataset.total_steps < n_exp:
        noise_rng = rng_for(seed, "expert-noise", index)
        obs = env.reset(derive_seed(seed, "expert-episode", index))
        obs_rows, act_rows, rewards = [], [], []
        while True:
            action = controller.action(obs, noise_rng)
            result = env.step(action, horizon)
            obs_rows.append(obs)
            act_rows.append(np.asarray(action, dtype=np.float64))
            rewards.append(result.reward)
            obs = result.next_obs
            if result.done:
                break
        dataset.episodes.append(
            Episode(np.array(obs_rows), np.array(act_rows), np.array(rewards),
                    result.terminated)
        )
        index += 1
    return dataset


def collect_rollouts(env, actor, n_rol, gamma, tau, seed, deterministic=False):
    """Collect critic-target rollouts with the (pretrained) policy.

    Episodes run to termination or to the rollout horizon (extended where
    supported). Returns are discounted over the full trace; only the first
    nominal-horizon rows are retained as training inputs. n_rol = 0 yields
    an empty dataset.
    """
    if n_rol < 0:
        raise ValueError("n_rol must be >= 0")
    horizon = rollout_horizon(env.spec, gamma, tau)
    nominal = env.spec.horizon
    dataset = TransitionDataset(env.spec.env_id, ORIGIN_ROLLOUT, gamma=gamma, tau=tau)
    index = 0
    while dataset.total_steps < n_rol:
        action_rng = rng_for(seed, "rollout-noise", index)
        obs = env.reset(derive_seed(seed, "rollout-episode", index))
        obs_rows, act_rows, rewards = [], [], []
        while True:
            if deterministic:
                action = actor.mean_action(obs)
            else:
                action, _ = actor.sample_action(obs, action_rng)
            result = env.step(action, horizon)
            if len(obs_rows) < nominal:
                obs_rows.append(obs)
                act_rows.append(action)
            rewards.append(result.reward)
            obs = result.next_obs
            if result.done:
                break
        rewards = np.array(rewards)
        returns = discounted_returns(rewards, gamma)[: len(obs_rows)]
        dataset.episodes.append(
            Episode(np.array(obs_rows), np.array(act_rows), rewards,
                    result.terminated, returns=returns)
        )
        index += 1
    return dataset


def _split_rows(n_rows, fraction, rng):
    order = rng.permutation(n_rows)
    n_val = int(math.floor(fraction * n_rows))
    if n_val == 0:
        return order, None
    return order[n_val:], order[:n_val]


def bc_pretrain(actor, dataset, cfg, seed=0):
    """Behavioral cloning: regress policy means onto expert actions.

    All actor parameters (backbone and head) are trained; log_sigma is held
    at its pretraining value. Returns the per-epoch loss curve as a list of
    (train_mse, val_mse) tuples (val_mse is None without a validation split).
    """
    if dataset.origin != ORIGIN_EXPERT:
        raise ValueError("bc_pretrain expects an expert dataset")
    if not dataset.episodes:
        raise ValueError("expert dataset is empty")
    obs, acts, _ = dataset.flat_rows()
    actor.log_sigma[:] = nn.ResidualActor.LOG_SIGMA_INIT
    train_idx, val_idx = _split_rows(obs.shape[0], cfg.validation_fraction,
                                     rng_for(seed, "bc-split"))
    weight_params = {k: v for k, v in actor.params().items() if k != "log_sigma"}
    opt = nn.Adam(weight_params, lr=cfg.bc_learning_rate)
    curve = []
    for epoch in range(cfg.bc_epochs):
        order = rng_for(seed, "bc-epoch", epoch).permutation(train_idx)
        losses = []
        for start in range(0, order.size, cfg.bc_batch_size):
            rows = order[start : start + cfg.bc_batch_size]
            means, cache = actor.forward_batch(obs[rows])
            err = means - acts[rows]
            losses.append(float(np.mean(np.sum(err * err, axis=1))))
            d_mean = 2.0 * err / rows.size
            opt.step(actor.backward_batch(cache, d_mean, include_backbone=True))
        val = None
        if val_idx is not None:
            val = bc_loss(actor, obs[val_idx], acts[val_idx])
        curve.append((float(np.mean(losses)), val))
    return curve


def bc_loss(actor, obs, acts):
    """Mean squared action error of the policy mean on the given rows."""
    means, _ = actor.forward_batch(obs)
    err = means - acts
    return float(np.mean(np.sum(err * err, axis=1)))


def critic_pretrain(critic, dataset, cfg, seed=0):
    """Regress the critic onto observed discounted rollout returns."""
    if dataset.origin != ORIGIN_ROLLOUT:
        raise ValueError("critic_pretrain expects a rollout dataset")
    if not dataset.episodes:
        raise ValueError(
            "rollout dataset is empty; skip critic pretraining for actor-only runs"
        )
    obs, _, returns = dataset.flat_rows()
    if returns is None:
        raise ValueError("rollout dataset has no precomputed returns")
    train_idx, val_idx = _split_rows(obs.shape[0], cfg.validation_fraction,
                                     rng_for(seed, "critic-split"))
    opt = nn.Adam(critic.params(), lr=cfg.critic_learning_rate)
    curve = []
    for epoch in range(cfg.critic_epochs):
        order = rng_for(seed, "critic-epoch", epoch).permutation(train_idx)
        losses = []
        for start in range(0, order.size, cfg.critic_batch_size):
            rows = order[start : start + cfg.critic_batch_size]
            values, cache = critic.value_batch(obs[rows])
            err = values - returns[rows]
            losses.append(float(np.mean(err * err)))
            opt.step(critic.backward_batch(cache, 2.0 * err / rows.size))
        val = None
        if val_idx is not None:
            val = critic_loss(critic, obs[val_idx], returns[val_idx])
        curve.append((float(np.mean(losses)), val))
    return curve


def critic_loss(critic, obs, returns):
    """Mean squared value error on the given rows."""
    values, _ = critic.value_batch(obs)
    err = values - returns
    return float(np.mean(err * err))


def pretrain_pipeline(env, controller, n_exp, n_rol, cfg, seed,
                      actor=None, critic=None):
    """Expert collection -> BC -> rollouts -> critic regression.

    Returns (actor, critic, info) where info carries the actual step counts
    and loss curves. n_rol = 0 skips rollouts and leaves the critic at its
    random initialization (actor-only pretraining).
    """
    spec = env.spec
    if actor is None:
        actor = nn.ResidualActor(spec.obs_dim, spec.act_dim,
                                 rng=rng_for(seed, "actor-init"))
    if critic is None:
        critic = nn.ValueNet(spec.obs_dim, rng=rng_for(seed, "critic-init"))
    tau = cfg.step_limit_tau if cfg.step_limit_tau is not None else default_tau(spec)

    expert_data = collect_expert(env, controller, n_exp, derive_seed(seed, "expert"))
    bc_curve = bc_pretrain(actor, expert_data, cfg, seed=derive_seed(seed, "bc"))

    rollout_data = collect_rollouts(env, actor, n_rol, cfg.gamma, tau,
                                    derive_seed(seed, "rollout"))
    critic_curve = None
    if rollout_data.episodes:
        critic_curve = critic_pretrain(critic, rollout_data, cfg,
                                       seed=derive_seed(seed, "critic"))

    info = {
        "n_exp": expert_data.total_steps,
        "n_rol": rollout_data.total_steps,
        "bc_curve": bc_curve,
        "critic_curve": critic_curve,
        "tau": tau,
        "rollout_horizon": rollout_horizon(spec, cfg.gamma, tau),
    }
    return actor, critic, info
