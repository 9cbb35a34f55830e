"""PPO fine-tuning with clipped composite objective and regime schedules.

Supports the four training regimes compared by the harness:

  NP    no pretraining: both networks random, everything trainable
  AP    behavior-cloned actor, random critic, backbone frozen
  ACP   behavior-cloned actor plus pretrained critic, backbone frozen
  PIRL  behavior-cloned actor fully frozen until the per-update value loss
        settles (smoothed change rate below a threshold), then trained like AP

Fine-tuning alternates on-policy rollout collection at the nominal horizon
with minibatch ascent on the clipped objective, evaluates the deterministic
policy mean on a fixed 30-episode set at a fixed step cadence, and stops
when the evaluation mean reaches the target return or the budget runs out.
Evaluation episodes never count against the step budget.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import envs, nn
from .rlmath import DiscountSpec, gae_advantages, normalize_advantages
from .seeding import derive_seed, rng_for

REGIME_NAMES = ("NP", "AP", "ACP", "PIRL")


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_epsilon: float = 0.2
    c1: float = 0.5  # value loss coefficient
    c2: float = 0.0  # entropy bonus coefficient
    learning_rate: float = 3e-4
    rollout_length: int = 2048
    epochs_per_update: int = 10
    minibatch_size: int = 64
    max_env_steps: int = 200_000
    eval_interval: int = 4096
    eval_episodes: int = 30
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be >= 0")
        if self.rollout_length < self.minibatch_size:
            raise ValueError("rollout_length must be >= minibatch_size")
        if min(self.learning_rate, self.rollout_length, self.epochs_per_update,
               self.minibatch_size, self.eval_interval, self.eval_episodes) <= 0:
            raise ValueError("rates, lengths and counts must be positive")
        if self.max_env_steps < 0:
            raise ValueError("max_env_steps must be >= 0")


@dataclass(frozen=True)
class Regime:
    name: str
    change_rate_threshold: float = 0.10  # PIRL unfreeze heuristic

    def __post_init__(self):
        if self.name not in REGIME_NAMES:
            raise ValueError(f"regime must be one of {REGIME_NAMES}, got {self.name!r}")

    @property
    def pretrained_actor(self):
        return self.name in ("AP", "ACP", "PIRL")

    @property
    def pretrained_critic(self):
        return self.name == "ACP"


@dataclass
class RunMetrics:
    """Environment-step ledger and evaluation trace of one training run."""

    n_exp: int = 0
    n_rol: int = 0
    n_fro: int = 0
    n_fine: int = 0
    eval_curve: list = field(default_factory=list)  # (env_step, mean, std)
    reached_target: bool = False
    stop_step: int | None = None
    unfreeze_step: int | None = None

    @property
    def n_tot(self):
        return self.n_exp + self.n_rol + self.n_fro + self.n_fine

    def to_dict(self):
        return {
            "n_exp": self.n_exp,
            "n_rol": self.n_rol,
            "n_fro": self.n_fro,
            "n_fine": self.n_fine,
            "n_tot": self.n_tot,
            "eval_curve": [[int(s), float(m), float(d)] for s, m, d in self.eval_curve],
            "reached_target": self.reached_target,
            "stop_step": self.stop_step,
            "unfreeze_step": self.unfreeze_step,
        }

    @classmethod
    def from_dict(cls, d):
        metrics = cls(
            n_exp=d["n_exp"], n_rol=d["n_rol"], n_fro=d["n_fro"], n_fine=d["n_fine"],
            eval_curve=[(int(s), float(m), float(sd)) for s, m, sd in d["eval_curve"]],
            reached_target=bool(d["reached_target"]), stop_step=d["stop_step"],
            unfreeze_step=d.get("unfreeze_step"),
        )
        if d.get("n_tot") is not None and d["n_tot"] != metrics.n_tot:
            raise ValueError("inconsistent n_tot in serialized metrics")
        return metrics


@dataclass
class PpoBatch:
    """Aligned minibatch rows for the composite loss."""

    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray  # normalized upstream when enabled
    value_targets: np.ndarray


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    values: np.ndarray  # critic at collection time
    log_probs: np.ndarray  # policy at collection time
    segments: list  # (start, end, terminated, bootstrap_value)

    def __len__(self):
        return self.obs.shape[0]


def ppo_loss(batch, actor, critic, cfg):
    """Composite clipped objective (maximized).

    Returns (total, clip_term, value_term, entropy_term) with
    total = clip - c1 * value + c2 * entropy.
    """
    total, terms, _, _ = _loss_and_grads(batch, actor, critic, cfg,
                                         want_grads=False)
    return (total, *terms)


def ppo_loss_grads(batch, actor, critic, cfg, include_actor=True):
    """Analytic ascent gradients of the composite objective.

    Returns (terms, actor_grads, critic_grads) where terms is
    (total, clip_term, value_term, entropy_term) and the grad dicts map
    parameter block names to d(total)/d(block).
    """
    total, terms, a_grads, c_grads = _loss_and_grads(
        batch, actor, critic, cfg, want_grads=True, include_actor=include_actor
    )
    return (total, *terms), a_grads, c_grads


def _loss_and_grads(batch, actor, critic, cfg, want_grads, include_actor=True):
    n = batch.obs.shape[0]
    if not (batch.actions.shape[0] == batch.old_log_probs.shape[0]
            == batch.advantages.shape[0] == batch.value_targets.shape[0] == n):
        raise ValueError("batch fields are not aligned")

    means, actor_cache = actor.forward_batch(batch.obs)
    sigma = np.exp(actor.log_sigma)
    z = (batch.actions - means) / sigma
    log_probs = np.sum(-0.5 * nn.LOG_2PI - actor.log_sigma - 0.5 * z * z, axis=1)

    ratio = np.exp(log_probs - batch.old_log_probs)
    unclipped = ratio * batch.advantages
    clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon)
    clipped *= batch.advantages
    clip_term = float(np.minimum(unclipped, clipped).mean())

    values, critic_cache = critic.value_batch(batch.obs)
    value_err = values - batch.value_targets
    value_term = float(np.mean(value_err * value_err))

    entropy_term = nn.gaussian_entropy(actor.log_sigma)
    total = clip_term - cfg.c1 * value_term + cfg.c2 * entropy_term
    if not np.isfinite(total):
        raise ValueError(
            f"non-finite PPO loss: clip={clip_term} value={value_term} "
            f"entropy={entropy_term}"
        )
    if not want_grads:
        return total, (clip_term, value_term, entropy_term), None, None

    actor_grads = {}
    if include_actor:
        # Gradient flows through the unclipped branch wherever min() picks it.
        g_lp = np.where(unclipped <= clipped, ratio * batch.advantages, 0.0) / n
        d_mean = g_lp[:, None] * z / sigma
        actor_grads = actor.backward_batch(actor_cache, d_mean)
        d_log_sigma = (g_lp[:, None] * (z * z - 1.0)).sum(axis=0)
        actor_grads["log_sigma"] = d_log_sigma + cfg.c2 * np.ones_like(sigma)
    d_value = -cfg.c1 * 2.0 * value_err / n
    critic_grads = critic.backward_batch(critic_cache, d_value)
    return total, (clip_term, value_term, entropy_term), actor_grads, critic_grads


def compute_advantages_and_targets(buffer, cfg):
    """GAE advantages and value targets from collection-time values."""
    spec = DiscountSpec(cfg.gamma, cfg.lam)
    adv = np.empty(len(buffer))
    for start, end, terminated, bootstrap in buffer.segments:
        adv[start:end] = gae_advantages(
            buffer.rewards[start:end], buffer.values[start:end],
            bootstrap, terminated, spec,
        )
    return adv, adv + buffer.values


def ppo_update(buffer, actor, critic, actor_opt, critic_opt, cfg, shuffle_rng,
               frozen_actor_names=frozenset(), actor_fully_frozen=False):
    """Multi-epoch shuffled-minibatch ascent on one on-policy buffer.

    Advantages and targets come from the values snapshotted at collection
    time; advantage normalization (when enabled) happens once per buffer.
    Returns per-update means of the loss terms.
    """
    adv, targets = compute_advantages_and_targets(buffer, cfg)
    if cfg.normalize_advantages:
        adv = normalize_advantages(adv)
    sums = np.zeros(4)
    count = 0
    for _ in range(cfg.epochs_per_update):
        order = shuffle_rng.permutation(len(buffer))
        for start in range(0, order.size, cfg.minibatch_size):
            rows = order[start : start + cfg.minibatch_size]
            batch = PpoBatch(buffer.obs[rows], buffer.actions[rows],
                             buffer.log_probs[rows], adv[rows], targets[rows])
            terms, a_grads, c_grads = ppo_loss_grads(
                batch, actor, critic, cfg, include_actor=not actor_fully_frozen
            )
            if not actor_fully_frozen:
                actor_opt.step({k: -g for k, g in a_grads.items()},
                               frozen=frozen_actor_names)
            critic_opt.step({k: -g for k, g in c_grads.items()})
            sums += np.array(terms)
            count += 1
    total, clip_term, value_term, entropy_term = sums / count
    return {
        "total": total,
        "clip_term": clip_term,
        "value_term": value_term,
        "entropy_term": entropy_term,
    }


class RolloutWorker:
    """On-policy transition collector that persists episodes across buffers."""

    def __init__(self, env, seed):
        self.env = env
        self.horizon = env.spec.horizon
        self._seed = seed
        self._policy_rng = rng_for(seed, "policy")
        self._episode_index = 0
        self._obs = None

    def collect(self, actor, critic, n_steps):
        obs_rows = np.empty((n_steps, self.env.spec.obs_dim))
        act_rows = np.empty((n_steps, self.env.spec.act_dim))
        rewards = np.empty(n_steps)
        values = np.empty(n_steps)
        log_probs = np.empty(n_steps)
        segments = []
        seg_start = 0
        for k in range(n_steps):
            if self._obs is None:
                self._obs = self.env.reset(
                    derive_seed(self._seed, "episode", self._episode_index)
                )
                self._episode_index += 1
            action, log_prob = actor.sample_action(self._obs, self._policy_rng)
            obs_rows[k] = self._obs
            act_rows[k] = action
            values[k] = critic.value(self._obs)
            log_probs[k] = log_prob
            result = self.env.step(action, self.horizon)
            rewards[k] = result.reward
            if result.done:
                bootstrap = 0.0 if result.terminated else critic.value(result.next_obs)
                segments.append((seg_start, k + 1, result.terminated, bootstrap))
                seg_start = k + 1
                self._obs = None
            else:
                self._obs = result.next_obs
        if seg_start < n_steps:
            segments.append((seg_start, n_steps, False, critic.value(self._obs)))
        return RolloutBuffer(obs_rows, act_rows, rewards, values, log_probs,
                             segments)


def evaluate(env, actor, n_episodes, seed):
    """Mean/std of the undiscounted return of the deterministic policy mean.

    ``seed`` may be an int (per-episode seeds are derived from it) or an
    explicit sequence of per-episode seeds. Runs at the nominal horizon and
    consumes no training budget (use a dedicated env instance).
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if np.isscalar(seed):
        seeds = [derive_seed(seed, "eval-episode", i) for i in range(n_episodes)]
    else:
        seeds = list(seed)
        if len(seeds) != n_episodes:
            raise ValueError("need one seed per evaluation episode")
    returns = np.empty(n_episodes)
    for i, ep_seed in enumerate(seeds):
        obs = env.reset(ep_seed)
        total = 0.0
        while True:
            result = env.step(actor.mean_action(obs), env.spec.horizon)
            total += result.reward
            obs = result.next_obs
            if result.done:
                break
        returns[i] = total
    return float(returns.mean()), float(returns.std())


def pirl_change_rate(value_loss_history, window=5, eps=1e-12):
    """Relative change of the window-smoothed per-update value loss.

    Returns None while fewer than two update cycles are recorded (not yet
    judgeable).
    """
    if len(value_loss_history) < 2:
        return None
    series = [float(x) for x in value_loss_history]

    def smoothed(k):
        lo = max(0, k - window + 1)
        return sum(series[lo : k + 1]) / (k + 1 - lo)

    prev, last = smoothed(len(series) - 2), smoothed(len(series) - 1)
    return abs(last - prev) / max(abs(prev), eps)


def finetune(env, actor, critic, regime, cfg, seed, n_exp=0, n_rol=0,
             target_return=None):
    """PPO fine-tuning until the target return or the step budget.

    ``n_exp``/``n_rol`` are the pretraining step counts to carry into the
    ledger. The backbone is frozen for pretrained regimes and trainable for
    NP; PIRL additionally freezes the whole actor until the value loss
    settles, attributing those steps to n_fro.
    """
    if isinstance(regime, str):
        regime = Regime(regime)
    target = env.spec.target_return if target_return is None else target_return
    actor.backbone_frozen = regime.pretrained_actor

    metrics = RunMetrics(n_exp=n_exp, n_rol=n_rol)
    eval_env = envs.make_env(env.spec.env_id)
    eval_seed = derive_seed(seed, "evaluation")

    def eval_point(step):
        mean, std = evaluate(eval_env, actor, cfg.eval_episodes, eval_seed)
        metrics.eval_curve.append((step, mean, std))
        return mean

    if eval_point(0) >= target:
        metrics.reached_target = True
        metrics.stop_step = 0
        return metrics

    actor_opt = nn.Adam(actor.params(), lr=cfg.learning_rate)
    critic_opt = nn.Adam(critic.params(), lr=cfg.learning_rate)
    worker = RolloutWorker(env, derive_seed(seed, "rollout"))

    pirl_frozen = regime.name == "PIRL"
    value_loss_history = []
    steps_done = 0
    next_eval = cfg.eval_interval
    update_index = 0
    while steps_done < cfg.max_env_steps:
        buffer = worker.collect(actor, critic, cfg.rollout_length)
        steps_done += len(buffer)
        if pirl_frozen:
            metrics.n_fro += len(buffer)
        else:
            metrics.n_fine += len(buffer)
        stats = ppo_update(
            buffer, actor, critic, actor_opt, critic_opt, cfg,
            rng_for(seed, "shuffle", update_index),
            frozen_actor_names=actor.frozen_param_names(),
            actor_fully_frozen=pirl_frozen,
        )
        update_index += 1
        if pirl_frozen:
            value_loss_history.append(stats["value_term"])
            rate = pirl_change_rate(value_loss_history)
            if rate is not None and rate < regime.change_rate_threshold:
                pirl_frozen = False
                metrics.unfreeze_step = steps_done
        if steps_done >= next_eval:
            mean = eval_point(steps_done)
            next_eval = (steps_done // cfg.eval_interval + 1) * cfg.eval_interval
            if mean >= target:
                metrics.reached_target = True
                metrics.stop_step = steps_done
                return metrics
    return metrics


def fresh_networks(env_spec, seed):
    """Randomly initialized actor/critic pair for an environment."""
    actor = nn.ResidualActor(env_spec.obs_dim, env_spec.act_dim,
                             rng=rng_for(seed, "actor-init"))
    critic = nn.ValueNet(env_spec.obs_dim, rng=rng_for(seed, "critic-init"))
    return actor, critic


def config_with(cfg, **updates):
    """Frozen-dataclass convenience wrapper."""
    return replace(cfg, **updates)
