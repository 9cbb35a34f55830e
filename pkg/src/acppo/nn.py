"""Minimal feedforward network engine.

ReLU MLPs with reverse-mode gradients, a diagonal-Gaussian policy head, a
scalar critic, Adam with per-block moment state, and a versioned binary
checkpoint format. The actor is a backbone + decision head pair where the
head sees both the backbone's latent features and the raw observation, so
the backbone can be frozen after pretraining without cutting the head off
from the state.

All parameters are float64 numpy arrays. Heavy math is delegated to the
kernel backend (see acppo._kernels).
"""

import json
import math
import struct

import numpy as np

from . import _kernels

LOG_2PI = math.log(2.0 * math.pi)
CHECKPOINT_MAGIC = b"ACPC"
CHECKPOINT_VERSION = 1


def orthogonal_init(shape, gain, rng):
    """Orthogonal weight matrix scaled by ``gain`` (rows=fan_in, cols=fan_out)."""
    n_in, n_out = shape
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return np.ascontiguousarray(gain * q[:n_in, :n_out])


class MlpNet:
    """Fully connected ReLU network; linear output layer.

    ``dims`` runs input -> hidden... -> output. Weight matrices are
    (fan_in, fan_out) row-major.
    """

    def __init__(self, dims, rng=None, out_gain=1.0):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"need at least [in, out] positive dims, got {dims}")
        self.dims = dims
        self.weights = []
        self.biases = []
        rng = rng if rng is not None else np.random.default_rng(0)
        for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
            gain = out_gain if i == len(dims) - 2 else math.sqrt(2.0)
            self.weights.append(orthogonal_init((n_in, n_out), gain, rng))
            self.biases.append(np.zeros(n_out))

    @classmethod
    def from_arrays(cls, dims, weights, biases):
        net = cls.__new__(cls)
        net.dims = tuple(int(d) for d in dims)
        net.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        net.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        for i, (n_in, n_out) in enumerate(zip(net.dims[:-1], net.dims[1:])):
            if net.weights[i].shape != (n_in, n_out) or net.biases[i].shape != (n_out,):
                raise ValueError(
                    f"layer {i} arrays do not match dims {net.dims}: "
                    f"{net.weights[i].shape}, {net.biases[i].shape}"
                )
        return net

    def _check_input(self, x):
        if x.shape[-1] != self.dims[0]:
            raise ValueError(f"input dim {x.shape[-1]} != expected {self.dims[0]}")

    def forward(self, x):
        """Single-observation forward pass; 1-D in, 1-D out."""
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x)
        acts = _kernels.mlp_forward(self.weights, self.biases, x.reshape(1, -1))
        return acts[-1][0]

    def forward_batch(self, x):
        """Batched forward pass; returns (output, activation cache)."""
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x)
        acts = _kernels.mlp_forward(self.weights, self.biases, x)
        return acts[-1], acts

    def backward_batch(self, acts, d_out):
        """Gradients from cached activations: (d_weights, d_biases, d_input)."""
        if d_out.shape != acts[-1].shape:
            raise ValueError(f"output grad shape {d_out.shape} != {acts[-1].shape}")
        return _kernels.mlp_backward(self.weights, acts, d_out)

    def param_blocks(self, prefix):
        blocks = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            blocks[f"{prefix}.W{i}"] = w
            blocks[f"{prefix}.b{i}"] = b
        return blocks

    def clone(self):
        return MlpNet.from_arrays(
            self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )


def gaussian_log_prob(mean, log_sigma, action):
    """Log density of a diagonal Gaussian; batched when mean/action are 2-D."""
    mean = np.asarray(mean, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    log_sigma = np.asarray(log_sigma, dtype=np.float64)
    if mean.shape != action.shape:
        raise ValueError(f"mean shape {mean.shape} != action shape {action.shape}")
    if not (
        np.all(np.isfinite(mean))
        and np.all(np.isfinite(action))
        and np.all(np.isfinite(log_sigma))
    ):
        raise ValueError("non-finite input to gaussian_log_prob")
    z = (action - mean) / np.exp(log_sigma)
    terms = -0.5 * LOG_2PI - log_sigma - 0.5 * z * z
    return terms.sum(axis=-1)


def gaussian_entropy(log_sigma):
    """Entropy of a diagonal Gaussian; independent of the mean."""
    log_sigma = np.asarray(log_sigma, dtype=np.float64)
    if not np.all(np.isfinite(log_sigma)):
        raise ValueError("non-finite log_sigma")
    return float(np.sum(0.5 * (LOG_2PI + 1.0) + log_sigma))


class ResidualActor:
    """Gaussian policy with a freezable backbone and a residual decision head.

    The backbone maps the observation to a latent vector; the head maps
    [latent; observation] to the action mean. log_sigma is a state-independent
    learned vector. When ``backbone_frozen`` is set, optimizer steps skip the
    backbone partition entirely, so its parameters stay bit-identical.
    """

    LOG_SIGMA_INIT = -2.0

    def __init__(self, obs_dim, act_dim, latent_dim=64, backbone_hidden=(64, 64),
                 head_hidden=(64,), rng=None, mean_out_gain=0.01):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.latent_dim = int(latent_dim)
        self.backbone = MlpNet((obs_dim, *backbone_hidden, latent_dim), rng=rng)
        self.head = MlpNet(
            (latent_dim + obs_dim, *head_hidden, act_dim), rng=rng,
            out_gain=mean_out_gain,
        )
        self.log_sigma = np.full(act_dim, self.LOG_SIGMA_INIT)
        self.backbone_frozen = False

    def forward(self, obs):
        """Policy mean and log_sigma for one observation."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.obs_dim,):
            raise ValueError(f"obs shape {obs.shape} != ({self.obs_dim},)")
        latent = self.backbone.forward(obs)
        mean = self.head.forward(np.concatenate([latent, obs]))
        return mean, self.log_sigma

    def forward_batch(self, obs):
        """Batched policy means; returns (means, cache for backward_batch)."""
        obs = np.asarray(obs, dtype=np.float64)
        latent, bb_acts = self.backbone.forward_batch(obs)
        head_in = np.ascontiguousarray(np.concatenate([latent, obs], axis=1))
        means, head_acts = self.head.forward_batch(head_in)
        return means, (bb_acts, head_acts)

    def backward_batch(self, cache, d_mean, include_backbone=None):
        """Weight/bias gradients of the mean output w.r.t. d_mean.

        By default the backbone partition is included only when it is not
        frozen; pass include_backbone explicitly to override.
        """
        if include_backbone is None:
            include_backbone = not self.backbone_frozen
        bb_acts, head_acts = cache
        d_ws, d_bs, d_head_in = self.head.backward_batch(head_acts, d_mean)
        grads = {}
        for i, (dw, db) in enumerate(zip(d_ws, d_bs)):
            grads[f"head.W{i}"] = dw
            grads[f"head.b{i}"] = db
        if include_backbone:
            d_latent = np.ascontiguousarray(d_head_in[:, : self.latent_dim])
            d_ws, d_bs, _ = self.backbone.backward_batch(bb_acts, d_latent)
            for i, (dw, db) in enumerate(zip(d_ws, d_bs)):
                grads[f"backbone.W{i}"] = dw
                grads[f"backbone.b{i}"] = db
        return grads

    def sample_action(self, obs, rng):
        """Stochastic action and its log-prob under the current policy."""
        mean, log_sigma = self.forward(obs)
        action = mean + np.exp(log_sigma) * rng.standard_normal(self.act_dim)
        return action, float(gaussian_log_prob(mean, log_sigma, action))

    def mean_action(self, obs):
        return self.forward(obs)[0]

    def params(self):
        blocks = self.backbone.param_blocks("backbone")
        blocks.update(self.head.param_blocks("head"))
        blocks["log_sigma"] = self.log_sigma
        return blocks

    def frozen_param_names(self):
        if not self.backbone_frozen:
            return frozenset()
        return frozenset(n for n in self.params() if n.startswith("backbone."))

    def clone(self):
        actor = ResidualActor.__new__(ResidualActor)
        actor.obs_dim = self.obs_dim
        actor.act_dim = self.act_dim
        actor.latent_dim = self.latent_dim
        actor.backbone = self.backbone.clone()
        actor.head = self.head.clone()
        actor.log_sigma = self.log_sigma.copy()
        actor.backbone_frozen = self.backbone_frozen
        return actor


class ValueNet:
    """Scalar state-value network."""

    def __init__(self, obs_dim, hidden=(64, 64), rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = int(obs_dim)
        self.net = MlpNet((obs_dim, *hidden, 1), rng=rng, out_gain=1.0)

    def value(self, obs):
        return float(self.net.forward(obs)[0])

    def value_batch(self, obs):
        out, cache = self.net.forward_batch(obs)
        return out[:, 0], cache

    def backward_batch(self, cache, d_value):
        d_out = np.ascontiguousarray(d_value.reshape(-1, 1))
        d_ws, d_bs, _ = self.net.backward_batch(cache, d_out)
        grads = {}
        for i, (dw, db) in enumerate(zip(d_ws, d_bs)):
            grads[f"critic.W{i}"] = dw
            grads[f"critic.b{i}"] = db
        return grads

    def params(self):
        return self.net.param_blocks("critic")

    def clone(self):
        critic = ValueNet.__new__(ValueNet)
        critic.obs_dim = self.obs_dim
        critic.net = self.net.clone()
        return critic


class AdamState:
    """Per-block Adam accumulators."""

    __slots__ = ("step_count", "m", "v")

    def __init__(self, shape):
        self.step_count = 0
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)


class Adam:
    """Adam over a named dict of parameter blocks.

    Blocks listed in ``frozen`` (or absent from the grads dict) are skipped
    entirely: parameters, moments, and step counts stay untouched, so a
    later unfreeze resumes from clean state.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = {name: AdamState(p.shape) for name, p in self.params.items()}

    def step(self, grads, frozen=frozenset()):
        for name, p in self.params.items():
            if name in frozen or name not in grads:
                continue
            g = np.asarray(grads[name], dtype=np.float64)
            if g.shape != p.shape:
                raise ValueError(f"grad shape {g.shape} != param {p.shape} for {name}")
            if not np.all(np.isfinite(g)):
                raise ValueError(f"non-finite gradient in block {name!r}")
            st = self.state[name]
            st.step_count += 1
            _kernels.adam_step(
                p.reshape(-1), np.ascontiguousarray(g.reshape(-1)),
                st.m.reshape(-1), st.v.reshape(-1),
                st.step_count, self.lr, self.beta1, self.beta2, self.eps,
            )
            if not np.all(np.isfinite(p)):
                raise ValueError(f"non-finite parameters in block {name!r} after step")


def _actor_block_names(actor):
    names = [f"backbone.{k}{i}" for i in range(len(actor.backbone.weights)) for k in ("W", "b")]
    names += [f"head.{k}{i}" for i in range(len(actor.head.weights)) for k in ("W", "b")]
    names.append("log_sigma")
    return names


def save_checkpoint(actor, critic, path):
    """Write actor + critic to a self-describing versioned binary file."""
    header = {
        "format_version": CHECKPOINT_VERSION,
        "d_s": actor.obs_dim,
        "d_a": actor.act_dim,
        "d_z": actor.latent_dim,
        "backbone_dims": list(actor.backbone.dims),
        "head_dims": list(actor.head.dims),
        "critic_dims": list(critic.net.dims),
        "backbone_frozen": bool(actor.backbone_frozen),
    }
    blocks = dict(actor.params())
    blocks.update(critic.params())
    order = _actor_block_names(actor) + [
        f"critic.{k}{i}" for i in range(len(critic.net.weights)) for k in ("W", "b")
    ]
    payload = bytearray()
    payload += CHECKPOINT_MAGIC
    header_bytes = json.dumps(header, separators=(",", ":")).encode()
    payload += struct.pack("<I", len(header_bytes))
    payload += header_bytes
    for name in order:
        data = np.ascontiguousarray(blocks[name], dtype="<f8").tobytes()
        name_bytes = name.encode()
        payload += struct.pack("<H", len(name_bytes))
        payload += name_bytes
        payload += struct.pack("<Q", len(data))
        payload += data
    with open(path, "wb") as fh:
        fh.write(bytes(payload))


class CheckpointError(ValueError):
    """Raised when a checkpoint file is malformed or incompatible."""


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint; returns (actor, critic).

    Fails atomically: any parse or shape error raises CheckpointError before
    any network object is built.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    view = memoryview(raw)
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError(f"truncated checkpoint: expected {what}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (header_len,) = struct.unpack("<I", take(4, "header length"))
    try:
        header = json.loads(bytes(take(header_len, "header")).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('format_version')!r}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    blocks = {}
    while pos < len(view):
        (name_len,) = struct.unpack("<H", take(2, "block name length"))
        name = bytes(take(name_len, "block name")).decode()
        (data_len,) = struct.unpack("<Q", take(8, f"length of block {name!r}"))
        data = take(data_len, f"data of block {name!r}")
        blocks[name] = np.frombuffer(data, dtype="<f8").astype(np.float64)

    def shaped(name, shape):
        if name not in blocks:
            raise CheckpointError(f"missing parameter block {name!r}")
        flat = blocks[name]
        if flat.size != int(np.prod(shape)):
            raise CheckpointError(
                f"block {name!r} has {flat.size} values, expected shape {shape}"
            )
        return np.ascontiguousarray(flat.reshape(shape))

    def read_net(prefix, dims):
        ws, bs = [], []
        for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
            ws.append(shaped(f"{prefix}.W{i}", (n_in, n_out)))
            bs.append(shaped(f"{prefix}.b{i}", (n_out,)))
        return MlpNet.from_arrays(dims, ws, bs)

    backbone = read_net("backbone", header["backbone_dims"])
    head = read_net("head", header["head_dims"])
    critic_net = read_net("critic", header["critic_dims"])
    log_sigma = shaped("log_sigma", (header["d_a"],))
    if header["head_dims"][0] != header["d_z"] + header["d_s"]:
        raise CheckpointError("head input dim != latent dim + obs dim")

    actor = ResidualActor.__new__(ResidualActor)
    actor.obs_dim = int(header["d_s"])
    actor.act_dim = int(header["d_a"])
    actor.latent_dim = int(header["d_z"])
    actor.backbone = backbone
    actor.head = head
    actor.log_sigma = log_sigma
    actor.backbone_frozen = bool(header["backbone_frozen"])

    critic = ValueNet.__new__(ValueNet)
    critic.obs_dim = int(header["critic_dims"][0])
    critic.net = critic_net
    return actor, critic
