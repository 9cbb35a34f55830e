"""Episode containers and the on-disk dataset format.

A dataset is a list of whole episodes tagged with their origin (expert
demonstrations or policy rollouts). Rollout episodes collected under an
extended step limit keep the full reward trace for return computation but
retain only the first nominal-horizon steps as training rows, so the stored
reward array may be longer than the observation/action arrays.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

DATASET_MAGIC = b"ACPD"
DATASET_VERSION = 1

ORIGIN_EXPERT = "expert"
ORIGIN_ROLLOUT = "rollout"


@dataclass
class Episode:
    """One episode: retained training rows plus the full reward trace."""

    observations: np.ndarray  # (rows, obs_dim)
    actions: np.ndarray  # (rows, act_dim)
    rewards: np.ndarray  # (steps,) with steps >= rows
    terminated: bool
    returns: np.ndarray | None = None  # (rows,) discounted returns, if computed

    def __post_init__(self):
        self.observations = np.ascontiguousarray(self.observations, dtype=np.float64)
        self.actions = np.ascontiguousarray(self.actions, dtype=np.float64)
        self.rewards = np.ascontiguousarray(self.rewards, dtype=np.float64)
        if self.returns is not None:
            self.returns = np.ascontiguousarray(self.returns, dtype=np.float64)
        rows = self.observations.shape[0]
        if self.actions.shape[0] != rows:
            raise ValueError("observations and actions row counts differ")
        if self.rewards.shape[0] < rows:
            raise ValueError("reward trace shorter than retained rows")
        if self.returns is not None and self.returns.shape[0] != rows:
            raise ValueError("returns length != retained rows")

    @property
    def rows(self):
        return self.observations.shape[0]

    @property
    def steps(self):
        return self.rewards.shape[0]


@dataclass
class TransitionDataset:
    """Whole-episode experience with collection metadata."""

    env_id: str
    origin: str
    gamma: float
    tau: float
    episodes: list[Episode] = field(default_factory=list)

    def __post_init__(self):
        if self.origin not in (ORIGIN_EXPERT, ORIGIN_ROLLOUT):
            raise ValueError(f"origin must be expert or rollout, got {self.origin!r}")

    @property
    def total_steps(self):
        """Environment steps consumed collecting this dataset."""
        return sum(ep.steps for ep in self.episodes)

    @property
    def total_rows(self):
        """Training rows (may be fewer than steps under extended limits)."""
        return sum(ep.rows for ep in self.episodes)

    def flat_rows(self):
        """Stacked (observations, actions, returns-or-None) across episodes."""
        if not self.episodes:
            raise ValueError("dataset is empty")
        obs = np.concatenate([ep.observations for ep in self.episodes])
        acts = np.concatenate([ep.actions for ep in self.episodes])
        if all(ep.returns is not None for ep in self.episodes):
            rets = np.concatenate([ep.returns for ep in self.episodes])
        else:
            rets = None
        return obs, acts, rets


class DatasetError(ValueError):
    """Raised when a dataset file is malformed."""


def save_dataset(dataset, path):
    """Write a dataset to its columnar binary file format."""
    if dataset.episodes:
        obs_dim = dataset.episodes[0].observations.shape[1]
        act_dim = dataset.episodes[0].actions.shape[1]
    else:
        obs_dim = act_dim = 0
    header = {
        "format_version": DATASET_VERSION,
        "env_id": dataset.env_id,
        "origin": dataset.origin,
        "gamma": dataset.gamma,
        "tau": dataset.tau,
        "n_episodes": len(dataset.episodes),
        "obs_dim": obs_dim,
        "act_dim": act_dim,
        "total_steps": dataset.total_steps,
        "total_rows": dataset.total_rows,
    }
    payload = bytearray()
    payload += DATASET_MAGIC
    header_bytes = json.dumps(header, separators=(",", ":")).encode()
    payload += struct.pack("<I", len(header_bytes))
    payload += header_bytes
    for ep in dataset.episodes:
        has_returns = ep.returns is not None
        payload += struct.pack("<IIBB", ep.rows, ep.steps, int(ep.terminated),
                               int(has_returns))
        payload += np.ascontiguousarray(ep.observations, dtype="<f8").tobytes()
        payload += np.ascontiguousarray(ep.actions, dtype="<f8").tobytes()
        payload += np.ascontiguousarray(ep.rewards, dtype="<f8").tobytes()
        if has_returns:
            payload += np.ascontiguousarray(ep.returns, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(payload))


def load_dataset(path):
    """Read a dataset written by save_dataset. Fails atomically."""
    with open(path, "rb") as fh:
        raw = fh.read()
    view = memoryview(raw)
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(view):
            raise DatasetError(f"truncated dataset file: expected {what}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != DATASET_MAGIC:
        raise DatasetError("not a dataset file (bad magic)")
    (header_len,) = struct.unpack("<I", take(4, "header length"))
    try:
        header = json.loads(bytes(take(header_len, "header")).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetError(f"unreadable dataset header: {exc}") from exc
    if header.get("format_version") != DATASET_VERSION:
        raise DatasetError(
            f"unsupported dataset version {header.get('format_version')!r}"
        )
    obs_dim = int(header["obs_dim"])
    act_dim = int(header["act_dim"])

    def floats(count, what):
        return np.frombuffer(take(count * 8, what), dtype="<f8").astype(np.float64)

    episodes = []
    for i in range(int(header["n_episodes"])):
        rows, steps, terminated, has_returns = struct.unpack(
            "<IIBB", take(10, f"episode {i} header")
        )
        obs = floats(rows * obs_dim, f"episode {i} observations").reshape(rows, obs_dim)
        acts = floats(rows * act_dim, f"episode {i} actions").reshape(rows, act_dim)
        rewards = floats(steps, f"episode {i} rewards")
        returns = floats(rows, f"episode {i} returns") if has_returns else None
        episodes.append(Episode(obs, acts, rewards, bool(terminated), returns))
    if pos != len(view):
        raise DatasetError(f"{len(view) - pos} trailing bytes after last episode")
    dataset = TransitionDataset(
        env_id=header["env_id"], origin=header["origin"],
        gamma=float(header["gamma"]), tau=float(header["tau"]), episodes=episodes,
    )
    if dataset.total_steps != int(header["total_steps"]):
        raise DatasetError("step count in header does not match episodes")
    return dataset
