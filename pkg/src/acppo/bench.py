"""Benchmark the compiled kernels against the numpy fallback.

Workloads mirror where training actually spends time: the batch-1 policy
forward on every rollout step, batched forward/backward plus Adam on every
minibatch, and the per-episode discount scans.
"""

import timeit

import numpy as np

from ._kernels import available_backends, get_backend

ACTOR_DIMS = (4, 64, 64, 64)
HEAD_DIMS = (68, 64, 2)
BATCH = 64
SCAN_LEN = 2048
ADAM_SIZE = 4096


def _make_net(dims, rng):
    weights = [np.ascontiguousarray(rng.standard_normal((a, b)) / np.sqrt(a))
               for a, b in zip(dims[:-1], dims[1:])]
    biases = [rng.standard_normal(b) * 0.01 for b in dims[1:]]
    return weights, biases


def _workloads():
    rng = np.random.default_rng(0)
    ws, bs = _make_net(ACTOR_DIMS, rng)
    x1 = np.ascontiguousarray(rng.standard_normal((1, ACTOR_DIMS[0])))
    xb = np.ascontiguousarray(rng.standard_normal((BATCH, ACTOR_DIMS[0])))
    d_out = np.ascontiguousarray(rng.standard_normal((BATCH, ACTOR_DIMS[-1])))
    scan_x = rng.standard_normal(SCAN_LEN)
    p = rng.standard_normal(ADAM_SIZE)
    g = rng.standard_normal(ADAM_SIZE)
    m = np.zeros(ADAM_SIZE)
    v = np.zeros(ADAM_SIZE)

    def forward_1(k):
        return lambda: k.mlp_forward(ws, bs, x1)

    def forward_batch(k):
        return lambda: k.mlp_forward(ws, bs, xb)

    def backward_batch(k):
        acts_by_backend = {}

        def run():
            acts = acts_by_backend.setdefault(id(k), k.mlp_forward(ws, bs, xb))
            return k.mlp_backward(ws, acts, d_out)

        return run

    def scan(k):
        return lambda: k.discount_scan(scan_x, 0.99)

    def adam(k):
        return lambda: k.adam_step(p, g, m, v, 10, 3e-4, 0.9, 0.999, 1e-8)

    return [
        (f"mlp_forward  batch=1   dims={ACTOR_DIMS}", forward_1, 2000),
        (f"mlp_forward  batch={BATCH}  dims={ACTOR_DIMS}", forward_batch, 500),
        (f"mlp_backward batch={BATCH}  dims={ACTOR_DIMS}", backward_batch, 500),
        (f"discount_scan T={SCAN_LEN}", scan, 500),
        (f"adam_step    n={ADAM_SIZE}", adam, 500),
    ]


def run_benchmark(repeats=5, out=print):
    backends = available_backends()
    out(f"backends: {', '.join(backends)}")
    header = f"{'kernel':38} " + " ".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f" {'speedup':>9}"
    out(header)
    out("-" * len(header))
    for name, make_fn, number in _workloads():
        times = {}
        for backend in backends:
            fn = make_fn(get_backend(backend))
            fn()  # warm up / allocate
            best = min(timeit.repeat(fn, number=number, repeat=repeats))
            times[backend] = best / number * 1e6  # microseconds per call
        row = f"{name:38} " + " ".join(f"{times[b]:>10.2f}us" for b in backends)
        if len(backends) > 1:
            row += f" {times['numpy'] / times['native']:>8.1f}x"
        out(row)
    return True
