"""Shared oracles and gradient-check helpers."""

import numpy as np
import pytest


def numerical_grad(f, arrays, h=1e-5):
    """Central finite differences of scalar f() w.r.t. each array in place."""
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = f()
            flat[i] = old - h
            fm = f()
            flat[i] = old
            gf[i] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-7, label=""):
    for name in numeric:
        a = np.asarray(analytic[name])
        n = numeric[name]
        np.testing.assert_allclose(
            a, n, rtol=rtol, atol=atol,
            err_msg=f"gradient mismatch in {label}{name}",
        )


def min_abs_preactivation(net, x):
    """Smallest |pre-activation| over hidden layers; guards ReLU-kink flakes
    in finite-difference checks."""
    h = np.atleast_2d(x)
    smallest = np.inf
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        if i < len(net.weights) - 1:
            smallest = min(smallest, float(np.min(np.abs(z))))
            h = np.maximum(z, 0.0)
        else:
            h = z
    return smallest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
