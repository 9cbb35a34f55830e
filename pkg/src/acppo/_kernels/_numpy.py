"""Pure-numpy reference implementation of the hot kernels.

This is the fallback backend: always available, used whenever the compiled
extension is missing or disabled. The compiled backend in ``_native.pyx``
implements the same four functions with identical semantics; parity between
the two is covered by tests/test_kernels.py.

Conventions shared by both backends:
  - all arrays are float64; weight matrices have shape (n_in, n_out)
  - batches are row-major, shape (batch, dim)
  - hidden layers use ReLU, the output layer is linear
"""

import numpy as np

NAME = "numpy"


def discount_scan(x, decay):
    """Backward recursion y[t] = x[t] + decay * y[t+1], y[-1] = x[-1]."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    acc = 0.0
    for t in range(x.shape[0] - 1, -1, -1):
        acc = x[t] + decay * acc
        out[t] = acc
    return out


def mlp_forward(weights, biases, x):
    """Forward pass returning all activations [x, h1, ..., output]."""
    acts = [np.ascontiguousarray(x, dtype=np.float64)]
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = acts[-1] @ w + b
        if i != last:
            np.maximum(h, 0.0, out=h)
        acts.append(h)
    return acts


def mlp_backward(weights, acts, d_out):
    """Reverse-mode gradients of mlp_forward.

    Returns (weight grads, bias grads, input grad). ``acts`` is the list
    returned by mlp_forward for the same weights and input.
    """
    d_ws = [None] * len(weights)
    d_bs = [None] * len(weights)
    delta = np.ascontiguousarray(d_out, dtype=np.float64)
    for i in range(len(weights) - 1, -1, -1):
        d_ws[i] = acts[i].T @ delta
        d_bs[i] = delta.sum(axis=0)
        delta = delta @ weights[i].T
        if i > 0:
            delta = delta * (acts[i] > 0.0)
    return d_ws, d_bs, delta


def adam_step(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One Adam update with bias correction, in place on flat arrays.

    ``t`` is the 1-based step count after this update.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
