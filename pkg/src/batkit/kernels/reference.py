"""Numpy reference implementations of the hot kernels.

This is the always-available backend. The compiled backend in ``_fast.pyx``
implements the same signatures with fused single-pass loops; both must agree
to float rounding (see tests/test_kernels.py). Every function preserves the
dtype of its float inputs and is deterministic.
"""

from __future__ import annotations

import numpy as np

NAME = "reference"

# tanh-form GeLU constants
_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu_fwd(x):
    c = x.dtype.type(_GELU_C)
    a = x.dtype.type(_GELU_A)
    half = x.dtype.type(0.5)
    return half * x * (1.0 + np.tanh(c * (x + a * x * x * x)))


def gelu_bwd(x, gy):
    c = x.dtype.type(_GELU_C)
    a = x.dtype.type(_GELU_A)
    half = x.dtype.type(0.5)
    t = np.tanh(c * (x + a * x * x * x))
    du = c * (1.0 + 3.0 * a * x * x)
    return gy * (half * (1.0 + t) + half * x * (1.0 - t * t) * du)


def layernorm_fwd(x, gain, bias, eps):
    """Row-wise layer normalization. x is (N, D); gain/bias are (D,)."""
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    rstd = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = (x - mean[:, None]) * rstd[:, None]
    y = xhat * gain + bias
    return y.astype(x.dtype, copy=False), mean, rstd


def layernorm_bwd(x, gain, mean, rstd, gy):
    xhat = (x - mean[:, None]) * rstd[:, None]
    gxhat = gy * gain
    m1 = gxhat.mean(axis=1, keepdims=True)
    m2 = (gxhat * xhat).mean(axis=1, keepdims=True)
    gx = rstd[:, None] * (gxhat - m1 - xhat * m2)
    ggain = (gy * xhat).sum(axis=0)
    gbias = gy.sum(axis=0)
    return gx.astype(x.dtype, copy=False), ggain, gbias


def softmax_fwd(x):
    """Row-wise softmax with max subtraction. x is (N, V)."""
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(p, gy):
    dot = (p * gy).sum(axis=1, keepdims=True)
    return p * (gy - dot)


def xent_fwd(logits, targets):
    """Per-row softmax cross-entropy from logits.

    Returns (nll, probs); probs are cached for the backward pass.
    """
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    denom = e.sum(axis=1)
    probs = e / denom[:, None]
    rows = np.arange(logits.shape[0])
    nll = np.log(denom) - z[rows, targets]
    return nll.astype(logits.dtype, copy=False), probs


def xent_bwd(probs, targets, gnll):
    glogits = probs * gnll[:, None]
    rows = np.arange(probs.shape[0])
    glogits[rows, targets] -= gnll
    return glogits


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    """Fused Adam update, in place on p, m and v. t is the 1-based step."""
    dt = p.dtype.type
    b1, b2 = dt(beta1), dt(beta2)
    m *= b1
    m += (dt(1) - b1) * g
    v *= b2
    v += (dt(1) - b2) * g * g
    mhat = m / dt(1.0 - beta1**t)
    vhat = v / dt(1.0 - beta2**t)
    p -= dt(lr) * mhat / (np.sqrt(vhat) + dt(eps))
