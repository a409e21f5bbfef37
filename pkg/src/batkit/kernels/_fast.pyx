# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused single-pass kernels (compiled backend).

Same contracts as ``reference.py``; the win is one pass over memory and no
intermediate temporaries. Row kernels expect C-contiguous 2-D inputs; the
Python wrappers below normalize layout and allocate outputs.
"""

import numpy as np

from libc.math cimport exp, expf, log, logf, sqrt, sqrtf, tanh, tanhf

NAME = "compiled"

ctypedef fused real:
    float
    double

cdef double GELU_C = 0.7978845608028654
cdef double GELU_A = 0.044715


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    else:
        return tanh(x)


cdef inline real _exp(real x) noexcept nogil:
    if real is float:
        return expf(x)
    else:
        return exp(x)


cdef inline real _log(real x) noexcept nogil:
    if real is float:
        return logf(x)
    else:
        return log(x)


cdef inline real _sqrt(real x) noexcept nogil:
    if real is float:
        return sqrtf(x)
    else:
        return sqrt(x)


def _contig(a):
    return np.ascontiguousarray(a)


# ----------------------------------------------------------------- GeLU

cdef void _gelu_fwd(const real[::1] x, real[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n = x.shape[0]
    cdef real c = <real> GELU_C
    cdef real a = <real> GELU_A
    cdef real v
    for i in range(n):
        v = x[i]
        out[i] = <real> 0.5 * v * (<real> 1.0 + _tanh(c * (v + a * v * v * v)))


cdef void _gelu_bwd(const real[::1] x, const real[::1] gy, real[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n = x.shape[0]
    cdef real c = <real> GELU_C
    cdef real a = <real> GELU_A
    cdef real v, t, du
    for i in range(n):
        v = x[i]
        t = _tanh(c * (v + a * v * v * v))
        du = c * (<real> 1.0 + <real> 3.0 * a * v * v)
        out[i] = gy[i] * (<real> 0.5 * (<real> 1.0 + t)
                          + <real> 0.5 * v * (<real> 1.0 - t * t) * du)


def _gelu_fwd_mv(const real[::1] x, real[::1] out):
    with nogil:
        _gelu_fwd(x, out)


def _gelu_bwd_mv(const real[::1] x, const real[::1] gy, real[::1] out):
    with nogil:
        _gelu_bwd(x, gy, out)


def gelu_fwd(x):
    x = _contig(x)
    out = np.empty_like(x)
    _gelu_fwd_mv(x.ravel(), out.ravel())
    return out


def gelu_bwd(x, gy):
    x = _contig(x)
    gy = _contig(gy)
    out = np.empty_like(x)
    _gelu_bwd_mv(x.ravel(), gy.ravel(), out.ravel())
    return out


# ------------------------------------------------------------ layernorm

cdef void _ln_fwd(const real[:, ::1] x, const real[::1] gain, const real[::1] bias,
                  double eps, real[:, ::1] y, real[::1] mean, real[::1] rstd) noexcept nogil:
    cdef Py_ssize_t i, j, n = x.shape[0], d = x.shape[1]
    cdef real mu, var, rs, diff
    for i in range(n):
        mu = 0
        for j in range(d):
            mu += x[i, j]
        mu /= <real> d
        var = 0
        for j in range(d):
            diff = x[i, j] - mu
            var += diff * diff
        var /= <real> d
        rs = <real> 1.0 / _sqrt(var + <real> eps)
        mean[i] = mu
        rstd[i] = rs
        for j in range(d):
            y[i, j] = (x[i, j] - mu) * rs * gain[j] + bias[j]


cdef void _ln_bwd(const real[:, ::1] x, const real[::1] gain, const real[::1] mean,
                  const real[::1] rstd, const real[:, ::1] gy,
                  real[:, ::1] gx, real[::1] ggain, real[::1] gbias) noexcept nogil:
    cdef Py_ssize_t i, j, n = x.shape[0], d = x.shape[1]
    cdef real m1, m2, xh, gxh
    for j in range(d):
        ggain[j] = 0
        gbias[j] = 0
    for i in range(n):
        m1 = 0
        m2 = 0
        for j in range(d):
            xh = (x[i, j] - mean[i]) * rstd[i]
            gxh = gy[i, j] * gain[j]
            m1 += gxh
            m2 += gxh * xh
            ggain[j] += gy[i, j] * xh
            gbias[j] += gy[i, j]
        m1 /= <real> d
        m2 /= <real> d
        for j in range(d):
            xh = (x[i, j] - mean[i]) * rstd[i]
            gxh = gy[i, j] * gain[j]
            gx[i, j] = rstd[i] * (gxh - m1 - xh * m2)


def _ln_fwd_mv(const real[:, ::1] x, const real[::1] gain, const real[::1] bias,
               double eps, real[:, ::1] y, real[::1] mean, real[::1] rstd):
    with nogil:
        _ln_fwd(x, gain, bias, eps, y, mean, rstd)


def _ln_bwd_mv(const real[:, ::1] x, const real[::1] gain, const real[::1] mean,
               const real[::1] rstd, const real[:, ::1] gy,
               real[:, ::1] gx, real[::1] ggain, real[::1] gbias):
    with nogil:
        _ln_bwd(x, gain, mean, rstd, gy, gx, ggain, gbias)


def layernorm_fwd(x, gain, bias, eps):
    x = _contig(x)
    gain = _contig(gain)
    bias = _contig(bias)
    y = np.empty_like(x)
    mean = np.empty(x.shape[0], dtype=x.dtype)
    rstd = np.empty(x.shape[0], dtype=x.dtype)
    _ln_fwd_mv(x, gain, bias, float(eps), y, mean, rstd)
    return y, mean, rstd


def layernorm_bwd(x, gain, mean, rstd, gy):
    x = _contig(x)
    gy = _contig(gy)
    gain = _contig(gain)
    mean = _contig(mean)
    rstd = _contig(rstd)
    gx = np.empty_like(x)
    ggain = np.empty_like(gain)
    gbias = np.empty_like(gain)
    _ln_bwd_mv(x, gain, mean, rstd, gy, gx, ggain, gbias)
    return gx, ggain, gbias


# -------------------------------------------------------------- softmax

cdef void _softmax_fwd(const real[:, ::1] x, real[:, ::1] p) noexcept nogil:
    cdef Py_ssize_t i, j, n = x.shape[0], v = x.shape[1]
    cdef real mx, s
    for i in range(n):
        mx = x[i, 0]
        for j in range(1, v):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0
        for j in range(v):
            p[i, j] = _exp(x[i, j] - mx)
            s += p[i, j]
        for j in range(v):
            p[i, j] /= s


cdef void _softmax_bwd(const real[:, ::1] p, const real[:, ::1] gy, real[:, ::1] gx) noexcept nogil:
    cdef Py_ssize_t i, j, n = p.shape[0], v = p.shape[1]
    cdef real dot
    for i in range(n):
        dot = 0
        for j in range(v):
            dot += p[i, j] * gy[i, j]
        for j in range(v):
            gx[i, j] = p[i, j] * (gy[i, j] - dot)


def _softmax_fwd_mv(const real[:, ::1] x, real[:, ::1] p):
    with nogil:
        _softmax_fwd(x, p)


def _softmax_bwd_mv(const real[:, ::1] p, const real[:, ::1] gy, real[:, ::1] gx):
    with nogil:
        _softmax_bwd(p, gy, gx)


def softmax_fwd(x):
    x = _contig(x)
    p = np.empty_like(x)
    _softmax_fwd_mv(x, p)
    return p


def softmax_bwd(p, gy):
    p = _contig(p)
    gy = _contig(gy)
    gx = np.empty_like(p)
    _softmax_bwd_mv(p, gy, gx)
    return gx


# -------------------------------------------------- softmax cross-entropy

cdef void _xent_fwd(const real[:, ::1] logits, const long long[::1] targets,
                    real[::1] nll, real[:, ::1] probs) noexcept nogil:
    cdef Py_ssize_t i, j, n = logits.shape[0], v = logits.shape[1]
    cdef real mx, s
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, v):
            if logits[i, j] > mx:
                mx = logits[i, j]
        s = 0
        for j in range(v):
            probs[i, j] = _exp(logits[i, j] - mx)
            s += probs[i, j]
        nll[i] = _log(s) - (logits[i, targets[i]] - mx)
        for j in range(v):
            probs[i, j] /= s


cdef void _xent_bwd(const real[:, ::1] probs, const long long[::1] targets,
                    const real[::1] gnll, real[:, ::1] glogits) noexcept nogil:
    cdef Py_ssize_t i, j, n = probs.shape[0], v = probs.shape[1]
    for i in range(n):
        for j in range(v):
            glogits[i, j] = probs[i, j] * gnll[i]
        glogits[i, targets[i]] -= gnll[i]


def _xent_fwd_mv(const real[:, ::1] logits, const long long[::1] targets,
                 real[::1] nll, real[:, ::1] probs):
    with nogil:
        _xent_fwd(logits, targets, nll, probs)


def _xent_bwd_mv(const real[:, ::1] probs, const long long[::1] targets,
                 const real[::1] gnll, real[:, ::1] glogits):
    with nogil:
        _xent_bwd(probs, targets, gnll, glogits)


def xent_fwd(logits, targets):
    logits = _contig(logits)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    nll = np.empty(logits.shape[0], dtype=logits.dtype)
    probs = np.empty_like(logits)
    _xent_fwd_mv(logits, targets, nll, probs)
    return nll, probs


def xent_bwd(probs, targets, gnll):
    probs = _contig(probs)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    gnll = _contig(gnll)
    glogits = np.empty_like(probs)
    _xent_bwd_mv(probs, targets, gnll, glogits)
    return glogits


# ----------------------------------------------------------------- Adam

cdef void _adam(real[::1] p, const real[::1] g, real[::1] m, real[::1] v,
                double c1, double c2, double lr, double beta1, double beta2,
                double eps) noexcept nogil:
    cdef Py_ssize_t i, n = p.shape[0]
    cdef real b1 = <real> beta1, b2 = <real> beta2
    cdef real one = <real> 1.0
    cdef real mhat, vhat
    for i in range(n):
        m[i] = b1 * m[i] + (one - b1) * g[i]
        v[i] = b2 * v[i] + (one - b2) * g[i] * g[i]
        mhat = m[i] / <real> c1
        vhat = v[i] / <real> c2
        p[i] -= <real> lr * mhat / (_sqrt(vhat) + <real> eps)


def _adam_mv(real[::1] p, const real[::1] g, real[::1] m, real[::1] v,
             double c1, double c2, double lr, double beta1, double beta2,
             double eps):
    with nogil:
        _adam(p, g, m, v, c1, c2, lr, beta1, beta2, eps)


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    if not (p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
        raise ValueError("adam_step requires C-contiguous state arrays")
    g = _contig(g)
    _adam_mv(p.ravel(), g.ravel(), m.ravel(), v.ravel(),
             1.0 - beta1**t, 1.0 - beta2**t, lr, beta1, beta2, eps)
