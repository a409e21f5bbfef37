"""Dense tensors with reverse-mode automatic differentiation.

The design is an explicit tape: every operation appends a :class:`Node`
holding the op name, input node ids, op constants and the computed value.
Gradients are produced by a single reverse sweep (:func:`backward`) and a
tape can be re-executed from its leaves (:meth:`Tape.replay`), which must
reproduce every recorded value bit for bit - that property is what makes
training runs replayable.

The op set is deliberately small: matmul, elementwise arithmetic, GeLU,
layernorm, embedding gather, softmax (+ fused cross-entropy), shape moves
and reductions, plus relu/exp/log/min/max/clip which the hinge and clipped
surrogate objectives need. Hot elementwise/row kernels dispatch through
``batkit.kernels`` so the compiled backend can be swapped in.

Numerical-stability conventions (relied on by tests):

* softmax and cross-entropy subtract the row max before exponentiation;
* ``log`` clamps its input at ``LOG_FLOOR`` (1e-12);
* ``relu``/``minimum``/``maximum`` route the gradient to their second
  operand on exact ties, and ``clip`` passes gradient only on the strict
  interior, so kink points have a deterministic subgradient of zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ContractViolation, OracleInvalid
from .precision import active_dtype

LOG_FLOOR = 1e-12
LN_EPS = 1e-5

_FORWARD: dict[str, Callable] = {}
_VJP: dict[str, Callable] = {}


def _op(name):
    def deco(fn):
        _FORWARD[name] = fn
        return fn

    return deco


def _vjp(name):
    def deco(fn):
        _VJP[name] = fn
        return fn

    return deco


@dataclass
class Node:
    """One recorded operation (or leaf) on a tape."""

    op: str
    inputs: tuple[int, ...]
    aux: tuple
    value: np.ndarray
    trainable: bool = False
    name: str | None = None
    cache: tuple | None = None


class Tape:
    """Append-only record of operations, confined to one logical thread."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.mode = "recording"

    def _append(self, node: Node) -> int:
        if self.mode != "recording":
            raise ContractViolation("tape is frozen; no further recording")
        self.nodes.append(node)
        return len(self.nodes) - 1

    def leaf(self, value, trainable: bool = False, name: str | None = None) -> "Tensor":
        arr = np.asarray(value)
        if arr.dtype.kind != "f":
            arr = arr.astype(active_dtype())
        if any(d < 1 for d in arr.shape):
            raise ContractViolation(f"zero-sized dimension in shape {arr.shape}")
        nid = self._append(Node("leaf", (), (), arr, trainable=trainable, name=name))
        return Tensor(arr, self, nid)

    def record(self, op: str, inputs: tuple[int, ...], aux: tuple,
               value: np.ndarray, cache: tuple | None = None) -> "Tensor":
        nid = self._append(Node(op, inputs, aux, value, cache=cache))
        return Tensor(value, self, nid)

    def freeze(self) -> None:
        self.mode = "frozen"

    def replay(self) -> list[np.ndarray]:
        """Recompute every node from the leaves; identical inputs reproduce
        identical values bitwise (same float width)."""
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.op == "leaf":
                values.append(node.value)
            else:
                out = _FORWARD[node.op]([values[i] for i in node.inputs], node.aux)
                values.append(out[0] if isinstance(out, tuple) else out)
        return values

    def named_gradients(self, grads: Mapping[int, np.ndarray]) -> dict[str, np.ndarray]:
        """Project a backward() result onto the named trainable leaves."""
        out = {}
        for nid, node in enumerate(self.nodes):
            if node.op == "leaf" and node.trainable and node.name is not None:
                out[node.name] = grads[nid]
        return out


class Tensor:
    """Immutable dense float array, optionally attached to a tape node.

    Tensors without a tape are constants; operations on them execute
    eagerly without recording, which is the inference fast path.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: Tape | None = None, node_id: int | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(active_dtype())
        self.data = arr
        self.tape = tape
        self.node_id = node_id

    # -- introspection ----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        tag = "" if self.tape is None else f" node={self.node_id}"
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{tag})"

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_operand(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)


# --------------------------------------------------------------------------
# recording helpers


def _as_operand(x, like: Tensor) -> Tensor:
    """Coerce x to a Tensor usable alongside `like` (same tape if any)."""
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=like.data.dtype)
    if like.tape is not None:
        return like.tape.leaf(arr, trainable=False)
    return Tensor(arr)


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise ContractViolation("operands recorded on different tapes")
    return tape


def _apply(op: str, operands: Sequence[Tensor], aux: tuple = ()) -> Tensor:
    tape = _tape_of(*operands)
    out = _FORWARD[op]([t.data for t in operands], aux)
    value, cache = (out if isinstance(out, tuple) else (out, None))
    if tape is None:
        return Tensor(value)
    # Constants must become leaves so the tape replays standalone.
    ids = []
    for t in operands:
        if t.tape is None:
            ids.append(tape.leaf(t.data).node_id)
        else:
            ids.append(t.node_id)
    return tape.record(op, tuple(ids), aux, value, cache=cache)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --------------------------------------------------------------------------
# ops: elementwise arithmetic


@_op("add")
def _add_fwd(vals, aux):
    return vals[0] + vals[1]


@_vjp("add")
def _add_bwd(vals, aux, value, cache, g):
    return _unbroadcast(g, vals[0].shape), _unbroadcast(g, vals[1].shape)


@_op("sub")
def _sub_fwd(vals, aux):
    return vals[0] - vals[1]


@_vjp("sub")
def _sub_bwd(vals, aux, value, cache, g):
    return _unbroadcast(g, vals[0].shape), _unbroadcast(-g, vals[1].shape)


@_op("mul")
def _mul_fwd(vals, aux):
    return vals[0] * vals[1]


@_vjp("mul")
def _mul_bwd(vals, aux, value, cache, g):
    return (_unbroadcast(g * vals[1], vals[0].shape),
            _unbroadcast(g * vals[0], vals[1].shape))


@_op("neg")
def _neg_fwd(vals, aux):
    return -vals[0]


@_vjp("neg")
def _neg_bwd(vals, aux, value, cache, g):
    return (-g,)


@_op("addc")
def _addc_fwd(vals, aux):
    return vals[0] + vals[0].dtype.type(aux[0])


@_vjp("addc")
def _addc_bwd(vals, aux, value, cache, g):
    return (g,)


@_op("mulc")
def _mulc_fwd(vals, aux):
    return vals[0] * vals[0].dtype.type(aux[0])


@_vjp("mulc")
def _mulc_bwd(vals, aux, value, cache, g):
    return (g * vals[0].dtype.type(aux[0]),)


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return _apply("addc", [a], (float(b),))
    return _apply("add", [a, _as_operand(b, a)])


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return _apply("addc", [a], (-float(b),))
    return _apply("sub", [a, _as_operand(b, a)])


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return _apply("mulc", [a], (float(b),))
    return _apply("mul", [a, _as_operand(b, a)])


def neg(a: Tensor) -> Tensor:
    return _apply("neg", [a])


# --------------------------------------------------------------------------
# ops: matmul


@_op("matmul")
def _matmul_fwd(vals, aux):
    return vals[0] @ vals[1]


@_vjp("matmul")
def _matmul_bwd(vals, aux, value, cache, g):
    a, b = vals
    ga = _unbroadcast(g @ b.swapaxes(-1, -2), a.shape)
    gb = _unbroadcast(a.swapaxes(-1, -2) @ g, b.shape)
    return ga, gb


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ContractViolation("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ContractViolation(f"matmul shape mismatch {a.shape} @ {b.shape}")
    return _apply("matmul", [a, b])


# --------------------------------------------------------------------------
# ops: nonlinearities


@_op("gelu")
def _gelu_fwd(vals, aux):
    return kernels.active.gelu_fwd(vals[0])


@_vjp("gelu")
def _gelu_bwd(vals, aux, value, cache, g):
    return (kernels.active.gelu_bwd(vals[0], g),)


def gelu(a: Tensor) -> Tensor:
    return _apply("gelu", [a])


@_op("relu")
def _relu_fwd(vals, aux):
    return np.maximum(vals[0], 0)


@_vjp("relu")
def _relu_bwd(vals, aux, value, cache, g):
    # subgradient at 0 is 0
    return (g * (vals[0] > 0),)


def relu(a: Tensor) -> Tensor:
    return _apply("relu", [a])


@_op("exp")
def _exp_fwd(vals, aux):
    return np.exp(vals[0])


@_vjp("exp")
def _exp_bwd(vals, aux, value, cache, g):
    return (g * value,)


def exp(a: Tensor) -> Tensor:
    return _apply("exp", [a])


@_op("log")
def _log_fwd(vals, aux):
    return np.log(np.maximum(vals[0], vals[0].dtype.type(LOG_FLOOR)))


@_vjp("log")
def _log_bwd(vals, aux, value, cache, g):
    clamped = np.maximum(vals[0], vals[0].dtype.type(LOG_FLOOR))
    return (g / clamped,)


def log(a: Tensor) -> Tensor:
    return _apply("log", [a])


@_op("minimum")
def _minimum_fwd(vals, aux):
    return np.minimum(vals[0], vals[1])


@_vjp("minimum")
def _minimum_bwd(vals, aux, value, cache, g):
    a, b = vals
    take_a = a < b  # ties route to b
    ga = _unbroadcast(g * take_a, a.shape)
    gb = _unbroadcast(g * ~take_a, b.shape)
    return ga, gb


def minimum(a: Tensor, b) -> Tensor:
    return _apply("minimum", [a, _as_operand(b, a)])


@_op("maximum")
def _maximum_fwd(vals, aux):
    return np.maximum(vals[0], vals[1])


@_vjp("maximum")
def _maximum_bwd(vals, aux, value, cache, g):
    a, b = vals
    take_a = a > b  # ties route to b
    ga = _unbroadcast(g * take_a, a.shape)
    gb = _unbroadcast(g * ~take_a, b.shape)
    return ga, gb


def maximum(a: Tensor, b) -> Tensor:
    return _apply("maximum", [a, _as_operand(b, a)])


@_op("clip")
def _clip_fwd(vals, aux):
    lo, hi = aux
    return np.clip(vals[0], lo, hi)


@_vjp("clip")
def _clip_bwd(vals, aux, value, cache, g):
    lo, hi = aux
    inside = (vals[0] > lo) & (vals[0] < hi)  # strict interior
    return (g * inside,)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    if not lo <= hi:
        raise ContractViolation(f"clip bounds out of order: {lo} > {hi}")
    return _apply("clip", [a], (float(lo), float(hi)))


# --------------------------------------------------------------------------
# ops: shape moves and reductions


@_op("reshape")
def _reshape_fwd(vals, aux):
    return vals[0].reshape(aux[0])


@_vjp("reshape")
def _reshape_bwd(vals, aux, value, cache, g):
    return (g.reshape(vals[0].shape),)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _apply("reshape", [a], (tuple(shape),))


@_op("transpose")
def _transpose_fwd(vals, aux):
    return vals[0].transpose(aux[0])


@_vjp("transpose")
def _transpose_bwd(vals, aux, value, cache, g):
    return (g.transpose(np.argsort(aux[0])),)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    return _apply("transpose", [a], (tuple(axes),))


@_op("sum")
def _sum_fwd(vals, aux):
    axis, keepdims = aux
    return np.sum(vals[0], axis=axis, keepdims=keepdims)


def _spread(g, in_shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, in_shape).copy()
    if not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = tuple(a % len(in_shape) for a in axes)
        shape = tuple(1 if i in axes else s for i, s in enumerate(in_shape))
        g = g.reshape(shape)
    return np.broadcast_to(g, in_shape).copy()


@_vjp("sum")
def _sum_bwd(vals, aux, value, cache, g):
    axis, keepdims = aux
    return (_spread(g, vals[0].shape, axis, keepdims),)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return _apply("sum", [a], (axis, keepdims))


@_op("mean")
def _mean_fwd(vals, aux):
    axis, keepdims = aux
    return np.mean(vals[0], axis=axis, keepdims=keepdims)


@_vjp("mean")
def _mean_bwd(vals, aux, value, cache, g):
    axis, keepdims = aux
    x = vals[0]
    count = x.size if axis is None else np.prod(
        [x.shape[a % x.ndim] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return (_spread(g, x.shape, axis, keepdims) / x.dtype.type(count),)


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return _apply("mean", [a], (axis, keepdims))


# --------------------------------------------------------------------------
# ops: fused row kernels


def _rows(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.reshape(-1, x.shape[-1]))


@_op("softmax")
def _softmax_fwd(vals, aux):
    x = vals[0]
    return kernels.active.softmax_fwd(_rows(x)).reshape(x.shape)


@_vjp("softmax")
def _softmax_bwd(vals, aux, value, cache, g):
    p = _rows(value)
    gx = kernels.active.softmax_bwd(p, _rows(g))
    return (gx.reshape(vals[0].shape),)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    return _apply("softmax", [a])


@_op("cross_entropy")
def _xent_fwd(vals, aux):
    x = vals[0]
    nll, probs = kernels.active.xent_fwd(_rows(x), aux[0])
    return nll.reshape(x.shape[:-1]), (probs,)


@_vjp("cross_entropy")
def _xent_bwd(vals, aux, value, cache, g):
    x = vals[0]
    if cache is not None:
        probs = cache[0]
    else:
        probs = kernels.active.softmax_fwd(_rows(x))
    gx = kernels.active.xent_bwd(probs, aux[0], _rows(g.reshape(-1, 1))[:, 0])
    return (gx.reshape(x.shape),)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Per-position negative log-likelihood of integer targets.

    logits has shape (..., V); targets is an integer array matching the
    leading shape. Returns a tensor of per-position NLL values.
    """
    ids = np.ascontiguousarray(np.asarray(targets, dtype=np.int64).reshape(-1))
    lead = logits.shape[:-1]
    if int(np.prod(lead, dtype=np.int64)) != ids.size:
        raise ContractViolation(
            f"targets shape {np.asarray(targets).shape} does not match logits {logits.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= logits.shape[-1]):
        raise ContractViolation("target id outside the vocabulary axis")
    return _apply("cross_entropy", [logits], (ids,))


@_op("layernorm")
def _ln_fwd(vals, aux):
    x, gain, bias = vals
    y, mean, rstd = kernels.active.layernorm_fwd(_rows(x), gain, bias, aux[0])
    return y.reshape(x.shape), (mean, rstd)


@_vjp("layernorm")
def _ln_bwd(vals, aux, value, cache, g):
    x, gain, bias = vals
    rows = _rows(x)
    if cache is not None:
        mean, rstd = cache
    else:
        mean = rows.mean(axis=1)
        rstd = 1.0 / np.sqrt(rows.var(axis=1) + rows.dtype.type(aux[0]))
    gx, ggain, gbias = kernels.active.layernorm_bwd(rows, gain, mean, rstd, _rows(g))
    return gx.reshape(x.shape), ggain, gbias


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale."""
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise ContractViolation("layernorm gain/bias must match the last axis")
    return _apply("layernorm", [x, gain, bias], (float(eps),))


@_op("gather_rows")
def _gather_fwd(vals, aux):
    return vals[0][aux[0]]


@_vjp("gather_rows")
def _gather_bwd(vals, aux, value, cache, g):
    table = vals[0]
    grad = np.zeros_like(table)
    ids = aux[0]
    np.add.at(grad, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
    return (grad,)


def gather_rows(table: Tensor, ids) -> Tensor:
    """Row lookup table[ids]; the embedding (and slicing) primitive."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ContractViolation("gather index outside table")
    return _apply("gather_rows", [table], (np.ascontiguousarray(idx),))


# --------------------------------------------------------------------------
# backward and the finite-difference oracle


def backward(loss: Tensor) -> dict[int, np.ndarray]:
    """Reverse sweep from a scalar loss.

    Returns a map from node id to gradient for every trainable leaf on the
    tape (zeros for trainable leaves the loss does not depend on). The
    accumulation order is fixed by node id, so repeated calls are bitwise
    identical.
    """
    if loss.tape is None or loss.node_id is None:
        raise ContractViolation("loss was not recorded on a tape")
    if loss.size != 1:
        raise ContractViolation(f"loss must be scalar, got shape {loss.shape}")
    tape = loss.tape
    if tape.mode != "recording":
        raise ContractViolation("cannot run backward on a frozen tape")

    nodes = tape.nodes
    grads: dict[int, np.ndarray] = {
        loss.node_id: np.ones_like(nodes[loss.node_id].value)
    }
    for nid in range(loss.node_id, -1, -1):
        g = grads.get(nid)
        if g is None:
            continue
        node = nodes[nid]
        if not node.inputs:
            continue
        vals = [nodes[i].value for i in node.inputs]
        partials = _VJP[node.op](vals, node.aux, node.value, node.cache, g)
        for iid, gi in zip(node.inputs, partials):
            if gi is None:
                continue
            acc = grads.get(iid)
            grads[iid] = gi if acc is None else acc + gi

    return {
        nid: grads.get(nid, np.zeros_like(node.value))
        for nid, node in enumerate(nodes)
        if node.op == "leaf" and node.trainable
    }


def grad_by_name(loss: Tensor) -> dict[str, np.ndarray]:
    """backward() projected onto named trainable leaves."""
    return loss.tape.named_gradients(backward(loss))


def finite_diff_check(
    f: Callable[[Mapping[str, np.ndarray]], Tensor],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    *,
    max_coords_per_tensor: int | None = None,
    sample_seed: int = 0,
    extended_oracle: bool | None = None,
) -> float:
    """Compare backward() against central finite differences.

    ``f`` receives a dict of float arrays and must return a scalar Tensor
    whose tape carries trainable leaves named after the dict keys. Runs only
    in 64-bit mode (the analytic side is evaluated in float64). Returns the
    max elementwise relative error, with denominator
    max(|analytic|, |numeric|, 1e-8).

    The numeric side is evaluated in the platform's extended precision when
    available (x86 80-bit long double), because double-precision central
    differences bottom out near 1e-11 absolute error on O(1) losses, which
    the 1e-8 denominator floor cannot absorb for small-magnitude gradient
    coordinates. ``extended_oracle=False`` forces plain float64; the default
    auto-detects. Extended evaluation runs on the reference kernel backend
    (the compiled kernels are float32/float64 only).

    ``max_coords_per_tensor`` limits the probed coordinates per tensor
    (deterministically subsampled) to bound runtime on larger models; the
    default probes every coordinate.
    """
    if active_dtype() != np.float64:
        raise ContractViolation("finite_diff_check requires the 64-bit mode")
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    if extended_oracle is None:
        extended_oracle = np.dtype(np.longdouble).itemsize > 8
    oracle_dtype = np.longdouble if extended_oracle else np.float64

    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    first = f(base)
    second = f(base)
    if first.data.tobytes() != second.data.tobytes():
        raise OracleInvalid("f is not deterministic: two evaluations differ")

    analytic = grad_by_name(first)
    missing = set(base) - set(analytic)
    if missing:
        raise ContractViolation(
            f"f did not register trainable leaves for: {sorted(missing)}")

    probe = {k: v.astype(oracle_dtype) for k, v in base.items()}
    eps_o = oracle_dtype(eps)
    previous_backend = None
    if extended_oracle:
        previous_backend = kernels.use("reference")

    def evaluate() -> np.ndarray:
        out = f(probe)
        return out.data.reshape(-1)[0]

    try:
        rng = np.random.default_rng(sample_seed)
        worst = 0.0
        for name in sorted(base):
            flat = probe[name].reshape(-1)
            n = flat.size
            if max_coords_per_tensor is not None and n > max_coords_per_tensor:
                coords = np.sort(rng.choice(n, size=max_coords_per_tensor,
                                            replace=False))
            else:
                coords = np.arange(n)
            ga = analytic[name].reshape(-1)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + eps_o
                hi = evaluate()
                flat[i] = orig - eps_o
                lo = evaluate()
                flat[i] = orig
                numeric = float((hi - lo) / (2 * eps_o))
                denom = max(abs(ga[i]), abs(numeric), 1e-8)
                worst = max(worst, abs(ga[i] - numeric) / denom)
    finally:
        if previous_backend is not None:
            kernels.use(previous_backend.NAME)
    return worst
