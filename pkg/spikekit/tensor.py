"""Dense float64 arrays with a small reverse-mode autodiff tape.

A `Tensor` wraps a read-only numpy array. Every public op returns a new
Tensor; if any input requires grad, the result records its parents and a
backward rule, and the tape is simply the graph reachable from the loss.

Broadcasting is deliberately narrow: same-shape operands, or a 0-d tensor /
Python number against an array. Anything else needs an explicit `expand`.
"""

import contextlib
import enum
import logging
import threading

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError

logger = logging.getLogger(__name__)

_state = threading.local()


class OpKind(str, enum.Enum):
    LEAF = "leaf"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    SCALE = "scale"
    NEG = "neg"
    CLAMP = "clamp"
    ROUND = "round_half_even"
    HEAVISIDE = "heaviside"
    MATMUL = "matmul"
    TRANSPOSE = "transpose"
    RESHAPE = "reshape"
    EXPAND = "expand"
    SUM = "sum"
    MEAN = "mean"
    TAKE = "take"
    STACK = "stack"
    SIGMOID = "sigmoid"
    DETACH = "detach"
    CROSS_ENTROPY = "cross_entropy"
    QUANTIZE = "quantize"


def _grad_enabled():
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording any tape nodes (inference, finite differences)."""
    previous = _grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class Tensor:
    """Immutable dense array plus the tape node that produced it."""

    __slots__ = ("data", "requires_grad", "parents", "op", "backward_fn", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite value in tensor {name or ''}".strip())
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.parents = ()
        self.op = OpKind.LEAF
        self.backward_fn = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op.value}{grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def transpose(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def detach(self):
        return detach(self)


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def make_node(data, parents, op, backward_fn):
    """Wrap an op result and, when grad is live, attach it to the tape.

    `backward_fn(g)` must return one gradient (or None) per parent.
    """
    out = Tensor(data, name=op.value)
    out.op = op
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def _is_scalar(t):
    return t.ndim == 0


def _check_binary(a, b, op):
    if a.shape == b.shape or _is_scalar(a) or _is_scalar(b):
        return
    raise DimensionError(f"{op.value}: incompatible shapes {a.shape} and {b.shape}")


def _fit(grad, target):
    """Reduce a broadcast gradient back onto a scalar operand."""
    if target.ndim == 0 and grad.ndim != 0:
        return np.asarray(grad.sum())
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b, OpKind.ADD)
    return make_node(a.data + b.data, (a, b), OpKind.ADD, lambda g: (_fit(g, a), _fit(g, b)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b, OpKind.SUB)
    return make_node(a.data - b.data, (a, b), OpKind.SUB, lambda g: (_fit(g, a), _fit(-g, b)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b, OpKind.MUL)
    return make_node(
        a.data * b.data,
        (a, b),
        OpKind.MUL,
        lambda g: (_fit(g * b.data, a), _fit(g * a.data, b)),
    )


def scale(a, c):
    """Multiply by a Python constant (not on the tape)."""
    a, c = as_tensor(a), float(c)
    return make_node(a.data * c, (a,), OpKind.SCALE, lambda g: (g * c,))


def clamp(a, lo, hi):
    """Clip to [lo, hi]; gradient passes where lo <= a <= hi."""
    a = as_tensor(a)
    if lo > hi:
        raise ContractError(f"clamp: lo={lo} > hi={hi}")
    inside = (a.data >= lo) & (a.data <= hi)
    return make_node(np.clip(a.data, lo, hi), (a,), OpKind.CLAMP, lambda g: (g * inside,))


def round_half_even(a):
    """Round to nearest integer, ties to even. Zero gradient; STE lives in quantizers."""
    a = as_tensor(a)
    return make_node(np.round(a.data), (a,), OpKind.ROUND, lambda g: (np.zeros_like(g),))


def heaviside(v, surrogate_width=None):
    """Step function with Θ(0) = 1.

    With `surrogate_width=w` the backward pass uses the rectangular window
    dΘ/dv = 1{|v| <= w}; otherwise the gradient is zero.
    """
    v = as_tensor(v)
    out = (v.data >= 0.0).astype(np.float64)
    if surrogate_width is None:
        window = np.zeros_like(v.data)
    else:
        window = (np.abs(v.data) <= surrogate_width).astype(np.float64)
    return make_node(out, (v,), OpKind.HEAVISIDE, lambda g: (g * window,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return make_node(
        a.data @ b.data,
        (a, b),
        OpKind.MATMUL,
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a):
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {a.shape}")
    return make_node(a.data.T, (a,), OpKind.TRANSPOSE, lambda g: (g.T,))


def reshape(a, shape):
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise DimensionError(f"reshape: {a.shape} -> {shape} changes the element count")
    old = a.shape
    return make_node(a.data.reshape(shape), (a,), OpKind.RESHAPE, lambda g: (g.reshape(old),))


def expand(a, shape):
    """Explicit broadcast (numpy rules) to `shape`; backward sums the copies."""
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise DimensionError(f"expand: cannot broadcast {a.shape} to {shape}") from None
    lead = len(shape) - a.ndim
    axes = tuple(range(lead)) + tuple(
        lead + i for i, n in enumerate(a.shape) if n == 1 and shape[lead + i] != 1
    )

    def backward(g):
        return (g.sum(axis=axes).reshape(a.shape) if axes else g,)

    return make_node(np.array(out), (a,), OpKind.EXPAND, backward)


def tensor_sum(a, axis=None):
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return make_node(a.data.sum(axis=axis), (a,), OpKind.SUM, backward)


def mean(a, axis=None):
    a = as_tensor(a)
    shape = a.shape
    count = a.size if axis is None else shape[axis]

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g / count, axis), shape).copy(),)

    return make_node(a.data.mean(axis=axis), (a,), OpKind.MEAN, backward)


def take(a, index):
    """Index the leading axis (an int or a slice)."""
    a = as_tensor(a)
    if not isinstance(index, (int, np.integer, slice)):
        raise ContractError("take supports an int or slice on the leading axis only")

    def backward(g):
        full = np.zeros(a.shape)
        full[index] = g
        return (full,)

    return make_node(a.data[index], (a,), OpKind.TAKE, backward)


def stack(tensors):
    """Stack equally shaped tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("stack needs at least one tensor")
    first = tensors[0].shape
    for t in tensors:
        if t.shape != first:
            raise DimensionError(f"stack: shape {t.shape} differs from {first}")
    data = np.stack([t.data for t in tensors])
    return make_node(data, tuple(tensors), OpKind.STACK, lambda g: tuple(g[i] for i in range(len(tensors))))


def sigmoid(a):
    a = as_tensor(a)
    # 1 / (1 + e^-x) without overflowing for large negative x
    s = np.exp(-np.logaddexp(0.0, -a.data))
    return make_node(s, (a,), OpKind.SIGMOID, lambda g: (g * s * (1.0 - s),))


def detach(a):
    a = as_tensor(a)
    return make_node(a.data, (a,), OpKind.DETACH, lambda g: (None,))


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy over a batch; the softmax lives inside this node."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ContractError("cross_entropy: label out of range")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - log_norm
    batch = logits.shape[0]
    loss = -log_p[np.arange(batch), labels].mean()

    def backward(g):
        p = np.exp(log_p)
        p[np.arange(batch), labels] -= 1.0
        return (g * p / batch,)

    return make_node(loss, (logits,), OpKind.CROSS_ENTROPY, backward)


def _topological_order(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent in reversed(node.parents):
            if parent.requires_grad and id(parent) not in seen:
                stack_.append((parent, False))
    return order


def backward(loss):
    """Reverse-mode sweep from a scalar loss.

    Returns {leaf tensor: gradient array} for every requires-grad leaf that
    the loss depends on. Nodes are visited once, in reverse topological order.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {id(loss): np.ones(loss.shape)}
    leaves = {}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            if node.requires_grad:
                leaves[node] = leaves.get(node, 0.0) + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg
    for leaf, g in leaves.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {leaf.name or 'leaf'}")
    logger.debug("backward: %d leaves", len(leaves))
    return leaves
