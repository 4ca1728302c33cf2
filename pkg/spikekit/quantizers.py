"""Clip-round quantizer shared by the ILIF/NILIF/ASN/NASN neurons.

Forward:   y = clip(round(u), lo, hi) / N
Backward:  dy/du = 1/N           where alpha <= u <= alpha + D, else 0
           dL/dalpha = a/N * sum(upstream where u < alpha or u > alpha + D)

The backward window always uses the continuous bounds [alpha, alpha + D],
whichever bound mode the forward pass clips with.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError
from .tensor import OpKind, Tensor, as_tensor, make_node

INTEGERIZED = "integerized"
CONTINUOUS = "continuous"
BOUND_MODES = (INTEGERIZED, CONTINUOUS)


@dataclass(frozen=True, eq=False)
class QuantizerSpec:
    alpha: float = 0.0
    d: int = 4
    n: float = 1.0
    grad_scale: float = 1.0
    bound_mode: str = INTEGERIZED

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ContractError(f"D must be a positive integer, got {self.d}")
        if not self.n > 0:
            raise ContractError(f"N must be positive, got {self.n}")
        if not self.grad_scale > 0:
            raise ContractError(f"gradient scale a must be positive, got {self.grad_scale}")
        if self.bound_mode not in BOUND_MODES:
            raise ContractError(f"unknown bound mode {self.bound_mode!r}")
        if not np.all(np.isfinite(self.alpha)):
            raise ContractError("alpha must be finite")

    def _key(self):
        return (np.shape(self.alpha), tuple(np.ravel(self.alpha).tolist()), self.d, self.n, self.grad_scale, self.bound_mode)

    def __eq__(self, other):
        if not isinstance(other, QuantizerSpec):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)

    @property
    def alpha_ceil(self):
        return np.ceil(self.alpha)

    def clip_window(self):
        """(lo, hi) used by the forward clip."""
        if self.bound_mode == INTEGERIZED:
            lo = np.ceil(self.alpha)
        else:
            lo = np.asarray(self.alpha, dtype=np.float64)
        return lo, lo + self.d

    def grad_window(self):
        """(d_min, d_max) used by both STE indicators."""
        lo = np.asarray(self.alpha, dtype=np.float64)
        return lo, lo + self.d


def quantize_forward(u, spec):
    lo, hi = spec.clip_window()
    return np.clip(np.round(np.asarray(u, dtype=np.float64)), lo, hi) / spec.n


def pass_through_mask(u, spec):
    d_min, d_max = spec.grad_window()
    u = np.asarray(u, dtype=np.float64)
    return (u >= d_min) & (u <= d_max)


def quantize_backward_x(upstream, u, spec):
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != np.shape(u):
        raise ContractError(f"upstream {upstream.shape} and u {np.shape(u)} differ")
    return upstream * (1.0 / spec.n) * pass_through_mask(u, spec)


def quantize_backward_alpha(upstream, u, spec):
    """Accumulated alpha gradient: a scalar, or one value per channel (last axis)."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != np.shape(u):
        raise ContractError(f"upstream {upstream.shape} and u {np.shape(u)} differ")
    truncated = ~pass_through_mask(u, spec)
    contrib = upstream * truncated
    if np.ndim(spec.alpha) == 0:
        total = contrib.sum()
    else:
        total = contrib.reshape(-1, contrib.shape[-1]).sum(axis=0)
    return spec.grad_scale * (1.0 / spec.n) * total


def quantize(u, spec, alpha=None):
    """Tape node for the quantizer.

    `alpha` is the learnable offset tensor (0-d, or 1-d per channel). When it
    is omitted the offset in `spec` is used and receives no gradient.
    """
    u = as_tensor(u)
    if alpha is None:
        alpha = Tensor(spec.alpha)
    alpha = as_tensor(alpha)
    live = spec.with_alpha(float(alpha.data) if alpha.ndim == 0 else alpha.data.copy())
    if alpha.ndim == 1 and (u.ndim == 0 or u.shape[-1] != alpha.shape[0]):
        raise ContractError(f"per-channel alpha {alpha.shape} does not match input {u.shape}")
    out = quantize_forward(u.data, live)

    def backward(g):
        return (
            quantize_backward_x(g, u.data, live),
            np.asarray(quantize_backward_alpha(g, u.data, live)),
        )

    return make_node(out, (u, alpha), OpKind.QUANTIZE, backward)


def emitted_levels(spec):
    """The D+1 values an integerized quantizer can emit (scalar alpha)."""
    lo = math.ceil(float(spec.alpha))
    return [(lo + k) / spec.n for k in range(spec.d + 1)]
