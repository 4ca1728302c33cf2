"""The neuron zoo: LIF, PLIF, PSN, ILIF, NILIF, ASN, NASN.

Every neuron takes a time-major input [T x B x N] and returns activations of the
same shape. The recurrent kinds share the reset-then-decay rule

    U[t] = H[t-1] + X[t]
    S[t] = fire(U[t])
    H[t] = beta * (U[t] - S[t] * N)

where N = 1 for everything except NILIF/NASN. PSN has no recurrence at all.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import ContractError, DimensionError
from .quantizers import INTEGERIZED, QuantizerSpec, quantize
from .tensor import Tensor, detach, expand, heaviside, matmul, mul, reshape, scale, sigmoid, stack, take

logger = logging.getLogger(__name__)

LIF, PLIF, PSN = "lif", "plif", "psn"
ILIF, NILIF, ASN, NASN = "ilif", "nilif", "asn", "nasn"
NEURON_KINDS = (LIF, PLIF, PSN, ILIF, NILIF, ASN, NASN)
SPIKE_KINDS = frozenset({LIF, PLIF, PSN})
INTEGER_KINDS = frozenset({ILIF, NILIF, ASN, NASN})
NORMALIZED_KINDS = frozenset({NILIF, NASN})
ADAPTIVE_KINDS = frozenset({ASN, NASN})


@dataclass(frozen=True, eq=False)
class NeuronParams:
    kind: str
    beta: float = 0.5
    v_th: Optional[float] = None
    quantizer: Optional[QuantizerSpec] = None
    plif_w: Optional[float] = None
    psn_weight: Optional[np.ndarray] = None
    psn_threshold: Optional[np.ndarray] = None
    detach_reset: bool = False
    surrogate_width: float = 0.5
    per_channel_alpha: bool = False

    def __post_init__(self):
        kind = self.kind
        if kind not in NEURON_KINDS:
            raise ContractError(f"unknown neuron kind {kind!r}; expected one of {NEURON_KINDS}")
        if not 0.0 < self.beta <= 1.0:
            raise ContractError(f"beta must lie in (0, 1], got {self.beta}")
        active = {
            "v_th": kind in (LIF, PLIF),
            "quantizer": kind in INTEGER_KINDS,
            "plif_w": kind == PLIF,
            "psn_weight": kind == PSN,
            "psn_threshold": kind == PSN,
        }
        for name, wanted in active.items():
            present = getattr(self, name) is not None
            if wanted != present:
                state = "requires" if wanted else "must not carry"
                raise ContractError(f"{kind} neuron {state} field {name!r}")
        if kind in (ILIF, NILIF) and np.any(np.asarray(self.quantizer.alpha) != 0.0):
            raise ContractError(f"{kind} is the alpha=0 baseline; use asn/nasn for a shifted window")
        if kind in (ILIF, ASN) and self.quantizer.n != 1.0:
            raise ContractError(f"{kind} is unnormalized (N=1); use nilif/nasn for N != 1")
        if kind == PSN:
            w = np.asarray(self.psn_weight)
            b = np.asarray(self.psn_threshold)
            if w.ndim != 2 or w.shape[0] != w.shape[1] or b.shape != (w.shape[0],):
                raise DimensionError(f"PSN weight must be T x T and threshold length T, got {w.shape}, {b.shape}")

    def _key(self):
        arrays = tuple(
            None if a is None else (np.shape(a), tuple(np.ravel(a).tolist()))
            for a in (self.psn_weight, self.psn_threshold)
        )
        return (self.kind, self.beta, self.v_th, self.quantizer, self.plif_w, arrays,
                self.detach_reset, self.surrogate_width, self.per_channel_alpha)

    def __eq__(self, other):
        if not isinstance(other, NeuronParams):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def paradigm(self):
        return "integer" if self.kind in INTEGER_KINDS else "spike"

    @property
    def normalizer(self):
        return self.quantizer.n if self.quantizer is not None else 1.0

    @property
    def learnable_alpha(self):
        return self.kind in ADAPTIVE_KINDS


def make_neuron_params(
    kind,
    *,
    beta=0.5,
    v_th=1.0,
    alpha=0.0,
    d=4,
    n=None,
    grad_scale=1.0,
    bound_mode=INTEGERIZED,
    timesteps=None,
    detach_reset=False,
    surrogate_width=0.5,
    per_channel_alpha=False,
):
    """Build a valid NeuronParams for `kind` with the documented defaults."""
    kind = kind.lower()
    common = dict(beta=beta, detach_reset=detach_reset, surrogate_width=surrogate_width)
    if kind == LIF:
        return NeuronParams(kind, v_th=v_th, **common)
    if kind == PLIF:
        # beta = sigmoid(w); w = 0 gives beta = 0.5
        return NeuronParams(kind, v_th=v_th, plif_w=0.0, **common)
    if kind == PSN:
        if timesteps is None:
            raise ContractError("psn needs the number of timesteps T")
        return NeuronParams(
            kind,
            psn_weight=np.eye(timesteps),
            psn_threshold=np.full(timesteps, 0.5),
            **common,
        )
    if kind in INTEGER_KINDS:
        if n is None:
            n = float(d) if kind in NORMALIZED_KINDS else 1.0
        if kind in (ILIF, NILIF):
            alpha = 0.0
        spec = QuantizerSpec(alpha=alpha, d=d, n=float(n), grad_scale=grad_scale, bound_mode=bound_mode)
        return NeuronParams(kind, quantizer=spec, per_channel_alpha=per_channel_alpha, **common)
    raise ContractError(f"unknown neuron kind {kind!r}")


@dataclass
class MembraneState:
    h: Tensor

    @classmethod
    def zeros(cls, batch, width):
        return cls(Tensor(np.zeros((batch, width))))


def neuron_reset(state):
    """Zero the membrane potential, keeping its shape."""
    return MembraneState(Tensor(np.zeros(state.h.shape)))


@dataclass
class NeuronTrace:
    x: List[np.ndarray] = field(default_factory=list)
    u: List[np.ndarray] = field(default_factory=list)
    s: List[np.ndarray] = field(default_factory=list)
    h: List[np.ndarray] = field(default_factory=list)

    def record(self, x, u, s, h):
        self.x.append(x.data)
        self.u.append(u.data)
        self.s.append(s.data)
        self.h.append(h.data)

    def rows(self):
        """(t, X, U, S, H) tuples for a single-neuron trace."""
        return [
            (t + 1, float(x.reshape(-1)[0]), float(u.reshape(-1)[0]), float(s.reshape(-1)[0]), float(h.reshape(-1)[0]))
            for t, (x, u, s, h) in enumerate(zip(self.x, self.u, self.s, self.h))
        ]


def _check_input(x):
    if x.ndim != 3:
        raise DimensionError(f"neuron input must be [T x B x N], got {x.shape}")
    if x.shape[0] < 1:
        raise ContractError("need at least one timestep")


def _initial_state(state, x):
    if state is None:
        return MembraneState.zeros(x.shape[1], x.shape[2])
    if state.h.shape != x.shape[1:]:
        raise DimensionError(f"membrane state {state.h.shape} does not match input {x.shape[1:]}")
    return state


def _decay(params, value, beta):
    return mul(beta, value) if isinstance(beta, Tensor) else scale(value, params.beta)


def lif_forward(x, params, state=None, plif_w=None, trace=None):
    """LIF / PLIF with a rectangular surrogate of half-width `surrogate_width`."""
    if params.kind not in (LIF, PLIF):
        raise ContractError(f"lif_forward cannot run a {params.kind} neuron")
    _check_input(x)
    state = _initial_state(state, x)
    beta = None
    if params.kind == PLIF:
        beta = sigmoid(plif_w if plif_w is not None else Tensor(params.plif_w))
    h = state.h
    spikes = []
    for t in range(x.shape[0]):
        xt = take(x, t)
        u = h + xt
        s = heaviside(u - params.v_th, surrogate_width=params.surrogate_width)
        reset = detach(s) if params.detach_reset else s
        h = _decay(params, u - reset, beta)
        if trace is not None:
            trace.record(xt, u, s, h)
        spikes.append(s)
    return stack(spikes), MembraneState(h)


def psn_forward(x, params, weight=None, threshold=None, trace=None):
    """Parallel spiking neuron: H = W X over the time axis, S = Θ(H - B)."""
    if params.kind != PSN:
        raise ContractError(f"psn_forward cannot run a {params.kind} neuron")
    _check_input(x)
    weight = weight if weight is not None else Tensor(params.psn_weight)
    threshold = threshold if threshold is not None else Tensor(params.psn_threshold)
    steps, batch, width = x.shape
    if weight.shape != (steps, steps):
        raise DimensionError(f"PSN weight {weight.shape} does not match T={steps}")
    flat = reshape(x, (steps, batch * width))
    h = matmul(weight, flat)
    bias = expand(reshape(threshold, (steps, 1)), (steps, batch * width))
    s = heaviside(h - bias, surrogate_width=params.surrogate_width)
    h3, s3 = reshape(h, x.shape), reshape(s, x.shape)
    if trace is not None:
        for t in range(steps):
            trace.record(take(x, t), take(h3, t), take(s3, t), take(h3, t))
    return s3


def asn_forward(x, params, state=None, alpha=None, trace=None):
    """ILIF / NILIF / ASN / NASN: quantized activations with reset-then-decay."""
    if params.kind not in INTEGER_KINDS:
        raise ContractError(f"asn_forward cannot run a {params.kind} neuron")
    _check_input(x)
    state = _initial_state(state, x)
    spec = params.quantizer
    h = state.h
    outputs = []
    for t in range(x.shape[0]):
        xt = take(x, t)
        u = h + xt
        s = quantize(u, spec, alpha)
        reset = scale(s, spec.n)
        if params.detach_reset:
            reset = detach(reset)
        h = scale(u - reset, params.beta)
        if trace is not None:
            trace.record(xt, u, s, h)
        outputs.append(s)
    return stack(outputs), MembraneState(h)


class NeuronLayer:
    """A neuron cell: owns its learnable tensors and its membrane state."""

    def __init__(self, params, width, name="neuron"):
        self.params = params
        self.width = width
        self.name = name
        self.state = None
        self.alpha = None
        self.plif_w = None
        self.psn_weight = None
        self.psn_threshold = None
        if params.kind in INTEGER_KINDS:
            value = params.quantizer.alpha
            if params.per_channel_alpha:
                value = np.full(width, float(value))
            self.alpha = Tensor(value, requires_grad=params.learnable_alpha, name=f"{name}.alpha")
        elif params.kind == PLIF:
            self.plif_w = Tensor(params.plif_w, requires_grad=True, name=f"{name}.plif_w")
        elif params.kind == PSN:
            self.psn_weight = Tensor(params.psn_weight, requires_grad=True, name=f"{name}.psn_weight")
            self.psn_threshold = Tensor(params.psn_threshold, requires_grad=True, name=f"{name}.psn_threshold")

    def parameters(self):
        """Learnable tensors keyed by name (frozen alphas are left out)."""
        found = {}
        for attr in ("alpha", "plif_w", "psn_weight", "psn_threshold"):
            t = getattr(self, attr)
            if t is not None and t.requires_grad:
                found[f"{self.name}.{attr}"] = t
        return found

    def load_parameter(self, attr, value):
        old = getattr(self, attr)
        setattr(self, attr, Tensor(value, requires_grad=old.requires_grad, name=old.name))

    def set_grad_scale(self, scale):
        """Install the alpha gradient scale a on this layer's quantizer."""
        if self.params.quantizer is None:
            raise ContractError(f"{self.params.kind} has no alpha to scale")
        self.params = replace(self.params, quantizer=replace(self.params.quantizer, grad_scale=scale))

    def current_params(self):
        """NeuronParams snapshot carrying the trained values."""
        p = self.params
        if self.alpha is not None:
            alpha = self.alpha.data.copy() if self.alpha.ndim else float(self.alpha.data)
            return NeuronParams(
                p.kind,
                beta=p.beta,
                quantizer=p.quantizer.with_alpha(alpha),
                detach_reset=p.detach_reset,
                surrogate_width=p.surrogate_width,
                per_channel_alpha=p.per_channel_alpha,
            )
        if self.plif_w is not None:
            return NeuronParams(p.kind, beta=p.beta, v_th=p.v_th, plif_w=float(self.plif_w.data),
                                detach_reset=p.detach_reset, surrogate_width=p.surrogate_width)
        if self.psn_weight is not None:
            return NeuronParams(p.kind, beta=p.beta, psn_weight=self.psn_weight.data.copy(),
                                psn_threshold=self.psn_threshold.data.copy(),
                                detach_reset=p.detach_reset, surrogate_width=p.surrogate_width)
        return p

    def reset(self):
        if self.state is not None:
            self.state = neuron_reset(self.state)

    def forward(self, x, trace=None):
        kind = self.params.kind
        if kind == PSN:
            return psn_forward(x, self.params, self.psn_weight, self.psn_threshold, trace=trace)
        if kind in INTEGER_KINDS:
            out, self.state = asn_forward(x, self.params, self.state, alpha=self.alpha, trace=trace)
        else:
            out, self.state = lif_forward(x, self.params, self.state, plif_w=self.plif_w, trace=trace)
        return out

    __call__ = forward


def run_neuron(kind, inputs, trace=True, **overrides):
    """Run one neuron kind on a 1-D sequence of scalar inputs (T steps, B = N = 1)."""
    inputs = np.asarray(inputs, dtype=np.float64).reshape(-1)
    if inputs.size == 0:
        raise ContractError("empty input sequence")
    if kind == PSN:
        overrides.setdefault("timesteps", inputs.size)
    params = make_neuron_params(kind, **overrides)
    layer = NeuronLayer(params, width=1, name=kind)
    record = NeuronTrace() if trace else None
    out = layer(Tensor(inputs.reshape(-1, 1, 1)), trace=record)
    return out, record


def neuron_feature_table():
    """Which of the four design characteristics each neuron kind satisfies."""
    columns = ("efficient_training", "adaptive_firing", "architecture_compatibility", "spike_driven_inference")
    rows = {
        LIF: (False, False, True, True),
        PLIF: (False, True, True, True),
        PSN: (False, True, False, True),
        ILIF: (True, False, True, True),
        NILIF: (True, False, True, True),
        ASN: (True, True, True, True),
        NASN: (True, True, True, True),
    }
    return {kind: dict(zip(columns, flags)) for kind, flags in rows.items()}
