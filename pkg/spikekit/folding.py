"""Spike-driven inference: unfold integer activations into binary spike trains.

For an integer-family neuron with offset alpha, every emitted activation s
satisfies s * N = ceil(alpha) + S1 with an integer spike count 0 <= S1 <= D,
so the next layer's input splits into a binary-event part and a constant:

    W @ s = (W / N) @ S1 + (W / N) @ ceil(alpha) = W1 @ S1 + C

S1 is laid out as D binary sub-steps per integer timestep (ones first by
default), and C is added once per integer timestep.
"""

import io
import logging
import struct
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ContainerFormatError, ContractError, EquivalenceViolation, FoldingContractError
from .neurons import INTEGER_KINDS, NEURON_KINDS, NORMALIZED_KINDS, NeuronParams, asn_forward
from .network import ForwardRecord
from .quantizers import BOUND_MODES, INTEGERIZED, QuantizerSpec
from .tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

INTEGER_TOLERANCE = 1e-9
ROLE_DENSE, ROLE_SPIKING, ROLE_CLASSIFIER = 0, 1, 2


@dataclass
class SpikeTrain:
    """Binary spikes [(T*D) x B x N]; sub-step d of timestep t lives at row t*D + d."""

    data: np.ndarray
    d: int
    t: int

    def __post_init__(self):
        if self.data.shape[0] != self.t * self.d:
            raise FoldingContractError(f"spike train has {self.data.shape[0]} rows, expected T*D={self.t * self.d}")
        if not np.all((self.data == 0) | (self.data == 1)):
            raise FoldingContractError("spike train contains values other than 0 and 1")

    @property
    def steps(self):
        return self.data.shape[0]

    def blocks(self):
        return self.data.reshape((self.t, self.d) + self.data.shape[1:])

    def block_sums(self):
        return self.blocks().sum(axis=1).astype(np.int32)

    @property
    def spike_count(self):
        return int(self.data.sum())


def spike_counts(s, alpha_ceil, d, n=1.0):
    """S1 = s*N - ceil(alpha) as int32, validated to be an integer in [0, D]."""
    raw = np.asarray(s, dtype=np.float64) * n - alpha_ceil
    counts = np.rint(raw)
    if np.any(np.abs(raw - counts) > INTEGER_TOLERANCE):
        raise FoldingContractError("activations are not integers on the 1/N grid; was the quantizer in continuous mode?")
    if np.any(counts < 0) or np.any(counts > d):
        raise FoldingContractError(f"spike counts fall outside [0, {d}] for ceil(alpha)={alpha_ceil}")
    return counts.astype(np.int32)


def unfold(s, alpha_ceil, d, n=1.0, order="ones_first", rng=None):
    """Turn [T x B x N] activations into a SpikeTrain of T*D binary sub-steps."""
    counts = spike_counts(s, alpha_ceil, d, n)
    steps = counts.shape[0]
    slots = np.arange(d).reshape((1, d) + (1,) * (counts.ndim - 1))
    blocks = (slots < counts[:, None]).astype(np.int8)
    if order == "permuted":
        rng = rng if rng is not None else np.random.default_rng(0)
        blocks = rng.permuted(blocks, axis=1)
    elif order != "ones_first":
        raise ContractError(f"unknown spike order {order!r}")
    return SpikeTrain(blocks.reshape((steps * d,) + counts.shape[1:]), d=d, t=steps)


def check_foldable(params):
    if params.kind not in INTEGER_KINDS:
        raise FoldingContractError(f"{params.kind} neurons emit binary spikes already and cannot be folded")
    if params.quantizer.bound_mode != INTEGERIZED:
        raise FoldingContractError(
            "continuous bound mode clips to a real-valued window, so activations are not "
            "integer offsets from ceil(alpha) and cannot be unfolded exactly; use integerized mode"
        )


@dataclass
class FoldedLayer:
    weight: np.ndarray
    constant: np.ndarray
    role: int = ROLE_SPIKING
    bias: Optional[np.ndarray] = None
    source: Optional[NeuronParams] = None

    def __post_init__(self):
        if self.bias is None:
            self.bias = np.zeros(self.weight.shape[0])

    @property
    def fan_out(self):
        return self.weight.shape[0]

    @property
    def fan_in(self):
        return self.weight.shape[1]


def fold_layer(weight, params):
    """Fold the offset of the neuron feeding `weight` into a per-layer constant."""
    check_foldable(params)
    weight = np.asarray(weight.data if isinstance(weight, Tensor) else weight, dtype=np.float64)
    spec = params.quantizer
    scaled = weight / spec.n if params.kind in NORMALIZED_KINDS else weight.copy()
    ceil_alpha = np.broadcast_to(np.ceil(np.asarray(spec.alpha, dtype=np.float64)), (weight.shape[1],))
    constant = scaled @ ceil_alpha
    return FoldedLayer(weight=scaled, constant=constant, source=params)


@dataclass
class FoldedNetwork:
    """Encoder (dense) + folded spiking layers + folded classifier, with the neuron chain."""

    layers: List[FoldedLayer]
    neurons: List[NeuronParams]

    def __post_init__(self):
        if len(self.layers) != len(self.neurons) + 1:
            raise ContractError("a folded network needs exactly one more layer than neurons")


def fold_network(net):
    neurons = net.neuron_params()
    for p in neurons:
        check_foldable(p)
    layers = [FoldedLayer(weight=net.weights[0].data.copy(), constant=np.zeros(net.weights[0].shape[0]), role=ROLE_DENSE)]
    for w, src in zip(net.weights[1:], neurons[:-1]):
        layers.append(fold_layer(w, src))
    head = fold_layer(net.classifier_weight, neurons[-1])
    head.role = ROLE_CLASSIFIER
    head.bias = net.classifier_bias.data.copy()
    layers.append(head)
    return FoldedNetwork(layers=layers, neurons=neurons)


@dataclass
class InferenceRecord:
    layer_inputs: List[np.ndarray] = field(default_factory=list)
    spike_trains: List[SpikeTrain] = field(default_factory=list)
    logits: Optional[np.ndarray] = None


def _dense_over_time(x, weight):
    steps, batch, width = x.shape
    return (x.reshape(steps * batch, width) @ weight.T).reshape(steps, batch, weight.shape[0])


def _accumulate_events(train, layer):
    """Per integer timestep: add the weight column of every unit that fired, then add C once."""
    blocks = train.blocks()
    steps, d, batch = blocks.shape[:3]
    out = np.zeros((steps, batch, layer.fan_out))
    for t in range(steps):
        acc = np.zeros((batch, layer.fan_out))
        for k in range(d):
            for b in range(batch):
                fired = np.flatnonzero(blocks[t, k, b])
                if fired.size:
                    acc[b] += layer.weight[:, fired].sum(axis=1)
        out[t] = acc + layer.constant
    return out


def spike_inference(x0, layers, params, record=None, order="ones_first", rng=None):
    """Run a folded network on real-valued input [T x B x in]; returns logits [B x classes]."""
    if not layers:
        raise ContractError("empty layer list")
    if len(layers) != len(params) + 1:
        raise ContractError("need one neuron config between every pair of layers")
    x0 = np.asarray(x0.data if isinstance(x0, Tensor) else x0, dtype=np.float64)
    current = _dense_over_time(x0, layers[0].weight)
    if record is not None:
        record.layer_inputs.append(current)
    for idx, (p, layer) in enumerate(zip(params, layers[1:]), start=1):
        check_foldable(p)
        with no_grad():
            s, _ = asn_forward(Tensor(current), p)
        spec = p.quantizer
        try:
            train = unfold(s.data, np.ceil(spec.alpha), spec.d, spec.n, order=order, rng=rng)
        except FoldingContractError as exc:
            raise EquivalenceViolation(f"layer {idx}: {exc}", layer=idx) from exc
        current = _accumulate_events(train, layer)
        if record is not None:
            record.spike_trains.append(train)
            record.layer_inputs.append(current)
    logits = current.mean(axis=0) + layers[-1].bias
    if record is not None:
        record.logits = logits
    return logits


def run_folded(x0, folded, record=None, order="ones_first", rng=None):
    return spike_inference(x0, folded.layers, folded.neurons, record=record, order=order, rng=rng)


@dataclass
class EquivalenceReport:
    tolerance: float
    layers: List[dict]
    passed: bool
    failing_layer: Optional[str] = None

    def to_dict(self):
        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "failing_layer": self.failing_layer,
            "layers": self.layers,
        }


def _layer_label(idx, count):
    if idx == 0:
        return "encoder"
    return "classifier" if idx == count - 1 else f"layer{idx}"


def verify_equivalence(net, inputs, tolerance=1e-9, folded=None):
    """Run the training path and the spike path side by side and compare per layer.

    Layer k of the report is the input current reaching neuron k+1 (the
    classifier row compares logits). Spike counts are compared exactly.
    """
    for p in net.neuron_params():
        check_foldable(p)
    folded = folded if folded is not None else fold_network(net)
    x = np.asarray(inputs.data if isinstance(inputs, Tensor) else inputs, dtype=np.float64)
    rec = ForwardRecord()
    with no_grad():
        logits = net.forward(Tensor(x), record=rec)
    train_record_pre = [t.data for t in rec.pre_activations]
    train_acts = [t.data for t in rec.activations]

    inf = InferenceRecord()
    rows = []
    try:
        spike_logits = run_folded(x, folded, record=inf)
    except EquivalenceViolation as exc:
        rows.append({"layer": _layer_label(exc.layer, len(folded.layers)), "max_abs_diff": None,
                     "spike_count_mismatches": None, "passed": False, "error": str(exc)})
        return EquivalenceReport(tolerance, rows, False, rows[-1]["layer"])

    expected = train_record_pre + [logits.data]
    observed = inf.layer_inputs[:-1] + [spike_logits]
    failing = None
    for idx, (want, got) in enumerate(zip(expected, observed)):
        diff = float(np.max(np.abs(want - got))) if want.size else 0.0
        mismatches = 0
        if 0 < idx <= len(inf.spike_trains):
            spec = folded.neurons[idx - 1].quantizer
            want_counts = spike_counts(train_acts[idx - 1], np.ceil(spec.alpha), spec.d, spec.n)
            mismatches = int(np.count_nonzero(want_counts != inf.spike_trains[idx - 1].block_sums()))
        ok = diff <= tolerance and mismatches == 0
        label = _layer_label(idx, len(expected))
        rows.append({"layer": label, "max_abs_diff": diff, "spike_count_mismatches": mismatches, "passed": ok})
        if not ok and failing is None:
            failing = label
    logger.info("equivalence check: %d layers, failing=%s", len(rows), failing)
    return EquivalenceReport(tolerance, rows, failing is None, failing)


# --- SPKF container -------------------------------------------------------

SPKF_MAGIC = b"SPKF"
SPKF_VERSION = 1
_KIND_CODES = {kind: i for i, kind in enumerate(NEURON_KINDS)}
_NO_NEURON = 0xFF


def _write_params(buf, params):
    if params is None:
        buf.write(struct.pack("<B", _NO_NEURON))
        return
    spec = params.quantizer
    alpha = np.atleast_1d(np.asarray(spec.alpha, dtype="<f8"))
    buf.write(struct.pack(
        "<BBBBdIddI",
        _KIND_CODES[params.kind],
        BOUND_MODES.index(spec.bound_mode),
        int(params.detach_reset),
        int(params.per_channel_alpha),
        params.beta,
        spec.d,
        spec.n,
        spec.grad_scale,
        alpha.size,
    ))
    buf.write(alpha.tobytes())


def _read_exact(buf, size, what):
    chunk = buf.read(size)
    if len(chunk) != size:
        raise ContainerFormatError(f"truncated container while reading {what}")
    return chunk


def _read_params(buf):
    (code,) = struct.unpack("<B", _read_exact(buf, 1, "neuron kind"))
    if code == _NO_NEURON:
        return None
    if code >= len(NEURON_KINDS) or NEURON_KINDS[code] not in INTEGER_KINDS:
        raise ContainerFormatError(f"unsupported neuron kind code {code}")
    fmt = "<BBBdIddI"
    mode, detach_flag, per_channel, beta, d, n, grad_scale, count = struct.unpack(
        fmt, _read_exact(buf, struct.calcsize(fmt), "neuron record"))
    if mode >= len(BOUND_MODES):
        raise ContainerFormatError(f"unknown bound mode index {mode}")
    if count < 1 or (count != 1 and not per_channel):
        raise ContainerFormatError(f"bad alpha count {count}")
    alpha = np.frombuffer(_read_exact(buf, 8 * count, "alpha"), dtype="<f8").astype(np.float64)
    alpha_value = float(alpha[0]) if not per_channel else alpha.copy()
    try:
        spec = QuantizerSpec(alpha=alpha_value, d=d, n=n, grad_scale=grad_scale, bound_mode=BOUND_MODES[mode])
        return NeuronParams(NEURON_KINDS[code], beta=beta, quantizer=spec,
                            detach_reset=bool(detach_flag), per_channel_alpha=bool(per_channel))
    except ContractError as exc:
        raise ContainerFormatError(f"invalid neuron record: {exc}") from exc


def save_folded(folded, path):
    """Write a FoldedNetwork in the SPKF container (see docs/SPKF_FORMAT.md)."""
    buf = io.BytesIO()
    buf.write(SPKF_MAGIC)
    buf.write(struct.pack("<II", SPKF_VERSION, len(folded.layers)))
    following = list(folded.neurons) + [None]
    for layer, params in zip(folded.layers, following):
        out_f, in_f = layer.weight.shape
        buf.write(struct.pack("<III", layer.role, out_f, in_f))
        buf.write(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(layer.constant, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        _write_params(buf, params)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_folded(path):
    with open(path, "rb") as f:
        buf = io.BytesIO(f.read())
    if _read_exact(buf, 4, "magic") != SPKF_MAGIC:
        raise ContainerFormatError("not an SPKF container (bad magic)")
    version, count = struct.unpack("<II", _read_exact(buf, 8, "header"))
    if version != SPKF_VERSION:
        raise ContainerFormatError(f"unsupported SPKF version {version}")
    layers, neurons = [], []
    for i in range(count):
        role, out_f, in_f = struct.unpack("<III", _read_exact(buf, 12, f"layer {i} header"))
        weight = np.frombuffer(_read_exact(buf, 8 * out_f * in_f, f"layer {i} weight"), dtype="<f8")
        constant = np.frombuffer(_read_exact(buf, 8 * out_f, f"layer {i} constant"), dtype="<f8")
        bias = np.frombuffer(_read_exact(buf, 8 * out_f, f"layer {i} bias"), dtype="<f8")
        params = _read_params(buf)
        layers.append(FoldedLayer(
            weight=weight.reshape(out_f, in_f).astype(np.float64),
            constant=constant.astype(np.float64),
            role=role,
            bias=bias.astype(np.float64),
        ))
        if params is not None:
            neurons.append(params)
    if buf.read(1):
        raise ContainerFormatError("trailing bytes after the last layer")
    for layer, src in zip(layers[1:], neurons):
        layer.source = src
    return FoldedNetwork(layers=layers, neurons=neurons)
