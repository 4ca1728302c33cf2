"""Spiking MLP with a mean-rate readout, plus the optimizers that train it."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import ContractError, DimensionError
from .neurons import NeuronLayer, NeuronParams, NeuronTrace
from .tensor import Tensor, expand, matmul, mean, reshape, transpose

logger = logging.getLogger(__name__)


def init_weight(rng, out_features, in_features, gain=1.0, mean_component=0.0, centered=False):
    """Gaussian init with std gain/sqrt(fan_in), plus an optional uniform row mean.

    `mean_component=1.0` gives rows that sum to ~1, so pre-activations sit
    near the mean input value (used for the shifted task's first layer).
    With `centered` the random part of every row sums to zero, so a constant
    offset on all inputs reaches every unit through the row mean alone.
    """
    z = rng.standard_normal((out_features, in_features))
    if centered:
        z = z - z.mean(axis=1, keepdims=True)
    return mean_component / in_features + gain * z / np.sqrt(in_features)


def linear_over_time(x, weight):
    """Apply a bias-free [out x in] weight to every timestep of [T x B x in]."""
    steps, batch, width = x.shape
    if weight.shape[1] != width:
        raise DimensionError(f"weight {weight.shape} cannot consume input width {width}")
    flat = reshape(x, (steps * batch, width))
    return reshape(matmul(flat, transpose(weight)), (steps, batch, weight.shape[0]))


@dataclass
class ForwardRecord:
    """Per-layer tensors captured during a forward pass."""

    pre_activations: List[Tensor] = field(default_factory=list)
    activations: List[Tensor] = field(default_factory=list)
    traces: List[NeuronTrace] = field(default_factory=list)
    readout: Optional[Tensor] = None
    logits: Optional[Tensor] = None


class SpikingMLP:
    """Linear -> neuron blocks, mean over time, then a linear classifier.

    Spiking layers carry no bias, so every hidden linear map keeps the pure
    W @ S form that constant folding relies on. Only the classifier has a bias.
    """

    def __init__(
        self,
        in_features,
        hidden,
        classes,
        neuron_params,
        seed=0,
        gain=1.0,
        encoder_gain=None,
        encoder_mean=0.0,
        encoder_centered=False,
        readout_gain=None,
    ):
        hidden = list(hidden)
        if not hidden:
            raise ContractError("need at least one spiking layer")
        if isinstance(neuron_params, NeuronParams):
            neuron_params = [neuron_params] * len(hidden)
        if len(neuron_params) != len(hidden):
            raise ContractError(f"{len(hidden)} layers but {len(neuron_params)} neuron configs")
        self.in_features = in_features
        self.hidden = hidden
        self.classes = classes
        self.seed = seed
        rng = np.random.default_rng(seed)
        widths = [in_features] + hidden
        self.weights = []
        self.neurons = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            layer_gain = gain if i > 0 or encoder_gain is None else encoder_gain
            layer_mean = encoder_mean if i == 0 else 0.0
            w = init_weight(rng, fan_out, fan_in, gain=layer_gain, mean_component=layer_mean,
                            centered=encoder_centered and i == 0)
            self.weights.append(Tensor(w, requires_grad=True, name=f"l{i + 1}.weight"))
            self.neurons.append(NeuronLayer(neuron_params[i], fan_out, name=f"l{i + 1}"))
        head_gain = gain if readout_gain is None else readout_gain
        self.classifier_weight = Tensor(
            init_weight(rng, classes, hidden[-1], gain=head_gain), requires_grad=True, name="classifier.weight"
        )
        self.classifier_bias = Tensor(np.zeros(classes), requires_grad=True, name="classifier.bias")

    @property
    def depth(self):
        return len(self.hidden)

    def neuron_params(self):
        return [n.current_params() for n in self.neurons]

    def parameters(self) -> Dict[str, Tensor]:
        params = {}
        for w, neuron in zip(self.weights, self.neurons):
            params[w.name] = w
            params.update(neuron.parameters())
        params["classifier.weight"] = self.classifier_weight
        params["classifier.bias"] = self.classifier_bias
        return params

    def set_parameter(self, name, value):
        if name == "classifier.weight":
            self.classifier_weight = Tensor(value, requires_grad=True, name=name)
            return
        if name == "classifier.bias":
            self.classifier_bias = Tensor(value, requires_grad=True, name=name)
            return
        layer, attr = name.split(".", 1)
        idx = int(layer[1:]) - 1
        if attr == "weight":
            self.weights[idx] = Tensor(value, requires_grad=True, name=name)
        else:
            self.neurons[idx].load_parameter(attr, value)

    def alphas(self):
        """Mean alpha per spiking layer (None for neurons without a window)."""
        out = []
        for n in self.neurons:
            out.append(None if n.alpha is None else float(np.mean(n.alpha.data)))
        return out

    def reset(self):
        for n in self.neurons:
            n.state = None

    def forward(self, x, record=None):
        """logits [B x classes] for a time-major input [T x B x in]."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 3 or x.shape[2] != self.in_features:
            raise DimensionError(f"expected [T x B x {self.in_features}], got {x.shape}")
        self.reset()
        h = x
        for w, neuron in zip(self.weights, self.neurons):
            pre = linear_over_time(h, w)
            trace = NeuronTrace() if record is not None else None
            h = neuron(pre, trace=trace)
            if record is not None:
                record.traces.append(trace)
                record.pre_activations.append(pre)
                record.activations.append(h)
        rate = mean(h, axis=0)
        batch = rate.shape[0]
        bias = expand(reshape(self.classifier_bias, (1, self.classes)), (batch, self.classes))
        logits = matmul(rate, transpose(self.classifier_weight)) + bias
        if record is not None:
            record.readout = rate
            record.logits = logits
        return logits

    __call__ = forward


class Optimizer:
    """Base optimizer: one state slot per parameter name, alpha has its own lr."""

    def __init__(self, lr, alpha_lr=None):
        if not lr > 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.alpha_lr = lr if alpha_lr is None else alpha_lr
        self.slots = {}

    def rate_for(self, name):
        return self.alpha_lr if name.endswith(".alpha") else self.lr

    def update(self, name, value, grad):
        raise NotImplementedError

    def step(self, net, grads):
        """grads: {parameter name: gradient array}; parameters without one are untouched."""
        for name, param in net.parameters().items():
            grad = grads.get(name)
            if grad is None:
                continue
            net.set_parameter(name, self.update(name, param.data, grad))


class SGDMomentum(Optimizer):
    def __init__(self, lr, momentum=0.9, alpha_lr=None):
        super().__init__(lr, alpha_lr)
        self.momentum = momentum

    def update(self, name, value, grad):
        velocity = self.momentum * self.slots.get(name, np.zeros_like(grad)) + grad
        self.slots[name] = velocity
        return value - self.rate_for(name) * velocity


class Adam(Optimizer):
    def __init__(self, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, alpha_lr=None):
        super().__init__(lr, alpha_lr)
        self.betas = betas
        self.eps = eps

    def update(self, name, value, grad):
        b1, b2 = self.betas
        m, v, t = self.slots.get(name, (np.zeros_like(grad), np.zeros_like(grad), 0))
        t += 1
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        self.slots[name] = (m, v, t)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        return value - self.rate_for(name) * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind, lr, alpha_lr=None):
    if kind == "adam":
        return Adam(lr=lr, alpha_lr=alpha_lr)
    if kind == "sgd-momentum":
        return SGDMomentum(lr=lr, alpha_lr=alpha_lr)
    raise ContractError(f"unknown optimizer {kind!r}")
