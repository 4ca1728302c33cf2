"""Gradient audits: smooth-path finite differences and the two STE indicator rules.

The quantizer and the Heaviside step have zero derivative almost everywhere,
so finite differences of the real forward pass say nothing about their
straight-through gradients. Network checks therefore difference the forward
pass linearized at the evaluation point along the straight-through slopes:
its exact gradient is what BPTT must return.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError
from .network import ForwardRecord, SpikingMLP
from .neurons import ASN, ILIF, INTEGER_KINDS, LIF, NASN, NILIF, make_neuron_params
from .quantizers import QuantizerSpec, pass_through_mask, quantize, quantize_backward_alpha, quantize_backward_x
from .tensor import Tensor, add, backward, cross_entropy, expand, matmul, mean, mul, reshape, sigmoid, stack, take, tensor_sum, transpose

logger = logging.getLogger(__name__)

NETWORK_KINDS = (LIF, ILIF, NILIF, ASN, NASN)
DEFAULT_TOLERANCE = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    max_deviation: float
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def central_difference(f, x, eps):
    """Central-difference gradient of scalar f at array x."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps
        hi = f(x)
        x[idx] = orig - eps
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * eps)
    return grad


# STE indicator oracles, written element by element


def oracle_backward_x(upstream, u, alpha, d, n):
    out = np.zeros(len(u))
    for i in range(len(u)):
        if alpha <= u[i] <= alpha + d:
            out[i] = upstream[i] / n
    return out


def oracle_backward_alpha(upstream, u, alpha, d, n, a):
    total = 0.0
    for i in range(len(u)):
        if u[i] < alpha or u[i] > alpha + d:
            total += upstream[i]
    return a * total / n


def check_ste_indicators(trials=1000, seed=0, size=8):
    """Vectorized STE rules (and the tape node) against the scalar loops, exact match."""
    if trials < 1:
        raise ContractError("gradcheck needs at least one trial")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        d = int(rng.choice([1, 2, 4, 8]))
        n = float(rng.choice([1.0, d]))
        a = float(rng.choice([1.0, 0.5, 2.0]))
        alpha = float(rng.uniform(-3.0, 3.0))
        u = rng.uniform(alpha - 3.0, alpha + d + 3.0, size=size)
        g = rng.standard_normal(size)
        spec = QuantizerSpec(alpha=alpha, d=d, n=n, grad_scale=a)
        want_x = oracle_backward_x(g, u, alpha, d, n)
        want_a = oracle_backward_alpha(g, u, alpha, d, n, a)
        got_x = quantize_backward_x(g, u, spec)
        got_a = float(quantize_backward_alpha(g, u, spec))
        ut, at = Tensor(u, requires_grad=True), Tensor(alpha, requires_grad=True)
        node = quantize(ut, spec, at)
        grads = backward(tensor_sum(mul(node, Tensor(g))))
        worst = max(
            worst,
            float(np.max(np.abs(got_x - want_x))),
            abs(got_a - want_a),
            float(np.max(np.abs(grads[ut] - want_x))),
            abs(float(grads[at]) - want_a),
        )
    passed = bool(worst <= 1e-12)
    return CheckResult("ste_indicators", passed, trials, worst)


def check_smooth_ops(trials=20, eps=1e-6, seed=0, tolerance=DEFAULT_TOLERANCE):
    """Tape gradients of a composite of the differentiable ops vs central differences."""
    if trials < 1:
        raise ContractError("gradcheck needs at least one trial")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        w0 = rng.standard_normal((3, 4))
        x = rng.standard_normal((2, 5, 4))
        c = rng.standard_normal((5, 3))
        labels = rng.integers(0, 3, size=5)

        def build(w):
            steps = [matmul(take(Tensor(x), t), transpose(w)) for t in range(2)]
            h = mean(stack([sigmoid(s) for s in steps]), axis=0)
            bias = expand(reshape(Tensor(c[0]), (1, 3)), (5, 3))
            return cross_entropy(add(mul(h, Tensor(c)), bias), labels)

        w = Tensor(w0, requires_grad=True)
        tape = backward(build(w))[w]
        fd = central_difference(lambda arr: build(Tensor(arr)).item(), w0, eps)
        worst = max(worst, float(np.max(np.abs(tape - fd))))
    return CheckResult("smooth_ops", bool(worst <= tolerance), trials, worst)


def _softmax_xent(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(len(labels)), labels].mean())


def linearized_loss(net, record, x, labels, weights, classifier_weight, classifier_bias):
    """Loss of `net` linearized along the straight-through slopes at the point `record` saw.

    Spikes become s_base + slope * (u - u_base); the membrane carries the
    part of du that the (possibly detached) reset does not cancel.
    """
    h_in = x
    for layer, w in zip(range(net.depth), weights):
        params = net.neurons[layer].current_params()
        trace = record.traces[layer]
        u_base, s_base, h_base = np.stack(trace.u), np.stack(trace.s), np.stack(trace.h)
        if params.kind in INTEGER_KINDS:
            spec = params.quantizer
            slope = pass_through_mask(u_base, spec) / spec.n
            reset_slope = slope * spec.n
        else:
            slope = (np.abs(u_base - params.v_th) <= params.surrogate_width).astype(np.float64)
            reset_slope = slope
        if params.detach_reset:
            reset_slope = np.zeros_like(reset_slope)
        pre = h_in @ w.T
        h = np.zeros(pre.shape[1:])
        outs = []
        for t in range(pre.shape[0]):
            du = h + pre[t] - u_base[t]
            outs.append(s_base[t] + slope[t] * du)
            h = h_base[t] + params.beta * (du - reset_slope[t] * du)
        h_in = np.stack(outs)
    logits = h_in.mean(axis=0) @ classifier_weight.T + classifier_bias
    return _softmax_xent(logits, labels)


def _interior_inputs(rng, kind, steps, batch, width):
    """Inputs whose membrane values stay off rounding ties and window edges."""
    if kind in INTEGER_KINDS:
        base = rng.integers(0, 3, size=(steps, batch, width)).astype(np.float64)
        return base + rng.uniform(0.1, 0.3, size=base.shape)
    return rng.uniform(0.2, 0.8, size=(steps, batch, width))


def check_network_gradients(kind=ASN, trials=10, eps=1e-6, seed=0, tolerance=DEFAULT_TOLERANCE, d=4, steps=2):
    """BPTT weight gradients of a 2-unit net against central differences of its linearization."""
    if trials < 1:
        raise ContractError("gradcheck needs at least one trial")
    if kind not in NETWORK_KINDS:
        raise ContractError(f"network gradient check supports {NETWORK_KINDS}, not {kind!r}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(trials):
        params = make_neuron_params(kind, d=d) if kind in INTEGER_KINDS else make_neuron_params(kind)
        net = SpikingMLP(2, [2], 2, params, seed=seed + trial)
        net.set_parameter("l1.weight", np.eye(2))
        x = _interior_inputs(rng, kind, steps, 3, 2)
        labels = rng.integers(0, 2, size=3)
        record = ForwardRecord()
        loss = cross_entropy(net(Tensor(x), record=record), labels)
        grads = backward(loss)
        w1, wc, bc = net.weights[0].data, net.classifier_weight.data, net.classifier_bias.data
        checks = (
            (net.weights[0], lambda a: linearized_loss(net, record, x, labels, [a], wc, bc), w1),
            (net.classifier_weight, lambda a: linearized_loss(net, record, x, labels, [w1], a, bc), wc),
            (net.classifier_bias, lambda a: linearized_loss(net, record, x, labels, [w1], wc, a), bc),
        )
        for tensor, f, value in checks:
            fd = central_difference(f, value, eps)
            worst = max(worst, float(np.max(np.abs(grads[tensor] - fd))))
    result = CheckResult(f"network_gradients[{kind}]", bool(worst <= tolerance), trials, worst)
    logger.info("%s: max deviation %.3e", result.name, worst)
    return result


def run_all(kind=ASN, trials=10, eps=1e-6, seed=0, tolerance=DEFAULT_TOLERANCE):
    """The full audit used by the `gradcheck` command."""
    if trials < 1:
        raise ContractError("gradcheck needs at least one trial (nothing checked is not a pass)")
    return [
        check_ste_indicators(trials=trials * 100, seed=seed),
        check_smooth_ops(trials=trials, eps=eps, seed=seed, tolerance=tolerance),
        check_network_gradients(kind, trials=trials, eps=eps, seed=seed, tolerance=tolerance),
    ]
