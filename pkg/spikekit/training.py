"""Mini-batch BPTT training, the training curve, and the paradigm timing benchmark."""

import csv
import logging
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .data import Dataset, batches, encode_temporal, expand_time
from .errors import ContractError, NonFiniteError, TrainingAborted
from .network import ForwardRecord, SpikingMLP, make_optimizer
from .neurons import ASN, LIF, make_neuron_params
from .tensor import Tensor, backward, cross_entropy, no_grad

logger = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd-momentum")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    epochs: int = 10
    batch: int = 32
    seed: int = 0
    grad_scale: Optional[float] = None
    freeze_alpha: bool = False
    alpha_lr: Optional[float] = None

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not self.lr > 0:
            raise ContractError(f"lr must be > 0, got {self.lr}")
        if self.grad_scale is not None and not self.grad_scale > 0:
            raise ContractError(f"grad_scale must be > 0, got {self.grad_scale}")
        if self.alpha_lr is not None and not self.alpha_lr > 0:
            raise ContractError(f"alpha_lr must be > 0, got {self.alpha_lr}")
        if self.batch < 1:
            raise ContractError(f"batch must be >= 1, got {self.batch}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_acc: float
    alphas: List[Optional[float]]
    truncation: List[Optional[float]]
    rates: List[float]


@dataclass
class TrainResult:
    curve: List[EpochStats] = field(default_factory=list)
    initial_alphas: List[Optional[float]] = field(default_factory=list)
    final_accuracy: float = 0.0

    @property
    def final_alphas(self):
        return self.curve[-1].alphas if self.curve else self.initial_alphas

    def alpha_moves(self, layer=0):
        """Signed change of a layer's mean alpha over the run (None without alpha)."""
        start, end = self.initial_alphas[layer], self.final_alphas[layer]
        if start is None or end is None:
            return None
        return end - start


def truncated_fraction(trace, params):
    """Share of quantizer inputs whose rounded value the clip window altered."""
    if trace is None or params.quantizer is None or not trace.u:
        return None
    lo, hi = params.quantizer.clip_window()
    u = np.round(np.stack(trace.u))
    return float(np.mean((u < lo) | (u > hi)))


def _layer_of(name):
    return name.split(".", 1)[0] if name else None


def evaluate(net, dataset, timesteps, time_expansion=1, batch=256):
    """Accuracy of `net` on `dataset` without building a tape."""
    correct = 0
    with no_grad():
        for inputs, labels in batches(dataset, batch):
            x = encode_temporal(inputs, timesteps)
            if time_expansion > 1:
                x = expand_time(x, time_expansion)
            logits = net(x)
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
    return correct / dataset.samples


def _train_step(net, optimizer, x, labels, cfg, epoch):
    """One forward/backward/update. Returns (loss, correct, record)."""
    record = ForwardRecord()
    try:
        logits = net(Tensor(x), record=record)
        loss = cross_entropy(logits, labels)
    except NonFiniteError as exc:
        failed = len(record.pre_activations)
        layer = "classifier" if failed >= net.depth else f"l{failed + 1}"
        raise TrainingAborted(f"non-finite forward value: {exc}", layer=layer, epoch=epoch) from exc
    try:
        leaf_grads = backward(loss)
    except NonFiniteError as exc:
        culprit = str(exc).rsplit(" ", 1)[-1]
        raise TrainingAborted(f"non-finite gradient: {exc}", layer=_layer_of(culprit), epoch=epoch) from exc
    grads = {}
    for leaf, g in leaf_grads.items():
        if leaf.name is None:
            continue
        if cfg.freeze_alpha and leaf.name.endswith(".alpha"):
            continue
        grads[leaf.name] = g
    try:
        optimizer.step(net, grads)
    except NonFiniteError as exc:
        raise TrainingAborted(f"parameter update diverged: {exc}", layer=None, epoch=epoch) from exc
    correct = int(np.sum(np.argmax(logits.data, axis=1) == labels))
    return loss.item(), correct, record


def train(
    net: SpikingMLP,
    dataset: Dataset,
    cfg: TrainConfig,
    timesteps: int = 4,
    time_expansion: int = 1,
    on_epoch: Optional[Callable[[EpochStats, SpikingMLP], None]] = None,
) -> TrainResult:
    """Train with cross-entropy and BPTT through every timestep.

    `time_expansion` repeats each encoded step (spike-paradigm baselines run
    over T*D binary steps). `on_epoch` is called after every epoch.
    """
    if dataset.samples == 0:
        raise ContractError("cannot train on an empty dataset")
    if dataset.features != net.in_features:
        raise ContractError(f"dataset has {dataset.features} features, net expects {net.in_features}")
    if cfg.freeze_alpha:
        for neuron in net.neurons:
            if neuron.alpha is not None:
                neuron.alpha.requires_grad = False
    elif cfg.grad_scale is not None:
        # a is carried by each quantizer spec
        for neuron in net.neurons:
            if neuron.alpha is not None and neuron.alpha.requires_grad:
                neuron.set_grad_scale(cfg.grad_scale)
    optimizer = make_optimizer(cfg.optimizer, cfg.lr, cfg.alpha_lr)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(initial_alphas=net.alphas())
    params_now = net.neuron_params()

    for epoch in range(1, cfg.epochs + 1):
        losses, correct, seen = [], 0, 0
        trunc_sum = np.zeros(net.depth)
        rate_sum = np.zeros(net.depth)
        steps = 0
        for inputs, labels in batches(dataset, cfg.batch, rng):
            x = encode_temporal(inputs, timesteps)
            if time_expansion > 1:
                x = expand_time(x, time_expansion)
            loss, hits, record = _train_step(net, optimizer, x, labels, cfg, epoch)
            if not np.isfinite(loss):
                raise TrainingAborted("loss is not finite", layer=None, epoch=epoch)
            losses.append(loss * labels.size)
            correct += hits
            seen += labels.size
            steps += 1
            for i, (trace, act) in enumerate(zip(record.traces, record.activations)):
                frac = truncated_fraction(trace, params_now[i])
                trunc_sum[i] += 0.0 if frac is None else frac
                rate_sum[i] += float(np.mean(act.data))
            params_now = net.neuron_params()
        has_window = [p.quantizer is not None for p in params_now]
        stats = EpochStats(
            epoch=epoch,
            loss=sum(losses) / seen,
            train_acc=correct / seen,
            alphas=net.alphas(),
            truncation=[trunc_sum[i] / steps if has_window[i] else None for i in range(net.depth)],
            rates=[rate_sum[i] / steps for i in range(net.depth)],
        )
        result.curve.append(stats)
        logger.info("epoch %d loss %.4f acc %.3f alphas %s", epoch, stats.loss, stats.train_acc, stats.alphas)
        if on_epoch is not None:
            on_epoch(stats, net)

    result.final_accuracy = evaluate(net, dataset, timesteps, time_expansion)
    return result


def curve_header(depth):
    return (
        ["epoch", "loss", "train_acc"]
        + [f"alpha_l{i + 1}" for i in range(depth)]
        + [f"trunc_l{i + 1}" for i in range(depth)]
        + [f"rate_l{i + 1}" for i in range(depth)]
    )


def _cell(value):
    return "" if value is None else repr(float(value))


def write_curve_csv(result, depth, path):
    """epoch,loss,train_acc,alpha_l1..,trunc_l1..,rate_l1.. ; blank where a layer has no alpha."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(curve_header(depth))
        for row in result.curve:
            writer.writerow(
                [row.epoch, _cell(row.loss), _cell(row.train_acc)]
                + [_cell(a) for a in row.alphas]
                + [_cell(t) for t in row.truncation]
                + [_cell(r) for r in row.rates]
            )


@dataclass
class BenchResult:
    d: int
    timesteps: int
    width: int
    batch: int
    integer_seconds: List[float]
    binary_seconds: List[float]

    @property
    def integer_median(self):
        return statistics.median(self.integer_seconds)

    @property
    def binary_median(self):
        return statistics.median(self.binary_seconds)

    @property
    def ratio(self):
        return self.binary_median / self.integer_median

    def to_dict(self):
        return {
            "d": self.d,
            "timesteps": self.timesteps,
            "width": self.width,
            "batch": self.batch,
            "integer_steps": self.timesteps,
            "binary_steps": self.timesteps * self.d,
            "integer_epoch_seconds": self.integer_median,
            "binary_epoch_seconds": self.binary_median,
            "ratio": self.ratio,
            "trial_seconds": {"integer": self.integer_seconds, "binary": self.binary_seconds},
        }


def _time_epoch(net, data, labels, timesteps, expansion, lr):
    optimizer = make_optimizer("adam", lr)
    cfg = TrainConfig(lr=lr)
    start = time.perf_counter()
    for x in data:
        enc = encode_temporal(x, timesteps)
        if expansion > 1:
            enc = expand_time(enc, expansion)
        _train_step(net, optimizer, enc, labels, cfg, epoch=0)
    return time.perf_counter() - start


def benchmark_training_efficiency(
    d=4, timesteps=4, width=256, batch=32, batches_per_epoch=4, trials=5, in_features=64, classes=4, seed=0
):
    """Wall-clock per epoch: ASN over T steps vs LIF over T*D binary steps.

    Both nets share widths; timings are the median over `trials`.
    """
    if trials < 1:
        raise ContractError("need at least one trial")
    rng = np.random.default_rng(seed)
    data = [rng.uniform(0.0, 1.0, size=(batch, in_features)) for _ in range(batches_per_epoch)]
    labels = rng.integers(0, classes, size=batch)
    integer_times, binary_times = [], []
    for trial in range(trials):
        net_a = SpikingMLP(in_features, [width, width], classes,
                           make_neuron_params(ASN, d=d), seed=seed + trial)
        net_b = SpikingMLP(in_features, [width, width], classes,
                           make_neuron_params(LIF, v_th=1.0), seed=seed + trial)
        integer_times.append(_time_epoch(net_a, data, labels, timesteps, 1, 1e-3))
        binary_times.append(_time_epoch(net_b, data, labels, timesteps, d, 1e-3))
        logger.info("trial %d: integer %.3fs binary %.3fs", trial, integer_times[-1], binary_times[-1])
    return BenchResult(d, timesteps, width, batch, integer_times, binary_times)
