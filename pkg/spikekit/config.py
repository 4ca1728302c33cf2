"""Strict JSON experiment configs.

Every section is checked against a schema before any work starts; an unknown
key anywhere is an error naming its dotted path, so a typo in an ablation
config cannot silently fall back to a default.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .data import Dataset, gen_shifted_task, load_idx
from .errors import ConfigError, ContractError
from .network import SpikingMLP
from .neurons import INTEGER_KINDS, NEURON_KINDS, PSN, SPIKE_KINDS, make_neuron_params
from .quantizers import BOUND_MODES, INTEGERIZED
from .training import OPTIMIZERS, TrainConfig

logger = logging.getLogger(__name__)

_NUMBER = (int, float)

# key -> (accepted types, default, check or None); default REQUIRED means required
REQUIRED = object()

NEURON_SCHEMA = {
    "kind": (str, REQUIRED, lambda v: v in NEURON_KINDS),
    "beta": (_NUMBER, 0.5, lambda v: 0 < v <= 1),
    "v_th": (_NUMBER, 1.0, None),
    "alpha": (_NUMBER, 0.0, None),
    "d": (int, 4, lambda v: v >= 1),
    "n": (_NUMBER + (type(None),), None, lambda v: v is None or v > 0),
    "bound_mode": (str, INTEGERIZED, lambda v: v in BOUND_MODES),
    "detach_reset": (bool, False, None),
    "surrogate_width": (_NUMBER, 0.5, lambda v: v > 0),
    "per_channel_alpha": (bool, False, None),
}

NET_SCHEMA = {
    "hidden": (list, REQUIRED, lambda v: len(v) >= 1 and all(isinstance(w, int) and w >= 1 for w in v)),
    "timesteps": (int, 4, lambda v: v >= 1),
    "seed": (int, 0, None),
    "gain": (_NUMBER, 1.0, lambda v: v > 0),
    "encoder_gain": (_NUMBER + (type(None),), None, lambda v: v is None or v > 0),
    "encoder_mean": (_NUMBER, 0.0, None),
    "encoder_centered": (bool, False, None),
    "readout_gain": (_NUMBER + (type(None),), None, lambda v: v is None or v >= 0),
    "expand_spike_time": (bool, True, None),
}

SHIFTED_SCHEMA = {
    "kind": (str, REQUIRED, lambda v: v == "shifted"),
    "seed": (int, 0, None),
    "samples": (int, 512, lambda v: v >= 2),
    "features": (int, 16, lambda v: v >= 1),
    "classes": (int, 4, lambda v: v >= 2),
    "shift": (_NUMBER, 0.0, None),
    "noise": (_NUMBER, 0.25, lambda v: v >= 0),
}

IDX_SCHEMA = {
    "kind": (str, REQUIRED, lambda v: v == "idx"),
    "images": (str, REQUIRED, None),
    "labels": (str, REQUIRED, None),
    "limit": (int, 0, lambda v: v >= 0),
}

TRAIN_SCHEMA = {
    "optimizer": (str, "adam", lambda v: v in OPTIMIZERS),
    "lr": (_NUMBER, 1e-3, lambda v: v > 0),
    "epochs": (int, 10, lambda v: v >= 0),
    "batch": (int, 32, lambda v: v >= 1),
    "seed": (int, 0, None),
    "grad_scale": (_NUMBER + (type(None),), None, lambda v: v is None or v > 0),
    "freeze_alpha": (bool, False, None),
    "alpha_lr": (_NUMBER + (type(None),), None, lambda v: v is None or v > 0),
}

ENERGY_SCHEMA = {
    "e_ac_pj": (_NUMBER + (type(None),), None, lambda v: v is None or v >= 0),
    "e_mac_pj": (_NUMBER + (type(None),), None, lambda v: v is None or v >= 0),
}

BENCH_SCHEMA = {
    "trials": (int, 5, lambda v: v >= 1),
    "batches": (int, 4, lambda v: v >= 1),
    "width": (int, 256, lambda v: v >= 1),
    "batch": (int, 32, lambda v: v >= 1),
}

TOP_LEVEL = ("neuron", "net", "data", "train", "energy", "bench", "output_dir")


def _check_section(raw, schema, path):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must be an object")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key {path}.{unknown[0]}")
    out = {}
    for key, (types, default, check) in schema.items():
        where = f"{path}.{key}"
        if key not in raw:
            if default is REQUIRED:
                raise ConfigError(f"missing required key {where}")
            out[key] = default
            continue
        value = raw[key]
        # bool is an int subclass; never accept it for numeric fields
        if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
            raise ConfigError(f"{where} has the wrong type: {value!r}")
        if not isinstance(value, types):
            raise ConfigError(f"{where} has the wrong type: {value!r}")
        if check is not None and not check(value):
            raise ConfigError(f"{where} is out of range: {value!r}")
        out[key] = value
    return out


def canonical_json(raw):
    return json.dumps(raw, sort_keys=True, separators=(",", ":"))


def config_hash(raw):
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    return hashlib.sha256(canonical_json(raw).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    neuron: dict
    net: dict
    data: dict
    train: dict
    energy: dict
    bench: dict
    output_dir: str
    raw: dict
    source: str = "<memory>"

    @property
    def hash(self):
        return config_hash(self.raw)

    @property
    def kind(self):
        return self.neuron["kind"]

    def time_expansion(self, kind=None):
        kind = kind or self.kind
        if kind in SPIKE_KINDS and self.net["expand_spike_time"]:
            return self.neuron["d"]
        return 1


def parse_config(raw, source="<memory>"):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]}")
    for section in ("neuron", "net", "data"):
        if section not in raw:
            raise ConfigError(f"missing required section {section}")
    data_raw = raw["data"]
    if not isinstance(data_raw, dict) or data_raw.get("kind") not in ("shifted", "idx"):
        raise ConfigError("data.kind must be 'shifted' or 'idx'")
    data_schema = SHIFTED_SCHEMA if data_raw["kind"] == "shifted" else IDX_SCHEMA
    output_dir = raw.get("output_dir", "validation/results")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir must be a non-empty string")
    cfg = ExperimentConfig(
        neuron=_check_section(raw["neuron"], NEURON_SCHEMA, "neuron"),
        net=_check_section(raw["net"], NET_SCHEMA, "net"),
        data=_check_section(data_raw, data_schema, "data"),
        train=_check_section(raw.get("train", {}), TRAIN_SCHEMA, "train"),
        energy=_check_section(raw.get("energy", {}), ENERGY_SCHEMA, "energy"),
        bench=_check_section(raw.get("bench", {}), BENCH_SCHEMA, "bench"),
        output_dir=output_dir,
        raw=raw,
        source=source,
    )
    # building the neuron validates cross-field rules (e.g. asn with n != 1)
    build_neuron_params(cfg)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    cfg = parse_config(raw, source=str(path))
    logger.info("loaded config %s (hash %s)", path, cfg.hash[:12])
    return cfg


def build_neuron_params(cfg, kind=None):
    kind = kind or cfg.kind
    nb = cfg.neuron
    overrides = dict(
        beta=nb["beta"],
        detach_reset=nb["detach_reset"],
        surrogate_width=nb["surrogate_width"],
    )
    if kind in INTEGER_KINDS:
        overrides.update(alpha=nb["alpha"], d=nb["d"], n=nb["n"], bound_mode=nb["bound_mode"],
                         per_channel_alpha=nb["per_channel_alpha"])
    elif kind == PSN:
        overrides["timesteps"] = cfg.net["timesteps"] * cfg.time_expansion(kind)
    else:
        overrides["v_th"] = nb["v_th"]
    try:
        return make_neuron_params(kind, **overrides)
    except ContractError as exc:
        raise ConfigError(f"neuron: {exc}") from exc


def build_dataset(cfg):
    db = cfg.data
    if db["kind"] == "shifted":
        return gen_shifted_task(db["seed"], db["samples"], db["features"], db["classes"], db["shift"], db["noise"])
    ds = load_idx(db["images"], db["labels"])
    if db["limit"]:
        ds = Dataset(ds.inputs[: db["limit"]], ds.labels[: db["limit"]], ds.meta)
    return ds


def build_network(cfg, in_features, classes, kind=None, seed=None):
    nb = cfg.net
    return SpikingMLP(
        in_features,
        nb["hidden"],
        classes,
        build_neuron_params(cfg, kind),
        seed=nb["seed"] if seed is None else seed,
        gain=nb["gain"],
        encoder_gain=nb["encoder_gain"],
        encoder_mean=nb["encoder_mean"],
        encoder_centered=nb["encoder_centered"],
        readout_gain=nb["readout_gain"],
    )


def build_train_config(cfg, seed=None):
    tb = dict(cfg.train)
    if seed is not None:
        tb["seed"] = seed
    return TrainConfig(**tb)
