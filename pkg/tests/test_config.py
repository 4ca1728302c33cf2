from pathlib import Path

import numpy as np
import pytest

from spikekit.config import (
    build_dataset,
    build_network,
    build_neuron_params,
    build_train_config,
    config_hash,
    load_config,
    parse_config,
)
from spikekit.data import write_idx
from spikekit.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]


def _raw(**sections):
    raw = {
        "neuron": {"kind": "asn", "alpha": 0.5, "d": 4},
        "net": {"hidden": [8], "timesteps": 2},
        "data": {"kind": "shifted", "samples": 32, "features": 6, "classes": 2},
    }
    raw.update(sections)
    return raw


class TestParse:
    def test_defaults_filled(self):
        cfg = parse_config(_raw())
        assert cfg.neuron["beta"] == 0.5
        assert cfg.neuron["bound_mode"] == "integerized"
        assert cfg.train["optimizer"] == "adam"
        assert cfg.output_dir == "validation/results"

    def test_unknown_key_named_by_path(self):
        raw = _raw(neuron={"kind": "asn", "alfa": 1.0})
        with pytest.raises(ConfigError, match="neuron.alfa"):
            parse_config(raw)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config({**_raw(), "extra": 1})

    def test_bool_is_not_a_number(self):
        with pytest.raises(ConfigError, match="wrong type"):
            parse_config(_raw(net={"hidden": [8], "timesteps": True}))

    def test_out_of_range(self):
        with pytest.raises(ConfigError, match="out of range"):
            parse_config(_raw(train={"lr": -1.0}))

    def test_missing_section(self):
        raw = _raw()
        del raw["net"]
        with pytest.raises(ConfigError, match="net"):
            parse_config(raw)

    def test_cross_field_rule(self):
        with pytest.raises(ConfigError, match="neuron"):
            parse_config(_raw(neuron={"kind": "asn", "n": 4.0}))

    def test_idx_section_needs_paths(self):
        with pytest.raises(ConfigError, match="data.images"):
            parse_config(_raw(data={"kind": "idx", "labels": "x"}))


class TestHash:
    def test_key_order_does_not_matter(self):
        a = {"b": 1, "a": [1, 2]}
        b = {"a": [1, 2], "b": 1}
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 64

    def test_value_change_changes_hash(self):
        assert parse_config(_raw()).hash != parse_config(_raw(train={"lr": 0.5})).hash


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    @pytest.mark.parametrize("name", sorted(p.name for p in (ROOT / "configs").glob("*.json")))
    def test_shipped_configs_parse(self, name):
        cfg = load_config(ROOT / "configs" / name)
        assert cfg.source.endswith(name)


class TestBuilders:
    def test_time_expansion(self):
        cfg = parse_config(_raw())
        assert cfg.time_expansion() == 1
        assert cfg.time_expansion("lif") == 4
        cfg = parse_config(_raw(net={"hidden": [8], "expand_spike_time": False}))
        assert cfg.time_expansion("lif") == 1

    def test_psn_timesteps_follow_expansion(self):
        params = build_neuron_params(parse_config(_raw()), kind="psn")
        assert params.psn_weight.shape == (8, 8)

    def test_network_and_data(self):
        cfg = parse_config(_raw())
        data = build_dataset(cfg)
        net = build_network(cfg, data.features, data.class_count, kind="nasn", seed=4)
        assert (data.samples, data.features) == (32, 6)
        assert net.hidden == [8]
        assert net.neuron_params()[0].quantizer.n == 4.0
        assert net.seed == 4

    def test_encoder_and_readout_options(self):
        cfg = parse_config(_raw(net={"hidden": [8], "encoder_mean": 0.9, "encoder_centered": True, "readout_gain": 0.0}))
        net = build_network(cfg, 6, 2)
        np.testing.assert_allclose(net.weights[0].data.sum(axis=1), 0.9)
        assert not net.classifier_weight.data.any()
        assert cfg.train["grad_scale"] is None

    def test_negative_readout_gain_rejected(self):
        with pytest.raises(ConfigError, match="net.readout_gain"):
            parse_config(_raw(net={"hidden": [8], "readout_gain": -1.0}))

    def test_train_seed_override(self):
        tcfg = build_train_config(parse_config(_raw(train={"seed": 3})), seed=11)
        assert tcfg.seed == 11

    def test_idx_data(self, tmp_path):
        images = np.arange(3 * 2 * 2, dtype=np.uint8).reshape(3, 2, 2)
        write_idx(images, np.array([0, 1, 1], dtype=np.uint8), tmp_path / "i", tmp_path / "l")
        raw = _raw(data={"kind": "idx", "images": str(tmp_path / "i"), "labels": str(tmp_path / "l"), "limit": 2})
        data = build_dataset(parse_config(raw))
        assert data.samples == 2
        assert data.meta["image_shape"] == (2, 2)
