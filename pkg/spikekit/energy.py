"""Synaptic operation counts and an AC/MAC energy estimate for folded networks.

The cost model is the usual accumulate vs multiply-accumulate split. The
default constants are artifact defaults; override them through
SPIKEKIT_E_AC_PJ / SPIKEKIT_E_MAC_PJ or the config's `energy` section.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional

from .folding import ROLE_CLASSIFIER, InferenceRecord, run_folded

PICO = 1e-12
DEFAULT_E_AC_PJ = 0.9
DEFAULT_E_MAC_PJ = 4.6


@dataclass
class LayerOps:
    layer: str
    mac_count: int = 0
    ac_count: int = 0
    constant_adds: int = 0
    spike_events: int = 0
    firing_rate: float = 0.0
    energy_joules: float = 0.0


@dataclass
class OpCountReport:
    layers: List[LayerOps]
    e_ac_pj: float
    e_mac_pj: float
    totals: Optional[LayerOps] = field(default=None)

    def __post_init__(self):
        if self.totals is None:
            events = sum(l.spike_events for l in self.layers)
            self.totals = LayerOps(
                layer="total",
                mac_count=sum(l.mac_count for l in self.layers),
                ac_count=sum(l.ac_count for l in self.layers),
                constant_adds=sum(l.constant_adds for l in self.layers),
                spike_events=events,
                firing_rate=0.0,
                energy_joules=sum(l.energy_joules for l in self.layers),
            )

    @property
    def energy_joules(self):
        return self.totals.energy_joules

    def to_dict(self):
        keys = ("mac_count", "ac_count", "constant_adds", "firing_rate", "energy_joules")
        return {
            "constants_pj": {"e_ac": self.e_ac_pj, "e_mac": self.e_mac_pj},
            "layers": [{"layer": l.layer, **{k: asdict(l)[k] for k in keys}} for l in self.layers],
            "totals": {k: asdict(self.totals)[k] for k in keys if k != "firing_rate"},
            "energy_joules": self.energy_joules,
        }


def layer_energy(mac, ac, constant_adds, e_ac_pj, e_mac_pj):
    return (e_ac_pj * ac + e_mac_pj * mac + e_mac_pj * constant_adds) * PICO


def count_ops(folded, record, e_ac_pj=DEFAULT_E_AC_PJ, e_mac_pj=DEFAULT_E_MAC_PJ):
    """Exact event counts from a completed spike-inference pass."""
    encoder = folded.layers[0]
    steps, batch = record.layer_inputs[0].shape[:2]
    entries = []
    mac = steps * batch * encoder.fan_in * encoder.fan_out
    entries.append(LayerOps(
        layer="encoder",
        mac_count=mac,
        energy_joules=layer_energy(mac, 0, 0, e_ac_pj, e_mac_pj),
    ))
    for idx, (layer, train) in enumerate(zip(folded.layers[1:], record.spike_trains), start=1):
        events = train.spike_count
        slots = train.data.size
        ac = events * layer.fan_out
        adds = steps * batch if layer.constant.any() else 0
        name = "classifier" if layer.role == ROLE_CLASSIFIER else f"layer{idx}"
        entries.append(LayerOps(
            layer=name,
            ac_count=ac,
            constant_adds=adds,
            spike_events=events,
            firing_rate=events / slots if slots else 0.0,
            energy_joules=layer_energy(0, ac, adds, e_ac_pj, e_mac_pj),
        ))
    return OpCountReport(entries, e_ac_pj=e_ac_pj, e_mac_pj=e_mac_pj)


def measure(folded, inputs, e_ac_pj=DEFAULT_E_AC_PJ, e_mac_pj=DEFAULT_E_MAC_PJ):
    """Run spike inference on `inputs` and count its operations."""
    record = InferenceRecord()
    run_folded(inputs, folded, record=record)
    return count_ops(folded, record, e_ac_pj=e_ac_pj, e_mac_pj=e_mac_pj), record
