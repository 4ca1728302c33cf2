"""spikekit: integer-trained spiking neurons with spike-driven inference.

The engine trains networks of ILIF-family neurons (ILIF, NILIF and the
adaptive-window ASN / NASN) on a small numpy autodiff tape, folds them into
binary-spike networks for inference, and counts the synaptic operations of
that inference path. LIF, PLIF and PSN are included as spike-paradigm
baselines.
"""

__version__ = "0.3.0"

from .errors import (  # noqa: E402
    ConfigError,
    ContainerFormatError,
    ContractError,
    DimensionError,
    EquivalenceViolation,
    FoldingContractError,
    IdxFormatError,
    NonFiniteError,
    SpikeKitError,
    TrainingAborted,
)
from .neurons import NEURON_KINDS, NeuronParams, make_neuron_params, run_neuron  # noqa: E402
from .quantizers import QuantizerSpec, quantize  # noqa: E402
from .tensor import Tensor, backward, no_grad  # noqa: E402
from .network import SpikingMLP  # noqa: E402
from .folding import fold_network, load_folded, save_folded, verify_equivalence  # noqa: E402
from .energy import count_ops, measure  # noqa: E402
from .data import Dataset, gen_shifted_task, load_idx, write_idx  # noqa: E402
from .training import TrainConfig, train  # noqa: E402
