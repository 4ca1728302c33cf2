"""Exception hierarchy shared by every spikekit module."""


class SpikeKitError(Exception):
    """Base class for all spikekit errors."""


class DimensionError(SpikeKitError, ValueError):
    """Array shapes do not agree for the requested operation."""


class NonFiniteError(SpikeKitError, ArithmeticError):
    """An operation produced NaN or Inf."""


class ContractError(SpikeKitError):
    """A caller violated an operation's precondition."""


class FoldingContractError(ContractError):
    """Activations cannot be unfolded into binary spikes (non-integer or out of range)."""


class EquivalenceViolation(SpikeKitError):
    """Spike-driven inference diverged from the training-mode computation."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class IdxFormatError(SpikeKitError, ValueError):
    """Malformed IDX file. `offset` is the byte offset where parsing failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ContainerFormatError(SpikeKitError, ValueError):
    """Malformed SPKF checkpoint container."""


class ConfigError(SpikeKitError, ValueError):
    """Experiment config failed validation."""


class TrainingAborted(SpikeKitError):
    """Training stopped because the loss or a gradient became non-finite."""

    def __init__(self, message, layer=None, epoch=None):
        super().__init__(f"{message} (layer={layer}, epoch={epoch})")
        self.layer = layer
        self.epoch = epoch
