"""Exception types shared across the package.

The CLI maps ConfigError (and bad usage) to exit code 2 and everything
else raised at runtime (NonFiniteLossError in particular) to exit code 3.
"""


class LatentTranslationError(Exception):
    """Base class for all package errors."""


class DimensionError(LatentTranslationError):
    """Image/label dimensions violate a contract (e.g. not a multiple of 8)."""


class ArchitectureError(LatentTranslationError):
    """Tensor shape incompatible with a network's architecture descriptor."""


class PipelineError(LatentTranslationError):
    """Translation pipeline assembled from incompatible networks."""


class ConfigError(LatentTranslationError):
    """Invalid configuration: unknown key, bad type, or bad value."""


class NonFiniteInputError(LatentTranslationError):
    """A loss received a non-finite input tensor."""


class NonFiniteLossError(LatentTranslationError):
    """Training produced a non-finite loss term; carries the term name."""

    def __init__(self, term: str, step: int, value: float):
        super().__init__(f"non-finite loss term '{term}' at step {step}: {value}")
        self.term = term
        self.step = step
        self.value = value


class DatasetError(LatentTranslationError):
    """Base class for dataset read/write failures."""


class MissingManifestError(DatasetError):
    """Dataset directory has no manifest.json."""


class MalformedManifestError(DatasetError):
    """manifest.json is unparseable or missing required keys."""


class MissingFileError(DatasetError):
    """manifest references an image file that does not exist on disk."""


class DimensionMismatchError(DatasetError):
    """An image on disk does not match the dimensions in the manifest."""


class CheckpointError(LatentTranslationError):
    """Base class for checkpoint failures."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint file is truncated or not a checkpoint container."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written with an unsupported format version."""


class CheckpointShapeError(CheckpointError):
    """A stored tensor does not match the architecture descriptor."""


class FrozenParameterError(LatentTranslationError):
    """A parameter that must stay fixed changed during training."""
