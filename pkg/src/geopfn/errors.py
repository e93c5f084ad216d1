"""Exception hierarchy shared by all geopfn modules."""


class GeopfnError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(GeopfnError):
    """Tensor operands have incompatible shapes."""


class ContractError(GeopfnError):
    """A documented precondition was violated by the caller."""


class NumericsError(GeopfnError):
    """A NaN or Inf appeared where only finite values are allowed."""


class CapacityError(GeopfnError):
    """A task exceeds the bounds a checkpoint was built for."""


class PriorError(GeopfnError):
    """Task sampling failed (e.g. repeated degenerate draws)."""


class TrainingError(GeopfnError):
    """Training aborted; message carries step index and task seed."""


class DataError(GeopfnError):
    """Malformed or inconsistent input data (CSV rows, site tables)."""


class ContextError(GeopfnError):
    """A benchmark context could not be built (e.g. empty training set)."""


class CheckpointError(GeopfnError):
    """Base class for checkpoint (de)serialization failures."""


class NotACheckpointError(CheckpointError):
    """File does not start with the checkpoint magic."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class CorruptHeaderError(CheckpointError):
    """Checkpoint metadata failed to parse."""


class TruncatedBlobError(CheckpointError):
    """Checkpoint weight blob is shorter than the index promises."""
