"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DataFormatError(ValueError):
    """A dataset file is malformed; the message carries the byte offset."""


class UsageError(RuntimeError):
    """An operation was invoked on an object in the wrong state."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the offending epoch and batch."""

    def __init__(self, epoch, batch, loss):
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch}: loss = {loss}"
        )
        self.epoch = epoch
        self.batch = batch
