"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration value."""


class ShapeError(ValueError):
    """Array dimensions do not match the network or problem."""


class CapabilityError(TypeError):
    """A scalar field lacks a derivative a loss needs."""


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, param_norm: float, loss: float):
        self.epoch = epoch
        self.param_norm = param_norm
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch} (parameter norm {param_norm:.6g})")
