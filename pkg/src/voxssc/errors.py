"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An operation was called with arguments that break its contract."""


class BehindCameraError(ContractViolationError):
    """A 3D point has non-positive depth in the camera frame."""


class UndefinedLossError(ContractViolationError):
    """A loss was requested on an input where it is undefined (e.g. every voxel ignored)."""


class ConfigError(ValueError):
    """A configuration file or value is invalid."""


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN or infinite loss."""
