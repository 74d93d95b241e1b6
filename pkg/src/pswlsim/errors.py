"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class DeviceWornOut(SimError):
    """Every erase candidate on a device has reached its P/E cycle limit."""


class CapacityExceeded(SimError):
    """A logical page number is outside the device's logical capacity."""


class DomainError(SimError):
    """A numeric argument is outside the function's domain."""


class ConfigError(SimError):
    """Configuration failed validation."""


class EmptyGroup(SimError):
    """A disk group that must be non-empty is empty."""


class UnsupportedRaidLevel(SimError):
    """A scaling scheme was asked to plan for a RAID level it does not support."""


class FormatError(SimError):
    """A trace file is too malformed to replay."""


class IoError(SimError):
    """A trace file could not be read."""
