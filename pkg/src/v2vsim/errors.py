"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class InvalidInputError(SimError):
    """Input violates an operation's precondition."""


class FramingError(SimError):
    """Bit-stream length inconsistent with the framing it claims to carry."""


class CrcError(SimError):
    """Frame integrity check failed."""


class FormatError(SimError):
    """Malformed serialized structure (bad magic, version, or truncation)."""


class ConfigError(SimError):
    """A configuration value violates a module precondition."""


class ScenarioValidationError(SimError):
    """Scenario failed validation; carries every error found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DisconnectedGraphError(SimError):
    """Operation requires a connected graph."""


class IntegrityError(SimError):
    """Fetched chunk bytes do not hash to the requested CID."""


class ChunkNotFoundError(SimError):
    """No reachable provider holds the requested CID."""


class StorageFullError(SimError):
    """Store over target occupancy with nothing evictable."""


class InvariantViolation(SimError):
    """A runtime audit failed; the run must abort."""
