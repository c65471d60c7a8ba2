"""Exception types shared across the simulator.

Each maps to a CLI exit code: ConfigError -> 2, IOFailure -> 3,
SimulationFault -> 4. ProtocolError is reported over the wire and never
kills the server.
"""


class OffTerSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(OffTerSimError):
    """Invalid configuration (bad ranges, malformed config file, ...)."""


class DomainError(OffTerSimError):
    """Query outside the terrain grid extent."""


class SimulationFault(OffTerSimError):
    """Non-finite state or input; the episode aborts with a diagnostic."""


class ProtocolError(OffTerSimError):
    """Client drove an environment through an invalid transition."""


class IOFailure(OffTerSimError):
    """Filesystem error while writing logs or exports."""
