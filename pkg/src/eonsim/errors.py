"""Exception hierarchy shared by all eonsim modules."""


class EonsimError(Exception):
    """Base class for all errors raised by eonsim."""


class TopologyError(EonsimError):
    """Malformed or invalid topology (parse failure, disconnected graph, self-loop, ...)."""


class NoPathError(EonsimError):
    """No route exists between the requested endpoints."""


class QotError(EonsimError):
    """Quality-of-transmission evaluation failed (frequency out of range, nonphysical regime)."""


class SpectrumError(EonsimError):
    """Spectrum grid misuse: overlapping allocation or double release (simulator bugs)."""


class ConfigError(EonsimError):
    """Invalid scenario configuration (unknown keys, missing files, bad values)."""
