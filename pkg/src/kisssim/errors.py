"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
InternalConsistencyError -> 3.
"""


class KissSimError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KissSimError):
    """Invalid configuration or command usage."""


class DataError(KissSimError):
    """Problem with input data (trace files, analysis inputs)."""


class TraceParseError(DataError):
    """Malformed trace file row. Carries the file path and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ReferentialIntegrityError(DataError):
    """A record references an entity that does not exist in its companion file."""


class DomainError(DataError):
    """An analysis operation was called with out-of-domain arguments."""


class InternalConsistencyError(KissSimError):
    """The simulator reached a state that violates its own invariants."""


class PolicyContractError(InternalConsistencyError):
    """A replacement policy was driven outside its contract."""
