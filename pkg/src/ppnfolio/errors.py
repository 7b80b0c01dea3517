"""Exception hierarchy shared across the package."""


class PpnError(Exception):
    """Base class for every error raised by ppnfolio."""


class ContractError(PpnError, ValueError):
    """Inputs violate an operation's documented contract (shape, simplex, range)."""


class ParseError(PpnError):
    """A price file could not be parsed."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class AlignmentError(PpnError):
    """Price files share no timestamps with the requested grid."""


class DataError(PpnError):
    """A panel cannot be used as given (e.g. an asset with no observations)."""


class ConfigError(PpnError):
    """Invalid or inconsistent run configuration."""


class TrainingDiverged(PpnError):
    """Reward or gradient became non-finite; carries the last good parameters."""

    def __init__(self, message, step, last_good=None):
        super().__init__(message)
        self.step = step
        self.last_good = last_good
