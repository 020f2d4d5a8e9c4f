"""Exception hierarchy."""


class PilotQKDError(Exception):
    """Base class for errors raised by this package."""


class EmptyFrameError(PilotQKDError, ValueError):
    pass


class AliasingError(PilotQKDError, ValueError):
    pass


class LockError(PilotQKDError, RuntimeError):
    """The pilot tone could not be located with sufficient SNR."""


class UnwrapError(PilotQKDError, RuntimeError):
    pass


class CalibrationError(PilotQKDError, RuntimeError):
    pass


class UnphysicalStateError(PilotQKDError, ValueError):
    """A covariance matrix violates the uncertainty principle."""


class ConditioningError(PilotQKDError, ArithmeticError):
    pass


class BracketError(PilotQKDError, RuntimeError):
    pass


class ConfigError(PilotQKDError, ValueError):
    """Invalid or unparsable scenario configuration.

    Parameters
    ----------
    message : str
        Human readable description.
    field : str, optional
        Offending config key.
    line : int, optional
        1-based line number in the source file.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class StageError(PilotQKDError, RuntimeError):
    """Wraps an error raised inside one stage of the end-to-end chain."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")
