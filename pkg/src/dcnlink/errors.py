"""Exception types shared across the package."""


class DcnLinkError(Exception):
    """Base class for all errors raised by dcnlink."""


class ConfigError(DcnLinkError):
    """Bad or incomplete configuration (library, rules, design space)."""


class SequenceError(ConfigError, ValueError):
    """Malformed component-sequence text."""

    def __init__(self, text: str, position: int, char: str):
        self.text = text
        self.position = position  # 1-based
        self.char = char
        super().__init__(
            f"invalid component letter {char!r} at position {position} in {text!r}"
        )


class DataError(DcnLinkError):
    """Malformed or unusable measurement data."""


class DegenerateFitError(DataError):
    """Mixture fit collapsed (zero-variance input or vanishing component)."""


class ConvergenceError(DataError):
    """Iteration budget exhausted before reaching tolerance.

    Carries the last iterate in ``last_fit`` so callers can inspect it.
    """

    def __init__(self, message: str, last_fit=None):
        self.last_fit = last_fit
        super().__init__(message)


class DegenerateTrainingError(DataError):
    """Training data contains a single class; no stump can be learned."""


class NoSplitError(DataError):
    """Fewer than two distinct feature values; no candidate threshold exists."""


class UnidentifiableError(DataError):
    """Calibration system is rank deficient.

    ``columns`` lists the parameter columns that are linearly dependent on
    the others.
    """

    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(
            "calibration system is rank deficient; dependent columns: "
            + ", ".join(self.columns)
        )
