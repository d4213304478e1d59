"""Exception hierarchy shared by the package and the CLI."""


class RdgcnError(Exception):
    """Base class for every error raised by this package."""


class InputError(RdgcnError):
    """Bad user input: malformed files, inconsistent datasets."""


class ConlluParseError(InputError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TreeValidationError(InputError):
    def __init__(self, message, sentence=None):
        self.sentence = sentence
        if sentence is not None:
            message = f"sentence {sentence}: {message}"
        super().__init__(message)


class DatasetError(InputError):
    pass


class ConfigError(InputError):
    pass


class DomainError(RdgcnError, ValueError):
    """Argument outside the domain of an importance or reward function."""


class NumericError(RdgcnError, ArithmeticError):
    """Non-finite value produced during a forward or backward pass."""
