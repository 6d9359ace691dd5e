"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(RuntimeError):
    """A documented precondition of an operation was violated."""


class MissingNodeError(ContractError):
    """A tensor's ancestry is not on the tape being replayed."""


class ConfigurationError(ValueError):
    """An experiment or layer configuration is invalid."""


class ParseError(ValueError):
    """A data file line could not be parsed."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}, line {line_no}: {message}")
        self.path = path
        self.line_no = line_no


class EmptyInputError(ValueError):
    """An input file held no records."""


class SamplingError(RuntimeError):
    """No admissible item is left to sample."""
