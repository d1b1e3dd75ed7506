"""Exception hierarchy. Everything raised on bad data derives from ``SummarizerError``."""


class SummarizerError(Exception):
    pass


class ShapeError(SummarizerError, ValueError):
    pass


class NumericDomainError(SummarizerError, ValueError):
    pass


class EmptyInputError(SummarizerError, ValueError):
    pass


class EncodingError(SummarizerError, ValueError):
    pass


class FormatError(SummarizerError, ValueError):
    """Malformed file content; ``line`` or ``offset`` locates the problem when known."""

    def __init__(self, message, line=None, offset=None):
        if line is not None:
            message = f"line {line}: {message}"
        elif offset is not None:
            message = f"offset {offset}: {message}"
        super().__init__(message)
        self.line = line
        self.offset = offset


class SchemaError(FormatError):
    pass


class RangeError(SummarizerError, IndexError):
    pass


class ContractError(SummarizerError, ValueError):
    pass


class TrainingError(SummarizerError):
    pass
