class CrowdIRTError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CrowdIRTError, ValueError):
    """Inputs outside an operation's domain."""


class ParseError(DomainError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


class IngestionError(DomainError):
    """Raw labeled outputs that cannot be graded."""


class NumericError(CrowdIRTError, ArithmeticError):
    """A computation produced a non-finite value."""
