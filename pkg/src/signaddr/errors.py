"""Exception hierarchy shared by every stage."""


class SignAddrError(Exception):
    """Base class for all package errors."""


class DomainError(SignAddrError, ValueError):
    """An argument falls outside the domain of an operation."""


class ParseError(SignAddrError, ValueError):
    """A text file could not be parsed."""

    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        where = ""
        if path is not None:
            where += f"{path}"
        if line_number is not None:
            where += f":{line_number}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(SignAddrError, ValueError):
    """Input data or configuration failed validation."""


class StageError(SignAddrError, RuntimeError):
    """A pipeline stage failed on one item."""

    def __init__(self, stage: str, item_id: str, message: str):
        self.stage = stage
        self.item_id = item_id
        self.message = message
        super().__init__(f"[{stage}] {item_id}: {message}")

    def to_dict(self):
        return {"stage": self.stage, "item_id": self.item_id, "message": self.message}
