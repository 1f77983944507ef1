"""Common error base. Every error carries a stable machine-readable code
so CLI exit paths and HTTP error bodies can name the failure precisely."""


class VcopError(Exception):
    """Base for all package errors; `code` is the wire-format error name."""

    code = "Error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message
