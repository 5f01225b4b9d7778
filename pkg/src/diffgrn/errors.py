"""Exception types raised across the package."""


class GrnError(ValueError):
    """Base class for all package errors."""


class ShapeMismatch(GrnError):
    pass


class EmptyBatch(GrnError):
    pass


class EmptyDataset(GrnError):
    pass


class EmptyVectors(GrnError):
    pass


class LengthMismatch(GrnError):
    pass


class ParseError(GrnError):
    def __init__(self, message: str, line: int, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")


class RaggedRows(GrnError):
    pass


class EmptyFile(GrnError):
    pass


class TooFewRows(GrnError):
    pass


class MissingGenomeFile(GrnError):
    pass


class ConfigError(GrnError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
