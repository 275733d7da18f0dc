"""Errors for this domain"""


class CasemarkError(Exception):
    """Base class of all errors raised by casemark."""


class ConfigError(CasemarkError):
    """Exception raised when an experiment configuration cannot be used.

    Args:
        key: the configuration key that is invalid
        reason: what is wrong with it
    """

    def __init__(self, key: str, reason: str):
        super().__init__(key, reason)
        self.key = key
        self.reason = reason

    def __str__(self):
        return f"invalid config value for '{self.key}': {self.reason}"

    def __repr__(self):
        return f"ConfigError: {self}"


class ShapeError(CasemarkError):
    """Exception raised when array dimensions do not match what an operation expects.

    Args:
        what: the operand being checked
        expected: the expected shape
        got: the actual shape
    """

    def __init__(self, what: str, expected: tuple, got: tuple):
        super().__init__(what, expected, got)
        self.what = what
        self.expected = expected
        self.got = got

    def __str__(self):
        return f"{self.what}: expected shape {self.expected}, got {self.got}"

    def __repr__(self):
        return f"ShapeError: {self}"


class MissingCacheError(CasemarkError):
    """Exception raised when a backward pass is requested without its forward cache.

    Args:
        op: the name of the operation
    """

    def __init__(self, op: str):
        super().__init__(op)
        self.op = op

    def __str__(self):
        return f"backward pass of '{self.op}' called without a forward cache"

    def __repr__(self):
        return f"MissingCacheError: {self}"


class UnsatisfiableConstraintError(CasemarkError):
    """Exception raised when a constrained resample keeps failing.

    Args:
        constraint: description of the constraint
        attempts: how many draws were tried
    """

    def __init__(self, constraint: str, attempts: int):
        super().__init__(constraint, attempts)
        self.constraint = constraint
        self.attempts = attempts

    def __str__(self):
        return f"could not satisfy '{self.constraint}' after {self.attempts} attempts"

    def __repr__(self):
        return f"UnsatisfiableConstraintError: {self}"


class SchemaError(CasemarkError):
    """Exception raised when a results table lacks the columns a consumer needs.

    Args:
        source: the file or frame being read
        missing: the absent columns
    """

    def __init__(self, source: str, missing: list):
        super().__init__(source, missing)
        self.source = source
        self.missing = list(missing)

    def __str__(self):
        return f"{self.source} is missing columns: {', '.join(self.missing)}"

    def __repr__(self):
        return f"SchemaError: {self}"
