"""Exception hierarchy. ``exit_code`` is the CLI's contract for scripting."""


class QRWaldError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", *, alpha: float | None = None):
        if alpha is not None and message:
            message = f"alpha={alpha:.4f}: {message}"
        super().__init__(message)
        self.alpha = alpha


# --- usage (exit 2) ---


class UsageError(QRWaldError):
    exit_code = 2


class ConfigError(UsageError):
    def __init__(self, message: str = "", *, key: str | None = None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key


class EmptyGrid(UsageError):
    pass


# --- data (exit 3) ---


class DataError(QRWaldError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message: str = "", *, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RankDeficient(DataError):
    pass


class UnknownColumn(DataError):
    pass


class DuplicateColumn(DataError):
    pass


class RestrictionError(DataError):
    pass


class EmptyReport(DataError):
    pass


# --- numerical (exit 4) ---


class NumericalError(QRWaldError):
    exit_code = 4


class DomainError(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class SingularG(NumericalError):
    pass


class SingularW(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class DegenerateSparsity(NumericalError):
    pass
