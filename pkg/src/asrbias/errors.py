"""Exception types shared across the toolkit."""

from __future__ import annotations


class AsrBiasError(Exception):
    """Base class for all toolkit errors."""


class DataError(AsrBiasError):
    """Malformed or inconsistent input data.

    ``source`` and ``line`` locate the offending record when known.
    """

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.message = message
        self.source = source
        self.line = line
        super().__init__(self._format())

    def _format(self) -> str:
        where = ""
        if self.source and self.line is not None:
            where = f"{self.source}:{self.line}: "
        elif self.source:
            where = f"{self.source}: "
        elif self.line is not None:
            where = f"line {self.line}: "
        return where + self.message


class ParseError(DataError):
    pass


class ConfigError(AsrBiasError):
    """Invalid run configuration (missing files, bad options)."""


class FitError(AsrBiasError):
    """Model cannot be estimated from the given design."""


class UnderivableWord(LookupError):
    """No inflection rule yields a pronunciation for an out-of-vocabulary word."""

    def __init__(self, word: str):
        self.word = word
        super().__init__(f"cannot derive a pronunciation for {word!r}")
