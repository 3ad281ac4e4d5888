"""Exception types shared across the toolkit.

Everything raised on purpose derives from SqlPromptError so callers can
catch toolkit failures without swallowing genuine bugs.
"""

from __future__ import annotations


class SqlPromptError(Exception):
    """Base class for all toolkit errors."""


# -- schema catalog ---------------------------------------------------------


class NotADatabaseError(SqlPromptError):
    """The given file exists but is not a readable SQLite database."""


class UnknownTableError(SqlPromptError):
    """A table name does not exist in the database or schema."""


class UnknownColumnError(SqlPromptError):
    """A column name does not exist in the given table."""


# -- prompt builder ---------------------------------------------------------


class EmptySchemaError(SqlPromptError):
    """A database schema with no tables cannot be serialized."""


class SampleMismatchError(SqlPromptError):
    """Content samples do not line up with the table they describe."""


class SettingMismatchError(SqlPromptError):
    """Demonstrations passed to the assembler contradict the prompt setting."""


class UnknownTokenizerError(SqlPromptError):
    """No tokenizer is registered under the requested name."""


# -- SQL normalizer ---------------------------------------------------------


class ParseError(SqlPromptError):
    """SQL text could not be tokenized.

    Carries the character offset of the offending input so callers can
    point at the problem.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class MultipleStatementsError(SqlPromptError):
    """More than one statement was passed where a single one is required."""


# -- demonstration sampler --------------------------------------------------


class EmptyEligiblePoolError(SqlPromptError):
    """Template-based exclusion left no candidate demonstrations."""


class InsufficientDatabasesError(SqlPromptError):
    """Fewer eligible demonstration databases than requested."""


class InsufficientExamplesError(SqlPromptError):
    """A demonstration database has fewer examples than requested."""


# -- llm gateway ------------------------------------------------------------


class CacheMissError(SqlPromptError):
    """Replay policy found no cached response for a request fingerprint."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no cached response for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class ProviderError(SqlPromptError):
    """The completion provider failed in a non-retryable way."""


class RateLimitedError(ProviderError):
    """The completion provider asked us to back off."""

    def __init__(self, message: str = "rate limited", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


# -- execution evaluator ----------------------------------------------------


class GoldSqlError(SqlPromptError):
    """The gold query failed to execute; the benchmark record is broken."""


class MisalignedOutcomesError(SqlPromptError):
    """Two outcome lists cannot be paired up example by example."""


# -- experiment runner ------------------------------------------------------


class MissingDatabaseError(SqlPromptError):
    """An example references a database file that does not exist."""


class MalformedRecordError(SqlPromptError):
    """An examples file contains a record that is not usable."""


class IncompleteReplayCacheError(SqlPromptError):
    """A replay-mode run needs responses that the cache does not hold."""

    def __init__(self, fingerprints: list[str]):
        preview = ", ".join(fingerprints[:3])
        more = "" if len(fingerprints) <= 3 else f" (+{len(fingerprints) - 3} more)"
        super().__init__(
            f"replay cache is missing {len(fingerprints)} response(s): {preview}{more}"
        )
        self.fingerprints = fingerprints
