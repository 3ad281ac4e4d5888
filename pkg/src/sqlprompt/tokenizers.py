"""Pluggable token counting for prompt length budgeting.

Counts are used for reporting and for the demonstration-database length
filter, so they only need to be deterministic and monotone-ish, not to
match any particular model's tokenizer. Two counters ship by default:

* ``whitespace``: number of whitespace-separated chunks.
* ``char``: number of characters.

Register alternatives (for example a model-specific BPE) with
register_tokenizer before running an experiment.
"""

from __future__ import annotations

from typing import Callable

from .errors import UnknownTokenizerError

Tokenizer = Callable[[str], int]

_REGISTRY: dict[str, Tokenizer] = {}


def register_tokenizer(name: str, fn: Tokenizer) -> None:
    """Register ``fn`` under ``name``, replacing any previous entry."""
    if not name:
        raise ValueError("tokenizer name must be non-empty")
    _REGISTRY[name] = fn


def get_tokenizer(name: str) -> Tokenizer:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise UnknownTokenizerError(
            f"no tokenizer named {name!r} (known: {known})"
        ) from None


def count_tokens(text: str, tokenizer: str = "whitespace") -> int:
    """Token count of ``text`` under the named tokenizer."""
    count = get_tokenizer(tokenizer)(text)
    if count < 0:
        raise ValueError(f"tokenizer {tokenizer!r} returned a negative count")
    return count


register_tokenizer("whitespace", lambda text: len(text.split()))
register_tokenizer("char", len)
