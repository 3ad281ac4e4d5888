"""Seeded sampling of demonstration examples.

Two protocols:

* single-domain: draw N examples for one test question from the other
  questions of the same database, excluding anything whose SQL shares
  the test query's template (same text after literals are masked).
* cross-domain: draw M demonstration databases and K question/SQL pairs
  from each, once per seed, shared by every test question of the run.

All draws go through numpy's seeded generators, so results are stable
across processes and platforms.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptyEligiblePoolError,
    InsufficientDatabasesError,
    InsufficientExamplesError,
)
from .normalize import template_key
from .prompts import PromptSpec, SchemaFormat, serialize_schema
from .schema import DatabaseSchema
from .tokenizers import count_tokens

logger = logging.getLogger(__name__)

_UINT64 = (1 << 64) - 1

DEFAULT_TOKEN_LIMIT = 1000


@dataclass(frozen=True)
class Example:
    """One natural-language question with its gold SQL."""

    nlq: str
    sql: str
    db_id: str


@dataclass(frozen=True)
class DemonstrationGroup:
    db_id: str
    examples: tuple[Example, ...]

    def __post_init__(self) -> None:
        for example in self.examples:
            if example.db_id != self.db_id:
                raise ValueError(
                    f"example for {example.db_id!r} placed in group {self.db_id!r}"
                )


@dataclass(frozen=True)
class DemonstrationSet:
    groups: tuple[DemonstrationGroup, ...] = ()

    @property
    def total(self) -> int:
        return sum(len(g.examples) for g in self.groups)

    def all_examples(self) -> list[Example]:
        return [e for g in self.groups for e in g.examples]

    @classmethod
    def empty(cls) -> "DemonstrationSet":
        return cls(())


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    n: int = 0
    m: int = 0
    k: int = 0
    token_limit: int = DEFAULT_TOKEN_LIMIT


def derive_seed(seed: int, index: int) -> int:
    """Stable per-example child seed for (run seed, example index)."""
    seq = np.random.SeedSequence([seed & _UINT64, index & _UINT64])
    return int(seq.generate_state(1, np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & _UINT64)


def sample_single_domain(
    test: Example, pool: Sequence[Example], n: int, seed: int
) -> DemonstrationSet:
    """Draw ``n`` demonstrations for ``test`` from its own database.

    Pool entries sharing the test query's template are excluded before
    drawing, so the model never sees its own answer shape. Raises
    EmptyEligiblePoolError when exclusion empties the pool and ``n`` is
    positive.
    """
    if n < 0:
        raise ValueError("demonstration count must be non-negative")
    for example in pool:
        if example.db_id != test.db_id:
            raise ValueError(
                f"pool example from {example.db_id!r} cannot serve test "
                f"question on {test.db_id!r}"
            )
    if n == 0:
        return DemonstrationSet((DemonstrationGroup(test.db_id, ()),))
    test_key = template_key(test.sql)
    eligible = [e for e in pool if template_key(e.sql) != test_key]
    if not eligible:
        raise EmptyEligiblePoolError(
            f"no eligible demonstrations for question {test.nlq!r} on "
            f"{test.db_id!r} after template exclusion"
        )
    order = _rng(seed).permutation(len(eligible))
    chosen = tuple(eligible[i] for i in order[: min(n, len(eligible))])
    return DemonstrationSet((DemonstrationGroup(test.db_id, chosen),))


def _filter_cache_key(
    prompts: Sequence[tuple[str, str]], tokenizer: str, token_limit: int
) -> str:
    payload = json.dumps(
        {
            "tokenizer": tokenizer,
            "token_limit": token_limit,
            "databases": [
                [db_id, hashlib.sha256(prompt.encode("utf-8")).hexdigest()]
                for db_id, prompt in prompts
            ],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def filter_demo_databases(
    databases: Sequence[DatabaseSchema],
    spec: PromptSpec,
    tokenizer: str = "whitespace",
    token_limit: int = DEFAULT_TOKEN_LIMIT,
    cache_dir: str | Path | None = None,
) -> list[DatabaseSchema]:
    """Keep databases whose schema-only create-table prompt stays under
    ``token_limit`` tokens.

    The measurement uses the create-table serialization in the spec's
    normalization mode regardless of the spec's content format, since
    the filter guards against schemas too long to demonstrate at all.
    Results can be cached on disk keyed by the serialized schema texts,
    so repeated runs skip the recount.
    """
    if token_limit < 1:
        raise ValueError("token limit must be positive")
    prompts = [
        (db.db_id, serialize_schema(db, SchemaFormat.CREATE_TABLE, spec.mode))
        for db in databases
    ]
    cache_file = None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        key = _filter_cache_key(prompts, tokenizer, token_limit)
        cache_file = cache_dir / f"dbfilter-{key}.json"
        if cache_file.is_file():
            kept_ids = set(json.loads(cache_file.read_text(encoding="utf-8")))
            return [db for db in databases if db.db_id in kept_ids]
    kept = [
        db
        for db, (_db_id, prompt) in zip(databases, prompts)
        if count_tokens(prompt, tokenizer) < token_limit
    ]
    if cache_file is not None:
        cache_file.write_text(
            json.dumps(sorted(db.db_id for db in kept)), encoding="utf-8"
        )
    logger.info(
        "database filter kept %d of %d schemas under %d %s tokens",
        len(kept), len(databases), token_limit, tokenizer,
    )
    return kept


def sample_cross_domain(
    training: Mapping[str, Sequence[Example]],
    eligible_db_ids: Sequence[str],
    m: int,
    k: int,
    seed: int,
) -> DemonstrationSet:
    """Draw ``m`` databases and ``k`` pairs from each, in one seeded pass.

    The resulting set is shared across all test questions of a run, so
    every prompt in a cross-domain experiment shows the same
    demonstrations.
    """
    if m < 1 or k < 1:
        raise ValueError("cross-domain sampling needs m >= 1 and k >= 1")
    if m > len(eligible_db_ids):
        raise InsufficientDatabasesError(
            f"need {m} demonstration databases, only {len(eligible_db_ids)} eligible"
        )
    rng = _rng(seed)
    db_order = rng.permutation(len(eligible_db_ids))
    chosen_ids = [eligible_db_ids[i] for i in db_order[:m]]
    groups = []
    for db_id in chosen_ids:
        pool = list(training.get(db_id, ()))
        if len(pool) < k:
            raise InsufficientExamplesError(
                f"database {db_id!r} has {len(pool)} examples, need {k}"
            )
        pick = rng.permutation(len(pool))[:k]
        groups.append(DemonstrationGroup(db_id, tuple(pool[i] for i in pick)))
    return DemonstrationSet(tuple(groups))
