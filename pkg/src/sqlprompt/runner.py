"""End-to-end experiment orchestration.

A run takes a prompt construction, a dev set, and seeds; for each seed
it samples demonstrations, builds one prompt per example, obtains
completions through the gateway, stitches them into SQL, and scores by
execution accuracy. Reports aggregate per-seed accuracy and prompt
length, and can be re-emitted from their JSON form without rerunning.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    EmptyEligiblePoolError,
    IncompleteReplayCacheError,
    MalformedRecordError,
    MissingDatabaseError,
)
from .evaluate import (
    DEFAULT_TIMEOUT_MS,
    EvalOutcome,
    accuracy,
    execution_accuracy,
)
from .gateway import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_STOP_SEQUENCES,
    CompletionRequest,
    LlmGateway,
    Provider,
    ReplayCache,
    fingerprint_request,
    stitch_sql,
)
from .normalize import ParseError, lex, template_key
from .prompts import (
    ContentFormat,
    ContentStyle,
    DatabaseContext,
    NormalizationMode,
    PromptSpec,
    PromptText,
    SchemaFormat,
    Setting,
    assemble_prompt,
    completion_cue,
    load_database_context,
)
from .sampling import (
    DEFAULT_TOKEN_LIMIT,
    DemonstrationSet,
    Example,
    derive_seed,
    filter_demo_databases,
    sample_cross_domain,
    sample_single_domain,
)
from .schema import introspect_schema
from .tokenizers import count_tokens, get_tokenizer

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2)

REPORT_COLUMNS = (
    "setting", "schema_format", "content_format", "mode",
    "N", "M", "K", "seed", "accuracy", "mean_tokens",
)

DEFAULT_BUCKET_WIDTH = 500


@dataclass(frozen=True)
class ExperimentConfig:
    examples_file: Path
    db_root: Path
    setting: Setting = Setting.ZERO_SHOT
    schema_format: SchemaFormat = SchemaFormat.CREATE_TABLE
    content_format: ContentFormat = field(default_factory=ContentFormat.none)
    mode: NormalizationMode = NormalizationMode.NORMALIZED
    n: int = 0
    m: int = 0
    k: int = 0
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    train_examples_file: Path | None = None
    train_db_root: Path | None = None
    model_name: str = "gpt-3.5-turbo-instruct"
    policy: str = "replay"
    cache_path: Path | None = None
    tokenizer: str = "whitespace"
    token_limit: int = DEFAULT_TOKEN_LIMIT
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = 0.0
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES
    workers: int = 4
    out_dir: Path | None = None
    dump_prompts: bool = False
    filter_cache_dir: Path | None = None

    def prompt_spec(self) -> PromptSpec:
        return PromptSpec(
            schema_format=self.schema_format,
            content_format=self.content_format,
            mode=self.mode,
            setting=self.setting,
        )

    def validate(self) -> None:
        self.prompt_spec()  # re-checks schema/content compatibility
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.setting is Setting.ZERO_SHOT:
            if self.n or self.m or self.k:
                raise ValueError("zero-shot runs take n = m = k = 0")
        elif self.setting is Setting.SINGLE_DOMAIN:
            if self.n < 1:
                raise ValueError("single-domain runs need n >= 1")
            if self.m or self.k:
                raise ValueError("single-domain runs take m = k = 0")
        else:
            if self.m < 1 or self.k < 1:
                raise ValueError("cross-domain runs need m >= 1 and k >= 1")
            if self.n and self.n != self.m * self.k:
                raise ValueError(
                    f"cross-domain n must equal m * k ({self.m * self.k}), got {self.n}"
                )
            if self.train_examples_file is None or self.train_db_root is None:
                raise ValueError(
                    "cross-domain runs need train_examples_file and train_db_root"
                )
        if self.policy not in ("live", "record", "replay"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.policy in ("record", "replay") and self.cache_path is None:
            raise ValueError(f"policy {self.policy!r} requires cache_path")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def shots(self) -> int:
        if self.setting is Setting.SINGLE_DOMAIN:
            return self.n
        if self.setting is Setting.CROSS_DOMAIN:
            return self.m * self.k
        return 0

    def to_dict(self) -> dict:
        return {
            "examples_file": str(self.examples_file),
            "db_root": str(self.db_root),
            "setting": self.setting.value,
            "schema_format": self.schema_format.value,
            "content_style": self.content_format.style.value,
            "content_rows": self.content_format.rows,
            "mode": self.mode.value,
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "seeds": list(self.seeds),
            "train_examples_file": (
                None if self.train_examples_file is None else str(self.train_examples_file)
            ),
            "train_db_root": (
                None if self.train_db_root is None else str(self.train_db_root)
            ),
            "model_name": self.model_name,
            "policy": self.policy,
            "cache_path": None if self.cache_path is None else str(self.cache_path),
            "tokenizer": self.tokenizer,
            "token_limit": self.token_limit,
            "timeout_ms": self.timeout_ms,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "stop_sequences": list(self.stop_sequences),
            "workers": self.workers,
            "out_dir": None if self.out_dir is None else str(self.out_dir),
            "dump_prompts": self.dump_prompts,
            "filter_cache_dir": (
                None if self.filter_cache_dir is None else str(self.filter_cache_dir)
            ),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        def path_or_none(key: str) -> Path | None:
            value = data.get(key)
            return None if value is None else Path(value)

        base = cls(
            examples_file=Path(data["examples_file"]),
            db_root=Path(data["db_root"]),
        )
        return replace(
            base,
            setting=Setting(data.get("setting", base.setting.value)),
            schema_format=SchemaFormat(
                data.get("schema_format", base.schema_format.value)
            ),
            content_format=ContentFormat(
                style=ContentStyle(data.get("content_style", "none")),
                rows=int(data.get("content_rows", 3)),
            ),
            mode=NormalizationMode(data.get("mode", base.mode.value)),
            n=int(data.get("n", 0)),
            m=int(data.get("m", 0)),
            k=int(data.get("k", 0)),
            seeds=tuple(int(s) for s in data.get("seeds", DEFAULT_SEEDS)),
            train_examples_file=path_or_none("train_examples_file"),
            train_db_root=path_or_none("train_db_root"),
            model_name=data.get("model_name", base.model_name),
            policy=data.get("policy", base.policy),
            cache_path=path_or_none("cache_path"),
            tokenizer=data.get("tokenizer", base.tokenizer),
            token_limit=int(data.get("token_limit", base.token_limit)),
            timeout_ms=int(data.get("timeout_ms", base.timeout_ms)),
            max_tokens=int(data.get("max_tokens", base.max_tokens)),
            temperature=float(data.get("temperature", base.temperature)),
            stop_sequences=tuple(data.get("stop_sequences", DEFAULT_STOP_SEQUENCES)),
            workers=int(data.get("workers", base.workers)),
            out_dir=path_or_none("out_dir"),
            dump_prompts=bool(data.get("dump_prompts", False)),
            filter_cache_dir=path_or_none("filter_cache_dir"),
        )


@dataclass(frozen=True)
class SeedResult:
    seed: int
    outcomes: tuple[EvalOutcome, ...]
    token_counts: tuple[int, ...]
    predictions: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        return accuracy(self.outcomes)

    @property
    def mean_tokens(self) -> float:
        if not self.token_counts:
            return 0.0
        return sum(self.token_counts) / len(self.token_counts)


@dataclass(frozen=True)
class RunReport:
    config: dict
    seed_results: tuple[SeedResult, ...]

    @property
    def aggregate_accuracy(self) -> float:
        if not self.seed_results:
            return 0.0
        return sum(r.accuracy for r in self.seed_results) / len(self.seed_results)

    @property
    def aggregate_mean_tokens(self) -> float:
        if not self.seed_results:
            return 0.0
        return sum(r.mean_tokens for r in self.seed_results) / len(self.seed_results)

    def to_dict(self) -> dict:
        return {
            "config": dict(self.config),
            "seeds": [
                {
                    "seed": r.seed,
                    "accuracy": r.accuracy,
                    "mean_tokens": r.mean_tokens,
                    "outcomes": [
                        {"example_id": o.example_id, "match": o.match, "reason": o.reason}
                        for o in r.outcomes
                    ],
                    "token_counts": list(r.token_counts),
                    "predictions": list(r.predictions),
                }
                for r in self.seed_results
            ],
            "aggregate": {
                "accuracy": self.aggregate_accuracy,
                "mean_tokens": self.aggregate_mean_tokens,
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunReport":
        seed_results = tuple(
            SeedResult(
                seed=int(entry["seed"]),
                outcomes=tuple(
                    EvalOutcome(
                        example_id=o["example_id"],
                        match=bool(o["match"]),
                        reason=o["reason"],
                    )
                    for o in entry["outcomes"]
                ),
                token_counts=tuple(int(t) for t in entry["token_counts"]),
                predictions=tuple(entry["predictions"]),
            )
            for entry in data["seeds"]
        )
        return cls(config=dict(data["config"]), seed_results=seed_results)


def load_dataset(
    examples_file: str | Path, db_root: str | Path
) -> tuple[list[Example], dict[str, Path]]:
    """Load a Spider-style examples file and locate its database files.

    The file is a JSON array of records with ``question``, ``query``,
    and ``db_id`` fields; databases live at
    ``db_root/<db_id>/<db_id>.sqlite``. Example order follows the file.
    """
    examples_file = Path(examples_file)
    db_root = Path(db_root)
    try:
        records = json.loads(examples_file.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedRecordError(f"cannot read {examples_file}: {exc}") from exc
    if not isinstance(records, list):
        raise MalformedRecordError(f"{examples_file} does not hold a JSON array")
    if not records:
        logger.warning("examples file %s is empty", examples_file)
        return [], {}
    examples = []
    for index, record in enumerate(records):
        if not isinstance(record, dict):
            raise MalformedRecordError(f"record {index}: not an object")
        try:
            nlq, sql, db_id = record["question"], record["query"], record["db_id"]
        except KeyError as exc:
            raise MalformedRecordError(f"record {index}: missing field {exc}") from exc
        if not all(isinstance(v, str) and v for v in (nlq, sql, db_id)):
            raise MalformedRecordError(
                f"record {index}: question, query, and db_id must be non-empty strings"
            )
        try:
            lex(sql)
        except ParseError as exc:
            raise MalformedRecordError(
                f"record {index}: gold query does not lex: {exc}"
            ) from exc
        examples.append(Example(nlq=nlq, sql=sql, db_id=db_id))
    db_files = {}
    for db_id in sorted({e.db_id for e in examples}):
        db_file = db_root / db_id / f"{db_id}.sqlite"
        if not db_file.is_file():
            raise MissingDatabaseError(f"database file not found: {db_file}")
        db_files[db_id] = db_file
    logger.info(
        "loaded %d examples over %d databases from %s",
        len(examples), len(db_files), examples_file,
    )
    return examples, db_files


@dataclass
class _PlannedPrompt:
    seed: int
    example_index: int
    example: Example
    prompt: PromptText
    tokens: int
    fingerprint: str
    request: CompletionRequest


class _Session:
    """Loaded state for one experiment run."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.examples, self.db_files = load_dataset(config.examples_file, config.db_root)
        get_tokenizer(config.tokenizer)  # fail fast on unknown names
        self.spec = config.prompt_spec()
        self._contexts: dict[str, DatabaseContext] = {}
        self._pools: dict[str, list[tuple[int, Example]]] = {}
        self._cross_sets: dict[int, DemonstrationSet] = {}
        self.train_db_files: dict[str, Path] = {}
        self.training: dict[str, list[Example]] = {}
        self.eligible_train_ids: list[str] = []
        if config.setting is Setting.SINGLE_DOMAIN:
            for index, example in enumerate(self.examples):
                self._pools.setdefault(example.db_id, []).append((index, example))
        if config.setting is Setting.CROSS_DOMAIN:
            self._prepare_cross_domain()

    def _prepare_cross_domain(self) -> None:
        config = self.config
        train_examples, self.train_db_files = load_dataset(
            config.train_examples_file, config.train_db_root
        )
        for example in train_examples:
            self.training.setdefault(example.db_id, []).append(example)
        dev_ids = {e.db_id for e in self.examples}
        schemas = [
            introspect_schema(self.train_db_files[db_id])
            for db_id in sorted(self.training)
            if db_id not in dev_ids
        ]
        kept = filter_demo_databases(
            schemas,
            self.spec,
            tokenizer=config.tokenizer,
            token_limit=config.token_limit,
            cache_dir=config.filter_cache_dir,
        )
        self.eligible_train_ids = [s.db_id for s in kept]

    def context(self, db_id: str, training: bool = False) -> DatabaseContext:
        key = f"train:{db_id}" if training else db_id
        if key not in self._contexts:
            files = self.train_db_files if training else self.db_files
            if self.spec.content_format.wants_content:
                self._contexts[key] = load_database_context(
                    files[db_id], rows=self.spec.content_format.rows
                )
            else:
                self._contexts[key] = DatabaseContext(
                    schema=introspect_schema(files[db_id])
                )
        return self._contexts[key]

    def demonstrations(
        self, seed: int, example_index: int, example: Example
    ) -> tuple[DemonstrationSet | None, dict[str, DatabaseContext] | None]:
        config = self.config
        if config.setting is Setting.ZERO_SHOT:
            return None, None
        if config.setting is Setting.SINGLE_DOMAIN:
            pool = [e for idx, e in self._pools[example.db_id] if idx != example_index]
            try:
                demos = sample_single_domain(
                    example, pool, config.n, derive_seed(seed, example_index)
                )
            except EmptyEligiblePoolError:
                logger.warning(
                    "no eligible demonstrations for example %d on %s; "
                    "falling back to zero demonstrations",
                    example_index, example.db_id,
                )
                demos = DemonstrationSet.empty()
            self._assert_no_leakage(example, demos)
            return demos, None
        if seed not in self._cross_sets:
            self._cross_sets[seed] = sample_cross_domain(
                self.training, self.eligible_train_ids, config.m, config.k, seed
            )
        demos = self._cross_sets[seed]
        contexts = {g.db_id: self.context(g.db_id, training=True) for g in demos.groups}
        return demos, contexts

    @staticmethod
    def _assert_no_leakage(test: Example, demos: DemonstrationSet) -> None:
        test_key = template_key(test.sql)
        for example in demos.all_examples():
            if example.nlq == test.nlq or template_key(example.sql) == test_key:
                raise RuntimeError(
                    f"demonstration leakage: {example.nlq!r} duplicates the "
                    "test example"
                )


def _plan_prompts(session: _Session) -> list[_PlannedPrompt]:
    config = session.config
    planned = []
    for seed in config.seeds:
        for index, example in enumerate(session.examples):
            demos, demo_ctxs = session.demonstrations(seed, index, example)
            prompt = assemble_prompt(
                session.spec,
                session.context(example.db_id),
                example.nlq,
                demonstrations=demos,
                demo_databases=demo_ctxs,
            )
            request = CompletionRequest(
                prompt=prompt.text,
                model_name=config.model_name,
                stop_sequences=config.stop_sequences,
                max_tokens=config.max_tokens,
                temperature=config.temperature,
            )
            planned.append(
                _PlannedPrompt(
                    seed=seed,
                    example_index=index,
                    example=example,
                    prompt=prompt,
                    tokens=count_tokens(prompt.text, config.tokenizer),
                    fingerprint=fingerprint_request(request),
                    request=request,
                )
            )
    return planned


def _dump_prompts(config: ExperimentConfig, planned: Sequence[_PlannedPrompt]) -> None:
    if not config.dump_prompts or config.out_dir is None:
        return
    for item in planned:
        prompt_dir = Path(config.out_dir) / "prompts" / f"seed-{item.seed}"
        prompt_dir.mkdir(parents=True, exist_ok=True)
        path = prompt_dir / f"{item.example_index:05d}.txt"
        path.write_text(item.prompt.text, encoding="utf-8")


def run_experiment(
    config: ExperimentConfig, provider: Provider | None = None
) -> RunReport:
    """Execute one experiment cell and return its report.

    In replay policy the run is fully offline and deterministic: prompt
    construction is seeded, completions come from the cache, and any
    missing fingerprint aborts the run up front, before scoring.
    """
    config.validate()
    session = _Session(config)
    planned = _plan_prompts(session)
    _dump_prompts(config, planned)

    cache = ReplayCache(config.cache_path) if config.cache_path is not None else None
    gateway = LlmGateway(cache=cache, provider=provider, max_in_flight=config.workers)

    if config.policy == "replay" and planned:
        missing = sorted(
            {item.fingerprint for item in planned if item.fingerprint not in cache}
        )
        if missing:
            raise IncompleteReplayCacheError(missing)

    cue = completion_cue(config.mode)

    def resolve(item: _PlannedPrompt) -> tuple[str, EvalOutcome]:
        response = gateway.complete(item.request, policy=config.policy)
        pred_sql = stitch_sql(cue, response.text, config.stop_sequences)
        outcome = execution_accuracy(
            pred_sql,
            item.example.sql,
            session.db_files[item.example.db_id],
            example_id=f"{item.example_index:05d}",
            timeout_ms=config.timeout_ms,
        )
        return pred_sql, outcome

    if config.workers > 1 and len(planned) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            resolved = list(pool.map(resolve, planned))
    else:
        resolved = [resolve(item) for item in planned]

    by_seed: dict[int, list[tuple[_PlannedPrompt, str, EvalOutcome]]] = {}
    for item, (pred_sql, outcome) in zip(planned, resolved):
        by_seed.setdefault(item.seed, []).append((item, pred_sql, outcome))
    seed_results = []
    for seed in config.seeds:
        entries = by_seed.get(seed, [])
        entries.sort(key=lambda entry: entry[0].example_index)
        seed_results.append(
            SeedResult(
                seed=seed,
                outcomes=tuple(outcome for _item, _pred, outcome in entries),
                token_counts=tuple(item.tokens for item, _pred, _outcome in entries),
                predictions=tuple(pred for _item, pred, _outcome in entries),
            )
        )
    report = RunReport(config=config.to_dict(), seed_results=tuple(seed_results))
    if config.out_dir is not None:
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_report(report, "json", out_dir / "report.json")
        emit_report(report, "csv", out_dir / "report.csv")
    return report


def run_matrix(
    configs: Sequence[ExperimentConfig], provider: Provider | None = None
) -> list[tuple[ExperimentConfig, RunReport | None, str | None]]:
    """Run several cells, capturing per-cell failures instead of dying.

    Returns (config, report, error) triples in input order; exactly one
    of report and error is set per cell.
    """
    results = []
    for config in configs:
        try:
            results.append((config, run_experiment(config, provider=provider), None))
        except Exception as exc:  # noqa: BLE001 - sweep must survive bad cells
            logger.error("cell failed: %s", exc)
            results.append((config, None, str(exc)))
    return results


def _report_rows(report: RunReport) -> list[dict[str, str]]:
    config = report.config
    content = config.get("content_style", "none")
    if content != "none":
        content = f"{content}:{config.get('content_rows', 3)}"
    base = {
        "setting": config.get("setting", ""),
        "schema_format": config.get("schema_format", ""),
        "content_format": content,
        "mode": config.get("mode", ""),
        "N": str(config.get("n", 0)),
        "M": str(config.get("m", 0)),
        "K": str(config.get("k", 0)),
    }
    rows = []
    for result in report.seed_results:
        rows.append(
            base
            | {
                "seed": str(result.seed),
                "accuracy": f"{result.accuracy:.6f}",
                "mean_tokens": f"{result.mean_tokens:.3f}",
            }
        )
    rows.append(
        base
        | {
            "seed": "mean",
            "accuracy": f"{report.aggregate_accuracy:.6f}",
            "mean_tokens": f"{report.aggregate_mean_tokens:.3f}",
        }
    )
    return rows


def length_buckets(
    report: RunReport, bucket_width: int = DEFAULT_BUCKET_WIDTH
) -> list[tuple[int, int, int, float]]:
    """Accuracy grouped by prompt length.

    Returns (bucket_start, bucket_end, count, accuracy) rows over all
    seeds, for buckets that contain at least one prompt.
    """
    if bucket_width < 1:
        raise ValueError("bucket width must be positive")
    buckets: dict[int, list[bool]] = {}
    for result in report.seed_results:
        for tokens, outcome in zip(result.token_counts, result.outcomes):
            buckets.setdefault(tokens // bucket_width, []).append(outcome.match)
    rows = []
    for start_bin in sorted(buckets):
        matches = buckets[start_bin]
        rows.append(
            (
                start_bin * bucket_width,
                (start_bin + 1) * bucket_width,
                len(matches),
                sum(matches) / len(matches),
            )
        )
    return rows


def render_csv(report: RunReport) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(_report_rows(report))
    return buffer.getvalue()


def render_buckets_csv(report: RunReport, bucket_width: int = DEFAULT_BUCKET_WIDTH) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["bucket_start", "bucket_end", "count", "accuracy"])
    for start, end, count, acc in length_buckets(report, bucket_width):
        writer.writerow([start, end, count, f"{acc:.6f}"])
    return buffer.getvalue()


def emit_report(
    report: RunReport,
    fmt: str,
    path: str | Path,
    bucket_width: int = DEFAULT_BUCKET_WIDTH,
) -> list[Path]:
    """Write a report to disk as ``json`` or ``csv``.

    The csv form writes two files: the per-seed accuracy table and a
    companion ``*_buckets.csv`` with accuracy by prompt-length bucket.
    Returns the paths written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return [path]
    if fmt == "csv":
        path.write_text(render_csv(report), encoding="utf-8")
        buckets_path = path.with_name(path.stem + "_buckets.csv")
        buckets_path.write_text(
            render_buckets_csv(report, bucket_width), encoding="utf-8"
        )
        return [path, buckets_path]
    raise ValueError(f"unknown report format {fmt!r}, expected 'json' or 'csv'")
