"""Command-line interface.

Subcommands mirror the library's workflow: inspect a database, preview
a prompt or a demonstration draw, run an experiment cell, re-emit a
report, and compare two runs with a McNemar test.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import SqlPromptError
from .evaluate import mcnemar_test
from .prompts import (
    ContentFormat,
    ContentStyle,
    NormalizationMode,
    SchemaFormat,
    Setting,
    assemble_prompt,
)
from .runner import (
    DEFAULT_BUCKET_WIDTH,
    ExperimentConfig,
    RunReport,
    emit_report,
    run_experiment,
)
from .schema import introspect_schema

logger = logging.getLogger(__name__)


def _add_spec_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--setting",
        choices=[s.value for s in Setting],
        default=Setting.ZERO_SHOT.value,
    )
    parser.add_argument(
        "--schema-format",
        choices=[f.value for f in SchemaFormat],
        default=SchemaFormat.CREATE_TABLE.value,
    )
    parser.add_argument(
        "--content-format",
        choices=[s.value for s in ContentStyle],
        default=ContentStyle.NONE.value,
    )
    parser.add_argument("--content-rows", type=int, default=3)
    parser.add_argument(
        "--mode",
        choices=[m.value for m in NormalizationMode],
        default=NormalizationMode.NORMALIZED.value,
    )
    parser.add_argument("--n", type=int, default=0, help="single-domain shots")
    parser.add_argument("--m", type=int, default=0, help="cross-domain databases")
    parser.add_argument("--k", type=int, default=0, help="pairs per cross-domain database")


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--examples-file", type=Path, required=True)
    parser.add_argument("--db-root", type=Path, required=True)
    parser.add_argument("--train-examples-file", type=Path)
    parser.add_argument("--train-db-root", type=Path)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = ExperimentConfig.from_dict(data)
        overrides = {}
        if args.examples_file is not None:
            overrides["examples_file"] = args.examples_file
        if args.db_root is not None:
            overrides["db_root"] = args.db_root
        if args.seeds is not None:
            overrides["seeds"] = _parse_seeds(args.seeds)
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.cache is not None:
            overrides["cache_path"] = args.cache
        if args.policy is not None:
            overrides["policy"] = args.policy
        return dataclasses.replace(config, **overrides) if overrides else config
    if args.examples_file is None or args.db_root is None:
        raise SqlPromptError("either --config or --examples-file/--db-root is required")
    return ExperimentConfig(
        examples_file=args.examples_file,
        db_root=args.db_root,
        setting=Setting(args.setting),
        schema_format=SchemaFormat(args.schema_format),
        content_format=ContentFormat(
            style=ContentStyle(args.content_format), rows=args.content_rows
        ),
        mode=NormalizationMode(args.mode),
        n=args.n,
        m=args.m,
        k=args.k,
        seeds=_parse_seeds(args.seeds or "0,1,2"),
        train_examples_file=args.train_examples_file,
        train_db_root=args.train_db_root,
        model_name=args.model,
        policy=args.policy or "replay",
        cache_path=args.cache,
        tokenizer=args.tokenizer,
        token_limit=args.token_limit,
        timeout_ms=args.timeout_ms,
        max_tokens=args.max_tokens,
        workers=args.workers,
        out_dir=args.out,
        dump_prompts=args.dump_prompts,
    )


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise SqlPromptError(f"bad seed list {text!r}: {exc}") from exc


def _cmd_introspect(args: argparse.Namespace) -> int:
    schema = introspect_schema(args.db)
    payload = {
        "db_id": schema.db_id,
        "tables": [
            {
                "name": t.name,
                "columns": [
                    {"name": c.name, "type": c.declared_type} for c in t.columns
                ],
                "primary_key": list(t.primary_key),
                "foreign_keys": [
                    {
                        "columns": list(fk.from_columns),
                        "references": fk.to_table,
                        "referenced_columns": list(fk.to_columns),
                    }
                    for fk in t.foreign_keys
                ],
            }
            for t in schema.tables
        ],
    }
    print(json.dumps(payload, indent=2))
    return 0


def _session_for_preview(args: argparse.Namespace):
    from .runner import _Session  # internal reuse: same pipeline as a real run

    config = ExperimentConfig(
        examples_file=args.examples_file,
        db_root=args.db_root,
        setting=Setting(args.setting),
        schema_format=SchemaFormat(args.schema_format),
        content_format=ContentFormat(
            style=ContentStyle(args.content_format), rows=args.content_rows
        ),
        mode=NormalizationMode(args.mode),
        n=args.n,
        m=args.m,
        k=args.k,
        seeds=(args.seed,),
        train_examples_file=args.train_examples_file,
        train_db_root=args.train_db_root,
        policy="live",  # preview never touches the gateway
    )
    return config, _Session(config)


def _cmd_prompt(args: argparse.Namespace) -> int:
    _config, session = _session_for_preview(args)
    if not 0 <= args.index < len(session.examples):
        raise SqlPromptError(
            f"example index {args.index} out of range (0..{len(session.examples) - 1})"
        )
    example = session.examples[args.index]
    demos, demo_ctxs = session.demonstrations(args.seed, args.index, example)
    prompt = assemble_prompt(
        session.spec,
        session.context(example.db_id),
        example.nlq,
        demonstrations=demos,
        demo_databases=demo_ctxs,
    )
    print(prompt.text)
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    _config, session = _session_for_preview(args)
    if not 0 <= args.index < len(session.examples):
        raise SqlPromptError(
            f"example index {args.index} out of range (0..{len(session.examples) - 1})"
        )
    example = session.examples[args.index]
    demos, _ctxs = session.demonstrations(args.seed, args.index, example)
    payload = {
        "seed": args.seed,
        "example_index": args.index,
        "groups": []
        if demos is None
        else [
            {
                "db_id": group.db_id,
                "examples": [
                    {"question": e.nlq, "query": e.sql} for e in group.examples
                ],
            }
            for group in demos.groups
        ],
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = run_experiment(config)
    for result in report.seed_results:
        print(
            f"seed {result.seed}: accuracy {result.accuracy:.4f} "
            f"({sum(1 for o in result.outcomes if o.match)}/{len(result.outcomes)}), "
            f"mean prompt tokens {result.mean_tokens:.1f}"
        )
    print(
        f"aggregate: accuracy {report.aggregate_accuracy:.4f}, "
        f"mean prompt tokens {report.aggregate_mean_tokens:.1f}"
    )
    if config.out_dir is not None:
        print(f"reports written under {config.out_dir}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    report = RunReport.from_dict(data)
    written = emit_report(report, args.fmt, args.out, bucket_width=args.bucket_width)
    for path in written:
        print(f"wrote {path}")
    return 0


def _load_outcomes(path: Path, seed: int | None):
    report = RunReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    if seed is None:
        result = report.seed_results[0]
    else:
        matches = [r for r in report.seed_results if r.seed == seed]
        if not matches:
            raise SqlPromptError(f"{path} has no results for seed {seed}")
        result = matches[0]
    return result.outcomes


def _cmd_mcnemar(args: argparse.Namespace) -> int:
    outcomes_a = _load_outcomes(args.report_a, args.seed)
    outcomes_b = _load_outcomes(args.report_b, args.seed)
    p_value = mcnemar_test(outcomes_a, outcomes_b)
    b = sum(1 for a, b_ in zip(outcomes_a, outcomes_b) if a.match and not b_.match)
    c = sum(1 for a, b_ in zip(outcomes_a, outcomes_b) if b_.match and not a.match)
    print(f"discordant pairs: b={b} c={c}")
    print(f"p-value: {p_value:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlprompt",
        description="Prompt construction and execution-accuracy evaluation "
        "for text-to-SQL experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_introspect = sub.add_parser("introspect", help="dump a database schema as JSON")
    p_introspect.add_argument("--db", type=Path, required=True)
    p_introspect.set_defaults(fn=_cmd_introspect)

    p_prompt = sub.add_parser("prompt", help="print the prompt for one example")
    _add_spec_arguments(p_prompt)
    _add_data_arguments(p_prompt)
    p_prompt.add_argument("--index", type=int, required=True)
    p_prompt.add_argument("--seed", type=int, default=0)
    p_prompt.set_defaults(fn=_cmd_prompt)

    p_sample = sub.add_parser("sample", help="show the demonstration draw for one example")
    _add_spec_arguments(p_sample)
    _add_data_arguments(p_sample)
    p_sample.add_argument("--index", type=int, required=True)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.set_defaults(fn=_cmd_sample)

    p_run = sub.add_parser("run", help="run one experiment cell")
    _add_spec_arguments(p_run)
    p_run.add_argument("--examples-file", type=Path)
    p_run.add_argument("--db-root", type=Path)
    p_run.add_argument("--train-examples-file", type=Path)
    p_run.add_argument("--train-db-root", type=Path)
    p_run.add_argument("--config", type=Path, help="JSON config; flags override")
    p_run.add_argument("--seeds", help="comma-separated, default 0,1,2")
    p_run.add_argument("--model", default="gpt-3.5-turbo-instruct")
    p_run.add_argument("--policy", choices=["live", "record", "replay"])
    p_run.add_argument("--cache", type=Path)
    p_run.add_argument("--tokenizer", default="whitespace")
    p_run.add_argument("--token-limit", type=int, default=1000)
    p_run.add_argument("--timeout-ms", type=int, default=30000)
    p_run.add_argument("--max-tokens", type=int, default=256)
    p_run.add_argument("--workers", type=int, default=4)
    p_run.add_argument("--out", type=Path)
    p_run.add_argument("--dump-prompts", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_report = sub.add_parser("report", help="re-emit a stored report")
    p_report.add_argument("--report", type=Path, required=True)
    p_report.add_argument("--fmt", choices=["csv", "json"], default="csv")
    p_report.add_argument("--out", type=Path, required=True)
    p_report.add_argument("--bucket-width", type=int, default=DEFAULT_BUCKET_WIDTH)
    p_report.set_defaults(fn=_cmd_report)

    p_mcnemar = sub.add_parser("mcnemar", help="compare two runs on paired outcomes")
    p_mcnemar.add_argument("--report-a", type=Path, required=True)
    p_mcnemar.add_argument("--report-b", type=Path, required=True)
    p_mcnemar.add_argument("--seed", type=int)
    p_mcnemar.set_defaults(fn=_cmd_mcnemar)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except SqlPromptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
