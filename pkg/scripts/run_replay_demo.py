#!/usr/bin/env python3
"""Record-then-replay walkthrough over the bundled fixture dataset.

Runs three prompt settings (zero-shot, single-domain, cross-domain)
twice each: first under the ``record`` policy with a canned offline
provider standing in for a real completion endpoint, then under the
``replay`` policy with no provider at all. The second run answers every
request from the cache file written by the first, which is the workflow
for re-scoring or re-analyzing a finished run without new API traffic.

Everything happens under --workdir (default ./demo_run); no network.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from sqlprompt.gateway import CompletionRequest, CompletionResponse
from sqlprompt.prompts import Setting
from sqlprompt.runner import ExperimentConfig, emit_report, run_experiment

sys.path.insert(0, str(Path(__file__).resolve().parent))
from build_demo_dbs import build_dataset  # noqa: E402

# Six of the eight dev questions get correct SQL; one returns a wrong
# (but runnable) query and one returns SQL that fails to execute, so the
# reports show all three outcome kinds.
CANNED_COMPLETIONS = {
    "How many high schoolers are there?": " count(*) from highschooler",
    "What are the names of all high schoolers?": " name from highschooler",
    "What are the grades of all high schoolers?": " grade from highschooler",
    "How many students have friends?": " count(distinct student_id) from friend",
    "How many likes are recorded?": " count(*) from friend",
    "What is Kyle's id?": " id from highschooler where name = 'Kyle'",
    "List names of high schoolers in grade 10.": " name from highschooler where grade = 10",
    "What is the highest grade?": " max(grade) from highschoolers",
}


class CannedProvider:
    """Answers each prompt by looking up its final question line."""

    def __init__(self) -> None:
        self.calls = 0

    def __call__(self, request: CompletionRequest) -> CompletionResponse:
        self.calls += 1
        tail = request.prompt.rsplit("Question: ", 1)[1]
        question = tail.split("\n", 1)[0]
        return CompletionResponse(text=CANNED_COMPLETIONS[question])


def demo_cells(data: Path, workdir: Path) -> list[tuple[str, ExperimentConfig]]:
    base = dict(
        examples_file=data / "dev.json",
        db_root=data / "database",
        seeds=(0, 1, 2),
    )
    return [
        ("zero-shot", ExperimentConfig(**base, setting=Setting.ZERO_SHOT)),
        ("single-domain", ExperimentConfig(**base, setting=Setting.SINGLE_DOMAIN, n=2)),
        (
            "cross-domain",
            ExperimentConfig(
                **base,
                setting=Setting.CROSS_DOMAIN,
                n=2,
                m=2,
                k=1,
                train_examples_file=data / "train.json",
                train_db_root=data / "database",
            ),
        ),
    ]


def run_cell(name: str, config: ExperimentConfig, workdir: Path) -> None:
    cell_dir = workdir / name
    cache_path = cell_dir / "cache.jsonl"

    provider = CannedProvider()
    record_config = ExperimentConfig.from_dict(
        {**config.to_dict(), "policy": "record", "cache_path": str(cache_path)}
    )
    run_experiment(record_config, provider=provider)
    print(f"[{name}] recorded {provider.calls} completions -> {cache_path}")

    replay_config = ExperimentConfig.from_dict(
        {**config.to_dict(), "policy": "replay", "cache_path": str(cache_path)}
    )
    report = run_experiment(replay_config, provider=None)
    for result in report.seed_results:
        right = sum(o.match for o in result.outcomes)
        print(
            f"[{name}] seed {result.seed}: accuracy {result.accuracy:.4f} "
            f"({right}/{len(result.outcomes)})"
        )
    print(f"[{name}] aggregate accuracy {report.aggregate_accuracy:.4f}")
    for path in emit_report(report, "json", cell_dir / "report.json"):
        print(f"[{name}] wrote {path}")
    for path in emit_report(report, "csv", cell_dir / "report.csv"):
        print(f"[{name}] wrote {path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    parser.add_argument(
        "--workdir",
        type=Path,
        default=Path("demo_run"),
        help="directory for fixture data, caches, and reports (default: ./demo_run)",
    )
    args = parser.parse_args(argv)

    data = args.workdir / "data"
    build_dataset(data)
    for name, config in demo_cells(data, args.workdir):
        run_cell(name, config, args.workdir)
    print(f"done; see {args.workdir}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
