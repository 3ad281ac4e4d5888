#!/usr/bin/env python3
"""Build the bundled fixture databases and matching example files.

Creates a Spider-style tree under --out:

    <out>/database/<db_id>/<db_id>.sqlite   one file per domain
    <out>/dev.json                          questions over network_1
    <out>/train.json                        questions over book_2 / race_track

The result is a tiny, fully offline dataset that every CLI subcommand
and the replay demo can run against.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from sqlprompt.demo_dbs import (
    BOOK_DB_ID,
    NETWORK_DB_ID,
    RACE_DB_ID,
    build_spider_layout,
)

DEV_RECORDS = [
    {
        "question": "How many high schoolers are there?",
        "query": "SELECT count(*) FROM Highschooler",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "What are the names of all high schoolers?",
        "query": "SELECT name FROM Highschooler",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "What are the grades of all high schoolers?",
        "query": "SELECT grade FROM Highschooler",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "How many students have friends?",
        "query": "SELECT count(DISTINCT student_id) FROM Friend",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "How many likes are recorded?",
        "query": "SELECT count(*) FROM Likes",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "What is Kyle's id?",
        "query": "SELECT ID FROM Highschooler WHERE name = 'Kyle'",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "List names of high schoolers in grade 10.",
        "query": "SELECT name FROM Highschooler WHERE grade = 10",
        "db_id": NETWORK_DB_ID,
    },
    {
        "question": "What is the highest grade?",
        "query": "SELECT max(grade) FROM Highschooler",
        "db_id": NETWORK_DB_ID,
    },
]

TRAIN_RECORDS = [
    {
        "question": "How many books are there?",
        "query": "SELECT count(*) FROM book",
        "db_id": BOOK_DB_ID,
    },
    {
        "question": "List all writers.",
        "query": "SELECT Writer FROM book",
        "db_id": BOOK_DB_ID,
    },
    {
        "question": "What are the titles of all books?",
        "query": "SELECT title FROM book",
        "db_id": BOOK_DB_ID,
    },
    {
        "question": "How many tracks are there?",
        "query": "SELECT count(*) FROM track",
        "db_id": RACE_DB_ID,
    },
    {
        "question": "Show all track names.",
        "query": "SELECT name FROM track",
        "db_id": RACE_DB_ID,
    },
    {
        "question": "Show the name and location for all tracks.",
        "query": "SELECT name, LOCATION FROM track",
        "db_id": RACE_DB_ID,
    },
]


def build_dataset(out: Path) -> None:
    db_files = build_spider_layout(out / "database")
    for db_id, path in sorted(db_files.items()):
        print(f"built {db_id}: {path}")
    for name, records in (("dev.json", DEV_RECORDS), ("train.json", TRAIN_RECORDS)):
        path = out / name
        path.write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {len(records)} examples: {path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    parser.add_argument(
        "--out",
        type=Path,
        default=Path("demo_data"),
        help="output directory (default: ./demo_data)",
    )
    args = parser.parse_args(argv)
    build_dataset(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
