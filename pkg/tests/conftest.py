"""Shared fixtures: demo databases in a Spider-style layout."""

from __future__ import annotations

from pathlib import Path

import pytest

from sqlprompt.demo_dbs import (
    BOOK_DB_ID,
    NETWORK_DB_ID,
    RACE_DB_ID,
    SNIPPET_DB_ID,
    build_fixture,
    build_spider_layout,
)
from sqlprompt.prompts import load_database_context

GOLDENS = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def spider_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("spider")
    build_spider_layout(root)
    return root


@pytest.fixture(scope="session")
def db_files(spider_root) -> dict[str, Path]:
    return {
        db_id: spider_root / db_id / f"{db_id}.sqlite"
        for db_id in (NETWORK_DB_ID, BOOK_DB_ID, RACE_DB_ID)
    }


@pytest.fixture(scope="session")
def snippet_db(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("snippet")
    return build_fixture(SNIPPET_DB_ID, root / f"{SNIPPET_DB_ID}.sqlite")


@pytest.fixture(scope="session")
def network_context(db_files):
    return load_database_context(db_files[NETWORK_DB_ID], rows=3)


@pytest.fixture(scope="session")
def demo_contexts(db_files):
    return {
        db_id: load_database_context(path, rows=3) for db_id, path in db_files.items()
    }


def golden(name: str) -> str:
    return (GOLDENS / name).read_text(encoding="utf-8")
