"""Small fixture databases used by tests, scripts, and documentation.

Three Spider-style domains: a high-school social network, a book
catalog, and a race calendar. The raw DDL deliberately mixes tab
indentation, trailing spaces, and inconsistent constraint spelling, the
way real dumps do, so normalization has something to chew on.
"""

from __future__ import annotations

import sqlite3
from pathlib import Path

NETWORK_DB_ID = "network_1"
SNIPPET_DB_ID = "network_snippet"
BOOK_DB_ID = "book_2"
RACE_DB_ID = "race_track"

_NETWORK_DDL = (
    "CREATE TABLE Highschooler(\n"
    "\tID int primary key, \n"
    "\tname text, \n"
    "\tgrade int)",
    "CREATE TABLE Friend(\n"
    "\tstudent_id int,\n"
    "\tfriend_id int,\n"
    "\tprimary key (student_id,friend_id),\n"
    "\tforeign key(student_id) references Highschooler(ID),\n"
    "\tforeign key (friend_id) references Highschooler(ID)\n"
    ")",
    "CREATE TABLE Likes(\n"
    "\tstudent_id int,\n"
    "\tliked_id int,\n"
    "\tprimary key (student_id, liked_id),\n"
    "\tforeign key (liked_id) references Highschooler(ID),\n"
    "\tforeign key (student_id) references Highschooler(ID)\n"
    ")",
)

_NETWORK_ROWS = {
    "Highschooler": [
        (1510, "Jordan", 9),
        (1689, "Gabriel", 9),
        (1381, "Tiffany", 9),
        (1709, "Cassandra", 9),
        (1101, "Haley", 10),
        (1782, "Andrew", 10),
        (1468, "Kris", 10),
        (1641, "Brittany", 10),
        (1247, "Alexis", 11),
        (1316, "Austin", 11),
        (1911, "Gabriel", 11),
        (1025, "John", 12),
        (1934, "Kyle", 12),
        (1661, "Logan", 12),
    ],
    "Friend": [
        (1510, 1381),
        (1510, 1689),
        (1689, 1709),
        (1381, 1247),
        (1709, 1247),
        (1689, 1782),
        (1782, 1468),
        (1468, 1101),
        (1101, 1641),
        (1247, 1316),
        (1316, 1934),
        (1934, 1661),
        (1661, 1025),
        (1911, 1247),
    ],
    "Likes": [
        (1689, 1709),
        (1709, 1689),
        (1782, 1709),
        (1911, 1247),
        (1247, 1468),
        (1641, 1468),
        (1316, 1101),
        (1661, 1934),
        (1025, 1101),
    ],
}

_SNIPPET_DDL = (
    "CREATE TABLE Highschooler (\n"
    "ID int primary key,\n"
    "name text,\n"
    "grade int\n"
    ")",
    "CREATE TABLE Friend (\n"
    "student_id int,\n"
    "friend_id int,\n"
    "primary key (student_id,friend_id),\n"
    "foreign key(student_id) references Highschooler(ID),\n"
    "foreign key (friend_id) references Highschooler(ID)\n"
    ")",
)

_SNIPPET_ROWS = {
    "Highschooler": [
        (1510, "Jordan", 9),
        (1689, "Gabriel", 9),
        (1381, "Tiffany", 9),
        (1709, "Cassandra", 10),
        (1782, "Andrew", 11),
    ],
    "Friend": [
        (1510, 1381),
        (1510, 1689),
        (1689, 1709),
    ],
}

_BOOK_DDL = (
    "CREATE TABLE publication(\n"
    "\tpublication_id int,\n"
    "\tbook_id int,\n"
    "\tpublisher text,\n"
    "\tpublication_date text,\n"
    "\tprice real,\n"
    "\tprimary key (publication_id),\n"
    "\tforeign key (book_id) references book(book_id)\n"
    ")",
    "CREATE TABLE book(\n"
    "\tbook_id int,\n"
    "\ttitle text,\n"
    "\tissues real,\n"
    "\twriter text,\n"
    "\tprimary key (book_id)\n"
    ")",
)

_BOOK_ROWS = {
    "publication": [
        (1, 1, "Pearson", "August 2008", 15000000.0),
        (2, 3, "Thomson Reuters", "March 2008", 6000000.0),
        (3, 4, "Wiley", "June 2006", 4100000.0),
        (4, 5, "Wiley", "October 2005", 3000000.0),
        (5, 7, "Springer Nature", "August 2008", 3000000.0),
    ],
    "book": [
        (1, "The Black Lamb", 6.0, "Timothy Truman"),
        (2, "Bloody Mary", 4.0, "Garth Ennis"),
        (3, "Bloody Mary : Lady Liberty", 4.0, "Garth Ennis"),
        (4, "BrainBanx", 6.0, "Elaine Lee"),
        (5, "Cyberella", 12.0, "Howard Chaykin"),
        (6, "Dead Corps", 4.0, "Christopher Hinz"),
        (7, "The Dome: Ground Zero", 1.0, "Dave Gibbons"),
    ],
}

_RACE_DDL = (
    "CREATE TABLE race(\n"
    "\trace_id int,\n"
    "\tname text,\n"
    "\tclass text,\n"
    "\tdate text,\n"
    "\ttrack_id text,\n"
    "\tprimary key (race_id),\n"
    "\tforeign key (track_id) references track(track_id)\n"
    ")",
    "CREATE TABLE track(\n"
    "\ttrack_id int,\n"
    "\tname text,\n"
    "\tlocation text,\n"
    "\tseating real,\n"
    "\tyear_opened real,\n"
    "\tprimary key (track_id)\n"
    ")",
)

_RACE_ROWS = {
    "race": [
        (1, "Rolex 24 At Daytona", "DP/GT", "January 26 January 27", "1"),
        (2, "Gainsco Grand Prix of Miami", "DP/GT", "March 29", "2"),
        (3, "Mexico City 250", "DP/GT", "April 19", "2"),
        (4, "Sahlen's Six Hours of the Glen", "DP/GT", "June 7", "3"),
        (5, "Brumos Porsche 250", "DP/GT", "July 5", "1"),
    ],
    "track": [
        (1, "Auto Club Speedway", "Fontana, CA", 92000.0, 1997.0),
        (2, "Chicagoland Speedway", "Joliet, IL", 75000.0, 2001.0),
        (3, "Darlington Raceway", "Darlington, SC", 63000.0, 1950.0),
        (4, "Daytona International Speedway", "Daytona Beach, FL", 168000.0, 1959.0),
        (5, "Homestead-Miami Speedway", "Homestead, FL", 65000.0, 1995.0),
    ],
}

_FIXTURES = {
    NETWORK_DB_ID: (_NETWORK_DDL, _NETWORK_ROWS),
    SNIPPET_DB_ID: (_SNIPPET_DDL, _SNIPPET_ROWS),
    BOOK_DB_ID: (_BOOK_DDL, _BOOK_ROWS),
    RACE_DB_ID: (_RACE_DDL, _RACE_ROWS),
}


def build_fixture(db_id: str, db_file: str | Path) -> Path:
    """Create one fixture database file, replacing any existing one."""
    ddl, rows_by_table = _FIXTURES[db_id]
    path = Path(db_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    conn = sqlite3.connect(path)
    try:
        for statement in ddl:
            conn.execute(statement)
        for table, rows in rows_by_table.items():
            placeholders = ", ".join("?" for _ in rows[0])
            conn.executemany(
                f"INSERT INTO {table} VALUES ({placeholders})", rows
            )
        conn.commit()
    finally:
        conn.close()
    return path


def build_spider_layout(root: str | Path, db_ids: tuple[str, ...] | None = None) -> dict[str, Path]:
    """Create ``root/<db_id>/<db_id>.sqlite`` for the chosen fixtures."""
    root = Path(root)
    ids = db_ids if db_ids is not None else (NETWORK_DB_ID, BOOK_DB_ID, RACE_DB_ID)
    return {
        db_id: build_fixture(db_id, root / db_id / f"{db_id}.sqlite") for db_id in ids
    }
