# -*- coding: utf-8 -*-
# store.py
# Optional sqlite store for evaluation runs.
#
#   mcua_runs     run_key (hash of the run's settings), tag, created, settings json
#   mcua_results  run_key, method, rnp, fold, tp, fp, fn, tn, precision, recall, f1
#
# Re-running the same settings replaces that run's rows.
from __future__ import annotations

import hashlib
import json
import sqlite3
import time
from typing import Any, Dict, List, Mapping, Optional, Tuple

from errors import ConfigError
from evaluation import MetricsReport
from util import log


def quote_ident(name: str) -> str:
    if name is None:
        raise ValueError("Identifier cannot be None")
    return '"' + str(name).replace('"', '""') + '"'


def table_exists(conn: sqlite3.Connection, table: str) -> bool:
    cur = conn.execute("SELECT name FROM sqlite_master WHERE type='table' AND name=?", (table,))
    return cur.fetchone() is not None


def ensure_pragmas(conn: sqlite3.Connection) -> None:
    conn.execute("PRAGMA journal_mode=WAL")
    conn.execute("PRAGMA synchronous=NORMAL")
    conn.execute("PRAGMA temp_store=MEMORY")
    conn.commit()


def ensure_tables(conn: sqlite3.Connection) -> None:
    conn.execute("""
    CREATE TABLE IF NOT EXISTS mcua_runs (
        run_key   TEXT PRIMARY KEY,
        tag       TEXT,
        created   TEXT,
        settings  TEXT
    )""")
    conn.execute("""
    CREATE TABLE IF NOT EXISTS mcua_results (
        run_key   TEXT NOT NULL,
        method    TEXT NOT NULL,
        rnp       INTEGER NOT NULL,
        fold      INTEGER NOT NULL,
        tp INTEGER, fp INTEGER, fn INTEGER, tn INTEGER,
        precision REAL, recall REAL, f1 REAL,
        PRIMARY KEY (run_key, method, rnp, fold)
    )""")
    conn.execute("CREATE INDEX IF NOT EXISTS idx_mcua_results_method ON mcua_results (method, rnp)")
    conn.commit()


_RESULT_COLUMNS = ("run_key", "method", "rnp", "fold", "tp", "fp", "fn", "tn", "precision", "recall", "f1")


def run_key(settings: Mapping[str, Any], tag: str = "") -> str:
    blob = json.dumps({"tag": tag, "settings": {k: settings[k] for k in sorted(settings)}},
                      sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:16]


def connect(path: str) -> sqlite3.Connection:
    conn = sqlite3.connect(path)
    try:
        ensure_pragmas(conn)
        ensure_tables(conn)
    except sqlite3.DatabaseError as ex:
        conn.close()
        raise ConfigError(f"{path}: not a usable results store ({ex})") from ex
    return conn


def save_report(conn: sqlite3.Connection, report: MetricsReport, settings: Mapping[str, Any]) -> str:
    key = run_key(settings, report.tag)
    created = time.strftime("%Y-%m-%dT%H:%M:%S")
    conn.execute("""
        INSERT INTO mcua_runs (run_key, tag, created, settings)
        VALUES (?, ?, ?, ?)
        ON CONFLICT(run_key) DO UPDATE SET created=excluded.created, settings=excluded.settings
    """, (key, report.tag, created, json.dumps(dict(settings), sort_keys=True, ensure_ascii=False, default=str)))
    conn.execute("DELETE FROM mcua_results WHERE run_key = ?", (key,))
    rows = [
        (key, r.method, r.rnp, r.fold, r.metrics.tp, r.metrics.fp, r.metrics.fn, r.metrics.tn,
         r.metrics.precision, r.metrics.recall, r.metrics.f1)
        for r in report.rows
    ]
    conn.executemany(
        f"INSERT INTO mcua_results ({', '.join(quote_ident(c) for c in _RESULT_COLUMNS)}) "
        f"VALUES ({', '.join('?' for _ in _RESULT_COLUMNS)})", rows)
    conn.commit()
    log("store", f"run {key} ({report.tag or 'default'}): {len(rows)} result rows")
    return key


def load_summary(conn: sqlite3.Connection, key: str) -> List[Tuple[str, int, float, float, float]]:
    """(method, rnp, mean precision, mean recall, mean f1) per stored cell, ordered."""
    if not table_exists(conn, "mcua_results"):
        return []
    cur = conn.execute("""
        SELECT method, rnp, AVG(precision), AVG(recall), AVG(f1)
        FROM mcua_results WHERE run_key = ?
        GROUP BY method, rnp ORDER BY method, rnp
    """, (key,))
    return [(r[0], int(r[1]), float(r[2]), float(r[3]), float(r[4])) for r in cur.fetchall()]


def list_runs(conn: sqlite3.Connection) -> List[Dict[str, Optional[str]]]:
    cur = conn.execute("SELECT run_key, tag, created FROM mcua_runs ORDER BY created, run_key")
    return [{"run_key": r[0], "tag": r[1], "created": r[2]} for r in cur.fetchall()]
