# -*- coding: utf-8 -*-
from __future__ import annotations
from pathlib import Path
from typing import Any, List
import sys
import time

from errors import ConfigError

_QUIET = False

def resolve_here(p: str) -> Path:
    base = Path(__file__).resolve().parent
    q = Path(p)
    return q if q.is_absolute() else (base / q)

def ensure_console_utf8():
    try:
        if hasattr(sys.stdout, "reconfigure"):
            sys.stdout.reconfigure(encoding="utf-8")
        if hasattr(sys.stderr, "reconfigure"):
            sys.stderr.reconfigure(encoding="utf-8")
    except Exception:
        pass

# ------------------------------
# Logging
# ------------------------------

def set_quiet(quiet: bool) -> None:
    global _QUIET
    _QUIET = bool(quiet)

def _now_ts() -> str:
    return time.strftime("[%H:%M:%S]")

def log(tag: str, msg: str) -> None:
    # stdout stays reserved for command output
    if _QUIET and tag != "ERROR":
        return
    print(f"{_now_ts()} [{tag}] {msg}", file=sys.stderr, flush=True)

def warn(msg: str) -> None:
    log("WARN", msg)

# ------------------------------
# Small parsers shared by config and CLI
# ------------------------------

def truthy(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if v is None:
        return False
    return str(v).strip().lower() in ("1", "true", "yes", "y", "on")

def parse_str_list(v: Any) -> List[str]:
    if isinstance(v, (list, tuple)):
        return [str(x).strip() for x in v if str(x).strip()]
    return [x.strip() for x in str(v or "").split(",") if x.strip()]

def parse_int_list(v: Any) -> List[int]:
    items = list(v) if isinstance(v, (list, tuple)) else parse_str_list(v)
    try:
        return [int(x) for x in items]
    except (TypeError, ValueError) as ex:
        raise ConfigError(f"expected a comma-separated list of integers, got {v!r}") from ex
