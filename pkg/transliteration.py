# -*- coding: utf-8 -*-
# transliteration.py
# Phonetic and script transforms of Chinese names.
#
# Tables (UTF-8, one record per line, '#' comments, optional "# version: X" header):
#   hanyu.tsv / cantonese.tsv / tongyong.tsv / wadegiles.tsv   letter<TAB>syllable
#   polyphone_family.tsv   family<TAB>hy<TAB>ct<TAB>ty<TAB>wd     (space separated syllables)
#   polyphone_words.tsv    word<TAB>hy<TAB>ct<TAB>ty<TAB>wd
#   family_names.txt       one family name per line
#   trad2simp.tsv          traditional<TAB>simplified
#   given_letters.txt      letters used by the synthetic generator (optional)
#
# Romanization order: the family-name position is resolved through the family
# polyphone table, the rest by a greedy longest-match scan over polyphone words,
# then letter by letter. Letters missing from a table are looked up again through
# their simplified form and otherwise pass through unchanged.
from __future__ import annotations

import re
import functools
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, Iterator, List, Mapping, Optional, Tuple, Union

from errors import ConfigError, TableError, TypeMismatch
from text_model import DEFAULT_TEXT, NameString, TextConfig, classify_name, lowercase, CharClass, classify_char
from util import log, resolve_here

try:
    import opencc  # type: ignore
except Exception:  # pragma: no cover
    opencc = None

# Distinct names memoized per Transliterator for each form list.
DEFAULT_CACHE_SIZE = 65536


class RomanizationSystem(str, Enum):
    HANYU = "HanyuPinyin"
    CANTONESE = "Cantonese"
    TONGYONG = "TongyongPinyin"
    WADEGILES = "WadeGiles"


SYSTEMS: Tuple[RomanizationSystem, ...] = (
    RomanizationSystem.HANYU,
    RomanizationSystem.CANTONESE,
    RomanizationSystem.TONGYONG,
    RomanizationSystem.WADEGILES,
)

SYSTEM_CODES: Dict[RomanizationSystem, str] = {
    RomanizationSystem.HANYU: "hy",
    RomanizationSystem.CANTONESE: "ct",
    RomanizationSystem.TONGYONG: "ty",
    RomanizationSystem.WADEGILES: "wd",
}

TABLE_FILES: Dict[RomanizationSystem, str] = {
    RomanizationSystem.HANYU: "hanyu.tsv",
    RomanizationSystem.CANTONESE: "cantonese.tsv",
    RomanizationSystem.TONGYONG: "tongyong.tsv",
    RomanizationSystem.WADEGILES: "wadegiles.tsv",
}

FAMILY_POLYPHONE_FILE = "polyphone_family.tsv"
WORD_POLYPHONE_FILE = "polyphone_words.tsv"
FAMILY_NAMES_FILE = "family_names.txt"
TRAD2SIMP_FILE = "trad2simp.tsv"
GIVEN_LETTERS_FILE = "given_letters.txt"

_SYLLABLE = re.compile(r"^[a-z]+$")
_VERSION = re.compile(r"^#\s*version\s*:\s*(\S+)")

Readings = Tuple[Tuple[str, ...], ...]  # per system, a syllable sequence


def parse_system(value: Union[str, RomanizationSystem]) -> RomanizationSystem:
    if isinstance(value, RomanizationSystem):
        return value
    low = str(value).strip().lower()
    for sys_, code in SYSTEM_CODES.items():
        if low in (code, sys_.value.lower(), sys_.name.lower()):
            return sys_
    raise ConfigError(f"unknown romanization system {value!r}")


# ------------------------------
# Table loading
# ------------------------------

def _read_lines(path: Path, versions: Dict[str, str]) -> Iterator[Tuple[int, List[str]]]:
    if not path.exists():
        raise TableError(str(path), "table file not found")
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                m = _VERSION.match(line)
                if m:
                    versions[path.name] = m.group(1)
                continue
            yield lineno, line.split("\t")


def _syllables(path: Path, lineno: int, text: str) -> Tuple[str, ...]:
    parts = tuple(text.split())
    if not parts or not all(_SYLLABLE.match(p) for p in parts):
        raise TableError(str(path), f"bad syllable field {text!r}", lineno)
    return parts


def _is_cjk(text: str, text_cfg: TextConfig) -> bool:
    return bool(text) and all(classify_char(ch, text_cfg) is CharClass.CHINESE_LETTER for ch in text)


def _read_romanization(path: Path, versions: Dict[str, str], text_cfg: TextConfig) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, cols in _read_lines(path, versions):
        if len(cols) != 2 or len(cols[0]) != 1 or not _is_cjk(cols[0], text_cfg):
            raise TableError(str(path), "expected letter<TAB>syllable", lineno)
        syl = _syllables(path, lineno, cols[1])
        if len(syl) != 1:
            raise TableError(str(path), "one syllable per letter", lineno)
        out[cols[0]] = syl[0]
    return out


def _read_readings(path: Path, versions: Dict[str, str], text_cfg: TextConfig) -> Dict[str, Readings]:
    out: Dict[str, Readings] = {}
    for lineno, cols in _read_lines(path, versions):
        if len(cols) != 1 + len(SYSTEMS) or not _is_cjk(cols[0], text_cfg):
            raise TableError(str(path), "expected key and four syllable fields", lineno)
        readings = tuple(_syllables(path, lineno, c) for c in cols[1:])
        out[cols[0]] = readings
    return out


def _read_list(path: Path, versions: Dict[str, str], text_cfg: TextConfig) -> List[str]:
    out: List[str] = []
    for lineno, cols in _read_lines(path, versions):
        item = cols[0].strip()
        if len(cols) != 1 or not _is_cjk(item, text_cfg):
            raise TableError(str(path), "expected one Chinese entry per line", lineno)
        out.append(item)
    return out


@dataclass(frozen=True)
class TransliterationTables:
    romanization: Mapping[RomanizationSystem, Mapping[str, str]]
    family_names: FrozenSet[str]
    family_polyphones: Mapping[str, Readings]
    word_polyphones: Mapping[str, Readings]
    trad2simp: Mapping[str, str]
    given_letters: Tuple[str, ...] = ()
    family_order: Tuple[str, ...] = ()
    versions: Mapping[str, str] = field(default_factory=dict)
    directory: str = ""

    @classmethod
    def load(cls, directory: Union[str, Path], text_cfg: TextConfig = DEFAULT_TEXT) -> "TransliterationTables":
        base = Path(directory)
        versions: Dict[str, str] = {}
        roman = {s: _read_romanization(base / TABLE_FILES[s], versions, text_cfg) for s in SYSTEMS}

        family_order = tuple(dict.fromkeys(_read_list(base / FAMILY_NAMES_FILE, versions, text_cfg)))
        families = frozenset(family_order)
        if not families:
            raise TableError(str(base / FAMILY_NAMES_FILE), "family-name set is empty")
        if any(len(f) > 2 for f in families):
            raise TableError(str(base / FAMILY_NAMES_FILE), "family names have one or two letters")

        fam_poly = _read_readings(base / FAMILY_POLYPHONE_FILE, versions, text_cfg)
        stray = sorted(k for k in fam_poly if k not in families)
        if stray:
            raise TableError(str(base / FAMILY_POLYPHONE_FILE), f"not in the family-name set: {''.join(stray)}")
        words = _read_readings(base / WORD_POLYPHONE_FILE, versions, text_cfg)
        for w, readings in words.items():
            if any(len(r) != len(w) for r in readings):
                raise TableError(str(base / WORD_POLYPHONE_FILE), f"{w}: one syllable per letter expected")

        t2s: Dict[str, str] = {}
        path = base / TRAD2SIMP_FILE
        for lineno, cols in _read_lines(path, versions):
            if len(cols) != 2 or len(cols[0]) != 1 or len(cols[1]) != 1 \
                    or not _is_cjk(cols[0] + cols[1], text_cfg):
                raise TableError(str(path), "expected traditional<TAB>simplified", lineno)
            t2s[cols[0]] = cols[1]
        looped = sorted(k for k, v in t2s.items() if v in t2s and t2s[v] != v)
        if looped:
            raise TableError(str(path), f"simplified letters mapped again: {''.join(looped)}")

        given: Tuple[str, ...] = ()
        if (base / GIVEN_LETTERS_FILE).exists():
            given = tuple(_read_list(base / GIVEN_LETTERS_FILE, versions, text_cfg))

        tables = cls(roman, families, fam_poly, words, t2s, given, family_order, versions, str(base))
        log("tables", f"loaded {len(roman[RomanizationSystem.HANYU])} letters, "
                      f"{len(families)} family names, {len(words)} polyphone words from {base}")
        return tables


@functools.lru_cache(maxsize=8)
def _load_cached(directory: str, text_cfg: TextConfig) -> TransliterationTables:
    return TransliterationTables.load(directory, text_cfg)


def load_tables(directory: Optional[Union[str, Path]] = None,
                text_cfg: TextConfig = DEFAULT_TEXT) -> TransliterationTables:
    path = resolve_here(str(directory or "tables"))
    return _load_cached(str(path), text_cfg)


# ------------------------------
# Transliterator
# ------------------------------

def _opencc_converter() -> Callable[[str], str]:
    if opencc is None:
        raise ConfigError("tables.simplify_fallback = opencc but the opencc package is not installed")
    conv = opencc.OpenCC("t2s")
    return conv.convert


class Transliterator:
    """View over the tables; safe to share between threads.

    Per-name form lists are memoized in bounded LRU caches. Letters with no
    reading are tallied under a lock; read them with unmapped_counts().
    """

    def __init__(self, tables: TransliterationTables, text_cfg: TextConfig = DEFAULT_TEXT,
                 simplify_fallback: Optional[Callable[[str], str]] = None, cache_size: int = DEFAULT_CACHE_SIZE):
        if cache_size < 0:
            raise ConfigError(f"tables.cache_size must be >= 0, got {cache_size}")
        self.tables = tables
        self.text = text_cfg
        self._fallback = simplify_fallback
        self._fallback_one = functools.lru_cache(maxsize=cache_size)(self._fallback_char)
        self._max_word = max((len(w) for w in tables.word_polyphones), default=0)
        self._family_lengths = sorted({len(f) for f in tables.family_names}, reverse=True)
        self._ce_forms = functools.lru_cache(maxsize=cache_size)(self._build_ce_forms)
        self._cc_forms = functools.lru_cache(maxsize=cache_size)(self._build_cc_forms)
        self._lock = threading.Lock()
        self._unmapped: Counter = Counter()
        self._simp2trad: Dict[str, str] = {}
        for trad, simp in tables.trad2simp.items():
            self._simp2trad.setdefault(simp, trad)

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> "Transliterator":
        text_cfg = TextConfig.from_settings(settings)
        tables = load_tables(settings.get("tables.dir", "tables"), text_cfg)
        fallback = None
        mode = str(settings.get("tables.simplify_fallback", "none")).lower()
        if mode == "opencc":
            fallback = _opencc_converter()
        elif mode not in ("", "none"):
            raise ConfigError(f"tables.simplify_fallback: unknown value {mode!r}")
        return cls(tables, text_cfg, fallback, int(settings.get("tables.cache_size", DEFAULT_CACHE_SIZE)))

    # --- helpers ---

    def _raw(self, name: Union[str, NameString], require_cn: bool) -> str:
        if isinstance(name, NameString):
            if require_cn and not name.is_cn:
                raise TypeMismatch(f"expected a Cn name, got En name {name.raw!r}")
            return name.raw
        if require_cn and not classify_name(name, self.text).is_cn:
            raise TypeMismatch(f"expected a Cn name, got {name!r}")
        return name

    def _is_chinese(self, ch: str) -> bool:
        return classify_char(ch, self.text) is CharClass.CHINESE_LETTER

    def simplify_char(self, ch: str) -> str:
        simp = self.tables.trad2simp.get(ch)
        if simp is not None:
            return simp
        if self._fallback is None or not self._is_chinese(ch):
            return ch
        if ch in self.tables.romanization[RomanizationSystem.HANYU]:
            return ch
        return self._fallback_one(ch)

    def _fallback_char(self, ch: str) -> str:
        out = self._fallback(ch)
        return out if len(out) == 1 else ch

    def _simplified(self, s: str) -> str:
        return "".join(self.simplify_char(ch) for ch in s)

    def _leading_run(self, s: str) -> Optional[Tuple[int, int]]:
        start = None
        for i, ch in enumerate(s):
            if self._is_chinese(ch):
                if start is None:
                    start = i
            elif start is not None:
                return start, i
        return (start, len(s)) if start is not None else None

    def _family_span(self, s: str) -> Optional[Tuple[int, int]]:
        run = self._leading_run(s)
        if run is None:
            return None
        start, end = run
        simp = self._simplified(s[start:end])
        for n in self._family_lengths:
            if n <= len(simp) and simp[:n] in self.tables.family_names:
                return start, start + n
        return None

    def _reordered(self, s: str, span: Tuple[int, int]) -> Tuple[str, Tuple[int, int]]:
        run = self._leading_run(s)
        assert run is not None
        a, b = span
        end = run[1]
        moved = s[:a] + s[b:end] + s[a:b] + s[end:]
        return moved, (end - (b - a), end)

    def _romanize(self, s: str, system: RomanizationSystem,
                  family_span: Optional[Tuple[int, int]]) -> Tuple[List[str], int]:
        k = SYSTEMS.index(system)
        table = self.tables.romanization[system]
        words = self.tables.word_polyphones
        simp = self._simplified(s)
        pieces: List[str] = []
        missing: List[str] = []

        def scan(lo: int, hi: int) -> None:
            i = lo
            while i < hi:
                ch = simp[i]
                if not self._is_chinese(ch):
                    pieces.append(s[i])
                    i += 1
                    continue
                for n in range(min(self._max_word, hi - i), 0, -1):
                    entry = words.get(simp[i:i + n])
                    if entry is not None:
                        pieces.extend(entry[k])
                        i += n
                        break
                else:
                    syl = table.get(ch)
                    if syl is None:
                        pieces.append(s[i])
                        missing.append(s[i])
                    else:
                        pieces.append(syl)
                    i += 1

        if family_span is None:
            scan(0, len(s))
        else:
            a, b = family_span
            scan(0, a)
            entry = self.tables.family_polyphones.get(simp[a:b])
            if entry is not None:
                pieces.extend(entry[k])
            else:
                scan(a, b)
            scan(b, len(s))
        if missing:
            with self._lock:
                self._unmapped.update(missing)
        return pieces, len(missing)

    # --- public operations ---

    def simplify(self, name: Union[str, NameString]) -> str:
        """Ts(n): traditional letters replaced, everything else unchanged."""
        return self._simplified(self._raw(name, require_cn=False))

    def detect_family(self, name: Union[str, NameString]) -> Optional[str]:
        s = self._raw(name, require_cn=True)
        span = self._family_span(s)
        return s[span[0]:span[1]] if span else None

    def reorder_family(self, name: Union[str, NameString]) -> Optional[str]:
        s = self._raw(name, require_cn=True)
        span = self._family_span(s)
        if span is None:
            return None
        return self._reordered(s, span)[0]

    def syllables(self, name: Union[str, NameString], system: Union[str, RomanizationSystem],
                  family_last: bool = False) -> List[str]:
        """Romanized pieces of a name in output order; non-Chinese codepoints come through as single pieces."""
        s = self._raw(name, require_cn=False)
        span = self._family_span(s)
        if family_last and span is not None:
            s, span = self._reordered(s, span)
        return self._romanize(s, parse_system(system), span)[0]

    def transliterate_counted(self, name: Union[str, NameString],
                              system: Union[str, RomanizationSystem]) -> Tuple[str, int]:
        s = self._raw(name, require_cn=False)
        pieces, unmapped = self._romanize(s, parse_system(system), self._family_span(s))
        return "".join(pieces), unmapped

    def transliterate(self, name: Union[str, NameString], system: Union[str, RomanizationSystem]) -> str:
        return self.transliterate_counted(name, system)[0]

    def phonetic_forms_ce(self, name: Union[str, NameString]) -> Tuple[str, ...]:
        """[Hy, Ct, Ty, Wd] of n followed by the same four of n with its family name moved last."""
        return self._ce_forms(self._raw(name, require_cn=True))

    def _build_ce_forms(self, s: str) -> Tuple[str, ...]:
        span = self._family_span(s)
        forward = tuple("".join(self._romanize(s, sys_, span)[0]) for sys_ in SYSTEMS)
        if span is None:
            return forward + forward
        moved, moved_span = self._reordered(s, span)
        return forward + tuple("".join(self._romanize(moved, sys_, moved_span)[0]) for sys_ in SYSTEMS)

    def transforms_cc(self, name: Union[str, NameString]) -> Tuple[str, ...]:
        """[Ts, Hy, Ct, Ty, Wd] with English letters lowercased; no family reordering."""
        return self._cc_forms(self._raw(name, require_cn=True))

    def _build_cc_forms(self, s: str) -> Tuple[str, ...]:
        span = self._family_span(s)
        return (lowercase(self._simplified(s)),) + tuple(
            lowercase("".join(self._romanize(s, sys_, span)[0])) for sys_ in SYSTEMS)

    def unmapped_counts(self) -> Counter:
        """Copy of the per-letter tally of Chinese letters that had no reading."""
        with self._lock:
            return Counter(self._unmapped)

    def is_covered(self, text: str) -> bool:
        """True when every Chinese letter of text has a reading in all four systems."""
        for ch in self._simplified(text):
            if self._is_chinese(ch) and not all(ch in self.tables.romanization[s] for s in SYSTEMS):
                return False
        return True

    def traditional_of(self, ch: str) -> Optional[str]:
        """First traditional letter (table order) that simplifies to ch."""
        return self._simp2trad.get(ch)


def default_transliterator(settings: Optional[Mapping[str, Any]] = None) -> Transliterator:
    if settings is None:
        return Transliterator(load_tables())
    return Transliterator.from_settings(settings)
