# -*- coding: utf-8 -*-
# text_model.py
# Character classes, En/Cn name typing, matching-type dispatch and the string
# normalizations every feature is built on.
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, FrozenSet, Mapping, Optional, Tuple, Union

from errors import ConfigError, EmptyName, SchemaViolation
from util import parse_str_list


class CharClass(str, Enum):
    CHINESE_LETTER = "ChineseLetter"
    ENGLISH_LETTER = "EnglishLetter"
    WORD_SPLITTER = "WordSplitter"
    SPECIAL_SYMBOL = "SpecialSymbol"


class NameType(str, Enum):
    EN = "En"
    CN = "Cn"


class MatchingType(str, Enum):
    EE = "EE"
    CE = "CE"
    CC = "CC"


MATCHING_TYPES = (MatchingType.CC, MatchingType.CE, MatchingType.EE)

_SPLITTER_NAMES = {"space": " ", "underscore": "_", "hyphen": "-", "dot": "."}

_UPPER_TO_LOWER = {c: c + 32 for c in range(ord("A"), ord("Z") + 1)}


def parse_ranges(spec: str) -> Tuple[Tuple[int, int], ...]:
    out = []
    for part in parse_str_list(spec):
        lo, sep, hi = part.partition("-")
        try:
            a = int(lo, 16)
            b = int(hi, 16) if sep else a
        except ValueError as ex:
            raise ConfigError(f"text.cjk_ranges: bad range {part!r}") from ex
        if a > b:
            raise ConfigError(f"text.cjk_ranges: empty range {part!r}")
        out.append((a, b))
    if not out:
        raise ConfigError("text.cjk_ranges: no ranges configured")
    return tuple(out)


def parse_splitters(spec: str) -> FrozenSet[str]:
    out = set()
    for part in parse_str_list(spec):
        if part.lower() in _SPLITTER_NAMES:
            out.add(_SPLITTER_NAMES[part.lower()])
        elif len(part) == 1:
            out.add(part)
        else:
            raise ConfigError(f"text.splitters: unknown splitter {part!r}")
    return frozenset(out)


@dataclass(frozen=True)
class TextConfig:
    cjk_ranges: Tuple[Tuple[int, int], ...] = ((0x4E00, 0x9FFF), (0x3400, 0x4DBF))
    splitters: FrozenSet[str] = frozenset({" ", "_"})

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> "TextConfig":
        return cls(
            cjk_ranges=parse_ranges(settings.get("text.cjk_ranges", "4E00-9FFF,3400-4DBF")),
            splitters=parse_splitters(settings.get("text.splitters", "space,underscore")),
        )


DEFAULT_TEXT = TextConfig()


def classify_char(ch: Union[str, int], cfg: TextConfig = DEFAULT_TEXT) -> CharClass:
    cp = ch if isinstance(ch, int) else ord(ch)
    for lo, hi in cfg.cjk_ranges:
        if lo <= cp <= hi:
            return CharClass.CHINESE_LETTER
    if 0x41 <= cp <= 0x5A or 0x61 <= cp <= 0x7A:
        return CharClass.ENGLISH_LETTER
    if chr(cp) in cfg.splitters:
        return CharClass.WORD_SPLITTER
    return CharClass.SPECIAL_SYMBOL


def is_chinese(ch: str, cfg: TextConfig = DEFAULT_TEXT) -> bool:
    return classify_char(ch, cfg) is CharClass.CHINESE_LETTER


def is_english(ch: str) -> bool:
    return ("A" <= ch <= "Z") or ("a" <= ch <= "z")


@dataclass(frozen=True)
class NameString:
    raw: str
    name_type: NameType

    @property
    def is_cn(self) -> bool:
        return self.name_type is NameType.CN

    def __str__(self) -> str:
        return self.raw


def classify_name(raw: str, cfg: TextConfig = DEFAULT_TEXT) -> NameString:
    if not raw:
        raise EmptyName("account name is empty")
    cn = any(classify_char(ch, cfg) is CharClass.CHINESE_LETTER for ch in raw)
    return NameString(raw, NameType.CN if cn else NameType.EN)


def matching_type(a: NameString, b: NameString) -> MatchingType:
    if a.is_cn and b.is_cn:
        return MatchingType.CC
    if a.is_cn or b.is_cn:
        return MatchingType.CE
    return MatchingType.EE


def lowercase(s: str) -> str:
    # only A-Z; other scripts are left alone
    return s.translate(_UPPER_TO_LOWER)


def strip_splitters(s: str, cfg: TextConfig = DEFAULT_TEXT) -> str:
    return "".join(ch for ch in s if ch not in cfg.splitters)


def special_string(s: str, cfg: TextConfig = DEFAULT_TEXT) -> str:
    """sp(n): special symbols and word splitters, in order."""
    keep = (CharClass.SPECIAL_SYMBOL, CharClass.WORD_SPLITTER)
    return "".join(ch for ch in s if classify_char(ch, cfg) in keep)


def non_special_string(s: str, cfg: TextConfig = DEFAULT_TEXT) -> str:
    """ns(n): Chinese and English letters, in order."""
    keep = (CharClass.CHINESE_LETTER, CharClass.ENGLISH_LETTER)
    return "".join(ch for ch in s if classify_char(ch, cfg) in keep)


def english_letters(s: str) -> str:
    """el(n): basic Latin letters only."""
    return "".join(ch for ch in s if is_english(ch))


@dataclass(frozen=True)
class Account:
    """One account; names holds exactly the network's slot count, None marks an absent name."""

    network: int
    account_id: str
    names: Tuple[Optional[NameString], ...]

    def check_slots(self, expected: int) -> None:
        if len(self.names) != expected:
            raise SchemaViolation(
                f"account {self.account_id!r} in network {self.network} has "
                f"{len(self.names)} name slots, expected {expected}"
            )
