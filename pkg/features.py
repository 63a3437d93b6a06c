# -*- coding: utf-8 -*-
# features.py
# Fixed-layout feature vectors for the three matching types.
#
#   EE (18): the base block below, on the raw pair
#   CE (82): base block on the raw pair + 8 blocks of 8, one per phonetic form
#            [hy, ct, ty, wd, hy_rev, ct_rev, ty_rev, wd_rev]
#   CC (58): base block on the raw pair + 5 blocks of 8, one per transform
#            [ts, hy, ct, ty, wd]
#
# Base block layout:
#   0 sl            1 sl_lower
#   2 pls           3 pls_nosplit       4 pls_lower        5 pls_nosplit_lower
#   6 sp_cosine     7 sp_jaccard
#   8 sa            9 sa_lower
#  10 ns_cosine    11 ns_jaccard       12 ns_pls          13 ns_sl
#  14 ns_lower_cosine 15 ns_lower_jaccard 16 ns_lower_pls  17 ns_lower_sl
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from errors import TypeMismatch
from string_metrics import cosine_char, jaccard_char, pls, sa, sl
from text_model import (
    DEFAULT_TEXT, MatchingType, NameString, TextConfig, classify_name, english_letters,
    lowercase, matching_type, non_special_string, special_string, strip_splitters,
)
from transliteration import SYSTEMS, SYSTEM_CODES, Transliterator

BASE_LABELS: Tuple[str, ...] = (
    "sl", "sl_lower",
    "pls", "pls_nosplit", "pls_lower", "pls_nosplit_lower",
    "sp_cosine", "sp_jaccard",
    "sa", "sa_lower",
    "ns_cosine", "ns_jaccard", "ns_pls", "ns_sl",
    "ns_lower_cosine", "ns_lower_jaccard", "ns_lower_pls", "ns_lower_sl",
)

CE_FORMS: Tuple[str, ...] = tuple(SYSTEM_CODES[s] for s in SYSTEMS) + tuple(
    SYSTEM_CODES[s] + "_rev" for s in SYSTEMS)
CE_BLOCK: Tuple[str, ...] = ("sl", "pls", "pls_nosplit", "sa", "el_cosine", "el_jaccard", "el_pls", "el_sl")

CC_FORMS: Tuple[str, ...] = ("ts",) + tuple(SYSTEM_CODES[s] for s in SYSTEMS)
CC_BLOCK: Tuple[str, ...] = ("sl", "pls", "pls_nosplit", "sa", "ns_cosine", "ns_jaccard", "ns_pls", "ns_sl")


@dataclass(frozen=True)
class FeatureSchema:
    matching_type: MatchingType
    labels: Tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"{self.matching_type.value} schema has no feature {label!r}") from None

    def lines(self) -> List[str]:
        return [f"{i}\t{label}" for i, label in enumerate(self.labels)]


EE_SCHEMA = FeatureSchema(MatchingType.EE, BASE_LABELS)
CE_SCHEMA = FeatureSchema(MatchingType.CE, BASE_LABELS + tuple(
    f"{form}.{m}" for form in CE_FORMS for m in CE_BLOCK))
CC_SCHEMA = FeatureSchema(MatchingType.CC, BASE_LABELS + tuple(
    f"{form}.{m}" for form in CC_FORMS for m in CC_BLOCK))

SCHEMAS: Dict[MatchingType, FeatureSchema] = {
    MatchingType.EE: EE_SCHEMA,
    MatchingType.CE: CE_SCHEMA,
    MatchingType.CC: CC_SCHEMA,
}

# Reduced feature sets used by the mcua-s method.
SELECTED_FEATURES: Dict[MatchingType, Tuple[str, ...]] = {
    MatchingType.CC: ("ns_cosine", "ns_lower_jaccard", "hy.pls", "ct.pls", "ts.ns_cosine"),
    MatchingType.CE: ("hy.pls", "hy.el_jaccard", "hy.pls_nosplit", "ct.el_cosine",
                      "hy.el_pls", "hy.el_cosine", "hy_rev.pls", "wd.el_cosine"),
    MatchingType.EE: ("ns_sl", "pls_nosplit_lower", "ns_lower_pls"),
}


def selected_columns(mt: MatchingType) -> Tuple[int, ...]:
    schema = SCHEMAS[mt]
    return tuple(sorted(schema.index_of(label) for label in SELECTED_FEATURES[mt]))


def parse_matching_type(value: Union[str, MatchingType]) -> MatchingType:
    if isinstance(value, MatchingType):
        return value
    try:
        return MatchingType(str(value).strip().upper())
    except ValueError:
        raise TypeMismatch(f"unknown matching type {value!r}") from None


@dataclass(frozen=True)
class FeatureVector:
    schema: FeatureSchema
    values: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


# ------------------------------
# Blocks
# ------------------------------

def base_block(a: str, b: str, cfg: TextConfig = DEFAULT_TEXT) -> List[float]:
    la, lb = lowercase(a), lowercase(b)
    sa_, sb_ = strip_splitters(a, cfg), strip_splitters(b, cfg)
    spa, spb = special_string(a, cfg), special_string(b, cfg)
    na, nb = non_special_string(a, cfg), non_special_string(b, cfg)
    nla, nlb = lowercase(na), lowercase(nb)
    return [
        sl(a, b), sl(la, lb),
        pls(a, b), pls(sa_, sb_), pls(la, lb), pls(lowercase(sa_), lowercase(sb_)),
        cosine_char(spa, spb), jaccard_char(spa, spb),
        sa(a, b), sa(la, lb),
        cosine_char(na, nb), jaccard_char(na, nb), pls(na, nb), sl(na, nb),
        cosine_char(nla, nlb), jaccard_char(nla, nlb), pls(nla, nlb), sl(nla, nlb),
    ]


def ce_block(form: str, en: str, cfg: TextConfig = DEFAULT_TEXT) -> List[float]:
    f, e = lowercase(form), lowercase(en)
    ef, ee = english_letters(f), english_letters(e)
    return [
        sl(f, e), pls(f, e), pls(strip_splitters(f, cfg), strip_splitters(e, cfg)), sa(f, e),
        cosine_char(ef, ee), jaccard_char(ef, ee), pls(ef, ee), sl(ef, ee),
    ]


def cc_block(ta: str, tb: str, cfg: TextConfig = DEFAULT_TEXT) -> List[float]:
    na, nb = non_special_string(ta, cfg), non_special_string(tb, cfg)
    return [
        sl(ta, tb), pls(ta, tb), pls(strip_splitters(ta, cfg), strip_splitters(tb, cfg)), sa(ta, tb),
        cosine_char(na, nb), jaccard_char(na, nb), pls(na, nb), sl(na, nb),
    ]


# ------------------------------
# Extractor
# ------------------------------

def _as_name(n: Union[str, NameString], cfg: TextConfig) -> NameString:
    return n if isinstance(n, NameString) else classify_name(n, cfg)


class FeatureExtractor:
    """Computes feature vectors with one transliterator and one text configuration."""

    def __init__(self, translit: Transliterator):
        self.translit = translit
        self.text = translit.text

    def features_ee(self, a: Union[str, NameString], b: Union[str, NameString]) -> FeatureVector:
        na, nb = _as_name(a, self.text), _as_name(b, self.text)
        if na.is_cn or nb.is_cn:
            raise TypeMismatch("EE features need two En names")
        return FeatureVector(EE_SCHEMA, tuple(base_block(na.raw, nb.raw, self.text)))

    def features_ce(self, cn: Union[str, NameString], en: Union[str, NameString]) -> FeatureVector:
        nc, ne = _as_name(cn, self.text), _as_name(en, self.text)
        if not nc.is_cn or ne.is_cn:
            raise TypeMismatch("CE features need a Cn name first and an En name second")
        return FeatureVector(CE_SCHEMA, tuple(self._ce_values(nc.raw, ne.raw)))

    def features_cc(self, a: Union[str, NameString], b: Union[str, NameString]) -> FeatureVector:
        na, nb = _as_name(a, self.text), _as_name(b, self.text)
        if not (na.is_cn and nb.is_cn):
            raise TypeMismatch("CC features need two Cn names")
        return FeatureVector(CC_SCHEMA, tuple(self._cc_values(na.raw, nb.raw)))

    def _ce_values(self, cn: str, en: str) -> List[float]:
        values = base_block(cn, en, self.text)
        for form in self._ce_forms(cn):
            values.extend(ce_block(form, en, self.text))
        return values

    def _cc_values(self, a: str, b: str) -> List[float]:
        values = base_block(a, b, self.text)
        for ta, tb in zip(self._cc_forms(a), self._cc_forms(b)):
            values.extend(cc_block(ta, tb, self.text))
        return values

    def _ce_forms(self, s: str) -> Tuple[str, ...]:
        # En strings have no Chinese letters to romanize
        if classify_name(s, self.text).is_cn:
            return self.translit.phonetic_forms_ce(s)
        return (s,) * len(CE_FORMS)

    def _cc_forms(self, s: str) -> Tuple[str, ...]:
        if classify_name(s, self.text).is_cn:
            return self.translit.transforms_cc(s)
        return (lowercase(s),) * len(CC_FORMS)

    def extract(self, a: NameString, b: NameString) -> FeatureVector:
        """Dispatch on the matching type; CE pairs are reordered so the Cn name comes first."""
        mt = matching_type(a, b)
        if mt is MatchingType.EE:
            return self.features_ee(a, b)
        if mt is MatchingType.CC:
            return self.features_cc(a, b)
        if a.is_cn:
            return self.features_ce(a, b)
        return self.features_ce(b, a)

    def extract_as(self, mt: MatchingType, a: Optional[NameString], b: Optional[NameString]) -> List[float]:
        """Schema mt applied to any pair regardless of type; absent names give zeros."""
        schema = SCHEMAS[mt]
        if a is None or b is None:
            return [0.0] * schema.length
        if mt is MatchingType.EE:
            return base_block(a.raw, b.raw, self.text)
        if mt is MatchingType.CC:
            return self._cc_values(a.raw, b.raw)
        if b.is_cn and not a.is_cn:
            a, b = b, a
        return self._ce_values(a.raw, b.raw)


def emit_schema(mt: Union[str, MatchingType]) -> List[str]:
    return SCHEMAS[parse_matching_type(mt)].lines()
