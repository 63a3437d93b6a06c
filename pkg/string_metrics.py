# -*- coding: utf-8 -*-
# string_metrics.py
# Similarity measures over codepoint strings. Every similarity lies in [0, 1];
# two empty strings are treated as identical (similarity 1).
from __future__ import annotations

import math
from collections import Counter

from rapidfuzz.distance import Levenshtein, LCSseq


def levenshtein_distance(a: str, b: str) -> int:
    """Unit-cost edit distance with insert, delete and substitute."""
    return Levenshtein.distance(a, b)


def sl(a: str, b: str) -> float:
    """Levenshtein similarity: 1 - LD / max(|a|, |b|)."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein_distance(a, b) / longest


def lcs_substring_len(a: str, b: str) -> int:
    """Length of the longest contiguous run shared by a and b."""
    if not a or not b:
        return 0
    if len(a) > len(b):
        a, b = b, a
    # a shared run of length k contains one of every shorter length
    best = 0
    for k in range(1, len(a) + 1):
        grams = {b[i:i + k] for i in range(len(b) - k + 1)}
        if not any(a[i:i + k] in grams for i in range(len(a) - k + 1)):
            break
        best = k
    return best


def pls(a: str, b: str) -> float:
    """Proportion of the longest common substring: 2 * LCS / (|a| + |b|)."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * lcs_substring_len(a, b) / total


def lcq_subseq_len(a: str, b: str) -> int:
    """Longest common subsequence length."""
    return LCSseq.similarity(a, b)


def sa(a: str, b: str) -> float:
    """Abbreviation similarity: 2 * LCQ / (|a| + |b|)."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * lcq_subseq_len(a, b) / total


def cosine_char(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    ca, cb = Counter(a), Counter(b)
    dot = sum(n * cb[ch] for ch, n in ca.items() if ch in cb)
    if dot == 0:
        return 0.0
    na = sum(n * n for n in ca.values())
    nb = sum(n * n for n in cb.values())
    # integer norms keep identical distributions at exactly 1.0
    return min(1.0, dot / math.sqrt(na * nb))


def jaccard_char(a: str, b: str) -> float:
    sa_, sb_ = set(a), set(b)
    union = sa_ | sb_
    if not union:
        return 1.0
    return len(sa_ & sb_) / len(union)
