# -*- coding: utf-8 -*-
# synth.py
# Synthetic personas and per-network account names, written in the ingest format.
#
# Each persona is one Chinese name (family + one or two given letters) and a
# preferred romanization system. Every account name is produced by one naming
# behavior drawn from the mix:
#   raw            the Chinese name as is
#   traditional    letters swapped to their traditional form where the tables know one
#   transliterate  romanized with the preferred system, sometimes family-last
#   abbreviate     romanized, then shortened to initials or by deleting letters
#   decorate       raw or romanized with symbols and trailing digits
#   jitter         romanized with capitalised syllables and splitters between them
#   homophone      one given letter replaced by another letter with the same reading
# With probability `noise` a name is replaced by one of an unrelated random persona.
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Mapping, Sequence, Tuple, Union

import numpy as np

from dataset import write_jsonl
from errors import ConfigError
from transliteration import SYSTEMS, RomanizationSystem, Transliterator
from util import log


class Behavior(str, Enum):
    RAW = "raw"
    TRADITIONAL = "traditional"
    TRANSLITERATE = "transliterate"
    ABBREVIATE = "abbreviate"
    DECORATE = "decorate"
    JITTER = "jitter"
    HOMOPHONE = "homophone"


DEFAULT_MIX: Dict[Behavior, float] = {
    Behavior.TRANSLITERATE: 0.30,
    Behavior.ABBREVIATE: 0.15,
    Behavior.DECORATE: 0.15,
    Behavior.RAW: 0.15,
    Behavior.TRADITIONAL: 0.10,
    Behavior.JITTER: 0.10,
    Behavior.HOMOPHONE: 0.05,
}

HARD_FAMILY_POOL = 12
_SYMBOLS = ("_", "@", "~", "-", ".", "*", "·")
_SPLITTERS = (" ", "_", ".", "-")


def parse_mix(spec: Union[str, Mapping[str, float]]) -> Dict[Behavior, float]:
    items = list(spec.items()) if isinstance(spec, Mapping) else [
        part.split(":", 1) for part in str(spec).split(",") if part.strip()]
    out: Dict[Behavior, float] = {}
    for item in items:
        try:
            key, val = item
            out[Behavior(str(key).strip().lower())] = float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"synth.mix: bad entry {':'.join(map(str, item))!r}") from None
    return out


@dataclass(frozen=True)
class GenSpec:
    n_personas: int = 2000
    l: int = 1
    n: int = 2
    seed: int = 7
    mix: Mapping[Behavior, float] = field(default_factory=lambda: dict(DEFAULT_MIX))
    noise: float = 0.05
    family_last_rate: float = 0.3
    hard_negatives: bool = False

    def __post_init__(self):
        if self.n_personas < 1:
            raise ConfigError("synth.personas must be at least 1")
        if self.l < 1 or self.n < 1:
            raise ConfigError("synth.l and synth.n must be at least 1")
        if any(w < 0 for w in self.mix.values()) or abs(sum(self.mix.values()) - 1.0) > 1e-9:
            raise ConfigError(f"synth.mix weights must be non-negative and sum to 1, got {sum(self.mix.values()):g}")
        if not 0.0 <= self.noise < 1.0:
            raise ConfigError(f"synth.noise must lie in [0, 1), got {self.noise}")
        if not 0.0 <= self.family_last_rate <= 1.0:
            raise ConfigError("synth.family_last_rate must lie in [0, 1]")

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> "GenSpec":
        return cls(
            n_personas=int(settings.get("synth.personas", 2000)),
            l=int(settings.get("synth.l", 1)),
            n=int(settings.get("synth.n", 2)),
            seed=int(settings.get("run.seed", 7)),
            mix=parse_mix(settings.get("synth.mix", DEFAULT_MIX)),
            noise=float(settings.get("synth.noise", 0.05)),
            family_last_rate=float(settings.get("synth.family_last_rate", 0.3)),
            hard_negatives=bool(settings.get("synth.hard_negatives", False)),
        )


@dataclass(frozen=True)
class Persona:
    family: str
    given: str
    preferred_system: RomanizationSystem
    behavior_flags: FrozenSet[Behavior] = frozenset()

    @property
    def chinese_name(self) -> str:
        return self.family + self.given


class NameGenerator:
    """Draws personas and names from the loaded tables; all randomness comes from the caller's rng."""

    def __init__(self, translit: Transliterator, spec: GenSpec = GenSpec()):
        self.translit = translit
        self.spec = spec
        tables = translit.tables
        self.families: Tuple[str, ...] = tables.family_order or tuple(sorted(tables.family_names))
        self.given: Tuple[str, ...] = tables.given_letters or tuple(
            sorted(ch for ch in tables.romanization[SYSTEMS[0]] if ch not in tables.family_names))
        self.behaviors: Tuple[Behavior, ...] = tuple(b for b in Behavior if spec.mix.get(b, 0.0) > 0)
        self.weights = np.asarray([spec.mix[b] for b in self.behaviors], dtype=float)
        hanyu = tables.romanization[SYSTEMS[0]]
        given_set = set(self.given)
        by_reading: Dict[str, List[str]] = {}
        for ch in sorted(hanyu):
            if ch in given_set:
                by_reading.setdefault(hanyu[ch], []).append(ch)
        self.homophones: Dict[str, Tuple[str, ...]] = {
            ch: tuple(x for x in by_reading[hanyu[ch]] if x != ch) for ch in self.given if ch in hanyu}

    # --- personas ---

    def gen_persona(self, rng: np.random.Generator) -> Persona:
        pool = self.families[:HARD_FAMILY_POOL] if self.spec.hard_negatives else self.families
        family = pool[int(rng.integers(len(pool)))]
        size = 1 if rng.random() < 0.35 else 2
        given = "".join(self.given[int(i)] for i in rng.integers(len(self.given), size=size))
        system = SYSTEMS[int(rng.integers(len(SYSTEMS)))]
        return Persona(family, given, system)

    def _behavior(self, rng: np.random.Generator) -> Behavior:
        return self.behaviors[int(rng.choice(len(self.behaviors), p=self.weights))]

    # --- behaviors ---

    def _syllables(self, p: Persona, rng: np.random.Generator) -> List[str]:
        family_last = rng.random() < self.spec.family_last_rate
        return self.translit.syllables(p.chinese_name, p.preferred_system, family_last=family_last)

    def _traditional(self, p: Persona) -> str:
        return "".join(self.translit.traditional_of(ch) or ch for ch in p.chinese_name)

    def _abbreviate(self, p: Persona, rng: np.random.Generator) -> str:
        syl = self._syllables(p, rng)
        if rng.random() < 0.5:
            return syl[0] + "".join(s[0] for s in syl[1:])
        word = "".join(syl)
        kept = [word[0]] + [c for c in word[1:] if rng.random() >= 0.3]
        return "".join(kept)

    def _decorate(self, p: Persona, rng: np.random.Generator) -> str:
        base = p.chinese_name if rng.random() < 0.4 else "".join(self._syllables(p, rng))
        if rng.random() < 0.5:
            sym = _SYMBOLS[int(rng.integers(len(_SYMBOLS)))]
            base = sym + base if rng.random() < 0.5 else base + sym
        digits = "".join(str(int(d)) for d in rng.integers(0, 10, size=int(rng.integers(2, 5))))
        return base + digits

    def _jitter(self, p: Persona, rng: np.random.Generator) -> str:
        syl = [s[:1].upper() + s[1:] if rng.random() < 0.7 else s for s in self._syllables(p, rng)]
        if rng.random() < 0.5:
            sep = _SPLITTERS[int(rng.integers(len(_SPLITTERS)))]
            return sep.join(syl)
        return "".join(syl)

    def _homophone(self, p: Persona, rng: np.random.Generator) -> str:
        options = [(i, self.homophones.get(ch, ())) for i, ch in enumerate(p.given)]
        options = [(i, alts) for i, alts in options if alts]
        if not options:
            return p.chinese_name
        i, alts = options[int(rng.integers(len(options)))]
        given = p.given[:i] + alts[int(rng.integers(len(alts)))] + p.given[i + 1:]
        return p.family + given

    def name_for(self, p: Persona, behavior: Behavior, rng: np.random.Generator) -> str:
        if behavior is Behavior.RAW:
            return p.chinese_name
        if behavior is Behavior.TRADITIONAL:
            return self._traditional(p)
        if behavior is Behavior.TRANSLITERATE:
            return "".join(self._syllables(p, rng))
        if behavior is Behavior.ABBREVIATE:
            return self._abbreviate(p, rng)
        if behavior is Behavior.DECORATE:
            return self._decorate(p, rng)
        if behavior is Behavior.JITTER:
            return self._jitter(p, rng)
        return self._homophone(p, rng)

    def gen_account_names(self, p: Persona, slots: int, rng: np.random.Generator) -> Tuple[List[str], List[Behavior]]:
        names: List[str] = []
        used: List[Behavior] = []
        for _ in range(slots):
            behavior = self._behavior(rng)
            owner = p
            if rng.random() < self.spec.noise:
                owner = self.gen_persona(rng)
            name = self.name_for(owner, behavior, rng)
            names.append(name or p.chinese_name)
            used.append(behavior)
        return names, used


def gen_persona(rng: np.random.Generator, generator: NameGenerator) -> Persona:
    return generator.gen_persona(rng)


def gen_account_names(persona: Persona, network_slot_count: int, rng: np.random.Generator,
                      generator: NameGenerator) -> List[str]:
    return generator.gen_account_names(persona, network_slot_count, rng)[0]


@dataclass
class GeneratedData:
    accounts: List[Dict[str, Any]]
    positives: List[Dict[str, Any]]
    personas: List[Persona]


def gen_dataset(spec: GenSpec, translit: Transliterator) -> GeneratedData:
    gen = NameGenerator(translit, spec)
    rng = np.random.default_rng(spec.seed)
    width = max(5, len(str(spec.n_personas)))
    accounts1: List[Dict[str, Any]] = []
    accounts2: List[Dict[str, Any]] = []
    positives: List[Dict[str, Any]] = []
    personas: List[Persona] = []
    for i in range(spec.n_personas):
        p = gen.gen_persona(rng)
        names1, used1 = gen.gen_account_names(p, spec.l, rng)
        names2, used2 = gen.gen_account_names(p, spec.n, rng)
        p = Persona(p.family, p.given, p.preferred_system, frozenset(used1 + used2))
        personas.append(p)
        id1, id2 = f"u1_{i:0{width}d}", f"u2_{i:0{width}d}"
        accounts1.append({"network": 1, "id": id1, "names": names1})
        accounts2.append({"network": 2, "id": id2, "names": names2})
        positives.append({"id1": id1, "id2": id2})
    return GeneratedData(accounts1 + accounts2, positives, personas)


def write_dataset(data: GeneratedData, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    acc_path, pos_path = d / "accounts.jsonl", d / "positives.jsonl"
    write_jsonl(acc_path, data.accounts)
    write_jsonl(pos_path, data.positives)
    log("synth", f"{len(data.personas)} personas -> {acc_path}, {pos_path}")
    return acc_path, pos_path
