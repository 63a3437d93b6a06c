# -*- coding: utf-8 -*-
# fusion.py
# Multi-view alignment: one model per matching type (CC, CE, EE) scores each name
# pair of two accounts; the scores fill a fusion vector of length 3*l*n that a
# second-level classifier turns into the alignment probability.
#
# Fusion layout for name slots y (network 1, 0-based) and z (network 2, 0-based):
#   b = 3*y*n + 3*z      v[b] = CC output   v[b+1] = CE output   v[b+2] = EE output
# Only the slot of the pair's own matching type is written; absent names leave
# all three at 0.
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import VERSION
from dataset import Dataset, LabeledPair
from errors import ConfigError, ModelFormatError, SchemaViolation
from features import SCHEMAS, FeatureExtractor, selected_columns
from models import LEARNERS, ConstantModel, LearnerSpec, Model, TrainingSet, dump_model, load_model_lines, train_model
from text_model import MATCHING_TYPES, Account, MatchingType, NameString, matching_type
from util import log, warn

SLOT_OFFSET: Dict[MatchingType, int] = {MatchingType.CC: 0, MatchingType.CE: 1, MatchingType.EE: 2}

MODEL_HEADER = "mcua 1"

Columns = Optional[Tuple[int, ...]]


def slot_base(y: int, z: int, n: int) -> int:
    return 3 * y * n + 3 * z


# ------------------------------
# Configuration
# ------------------------------

@dataclass(frozen=True)
class McuaConfig:
    l: int = 1
    n: int = 2
    views: Mapping[MatchingType, LearnerSpec] = field(default_factory=lambda: {
        MatchingType.CC: LearnerSpec("svm-l2"),
        MatchingType.CE: LearnerSpec("forest"),
        MatchingType.EE: LearnerSpec("logistic-l1"),
    })
    classifier: LearnerSpec = field(default_factory=lambda: LearnerSpec("logistic-l1"))
    theta: float = 0.5
    columns: Mapping[MatchingType, Columns] = field(default_factory=dict)
    on_degenerate: str = "error"

    def __post_init__(self):
        if self.l < 1 or self.n < 1:
            raise ConfigError(f"mcua.l and mcua.n must be at least 1 (got {self.l}, {self.n})")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"mcua.theta must lie in (0, 1), got {self.theta}")
        if self.on_degenerate not in ("error", "constant"):
            raise ConfigError(f"mcua.on_degenerate: expected error or constant, got {self.on_degenerate!r}")

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any], l: Optional[int] = None,
                      n: Optional[int] = None) -> "McuaConfig":
        def spec(key: str) -> LearnerSpec:
            return LearnerSpec.from_settings(settings, str(settings.get(key, "")).strip())

        return cls(
            l=int(settings.get("mcua.l", 1) if l is None else l),
            n=int(settings.get("mcua.n", 2) if n is None else n),
            views={
                MatchingType.CC: spec("mcua.model_cc"),
                MatchingType.CE: spec("mcua.model_ce"),
                MatchingType.EE: spec("mcua.model_ee"),
            },
            classifier=spec("mcua.model_c"),
            theta=float(settings.get("mcua.theta", 0.5)),
            on_degenerate=str(settings.get("mcua.on_degenerate", "error")),
        )

    @property
    def width(self) -> int:
        return 3 * self.l * self.n

    def with_shape(self, l: int, n: int) -> "McuaConfig":
        return replace(self, l=l, n=n)

    def with_view(self, mt: MatchingType, spec: LearnerSpec) -> "McuaConfig":
        views = dict(self.views)
        views[mt] = spec
        return replace(self, views=views)

    def with_classifier(self, spec: LearnerSpec) -> "McuaConfig":
        return replace(self, classifier=spec)

    def with_columns(self, columns: Mapping[MatchingType, Columns]) -> "McuaConfig":
        return replace(self, columns=dict(columns))

    def selected(self) -> "McuaConfig":
        """Restricted to the reduced per-type feature lists."""
        return self.with_columns({mt: selected_columns(mt) for mt in MATCHING_TYPES})

    def with_degenerate(self, mode: str) -> "McuaConfig":
        return replace(self, on_degenerate=mode)


# ------------------------------
# Feature cache
# ------------------------------

class PairFeatureCache:
    """Feature rows per ordered name pair, computed once and shared by folds and methods."""

    def __init__(self, extractor: FeatureExtractor):
        self.extractor = extractor
        self._views: Dict[Tuple[str, str], Tuple[MatchingType, np.ndarray]] = {}
        self._flat: Dict[Tuple[MatchingType, str, str], np.ndarray] = {}

    def view_row(self, a: NameString, b: NameString) -> Tuple[MatchingType, np.ndarray]:
        key = (a.raw, b.raw)
        hit = self._views.get(key)
        if hit is None:
            mt = matching_type(a, b)
            hit = (mt, self.extractor.extract(a, b).as_array())
            self._views[key] = hit
        return hit

    def flat_row(self, mt: MatchingType, a: Optional[NameString], b: Optional[NameString]) -> np.ndarray:
        if a is None or b is None:
            return np.zeros(SCHEMAS[mt].length)
        key = (mt, a.raw, b.raw)
        hit = self._flat.get(key)
        if hit is None:
            hit = np.asarray(self.extractor.extract_as(mt, a, b), dtype=float)
            self._flat[key] = hit
        return hit

    def __len__(self) -> int:
        return len(self._views) + len(self._flat)


def _check_shape(u1: Account, u2: Account, l: int, n: int) -> None:
    u1.check_slots(l)
    u2.check_slots(n)


# ------------------------------
# View models
# ------------------------------

@dataclass
class ViewModel:
    matching_type: MatchingType
    model: Model
    columns: Columns = None
    family: str = ""

    def score(self, rows: np.ndarray) -> np.ndarray:
        if rows.shape[0] == 0:
            return np.zeros(0)
        X = rows if self.columns is None else rows[:, list(self.columns)]
        return np.clip(self.model.predict_proba(X), 0.0, 1.0)


def partition_training_pairs(pairs: Sequence[LabeledPair], dataset: Dataset,
                             cache: PairFeatureCache) -> Dict[MatchingType, TrainingSet]:
    """Routes every present name pair of every labeled alignment to its matching type."""
    rows: Dict[MatchingType, List[np.ndarray]] = {mt: [] for mt in MATCHING_TYPES}
    labels: Dict[MatchingType, List[int]] = {mt: [] for mt in MATCHING_TYPES}
    for pair in pairs:
        u1, u2 = dataset.resolve(pair)
        _check_shape(u1, u2, dataset.l, dataset.n)
        for a in u1.names:
            for b in u2.names:
                if a is None or b is None:
                    continue
                mt, row = cache.view_row(a, b)
                rows[mt].append(row)
                labels[mt].append(pair.label)
    out: Dict[MatchingType, TrainingSet] = {}
    for mt in MATCHING_TYPES:
        width = SCHEMAS[mt].length
        X = np.vstack(rows[mt]) if rows[mt] else np.zeros((0, width))
        out[mt] = TrainingSet(X, np.asarray(labels[mt], dtype=int))
    return out


def _fit_view(mt: MatchingType, data: TrainingSet, spec: LearnerSpec, columns: Columns,
              on_degenerate: str) -> ViewModel:
    sub = data.columns(columns)
    width = sub.n_features
    if sub.size == 0:
        log("fusion", f"{mt.value}: empty partition, constant 0 model")
        return ViewModel(mt, ConstantModel(width, 0.0), columns, "constant")
    if not sub.has_both_labels:
        if on_degenerate == "constant":
            value = float(sub.y[0])
            warn(f"{mt.value}: partition of {sub.size} rows has a single label, constant {value:g} model")
            return ViewModel(mt, ConstantModel(width, value), columns, "constant")
        sub.require_both_labels(f"{mt.value} partition")
    return ViewModel(mt, train_model(spec, sub), columns, spec.family)


def train_view_models(partitions: Mapping[MatchingType, TrainingSet],
                      config: McuaConfig) -> Dict[MatchingType, ViewModel]:
    views: Dict[MatchingType, ViewModel] = {}
    for mt in MATCHING_TYPES:
        data = partitions[mt]
        views[mt] = _fit_view(mt, data, config.views[mt], config.columns.get(mt), config.on_degenerate)
        log("fusion", f"{mt.value}: {views[mt].family} on {data.size} rows "
                      f"({int(data.y.sum()) if data.size else 0} positive)")
    return views


def fusion_matrix(account_pairs: Sequence[Tuple[Account, Account]], views: Mapping[MatchingType, ViewModel],
                  cache: PairFeatureCache, l: int, n: int) -> np.ndarray:
    """One fusion vector per account pair; each view model scores all its rows at once."""
    V = np.zeros((len(account_pairs), 3 * l * n))
    rows: Dict[MatchingType, List[np.ndarray]] = {mt: [] for mt in MATCHING_TYPES}
    where: Dict[MatchingType, List[Tuple[int, int]]] = {mt: [] for mt in MATCHING_TYPES}
    for i, (u1, u2) in enumerate(account_pairs):
        _check_shape(u1, u2, l, n)
        for y, a in enumerate(u1.names):
            for z, b in enumerate(u2.names):
                if a is None or b is None:
                    continue
                mt, row = cache.view_row(a, b)
                rows[mt].append(row)
                where[mt].append((i, slot_base(y, z, n) + SLOT_OFFSET[mt]))
    for mt in MATCHING_TYPES:
        if not rows[mt]:
            continue
        scores = views[mt].score(np.vstack(rows[mt]))
        idx = np.asarray(where[mt], dtype=int)
        V[idx[:, 0], idx[:, 1]] = scores
    return V


def build_fusion_vector(u1: Account, u2: Account, views: Mapping[MatchingType, ViewModel],
                        cache: PairFeatureCache, l: int, n: int) -> np.ndarray:
    return fusion_matrix([(u1, u2)], views, cache, l, n)[0]


def train_classifier_c(pairs: Sequence[LabeledPair], dataset: Dataset,
                       views: Mapping[MatchingType, ViewModel], config: McuaConfig,
                       cache: PairFeatureCache) -> Model:
    V = fusion_matrix([dataset.resolve(p) for p in pairs], views, cache, config.l, config.n)
    data = TrainingSet(V, np.asarray([p.label for p in pairs], dtype=int))
    data.require_both_labels("classifier C training set")
    return train_model(config.classifier, data)


# ------------------------------
# Trained model and prediction
# ------------------------------

@dataclass(frozen=True)
class AlignmentPrediction:
    id1: str
    id2: str
    probability: float
    label: int
    fusion_vector: Tuple[float, ...]

    def record(self) -> Dict[str, Any]:
        return {"id1": self.id1, "id2": self.id2, "probability": self.probability,
                "label": self.label, "fusion_vector": list(self.fusion_vector)}


@dataclass
class McuaModel:
    config: McuaConfig
    views: Dict[MatchingType, ViewModel]
    classifier: Model
    tables_version: str = ""

    def probabilities(self, V: np.ndarray) -> np.ndarray:
        if V.shape[0] == 0:
            return np.zeros(0)
        return np.clip(self.classifier.predict_proba(V), 0.0, 1.0)


def train_mcua(dataset: Dataset, pairs: Sequence[LabeledPair], config: McuaConfig,
               cache: PairFeatureCache) -> McuaModel:
    if (dataset.l, dataset.n) != (config.l, config.n):
        raise SchemaViolation(f"dataset has {dataset.l}x{dataset.n} name slots, config expects {config.l}x{config.n}")
    parts = partition_training_pairs(pairs, dataset, cache)
    views = train_view_models(parts, config)
    clf = train_classifier_c(pairs, dataset, views, config, cache)
    version = cache.extractor.translit.tables.versions.get("hanyu.tsv", "")
    return McuaModel(config, views, clf, version)


def _predict_chunk(model: McuaModel, dataset: Dataset, pairs: Sequence[LabeledPair],
                   cache: PairFeatureCache) -> List[AlignmentPrediction]:
    V = fusion_matrix([dataset.resolve(p) for p in pairs], model.views, cache, model.config.l, model.config.n)
    probs = model.probabilities(V)
    theta = model.config.theta
    return [
        AlignmentPrediction(p.id1, p.id2, float(pr), int(pr >= theta), tuple(float(x) for x in v))
        for p, pr, v in zip(pairs, probs, V)
    ]


def predict_alignment(model: McuaModel, u1: Account, u2: Account,
                      cache: PairFeatureCache) -> AlignmentPrediction:
    v = build_fusion_vector(u1, u2, model.views, cache, model.config.l, model.config.n)
    pr = float(model.probabilities(v.reshape(1, -1))[0])
    return AlignmentPrediction(u1.account_id, u2.account_id, pr, int(pr >= model.config.theta),
                               tuple(float(x) for x in v))


def predict_many(model: McuaModel, dataset: Dataset, pairs: Sequence[LabeledPair],
                 cache: PairFeatureCache, jobs: int = 1, chunk: int = 512) -> List[AlignmentPrediction]:
    """Scores pairs in chunks; output order follows the input regardless of jobs."""
    chunks = [pairs[i:i + chunk] for i in range(0, len(pairs), chunk)]
    if jobs <= 1 or len(chunks) <= 1:
        out: List[AlignmentPrediction] = []
        for c in chunks:
            out.extend(_predict_chunk(model, dataset, c, cache))
        return out
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(lambda c: _predict_chunk(model, dataset, c, cache), chunks))
    return [p for part in parts for p in part]


# ------------------------------
# .mcua files
# ------------------------------

def _columns_text(cols: Columns) -> str:
    return "all" if cols is None else ",".join(str(c) for c in cols)


def _columns_parse(text: str) -> Columns:
    if text == "all":
        return None
    try:
        return tuple(int(x) for x in text.split(",") if x)
    except ValueError:
        raise ModelFormatError(f"bad column list {text!r}") from None


def dump_mcua(model: McuaModel) -> List[str]:
    cfg = model.config
    lines = [MODEL_HEADER, f"version {VERSION}", f"tables {model.tables_version or '-'}",
             f"l {cfg.l}", f"n {cfg.n}", f"theta {float(cfg.theta).hex()}"]
    for mt in MATCHING_TYPES:
        view = model.views[mt]
        lines.append(f"view {mt.value} {view.family or '-'} {_columns_text(view.columns)}")
        lines.extend(dump_model(view.model, mt.value))
    lines.append(f"classifier {cfg.classifier.family}")
    lines.extend(dump_model(model.classifier, "C"))
    return lines


def save_mcua(model: McuaModel, path: Union[str, Path]) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("\n".join(dump_mcua(model)) + "\n", encoding="utf-8")
    log("fusion", f"model written to {p}")


def _field(lines: Sequence[str], pos: int, key: str) -> List[str]:
    if pos >= len(lines):
        raise ModelFormatError(f"unexpected end of file, expected {key!r}")
    parts = lines[pos].split(" ")
    if parts[0] != key:
        raise ModelFormatError(f"line {pos + 1}: expected {key!r}, got {parts[0]!r}")
    return parts[1:]


def _field_value(lines: Sequence[str], pos: int, key: str, kind: Callable[[str], Any]) -> Any:
    text = _field(lines, pos, key)[0]
    try:
        return kind(text)
    except ValueError:
        raise ModelFormatError(f"line {pos + 1}: bad {key} value {text!r}") from None


def parse_mcua(lines: Sequence[str]) -> McuaModel:
    lines = [ln.rstrip("\r\n") for ln in lines]
    if not lines or lines[0] != MODEL_HEADER:
        raise ModelFormatError("not an mcua model file")
    pos = 1
    _field(lines, pos, "version")
    tables = _field(lines, pos + 1, "tables")[0]
    l = _field_value(lines, pos + 2, "l", int)
    n = _field_value(lines, pos + 3, "n", int)
    theta = _field_value(lines, pos + 4, "theta", float.fromhex)
    pos += 5
    views: Dict[MatchingType, ViewModel] = {}
    specs: Dict[MatchingType, LearnerSpec] = {}
    for mt in MATCHING_TYPES:
        vals = _field(lines, pos, "view")
        if len(vals) != 3 or vals[0] != mt.value:
            raise ModelFormatError(f"line {pos + 1}: expected view {mt.value}")
        family = "" if vals[1] == "-" else vals[1]
        model, schema, used = load_model_lines(lines[pos + 1:])
        if schema != mt.value:
            raise ModelFormatError(f"view {mt.value} holds a {schema or 'untagged'} model")
        views[mt] = ViewModel(mt, model, _columns_parse(vals[2]), family)
        specs[mt] = LearnerSpec(family if family in LEARNERS else "logistic-l1")
        pos += 1 + used
    family = _field(lines, pos, "classifier")[0]
    clf, _, _ = load_model_lines(lines[pos + 1:])
    config = McuaConfig(l, n, specs, LearnerSpec(family), theta,
                        {mt: v.columns for mt, v in views.items()})
    expected = 3 * l * n
    if clf.n_features != expected:
        raise ModelFormatError(f"classifier expects {clf.n_features} inputs, fusion width is {expected}")
    return McuaModel(config, views, clf, "" if tables == "-" else tables)


def load_mcua(path: Union[str, Path]) -> McuaModel:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Model file not found: {p}")
    return parse_mcua(p.read_text(encoding="utf-8").splitlines())
