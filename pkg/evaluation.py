# -*- coding: utf-8 -*-
# evaluation.py
# Experiment harness.
#
# Protocol per imbalance ratio R_NP:
#   - negatives: R_NP * |positives| cross pairs sampled from the positives' accounts
#   - 5 stratified folds; each round trains on ONE fold and tests on the other four
#     (eval.invert_folds flips this to the usual 4-train/1-test)
#   - per round and method: precision, recall, F1; reports average them over rounds
#
# Methods:
#   mcua          multi-view model with all features
#   mcua-s        multi-view model restricted to the selected feature lists
#   simple-ee / simple-ce / simple-cc / simple-all
#                 one flat classifier over the variant's features of every name pair
#   content       character n-gram TF-IDF cosine with a threshold tuned on the training fold
from __future__ import annotations

import configparser
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import paired_cosine_distances
from sklearn.model_selection import StratifiedKFold

from config import coerce_all, defaults
from dataset import Dataset, LabeledPair, dumps_record
from errors import ConfigError, InsufficientPositives, TooFewPairs
from features import SCHEMAS, SELECTED_FEATURES
from fusion import (
    McuaConfig, PairFeatureCache, fusion_matrix, partition_training_pairs, train_classifier_c,
    train_view_models,
)
from models import LEARNERS, LearnerSpec, TrainingSet, feature_ranking, train_model
from text_model import MATCHING_TYPES, MatchingType
from util import log, parse_int_list, parse_str_list, warn

try:
    import yaml  # type: ignore
except Exception:  # pragma: no cover
    yaml = None

METHODS: Tuple[str, ...] = ("mcua", "mcua-s", "simple-ee", "simple-ce", "simple-cc", "simple-all", "content")

SIMPLE_VARIANTS: Dict[str, Tuple[MatchingType, ...]] = {
    "EE": (MatchingType.EE,),
    "CE": (MatchingType.CE,),
    "CC": (MatchingType.CC,),
    "ALL": (MatchingType.EE, MatchingType.CE, MatchingType.CC),
}

SWEEP_TARGETS = ("CC", "CE", "EE", "C")


# ------------------------------
# Configuration
# ------------------------------

def _parse_k(values: Any) -> Tuple[int, ...]:
    out = []
    for v in parse_str_list(values):
        if v.lower() == "all":
            out.append(0)
        else:
            try:
                k = int(v)
            except ValueError:
                raise ConfigError(f"top-k values must be positive integers or 'all', got {v!r}") from None
            if k < 1:
                raise ConfigError(f"top-k values must be positive or 'all', got {v!r}")
            out.append(k)
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    rnp: Tuple[int, ...] = (1, 2, 5, 10, 20, 40)
    folds: int = 5
    seed: int = 7
    methods: Tuple[str, ...] = METHODS
    invert_folds: bool = False
    baseline: LearnerSpec = field(default_factory=lambda: LearnerSpec("logistic-l1"))
    ngram: Tuple[int, int] = (1, 2)
    topk_rnp: int = 40
    topk_values: Tuple[int, ...] = (1, 2, 3, 5, 8, 10, 15, 20, 0)   # 0 = every feature
    sweep_rnp: Tuple[int, ...] = (1, 2, 5, 10, 20, 40)
    selection: str = "fixed"
    jobs: int = 1

    def __post_init__(self):
        if not self.rnp or any(r < 1 for r in self.rnp):
            raise ConfigError(f"eval.rnp must hold positive integers, got {self.rnp}")
        if self.folds < 2:
            raise ConfigError("eval.folds must be at least 2")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s): {', '.join(unknown)}; expected {', '.join(METHODS)}")
        if self.selection not in ("fixed", "derived"):
            raise ConfigError(f"eval.selection: expected fixed or derived, got {self.selection!r}")
        lo, hi = self.ngram
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad n-gram range {self.ngram}")

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> "ExperimentConfig":
        return cls(
            rnp=tuple(parse_int_list(settings.get("eval.rnp", "1,2,5,10,20,40"))),
            folds=int(settings.get("eval.folds", 5)),
            seed=int(settings.get("run.seed", 7)),
            methods=tuple(m.lower() for m in parse_str_list(settings.get("eval.methods", ",".join(METHODS)))),
            invert_folds=bool(settings.get("eval.invert_folds", False)),
            baseline=LearnerSpec.from_settings(settings, str(settings.get("eval.baseline_model", "logistic-l1"))),
            ngram=(int(settings.get("eval.ngram_min", 1)), int(settings.get("eval.ngram_max", 2))),
            topk_rnp=int(settings.get("eval.topk_rnp", 40)),
            topk_values=_parse_k(settings.get("eval.topk_values", "1,2,3,5,8,10,15,20,all")),
            sweep_rnp=tuple(parse_int_list(settings.get("eval.sweep_rnp", "1,2,5,10,20,40"))),
            selection=str(settings.get("eval.selection", "fixed")).lower(),
            jobs=max(1, int(settings.get("run.jobs", 1))),
        )


# ------------------------------
# Sampling and folds
# ------------------------------

def generate_negatives(positives: Sequence[LabeledPair], rnp: int, seed: int) -> List[LabeledPair]:
    """R_NP * |positives| distinct cross pairs (id1 of one positive, id2 of another)."""
    if len(positives) < 2:
        raise InsufficientPositives(f"need at least 2 positives to sample negatives, got {len(positives)}")
    if rnp < 1:
        raise ConfigError(f"R_NP must be positive, got {rnp}")
    ids1 = [p.id1 for p in positives]
    ids2 = [p.id2 for p in positives]
    taken = {p.key() for p in positives}
    need = rnp * len(positives)
    total = len(positives) * (len(positives) - 1)
    if need > total:
        raise InsufficientPositives(
            f"{len(positives)} positives allow at most {total} cross pairs, R_NP={rnp} needs {need}; "
            f"R_NP can be at most {len(positives) - 1} here")
    rng = np.random.default_rng(seed)
    out: List[LabeledPair] = []

    if 2 * need >= total:
        # dense case: enumerate every cross pair and shuffle
        cand = [(ids1[i], ids2[j]) for i in range(len(ids1)) for j in range(len(ids2)) if i != j]
        cand = list(dict.fromkeys(k for k in cand if k not in taken))
        if len(cand) < need:
            raise InsufficientPositives(f"only {len(cand)} distinct negatives available, need {need}")
        for idx in rng.permutation(len(cand))[:need]:
            out.append(LabeledPair(cand[idx][0], cand[idx][1], 0))
        return out

    seen = set(taken)
    m = len(positives)
    while len(out) < need:
        batch = max(1024, 2 * (need - len(out)))
        ii = rng.integers(0, m, size=batch)
        jj = rng.integers(0, m, size=batch)
        for i, j in zip(ii.tolist(), jj.tolist()):
            if i == j:
                continue
            key = (ids1[i], ids2[j])
            if key in seen:
                continue
            seen.add(key)
            out.append(LabeledPair(key[0], key[1], 0))
            if len(out) == need:
                break
    return out


def check_rnp(positives: Sequence[LabeledPair], ratios: Sequence[int], key: str = "eval.rnp") -> None:
    """Fails before any work when some R_NP needs more cross pairs than the positives allow."""
    limit = max(0, len(positives) - 1)
    too_big = [r for r in ratios if r > limit]
    if too_big:
        raise InsufficientPositives(
            f"{len(positives)} positives support R_NP up to {limit}, but {key} asks for "
            f"{','.join(str(r) for r in too_big)}; lower it with --rnp or {key}")


@dataclass(frozen=True)
class FoldRound:
    index: int
    train: Tuple[int, ...]
    test: Tuple[int, ...]


def kfold_split(labels: Sequence[int], seed: int, folds: int = 5, invert: bool = False) -> List[FoldRound]:
    """Stratified folds; round i trains on fold i and tests on the rest (invert: the reverse)."""
    y = np.asarray(labels, dtype=int)
    if y.shape[0] < folds:
        raise TooFewPairs(f"{y.shape[0]} pairs cannot fill {folds} folds")
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        splits = list(skf.split(np.zeros((y.shape[0], 1)), y))
    rounds = []
    for i, (rest, fold) in enumerate(splits):
        fold_idx = tuple(sorted(int(x) for x in fold))
        rest_idx = tuple(sorted(int(x) for x in rest))
        if invert:
            rounds.append(FoldRound(i, rest_idx, fold_idx))
        else:
            rounds.append(FoldRound(i, fold_idx, rest_idx))
    return rounds


# ------------------------------
# Metrics
# ------------------------------

@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p > 0 and r > 0 else 0.0


def compute_metrics(predictions: Sequence[int], labels: Sequence[int]) -> Metrics:
    p = np.asarray(predictions, dtype=int)
    y = np.asarray(labels, dtype=int)
    if p.shape != y.shape:
        raise ValueError(f"{p.shape[0]} predictions for {y.shape[0]} labels")
    return Metrics(
        tp=int(((p == 1) & (y == 1)).sum()),
        fp=int(((p == 1) & (y == 0)).sum()),
        fn=int(((p == 0) & (y == 1)).sum()),
        tn=int(((p == 0) & (y == 0)).sum()),
    )


@dataclass(frozen=True)
class ResultRow:
    method: str
    rnp: int
    fold: int
    metrics: Metrics

    def record(self, tag: str = "") -> Dict[str, Any]:
        m = self.metrics
        rec: Dict[str, Any] = {"method": self.method, "rnp": self.rnp, "fold": self.fold,
                               "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn,
                               "precision": m.precision, "recall": m.recall, "f1": m.f1}
        if tag:
            rec = {"experiment": tag, **rec}
        return rec


@dataclass(frozen=True)
class Summary:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    rows: List[ResultRow] = field(default_factory=list)
    tag: str = ""

    def methods(self) -> List[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    def ratios(self) -> List[int]:
        return sorted({r.rnp for r in self.rows})

    def summary(self, method: str, rnp: int) -> Summary:
        rows = [r.metrics for r in self.rows if r.method == method and r.rnp == rnp]
        if not rows:
            return Summary(0.0, 0.0, 0.0)
        return Summary(
            float(np.mean([m.precision for m in rows])),
            float(np.mean([m.recall for m in rows])),
            float(np.mean([m.f1 for m in rows])),
        )

    def table_lines(self) -> List[str]:
        """Method rows, then F1 / Prec. / Rec. per R_NP."""
        ratios = self.ratios()
        head = ["method"]
        for r in ratios:
            head += [f"R{r}.F1", f"R{r}.Prec", f"R{r}.Rec"]
        lines = ["\t".join(head)]
        for m in self.methods():
            cells = [m]
            for r in ratios:
                s = self.summary(m, r)
                cells += [f"{s.f1:.4f}", f"{s.precision:.4f}", f"{s.recall:.4f}"]
            lines.append("\t".join(cells))
        return lines

    def records(self) -> List[Dict[str, Any]]:
        out = [r.record(self.tag) for r in self.rows]
        for m in self.methods():
            for r in self.ratios():
                s = self.summary(m, r)
                rec: Dict[str, Any] = {"method": m, "rnp": r, "fold": "mean",
                                       "precision": s.precision, "recall": s.recall, "f1": s.f1}
                if self.tag:
                    rec = {"experiment": self.tag, **rec}
                out.append(rec)
        return out


# ------------------------------
# Methods
# ------------------------------

def _labels(pairs: Sequence[LabeledPair]) -> np.ndarray:
    return np.asarray([p.label for p in pairs], dtype=int)


def derived_columns(parts: Mapping[MatchingType, TrainingSet], config: McuaConfig) -> Dict[MatchingType, Optional[Tuple[int, ...]]]:
    """Top-k columns per type from the training fold's own importance ranking."""
    out: Dict[MatchingType, Optional[Tuple[int, ...]]] = {}
    for mt in MATCHING_TYPES:
        data = parts[mt]
        k = len(SELECTED_FEATURES[mt])
        if not data.has_both_labels:
            out[mt] = None
            continue
        model = train_model(config.views[mt], data)
        out[mt] = tuple(sorted(feature_ranking(model, data).top(k)))
    return out


def run_mcua(dataset: Dataset, train: Sequence[LabeledPair], test: Sequence[LabeledPair],
             config: McuaConfig, cache: PairFeatureCache, selection: str = "") -> np.ndarray:
    """Labels predicted for test; selection '' = all features, 'fixed' or 'derived' = reduced lists."""
    parts = partition_training_pairs(train, dataset, cache)
    if selection == "fixed":
        config = config.selected()
    elif selection == "derived":
        config = config.with_columns(derived_columns(parts, config))
    views = train_view_models(parts, config)
    clf = train_classifier_c(train, dataset, views, config, cache)
    V = fusion_matrix([dataset.resolve(p) for p in test], views, cache, config.l, config.n)
    probs = np.clip(clf.predict_proba(V), 0.0, 1.0) if len(test) else np.zeros(0)
    return (probs >= config.theta).astype(int)


def flat_vectors(pairs: Sequence[LabeledPair], dataset: Dataset, variant: str,
                 cache: PairFeatureCache) -> np.ndarray:
    """Per account pair: the variant's schema on each (y, z) name pair, concatenated in (y, z) order."""
    schemas = SIMPLE_VARIANTS[variant.upper()]
    width = dataset.l * dataset.n * sum(SCHEMAS[mt].length for mt in schemas)
    X = np.zeros((len(pairs), width))
    for i, pair in enumerate(pairs):
        u1, u2 = dataset.resolve(pair)
        parts: List[np.ndarray] = []
        for a in u1.names:
            for b in u2.names:
                for mt in schemas:
                    parts.append(cache.flat_row(mt, a, b))
        X[i] = np.concatenate(parts)
    return X


def run_simple_baseline(variant: str, dataset: Dataset, train: Sequence[LabeledPair],
                        test: Sequence[LabeledPair], spec: LearnerSpec, cache: PairFeatureCache,
                        theta: float = 0.5) -> np.ndarray:
    if variant.upper() not in SIMPLE_VARIANTS:
        raise ConfigError(f"unknown Simple variant {variant!r}")
    data = TrainingSet(flat_vectors(train, dataset, variant, cache), _labels(train))
    model = train_model(spec, data)
    if not test:
        return np.zeros(0, dtype=int)
    probs = model.predict_proba(flat_vectors(test, dataset, variant, cache))
    return (probs >= theta).astype(int)


def account_document(dataset: Dataset, network: int, account_id: str) -> str:
    acc = dataset.account(network, account_id)
    return " ".join(x.raw for x in acc.names if x is not None)


def fit_content_vectorizer(dataset: Dataset, train: Sequence[LabeledPair],
                           ngram: Tuple[int, int] = (1, 2)) -> TfidfVectorizer:
    """IDF comes from the training fold only: both documents of every training pair, repeats kept."""
    docs = [account_document(dataset, 1, p.id1) for p in train] + [account_document(dataset, 2, p.id2) for p in train]
    vec = TfidfVectorizer(analyzer="char", ngram_range=ngram, lowercase=True)
    vec.fit(docs)
    return vec


def content_scores(vec: TfidfVectorizer, dataset: Dataset, pairs: Sequence[LabeledPair]) -> np.ndarray:
    if not pairs:
        return np.zeros(0)
    A = vec.transform([account_document(dataset, 1, p.id1) for p in pairs])
    B = vec.transform([account_document(dataset, 2, p.id2) for p in pairs])
    sims = 1.0 - paired_cosine_distances(A, B)
    # rows with no known n-gram have no direction
    empty = (np.asarray(A.getnnz(axis=1)) == 0) | (np.asarray(B.getnnz(axis=1)) == 0)
    sims[empty] = 0.0
    return np.clip(sims, 0.0, 1.0)


def tune_threshold(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Threshold maximizing F1 of (score >= t); ties keep the higher threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    pos = int(y.sum())
    if s.size == 0 or pos == 0:
        return math.inf
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    k = np.arange(1, s.size + 1)
    # evaluate only at the last index of each run of equal scores
    last = np.append(s_sorted[1:] != s_sorted[:-1], True)
    f1 = np.where(last, 2.0 * tp / (k + pos), -1.0)
    return float(s_sorted[int(np.argmax(f1))])


def run_content_based(dataset: Dataset, train: Sequence[LabeledPair], test: Sequence[LabeledPair],
                      ngram: Tuple[int, int] = (1, 2)) -> np.ndarray:
    vec = fit_content_vectorizer(dataset, train, ngram)
    theta = tune_threshold(content_scores(vec, dataset, train), _labels(train))
    return (content_scores(vec, dataset, test) >= theta).astype(int)


def run_method(method: str, dataset: Dataset, train: Sequence[LabeledPair], test: Sequence[LabeledPair],
               exp: ExperimentConfig, config: McuaConfig, cache: PairFeatureCache) -> np.ndarray:
    if method == "mcua":
        return run_mcua(dataset, train, test, config, cache)
    if method == "mcua-s":
        return run_mcua(dataset, train, test, config, cache, exp.selection)
    if method.startswith("simple-"):
        return run_simple_baseline(method[7:], dataset, train, test, exp.baseline, cache, config.theta)
    if method == "content":
        return run_content_based(dataset, train, test, exp.ngram)
    raise ConfigError(f"unknown method {method!r}")


# ------------------------------
# Experiments
# ------------------------------

def build_pairs(positives: Sequence[LabeledPair], rnp: int, seed: int) -> List[LabeledPair]:
    return list(positives) + generate_negatives(positives, rnp, seed)


def _rounds_for(positives: Sequence[LabeledPair], rnp: int, exp: ExperimentConfig
                ) -> Tuple[List[LabeledPair], List[FoldRound]]:
    pairs = build_pairs(positives, rnp, exp.seed)
    return pairs, kfold_split(_labels(pairs), exp.seed, exp.folds, exp.invert_folds)


def _pick(pairs: Sequence[LabeledPair], idx: Sequence[int]) -> List[LabeledPair]:
    return [pairs[i] for i in idx]


def _ordered_map(fn, items: Sequence[Any], jobs: int) -> List[Any]:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def run_experiment(dataset: Dataset, positives: Sequence[LabeledPair], exp: ExperimentConfig,
                   config: McuaConfig, cache: PairFeatureCache, tag: str = "") -> MetricsReport:
    check_rnp(positives, exp.rnp)
    tasks: List[Tuple[int, List[LabeledPair], FoldRound]] = []
    for rnp in exp.rnp:
        pairs, rounds = _rounds_for(positives, rnp, exp)
        log("eval", f"R_NP={rnp}: {len(pairs)} pairs, {len(rounds)} rounds "
                    f"(train {len(rounds[0].train)}, test {len(rounds[0].test)})")
        tasks.extend((rnp, pairs, rd) for rd in rounds)

    def one(task: Tuple[int, List[LabeledPair], FoldRound]) -> List[ResultRow]:
        rnp, pairs, rd = task
        train, test = _pick(pairs, rd.train), _pick(pairs, rd.test)
        y = _labels(test)
        out = []
        for method in exp.methods:
            t0 = time.time()
            pred = run_method(method, dataset, train, test, exp, config, cache)
            m = compute_metrics(pred, y)
            out.append(ResultRow(method, rnp, rd.index, m))
            log("eval", f"R_NP={rnp} fold {rd.index} {method}: F1={m.f1:.4f} "
                        f"P={m.precision:.4f} R={m.recall:.4f} ({time.time() - t0:.1f}s)")
        return out

    rows = [r for part in _ordered_map(one, tasks, exp.jobs) for r in part]
    return MetricsReport(rows, tag)


# ------------------------------
# Model selection
# ------------------------------

def average_rank(ranks: Sequence[int]) -> float:
    return float(sum(ranks)) / len(ranks) if ranks else 0.0


def rank_learners(scores: Mapping[str, float], learners: Sequence[str] = LEARNERS) -> Dict[str, int]:
    """1 = best F1; ties go to the learner listed first."""
    order = sorted(learners, key=lambda name: (-scores[name], learners.index(name)))
    return {name: i + 1 for i, name in enumerate(order)}


@dataclass
class SweepTable:
    target: str
    ratios: Tuple[int, ...]
    learners: Tuple[str, ...]
    f1: Dict[str, Dict[int, float]]
    ranks: Dict[str, Dict[int, int]]

    def average_rank(self, learner: str) -> float:
        return average_rank([self.ranks[learner][r] for r in self.ratios])

    def best(self) -> str:
        return min(self.learners, key=lambda name: (self.average_rank(name), self.learners.index(name)))

    def lines(self) -> List[str]:
        out = ["\t".join(["learner"] + [f"R{r}" for r in self.ratios] + ["avg_rank"])]
        for name in self.learners:
            cells = [name] + [f"{self.f1[name][r]:.4f} ({self.ranks[name][r]})" for r in self.ratios]
            cells.append(f"{self.average_rank(name):.2f}")
            out.append("\t".join(cells))
        return out


def _view_f1(mt: MatchingType, spec: LearnerSpec, train_part: TrainingSet, test_part: TrainingSet,
             theta: float) -> float:
    if not train_part.has_both_labels:
        warn(f"{mt.value}: training partition has a single label, F1 counted as 0")
        return 0.0
    model = train_model(spec, train_part)
    if test_part.size == 0:
        return 0.0
    pred = (model.predict_proba(test_part.X) >= theta).astype(int)
    return compute_metrics(pred, test_part.y).f1


def model_selection_sweep(dataset: Dataset, positives: Sequence[LabeledPair], target: str,
                          exp: ExperimentConfig, config: McuaConfig, cache: PairFeatureCache) -> SweepTable:
    """F1 (averaged over rounds) and rank of each learner per R_NP.

    For CC/CE/EE the learner is scored on name-pair classification within its own
    partition; for C it replaces the classifier of the full model.
    """
    target = target.upper()
    if target not in SWEEP_TARGETS:
        raise ConfigError(f"sweep target must be one of {', '.join(SWEEP_TARGETS)}, got {target!r}")
    ref = config.classifier if target == "C" else config.views[MatchingType(target)]
    check_rnp(positives, exp.sweep_rnp, "eval.sweep_rnp")
    f1: Dict[str, Dict[int, float]] = {name: {} for name in LEARNERS}
    for rnp in exp.sweep_rnp:
        pairs, rounds = _rounds_for(positives, rnp, exp)

        def one(rd: FoldRound) -> Dict[str, float]:
            train, test = _pick(pairs, rd.train), _pick(pairs, rd.test)
            out: Dict[str, float] = {}
            if target == "C":
                y = _labels(test)
                for name in LEARNERS:
                    cfg = config.with_classifier(replace(ref, family=name))
                    out[name] = compute_metrics(run_mcua(dataset, train, test, cfg, cache), y).f1
                return out
            mt = MatchingType(target)
            tr = partition_training_pairs(train, dataset, cache)[mt]
            te = partition_training_pairs(test, dataset, cache)[mt]
            for name in LEARNERS:
                out[name] = _view_f1(mt, replace(ref, family=name), tr, te, config.theta)
            return out

        per_round = _ordered_map(one, rounds, exp.jobs)
        for name in LEARNERS:
            f1[name][rnp] = float(np.mean([r[name] for r in per_round]))
        log("eval", f"sweep {target} R_NP={rnp}: " + ", ".join(f"{n}={f1[n][rnp]:.4f}" for n in LEARNERS))
    ranks: Dict[str, Dict[int, int]] = {name: {} for name in LEARNERS}
    for rnp in exp.sweep_rnp:
        for name, rk in rank_learners({n: f1[n][rnp] for n in LEARNERS}).items():
            ranks[name][rnp] = rk
    return SweepTable(target, tuple(exp.sweep_rnp), LEARNERS, f1, ranks)


# ------------------------------
# Feature importance and top-k curves
# ------------------------------

@dataclass(frozen=True)
class CurvePoint:
    k: int
    precision: float
    recall: float
    f1: float


@dataclass
class TopkCurves:
    matching_type: MatchingType
    rnp: int
    points: List[CurvePoint]
    full: CurvePoint
    ranking: Tuple[int, ...]

    def lines(self) -> List[str]:
        labels = SCHEMAS[self.matching_type].labels
        out = ["k\tprecision\trecall\tf1\tadded_feature"]
        for pt in self.points:
            added = labels[self.ranking[pt.k - 1]] if 0 < pt.k <= len(self.ranking) else ""
            out.append(f"{pt.k}\t{pt.precision:.4f}\t{pt.recall:.4f}\t{pt.f1:.4f}\t{added}")
        return out


def importance_report(data: TrainingSet, mt: MatchingType, spec: LearnerSpec) -> List[str]:
    """Ranked feature table of the view learner fitted on one partition."""
    data.require_both_labels(f"{mt.value} partition")
    model = train_model(spec, data)
    ranking = feature_ranking(model, data)
    labels = SCHEMAS[mt].labels
    out = ["rank\tindex\tlabel\tscore"]
    for r, idx in enumerate(ranking.order, 1):
        out.append(f"{r}\t{idx}\t{labels[idx]}\t{ranking.scores[idx]:.6g}")
    return out


def topk_feature_curves(dataset: Dataset, positives: Sequence[LabeledPair], mt: MatchingType,
                        k_values: Sequence[int], exp: ExperimentConfig, config: McuaConfig,
                        cache: PairFeatureCache) -> TopkCurves:
    """Per k: retrain the view learner on its k most important features; 0 or k >= d means all."""
    spec = config.views[mt]
    d = SCHEMAS[mt].length
    ks = [d if (k <= 0 or k > d) else k for k in k_values]
    check_rnp(positives, (exp.topk_rnp,), "eval.topk_rnp")
    pairs, rounds = _rounds_for(positives, exp.topk_rnp, exp)

    def one(rd: FoldRound) -> Tuple[Dict[int, Metrics], Metrics, Tuple[int, ...]]:
        tr = partition_training_pairs(_pick(pairs, rd.train), dataset, cache)[mt]
        te = partition_training_pairs(_pick(pairs, rd.test), dataset, cache)[mt]
        tr.require_both_labels(f"{mt.value} training partition")
        full_model = train_model(spec, tr)
        full = compute_metrics((full_model.predict_proba(te.X) >= config.theta).astype(int), te.y)
        ranking = feature_ranking(full_model, tr)
        per_k: Dict[int, Metrics] = {}
        for k in dict.fromkeys(ks):
            cols = tuple(sorted(ranking.top(k)))
            model = train_model(spec, tr.columns(cols))
            pred = (model.predict_proba(te.X[:, list(cols)]) >= config.theta).astype(int)
            per_k[k] = compute_metrics(pred, te.y)
        return per_k, full, ranking.order

    results = _ordered_map(one, rounds, exp.jobs)

    def point(k: int, ms: List[Metrics]) -> CurvePoint:
        return CurvePoint(k, float(np.mean([m.precision for m in ms])),
                          float(np.mean([m.recall for m in ms])), float(np.mean([m.f1 for m in ms])))

    points = [point(k, [r[0][k] for r in results]) for k in ks]
    full = point(d, [r[1] for r in results])
    log("eval", f"top-k {mt.value}: full F1={full.f1:.4f}")
    return TopkCurves(mt, exp.topk_rnp, points, full, results[0][2])


# ------------------------------
# Report files
# ------------------------------

def write_lines(path: Union[str, Path], lines: Iterable[str]) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_report(report: MetricsReport, tsv_path: Union[str, Path],
                 jsonl_path: Optional[Union[str, Path]] = None) -> None:
    write_lines(tsv_path, report.table_lines())
    if jsonl_path:
        write_lines(jsonl_path, (dumps_record(r) for r in report.records()))


# ------------------------------
# Batch experiments
# ------------------------------

def read_batch(batch_path: str) -> Dict[str, Dict[str, str]]:
    """
    Reads an INI or YAML file and returns {section_name: {key: value}}.
    """
    p = Path(batch_path)
    if not p.exists():
        raise FileNotFoundError(f"Batch file not found: {batch_path}")

    if p.suffix.lower() in (".yaml", ".yml"):
        if yaml is None:
            raise ConfigError(f"{batch_path}: pyyaml is not installed")
        with open(batch_path, "r", encoding="utf-8") as fh:
            y = yaml.safe_load(fh) or {}
        out: Dict[str, Dict[str, str]] = {}
        for sect, vals in (y.items() if isinstance(y, dict) else []):
            if isinstance(vals, dict):
                out[str(sect)] = {str(k): str(v) for k, v in vals.items()}
        return out

    cp = configparser.ConfigParser()
    try:
        cp.read(batch_path, encoding="utf-8")
    except configparser.Error as ex:
        raise ConfigError(f"{batch_path}: {ex}") from ex
    return {sect: {k: v for k, v in cp.items(sect)} for sect in cp.sections()}


def section_overrides(values: Mapping[str, str]) -> Dict[str, Any]:
    known = defaults()
    out: Dict[str, Any] = {}
    for key, val in values.items():
        if "." in key:
            full = key
        elif f"eval.{key}" in known:
            full = f"eval.{key}"
        elif f"mcua.{key}" in known:
            full = f"mcua.{key}"
        else:
            raise ConfigError(f"unknown experiment key {key!r}")
        if full not in known:
            raise ConfigError(f"unknown experiment key {key!r}")
        out[full] = val
    return out


def run_batch(batch_path: str, settings: Mapping[str, Any], dataset: Dataset,
              positives: Sequence[LabeledPair], cache: PairFeatureCache) -> List[MetricsReport]:
    sections = read_batch(batch_path)
    if not sections:
        log("eval", f"no sections in {batch_path}")
        return []
    reports = []
    for name, values in sections.items():
        merged = coerce_all({**settings, **section_overrides(values)})
        exp = ExperimentConfig.from_settings(merged)
        config = McuaConfig.from_settings(merged, dataset.l, dataset.n).with_degenerate("constant")
        log("eval", f"== experiment [{name}] ==")
        reports.append(run_experiment(dataset, positives, exp, config, cache, tag=name))
    return reports
