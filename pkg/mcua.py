# -*- coding: utf-8 -*-
# mcua.py
# Command line entry point.
#
#   mcua gen                 synthetic accounts.jsonl + positives.jsonl
#   mcua train               fit a model on labeled pairs -> model.mcua
#   mcua predict             score candidate pairs with a model -> predictions jsonl
#   mcua eval                methods x R_NP experiment (or --batch experiments.ini)
#   mcua sweep               learner comparison for CC, CE, EE or C
#   mcua topk                metrics of a view learner on its top-k features
#   mcua feature-importance  ranked feature table of a view learner
#   mcua emit-schema         feature labels of one matching type
#   mcua runs                runs kept in the results store, or one run's mean metrics
#
# Global options (before the subcommand):
#   --config PATH   settings file (.ini or .yaml), default settings.ini next to this file
#   --seed N        every random draw flows from this seed (run.seed)
#   --jobs N        worker threads for scoring and fold rounds (run.jobs)
#   --tables DIR    table directory (tables.dir)
#   --quiet         only errors on stderr
#   --version       program and table versions
#
# Exit codes: 0 ok, 1 data/configuration error, 2 usage error.
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from config import VERSION, load_settings
from dataset import Dataset, dumps_record, load_accounts, load_candidates, load_pairs, load_positives, write_jsonl
from errors import ConfigError, McuaError
from evaluation import (
    ExperimentConfig, build_pairs, importance_report, model_selection_sweep, run_batch,
    run_experiment, topk_feature_curves, write_lines, write_report,
)
from features import FeatureExtractor, emit_schema, parse_matching_type
from fusion import McuaConfig, PairFeatureCache, load_mcua, partition_training_pairs, predict_many, save_mcua, train_mcua
import store
from synth import GenSpec, gen_dataset, write_dataset
from transliteration import Transliterator, load_tables
from util import ensure_console_utf8, log, set_quiet


# ------------------------------
# Parser
# ------------------------------

def _data_args(p: argparse.ArgumentParser, positives: bool = True) -> None:
    p.add_argument("--accounts", default="data/accounts.jsonl", help="accounts.jsonl")
    if positives:
        p.add_argument("--positives", default="data/positives.jsonl", help="positives.jsonl")
    p.add_argument("--l", type=int, default=None, help="name slots in network 1 (default: inferred)")
    p.add_argument("--n", type=int, default=None, help="name slots in network 2 (default: inferred)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcua", description="Multi-view alignment of Chinese account names")
    ap.add_argument("--config", default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--tables", default=None)
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--version", action="store_true")
    sub = ap.add_subparsers(dest="command")

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--personas", type=int, default=None)
    g.add_argument("--l", type=int, default=None)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--noise", type=float, default=None)
    g.add_argument("--hard-negatives", action="store_true")
    g.add_argument("--out-dir", default="data")

    t = sub.add_parser("train", help="train a model on labeled pairs")
    _data_args(t, positives=False)
    t.add_argument("--pairs", required=True, help="pairs.jsonl with optional label (default 1)")
    t.add_argument("--rnp", type=int, default=0, help="add R_NP sampled negatives per positive")
    t.add_argument("--out", default="model.mcua")

    pr = sub.add_parser("predict", help="score candidate pairs")
    _data_args(pr, positives=False)
    pr.add_argument("--model", required=True)
    pr.add_argument("--candidates", required=True)
    pr.add_argument("--out", default="predictions.jsonl")

    e = sub.add_parser("eval", help="run the evaluation protocol")
    _data_args(e)
    e.add_argument("--rnp", default=None, help="comma-separated R_NP values")
    e.add_argument("--methods", default=None)
    e.add_argument("--folds", type=int, default=None)
    e.add_argument("--invert-folds", action="store_true")
    e.add_argument("--selection", choices=("fixed", "derived"), default=None)
    e.add_argument("--batch", default=None, help="experiments file (.ini or .yaml)")
    e.add_argument("--out", default="reports/eval.tsv")
    e.add_argument("--results", default="reports/eval.jsonl")
    e.add_argument("--db", default=None, help="sqlite results store")

    s = sub.add_parser("sweep", help="compare the seven learners")
    _data_args(s)
    s.add_argument("--type", required=True, choices=("CC", "CE", "EE", "C", "cc", "ce", "ee", "c"))
    s.add_argument("--rnp", default=None)
    s.add_argument("--out", default=None)

    k = sub.add_parser("topk", help="top-k feature curves")
    _data_args(k)
    k.add_argument("--type", required=True, type=parse_matching_type)
    k.add_argument("--k", default=None, help="comma-separated k values, 'all' for every feature")
    k.add_argument("--rnp", type=int, default=None)
    k.add_argument("--out", default=None)

    fi = sub.add_parser("feature-importance", help="ranked features of a view learner")
    _data_args(fi)
    fi.add_argument("--type", required=True, type=parse_matching_type)
    fi.add_argument("--rnp", type=int, default=None)
    fi.add_argument("--out", default=None)

    es = sub.add_parser("emit-schema", help="print the feature labels of a matching type")
    es.add_argument("--type", required=True, type=parse_matching_type)

    rs = sub.add_parser("runs", help="list stored evaluation runs")
    rs.add_argument("--db", default=None, help="sqlite results store (default: store.path)")
    rs.add_argument("--run", default=None, help="run key: print its mean P/R/F1 per method and R_NP")
    return ap


# ------------------------------
# Helpers
# ------------------------------

def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    o: Dict[str, Any] = {
        "run.seed": args.seed,
        "run.jobs": args.jobs,
        "tables.dir": args.tables,
        "run.quiet": True if args.quiet else None,
    }
    cmd = args.command
    if cmd == "gen":
        o.update({"synth.personas": args.personas, "synth.l": args.l, "synth.n": args.n,
                  "synth.noise": args.noise, "synth.hard_negatives": True if args.hard_negatives else None})
    if cmd == "eval":
        o.update({"eval.rnp": args.rnp, "eval.methods": args.methods, "eval.folds": args.folds,
                  "eval.invert_folds": True if args.invert_folds else None, "eval.selection": args.selection})
    if cmd == "sweep":
        o["eval.sweep_rnp"] = args.rnp
    if cmd in ("topk", "feature-importance"):
        o["eval.topk_rnp"] = args.rnp
    if cmd == "topk":
        o["eval.topk_values"] = args.k
    return o


def _emit(lines: Sequence[str], out: Optional[str]) -> None:
    if out:
        write_lines(out, lines)
        log("mcua", f"wrote {out}")
    else:
        for line in lines:
            print(line)


def _cache(settings: Dict[str, Any]) -> PairFeatureCache:
    return PairFeatureCache(FeatureExtractor(Transliterator.from_settings(settings)))


def _report_unmapped(cache: PairFeatureCache) -> None:
    unmapped = cache.extractor.translit.unmapped_counts()
    if unmapped:
        top = ", ".join(f"{ch}x{n}" for ch, n in unmapped.most_common(10))
        log("WARN", f"{sum(unmapped.values())} Chinese letters had no reading: {top}")


def _load_data(args: argparse.Namespace, settings: Dict[str, Any], cache: PairFeatureCache):
    dataset = load_accounts(args.accounts, args.l or 0, args.n or 0, cache.extractor.text)
    positives = load_positives(args.positives, dataset)
    log("mcua", f"{len(dataset.accounts1)}+{len(dataset.accounts2)} accounts, "
                f"{dataset.l}x{dataset.n} slots, {len(positives)} positives")
    return dataset, positives


def _eval_config(settings: Dict[str, Any], dataset: Dataset) -> McuaConfig:
    return McuaConfig.from_settings(settings, dataset.l, dataset.n).with_degenerate("constant")


# ------------------------------
# Subcommands
# ------------------------------

def cmd_gen(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    spec = GenSpec.from_settings(settings)
    data = gen_dataset(spec, Transliterator.from_settings(settings))
    write_dataset(data, args.out_dir)
    return 0


def cmd_train(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    cache = _cache(settings)
    dataset = load_accounts(args.accounts, args.l or 0, args.n or 0, cache.extractor.text)
    pairs = load_pairs(args.pairs, dataset)
    if args.rnp > 0:
        positives = [p for p in pairs if p.label == 1]
        pairs = [p for p in pairs if p.label == 0] + build_pairs(positives, args.rnp, int(settings["run.seed"]))
    config = McuaConfig.from_settings(settings, dataset.l, dataset.n)
    t0 = time.time()
    model = train_mcua(dataset, pairs, config, cache)
    log("mcua", f"trained on {len(pairs)} pairs in {time.time() - t0:.1f}s")
    save_mcua(model, args.out)
    _report_unmapped(cache)
    return 0


def cmd_predict(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    model = load_mcua(args.model)
    cache = _cache(settings)
    dataset = load_accounts(args.accounts, model.config.l, model.config.n, cache.extractor.text)
    candidates = load_candidates(args.candidates, dataset)
    preds = predict_many(model, dataset, candidates, cache, jobs=max(1, int(settings["run.jobs"])))
    n = write_jsonl(args.out, (p.record() for p in preds))
    log("mcua", f"{n} predictions -> {args.out} ({sum(p.label for p in preds)} aligned)")
    _report_unmapped(cache)
    return 0


def cmd_eval(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    cache = _cache(settings)
    dataset, positives = _load_data(args, settings, cache)
    if args.batch:
        reports = run_batch(args.batch, settings, dataset, positives, cache)
        out = Path(args.out)
        for rep in reports:
            write_lines(out.with_name(f"{out.stem}_{rep.tag}{out.suffix}"), rep.table_lines())
        if args.results:
            write_lines(args.results, (dumps_record(r) for rep in reports for r in rep.records()))
    else:
        exp = ExperimentConfig.from_settings(settings)
        report = run_experiment(dataset, positives, exp, _eval_config(settings, dataset), cache)
        write_report(report, args.out, args.results)
        reports = [report]
        for line in report.table_lines():
            print(line)
    db = args.db or settings.get("store.path") or ""
    if db:
        conn = store.connect(db)
        try:
            for rep in reports:
                store.save_report(conn, rep, settings)
        finally:
            conn.close()
    _report_unmapped(cache)
    return 0


def cmd_sweep(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    cache = _cache(settings)
    dataset, positives = _load_data(args, settings, cache)
    exp = ExperimentConfig.from_settings(settings)
    table = model_selection_sweep(dataset, positives, args.type.upper(), exp, _eval_config(settings, dataset), cache)
    _emit(table.lines(), args.out)
    log("mcua", f"best learner for {table.target}: {table.best()}")
    return 0


def cmd_topk(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    mt = args.type
    cache = _cache(settings)
    dataset, positives = _load_data(args, settings, cache)
    exp = ExperimentConfig.from_settings(settings)
    curves = topk_feature_curves(dataset, positives, mt, exp.topk_values, exp,
                                 _eval_config(settings, dataset), cache)
    _emit(curves.lines(), args.out)
    return 0


def cmd_feature_importance(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    mt = args.type
    cache = _cache(settings)
    dataset, positives = _load_data(args, settings, cache)
    exp = ExperimentConfig.from_settings(settings)
    pairs = build_pairs(positives, exp.topk_rnp, exp.seed)
    part = partition_training_pairs(pairs, dataset, cache)[mt]
    config = _eval_config(settings, dataset)
    _emit(importance_report(part, mt, config.views[mt]), args.out)
    return 0


def cmd_emit_schema(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    for line in emit_schema(args.type):
        print(line)
    return 0


def cmd_runs(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    db = args.db or settings.get("store.path") or ""
    if not db:
        raise ConfigError("no results store: pass --db or set store.path")
    if not Path(db).is_file():
        raise ConfigError(f"{db}: no such results store")
    conn = store.connect(db)
    try:
        if args.run:
            rows = store.load_summary(conn, args.run)
            if not rows:
                raise ConfigError(f"{db}: no stored run {args.run!r}")
            lines = ["method\tR_NP\tPrec\tRec\tF1"] + [
                f"{m}\t{r}\t{p:.4f}\t{rc:.4f}\t{f:.4f}" for m, r, p, rc, f in rows]
        else:
            lines = ["run_key\ttag\tcreated"] + [
                f"{r['run_key']}\t{r['tag'] or '-'}\t{r['created']}" for r in store.list_runs(conn)]
    finally:
        conn.close()
    for line in lines:
        print(line)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "topk": cmd_topk,
    "feature-importance": cmd_feature_importance,
    "emit-schema": cmd_emit_schema,
    "runs": cmd_runs,
}


def _print_version(settings: Dict[str, Any]) -> None:
    print(f"mcua {VERSION}")
    tables = load_tables(settings.get("tables.dir", "tables"))
    for name in sorted(tables.versions):
        print(f"tables/{name} {tables.versions[name]}")


def main(argv: List[str]) -> int:
    ensure_console_utf8()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return int(ex.code or 0)
    if not args.version and not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.version:
            settings = load_settings(args.config, {"tables.dir": args.tables})
            _print_version(settings)
            return 0
        settings = load_settings(args.config, _overrides(args))
        set_quiet(bool(settings.get("run.quiet")))
        return COMMANDS[args.command](args, settings)
    except SystemExit as ex:
        return int(ex.code or 0)
    except (McuaError, OSError) as ex:
        log("ERROR", str(ex))
        return 1
    except KeyboardInterrupt:
        log("ERROR", "interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
