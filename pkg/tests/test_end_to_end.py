# -*- coding: utf-8 -*-
# Reference-sized synthetic run; minutes, so excluded from the default selection.
import pytest

from dataset import load_accounts, load_positives
from evaluation import ExperimentConfig, run_experiment, topk_feature_curves
from fusion import McuaConfig, PairFeatureCache
from synth import GenSpec, gen_dataset, write_dataset
from text_model import MatchingType


@pytest.fixture(scope="module")
def reference(tmp_path_factory, extractor, translit):
    out = tmp_path_factory.mktemp("reference")
    write_dataset(gen_dataset(GenSpec(n_personas=2000, l=1, n=2, seed=7), translit), out)
    ds = load_accounts(out / "accounts.jsonl", 1, 2)
    pos = load_positives(out / "positives.jsonl", ds)
    return ds, pos, PairFeatureCache(extractor)


@pytest.mark.slow
def test_mcua_beats_single_view_baselines(reference):
    ds, pos, cache = reference
    methods = ("mcua", "simple-ee", "simple-ce", "simple-cc", "content")
    exp = ExperimentConfig(rnp=(1, 5, 40), methods=methods, seed=7, jobs=4)
    config = McuaConfig(1, 2).with_degenerate("constant")
    report = run_experiment(ds, pos, exp, config, cache)
    for rnp in (1, 5, 40):
        mcua_f1 = report.summary("mcua", rnp).f1
        for other in methods[1:]:
            assert mcua_f1 >= report.summary(other, rnp).f1, (rnp, other)
    assert report.summary("mcua", 40).f1 >= 0.70


@pytest.mark.slow
def test_cc_top5_features_are_enough(reference):
    ds, pos, cache = reference
    exp = ExperimentConfig(rnp=(40,), topk_rnp=40, seed=7, jobs=4)
    curves = topk_feature_curves(ds, pos, MatchingType.CC, (5, 0), exp, McuaConfig(1, 2), cache)
    top5, everything = curves.points
    assert everything == curves.full
    assert abs(top5.f1 - curves.full.f1) <= 0.05, (top5, curves.full)
