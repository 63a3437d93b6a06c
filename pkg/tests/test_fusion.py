# -*- coding: utf-8 -*-
import itertools

import numpy as np
import pytest

from dataset import Dataset, LabeledPair, load_accounts, load_positives
from errors import DegenerateLabels, ModelFormatError, SchemaViolation
from evaluation import build_pairs
from features import SCHEMAS
from fusion import (
    SLOT_OFFSET, McuaConfig, McuaModel, PairFeatureCache, ViewModel, build_fusion_vector, dump_mcua,
    fusion_matrix, load_mcua, parse_mcua, partition_training_pairs, predict_alignment, predict_many, save_mcua,
    slot_base, train_mcua, train_view_models,
)
from models import ConstantModel, LearnerSpec, TrainingSet
from text_model import MATCHING_TYPES, Account, MatchingType, classify_name

# distinct outputs so every written slot shows which view produced it
_MARK = {MatchingType.CC: 0.25, MatchingType.CE: 0.5, MatchingType.EE: 0.75}
_NAMES = ("李雷", "lilei", "韩梅梅", "Meimei_Han")


def _marker_views():
    return {mt: ViewModel(mt, ConstantModel(SCHEMAS[mt].length, _MARK[mt]), None, "constant")
            for mt in MATCHING_TYPES}


def _account(network, acc_id, raw):
    return Account(network, acc_id, tuple(classify_name(x) if x else None for x in raw))


def _light_config(l=1, n=2, **kw):
    return McuaConfig(
        l=l, n=n,
        views={
            MatchingType.CC: LearnerSpec("svm-l2"),
            MatchingType.CE: LearnerSpec("forest", n_trees=10, seed=1),
            MatchingType.EE: LearnerSpec("logistic-l1"),
        },
        classifier=LearnerSpec("logistic-l1"),
        **kw,
    )


@pytest.fixture(scope="module")
def small(small_data_dir):
    ds = load_accounts(small_data_dir / "accounts.jsonl", 1, 2)
    pos = load_positives(small_data_dir / "positives.jsonl", ds)
    return ds, build_pairs(pos, 1, seed=5)


# ------------------------------
# Fusion layout
# ------------------------------

def test_slot_base():
    assert slot_base(0, 0, 2) == 0
    assert slot_base(0, 1, 2) == 3
    assert slot_base(1, 0, 2) == 6
    assert slot_base(2, 2, 3) == 24


@pytest.mark.parametrize("l,n", list(itertools.product((1, 2, 3), repeat=2)))
def test_fusion_vector_slot_contract(l, n, cache):
    rng = np.random.default_rng(l * 10 + n)
    views = _marker_views()
    for trial in range(8):
        raw1 = [None if rng.random() < 0.3 else _NAMES[int(rng.integers(4))] for _ in range(l)]
        raw2 = [None if rng.random() < 0.3 else _NAMES[int(rng.integers(4))] for _ in range(n)]
        u1 = _account(1, f"a{trial}", raw1)
        u2 = _account(2, f"b{trial}", raw2)
        v = build_fusion_vector(u1, u2, views, cache, l, n)
        assert v.shape == (3 * l * n,)
        expected = np.zeros(3 * l * n)
        for y, a in enumerate(u1.names):
            for z, b in enumerate(u2.names):
                if a is None or b is None:
                    continue
                mt = MatchingType.CC if a.is_cn and b.is_cn else (
                    MatchingType.EE if not a.is_cn and not b.is_cn else MatchingType.CE)
                expected[slot_base(y, z, n) + SLOT_OFFSET[mt]] = _MARK[mt]
        np.testing.assert_array_equal(v, expected)


def test_all_absent_names_give_zero_vector(cache):
    u1 = _account(1, "a", [None, None])
    u2 = _account(2, "b", [None])
    np.testing.assert_array_equal(build_fusion_vector(u1, u2, _marker_views(), cache, 2, 1), 0.0)


def test_wrong_slot_count_is_rejected(cache):
    u1 = _account(1, "a", ["李雷"])
    u2 = _account(2, "b", ["lilei"])
    with pytest.raises(SchemaViolation):
        build_fusion_vector(u1, u2, _marker_views(), cache, 1, 2)


def test_fusion_matrix_matches_single_vectors(small, cache):
    ds, pairs = small
    views = _marker_views()
    accts = [ds.resolve(p) for p in pairs[:20]]
    V = fusion_matrix(accts, views, cache, ds.l, ds.n)
    for row, (u1, u2) in zip(V, accts):
        np.testing.assert_array_equal(row, build_fusion_vector(u1, u2, views, cache, ds.l, ds.n))


# ------------------------------
# Partitions and view models
# ------------------------------

def test_partition_conserves_name_pairs(small, cache):
    ds, pairs = small
    parts = partition_training_pairs(pairs, ds, cache)
    present = 0
    for p in pairs:
        u1, u2 = ds.resolve(p)
        present += sum(1 for a in u1.names for b in u2.names if a is not None and b is not None)
    assert sum(parts[mt].size for mt in MATCHING_TYPES) == present
    for mt in MATCHING_TYPES:
        assert parts[mt].X.shape[1] == SCHEMAS[mt].length
        assert ((parts[mt].X >= 0) & (parts[mt].X <= 1)).all()


def test_partition_labels_follow_pairs(cache):
    u1 = _account(1, "a", ["李雷"])
    u2 = _account(2, "b", ["lilei", "李雷"])
    ds = Dataset({"a": u1}, {"b": u2}, 1, 2)
    parts = partition_training_pairs([LabeledPair("a", "b", 0)], ds, cache)
    assert parts[MatchingType.CE].size == 1 and parts[MatchingType.CC].size == 1
    assert parts[MatchingType.EE].size == 0
    assert parts[MatchingType.CE].y.tolist() == [0]


def _partitions(cc_labels, ce_labels, ee_labels):
    out = {}
    rng = np.random.default_rng(0)
    for mt, labels in zip(MATCHING_TYPES, (cc_labels, ce_labels, ee_labels)):
        y = np.asarray(labels, dtype=int)
        out[mt] = TrainingSet(rng.random((y.size, SCHEMAS[mt].length)), y)
    return out


def test_empty_partition_gives_constant_zero():
    parts = _partitions([0, 1, 0, 1], [0, 1, 1, 0], [])
    views = train_view_models(parts, _light_config())
    ee = views[MatchingType.EE]
    assert isinstance(ee.model, ConstantModel) and ee.model.value == 0.0
    assert ee.score(np.ones((3, SCHEMAS[MatchingType.EE].length))).tolist() == [0.0, 0.0, 0.0]


def test_single_label_partition_errors_by_default():
    parts = _partitions([1, 1, 1], [0, 1, 1, 0], [0, 1])
    with pytest.raises(DegenerateLabels):
        train_view_models(parts, _light_config())


def test_single_label_partition_constant_when_allowed():
    parts = _partitions([1, 1, 1], [0, 1, 1, 0], [0, 1])
    views = train_view_models(parts, _light_config(on_degenerate="constant"))
    cc = views[MatchingType.CC]
    assert isinstance(cc.model, ConstantModel) and cc.model.value == 1.0


def test_view_columns_restrict_input():
    parts = _partitions([0, 1, 0, 1], [0, 1, 1, 0], [0, 1, 0, 1])
    cfg = _light_config().with_columns({MatchingType.EE: (0, 3, 5)})
    views = train_view_models(parts, cfg)
    assert views[MatchingType.EE].model.n_features == 3
    assert views[MatchingType.CC].model.n_features == SCHEMAS[MatchingType.CC].length


def test_selected_config_uses_short_lists():
    cfg = _light_config().selected()
    assert {mt: len(cfg.columns[mt]) for mt in MATCHING_TYPES} == {
        MatchingType.EE: 5, MatchingType.CE: 8, MatchingType.CC: 3}


def test_config_from_settings():
    cfg = McuaConfig.from_settings({"mcua.model_cc": "cart", "mcua.model_ce": "naive-bayes",
                                    "mcua.model_ee": "svm-l1", "mcua.model_c": "forest",
                                    "mcua.theta": 0.4}, 2, 3)
    assert (cfg.l, cfg.n, cfg.width, cfg.theta) == (2, 3, 18, 0.4)
    assert cfg.views[MatchingType.CE].family == "naive-bayes"
    assert cfg.classifier.family == "forest"


# ------------------------------
# Training, prediction, persistence
# ------------------------------

@pytest.fixture(scope="module")
def trained(small, extractor):
    ds, pairs = small
    c = PairFeatureCache(extractor)
    return train_mcua(ds, pairs, _light_config(), c), c


def test_train_shape_mismatch(small, cache):
    ds, pairs = small
    with pytest.raises(SchemaViolation):
        train_mcua(ds, pairs, _light_config(l=2, n=2), cache)


def test_trained_model_separates_training_data(small, trained):
    ds, pairs = small
    model, c = trained
    preds = predict_many(model, ds, pairs, c)
    acc = np.mean([pr.label == p.label for pr, p in zip(preds, pairs)])
    assert acc >= 0.8
    assert all(0.0 <= pr.probability <= 1.0 for pr in preds)
    assert all(len(pr.fusion_vector) == 6 for pr in preds)


def test_predict_many_order_independent_of_jobs(small, trained):
    ds, pairs = small
    model, c = trained
    serial = predict_many(model, ds, pairs, c, jobs=1, chunk=16)
    threaded = predict_many(model, ds, list(pairs), c, jobs=4, chunk=16)
    assert serial == threaded
    assert [(p.id1, p.id2) for p in serial] == [p.key() for p in pairs]


def test_predict_alignment_matches_batch(small, trained):
    ds, pairs = small
    model, c = trained
    one = predict_alignment(model, *ds.resolve(pairs[3]), c)
    assert one == predict_many(model, ds, [pairs[3]], c)[0]


def test_mcua_file_round_trip(small, trained, tmp_path):
    ds, pairs = small
    model, c = trained
    path = tmp_path / "out" / "model.mcua"
    save_mcua(model, path)
    back = load_mcua(path)
    assert (back.config.l, back.config.n, back.config.theta) == (1, 2, 0.5)
    assert back.tables_version == model.tables_version
    for mt in MATCHING_TYPES:
        assert back.views[mt].model == model.views[mt].model
        assert back.views[mt].family == model.views[mt].family
    a = [p.probability for p in predict_many(model, ds, pairs, c)]
    b = [p.probability for p in predict_many(back, ds, pairs, c)]
    assert a == b


def test_mcua_file_keeps_columns(small, cache):
    ds, pairs = small
    model = train_mcua(ds, pairs, _light_config().selected(), cache)
    back = parse_mcua(dump_mcua(model))
    assert back.views[MatchingType.CE].columns == model.views[MatchingType.CE].columns


def test_bad_mcua_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mcua(tmp_path / "missing.mcua")
    with pytest.raises(ModelFormatError):
        parse_mcua(["something else"])
    with pytest.raises(ModelFormatError):
        parse_mcua(["mcua 1", "version 1.0.0"])
    with pytest.raises(ModelFormatError, match="bad l value"):
        parse_mcua(["mcua 1", "version 1.0.0", "tables -", "l one", "n 2", "theta 0x1p-1"])


def test_theta_boundary_is_inclusive(cache):
    u1 = _account(1, "a", ["李雷"])
    u2 = _account(2, "b", ["lilei", None])
    for value, label in ((0.5, 1), (np.nextafter(0.5, 0.0), 0)):
        model = McuaModel(_light_config(), _marker_views(), ConstantModel(6, float(value)))
        assert predict_alignment(model, u1, u2, cache).label == label


def test_swapping_names_permutes_slots(cache):
    views = _marker_views()
    u1 = _account(1, "a", ["李雷", "lilei"])
    u2 = _account(2, "b", ["韩梅梅", None, "meimei"])
    u1_swapped = _account(1, "a", ["lilei", "李雷"])
    v = build_fusion_vector(u1, u2, views, cache, 2, 3)
    w = build_fusion_vector(u1_swapped, u2, views, cache, 2, 3)
    np.testing.assert_array_equal(v[:9], w[9:])
    np.testing.assert_array_equal(v[9:], w[:9])


def test_identical_and_unrelated_accounts(trained):
    model, c = trained
    same = predict_alignment(model, _account(1, "a", ["韩梅梅"]), _account(2, "b", ["韩梅梅", "hanmeimei"]), c)
    other = predict_alignment(model, _account(1, "a", ["欧阳娜娜"]), _account(2, "b", ["zq_0931", "Xx@@"]), c)
    assert same.label == 1
    assert other.label == 0
    assert same.probability > other.probability
