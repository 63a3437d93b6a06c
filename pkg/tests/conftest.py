# -*- coding: utf-8 -*-
# conftest.py
# Shared fixtures: bundled tables, extractor, and a small synthetic dataset.
from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from features import FeatureExtractor  # noqa: E402
from fusion import PairFeatureCache  # noqa: E402
from synth import GenSpec, gen_dataset, write_dataset  # noqa: E402
from transliteration import Transliterator, load_tables  # noqa: E402
from util import set_quiet  # noqa: E402


@pytest.fixture(autouse=True)
def _quiet_logs():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture(scope="session")
def tables():
    return load_tables(ROOT / "tables")


@pytest.fixture(scope="session")
def translit(tables):
    return Transliterator(tables)


@pytest.fixture(scope="session")
def extractor(translit):
    return FeatureExtractor(translit)


@pytest.fixture()
def cache(extractor):
    return PairFeatureCache(extractor)


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory, translit):
    """60 personas, 1x2 slots, seed 3."""
    out = tmp_path_factory.mktemp("synth")
    data = gen_dataset(GenSpec(n_personas=60, l=1, n=2, seed=3), translit)
    write_dataset(data, out)
    return out
