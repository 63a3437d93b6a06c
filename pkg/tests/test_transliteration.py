# -*- coding: utf-8 -*-
import shutil
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest

from errors import ConfigError, TableError, TypeMismatch
from transliteration import (
    SYSTEMS, TABLE_FILES, RomanizationSystem, TransliterationTables, Transliterator, parse_system,
)

TABLES = Path(__file__).resolve().parents[1] / "tables"


def _rows(name):
    with open(TABLES / name, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                yield line.split("\t")


FAMILY_POLYPHONES = {cols[0] for cols in _rows("polyphone_family.tsv")}

# (name, system code, expected)
CURATED = [
    ("李雷", "hy", "lilei"), ("李雷", "ct", "leelui"), ("李雷", "ty", "lilei"), ("李雷", "wd", "lilei"),
    ("王芳", "hy", "wangfang"), ("王芳", "ct", "wongfong"), ("王芳", "ty", "wangfang"), ("王芳", "wd", "wangfang"),
    ("张伟", "hy", "zhangwei"), ("张伟", "ct", "cheungwai"), ("张伟", "ty", "jhangwei"), ("张伟", "wd", "changwei"),
    ("陈华", "hy", "chenhua"), ("陈华", "ct", "chanwah"), ("陈华", "ty", "chenhua"), ("陈华", "wd", "chenhua"),
    ("周小明", "hy", "zhouxiaoming"), ("周小明", "ct", "chowsiuming"),
    ("周小明", "ty", "jhousiaoming"), ("周小明", "wd", "chouhsiaoming"),
    ("徐国华", "hy", "xuguohua"), ("徐国华", "ct", "tsuikwokwah"),
    ("徐国华", "ty", "syuguohua"), ("徐国华", "wd", "hsukuohua"),
    ("谢建军", "hy", "xiejianjun"), ("谢建军", "ct", "tsekinkwan"),
    ("谢建军", "ty", "siejianjyun"), ("谢建军", "wd", "hsiehchienchun"),
    ("高德", "hy", "gaode"), ("高德", "ct", "kotak"), ("高德", "ty", "gaode"), ("高德", "wd", "kaote"),
    # compound family names
    ("欧阳明", "hy", "ouyangming"), ("欧阳明", "ct", "auyeungming"),
    ("欧阳明", "ty", "ouyangming"), ("欧阳明", "wd", "ouyangming"),
    ("歐陽明", "hy", "ouyangming"), ("歐陽明", "ct", "auyeungming"),
    # polyphone family names
    ("单明", "hy", "shanming"), ("单明", "ct", "sinming"), ("单明", "ty", "shanming"), ("单明", "wd", "shanming"),
    ("曾志强", "hy", "zengzhiqiang"), ("曾志强", "ct", "tsangchikeung"),
    ("曾志强", "ty", "zengjhihciang"), ("曾志强", "wd", "tsengchihchiang"),
    ("长孙明", "hy", "zhangsunming"), ("长孙明", "ct", "cheungsuenming"),
    ("长孙明", "ty", "jhangsunming"), ("长孙明", "wd", "changsunming"),
    ("乐乐", "hy", "yuele"), ("乐乐", "ct", "ngoklok"), ("乐乐", "ty", "yuele"), ("乐乐", "wd", "yuehle"),
    # polyphone words
    ("王长江", "hy", "wangchangjiang"), ("王长江", "ct", "wongcheungkong"),
    ("王长江", "ty", "wangchangjiang"), ("王长江", "wd", "wangchangchiang"),
    ("张行长", "hy", "zhanghangzhang"), ("张行长", "ct", "cheunghongcheung"),
    ("张行长", "ty", "jhanghangjhang"), ("张行长", "wd", "changhangchang"),
    ("银行", "hy", "yinhang"), ("银行", "ct", "nganhong"), ("银行", "ty", "yinhang"), ("银行", "wd", "yinhang"),
    ("王行", "hy", "wangxing"), ("王行", "ct", "wonghang"), ("王行", "ty", "wangsing"), ("王行", "wd", "wanghsing"),
    # traditional input and pass-through
    ("龍", "hy", "long"), ("龍", "ct", "lung"), ("龍", "ty", "long"), ("龍", "wd", "lung"),
    ("Mr.李雷", "hy", "Mr.lilei"), ("李雷88", "hy", "lilei88"), ("abc", "hy", "abc"), ("abc", "wd", "abc"),
]


@pytest.mark.parametrize("name,code,expected", CURATED)
def test_curated_transliterations(translit, name, code, expected):
    assert translit.transliterate(name, code) == expected


@pytest.mark.parametrize("system", SYSTEMS)
def test_every_table_letter_romanizes_to_its_row(translit, system):
    rows = list(_rows(TABLE_FILES[system]))
    assert len(rows) > 600
    for letter, syllable in rows:
        if letter in FAMILY_POLYPHONES:
            continue
        assert translit.transliterate(letter, system) == syllable, letter


def test_every_family_polyphone_uses_its_family_reading(translit):
    for cols in _rows("polyphone_family.tsv"):
        for k, system in enumerate(SYSTEMS):
            assert translit.transliterate(cols[0], system) == cols[1 + k].replace(" ", "")


def test_polyphone_words_differ_from_letter_by_letter(translit, tables):
    hy = tables.romanization[RomanizationSystem.HANYU]
    assert translit.transliterate("行", "hy") == "xing"
    assert translit.transliterate("银行", "hy") == "yinhang"
    assert "".join(hy[ch] for ch in "银行") != "yinhang"


def test_traditional_rows_simplify_and_romanize_alike(translit):
    for trad, simp in _rows("trad2simp.tsv"):
        assert translit.simplify(trad) == simp
        for system in SYSTEMS:
            assert translit.transliterate(trad, system) == translit.transliterate(simp, system)


@pytest.mark.parametrize("raw,expected", [
    ("龍", "龙"),
    ("李雷", "李雷"),
    ("Mr.龍88", "Mr.龙88"),
    ("張偉", "张伟"),
])
def test_simplify(translit, raw, expected):
    assert translit.simplify(raw) == expected
    assert translit.simplify(expected) == expected


@pytest.mark.parametrize("raw,family", [
    ("李雷", "李"),
    ("欧阳明", "欧阳"),
    ("歐陽明", "歐陽"),
    ("Mr.李雷", "李"),
    ("雷雷", None),
])
def test_detect_family(translit, raw, family):
    assert translit.detect_family(raw) == family


@pytest.mark.parametrize("raw,moved", [
    ("李雷", "雷李"),
    ("李雷雷", "雷雷李"),
    ("欧阳明", "明欧阳"),
    ("Mr.李雷", "Mr.雷李"),
    ("李雷88", "雷李88"),
    ("雷雷", None),
])
def test_reorder_family(translit, raw, moved):
    assert translit.reorder_family(raw) == moved


def test_family_operations_need_cn_names(translit):
    with pytest.raises(TypeMismatch):
        translit.detect_family("LiLei")
    with pytest.raises(TypeMismatch):
        translit.phonetic_forms_ce("LiLei")


def test_phonetic_forms_ce(translit):
    assert translit.phonetic_forms_ce("李雷") == (
        "lilei", "leelui", "lilei", "lilei", "leili", "luilee", "leili", "leili")


def test_phonetic_forms_without_family_repeat(translit):
    forms = translit.phonetic_forms_ce("雷雷")
    assert forms[:4] == forms[4:] == ("leilei", "luilui", "leilei", "leilei")


def test_syllables_family_last(translit):
    assert translit.syllables("李雷", "hy") == ["li", "lei"]
    assert translit.syllables("李雷", "hy", family_last=True) == ["lei", "li"]
    assert translit.syllables("欧阳明", "ct", family_last=True) == ["ming", "au", "yeung"]


@pytest.mark.parametrize("raw,expected", [
    ("龍", ("龙", "long", "lung", "long", "lung")),
    ("李雷", ("李雷", "lilei", "leelui", "lilei", "lilei")),
    ("abc李", ("abc李", "abcli", "abclee", "abcli", "abcli")),
    ("ABC李", ("abc李", "abcli", "abclee", "abcli", "abcli")),
])
def test_transforms_cc(translit, raw, expected):
    assert translit.transforms_cc(raw) == expected


def test_transliteration_output_is_a_fixed_point(translit):
    for name in ("李雷", "欧阳明", "张行长", "Mr.龍88"):
        for system in SYSTEMS:
            once = translit.transliterate(name, system)
            assert translit.transliterate(once, system) == once


def test_generator_letters_are_covered(translit, tables):
    for letter in tables.given_letters + tables.family_order:
        assert translit.is_covered(letter), letter


def test_unmapped_letters_are_counted(tables):
    tr = Transliterator(tables)
    text, missing = tr.transliterate_counted("李㐀", "hy")
    assert (text, missing) == ("li㐀", 1)
    assert tr.unmapped_counts()["㐀"] == 1
    assert not tr.is_covered("㐀")


def test_unmapped_counts_survive_concurrent_callers(tables):
    tr = Transliterator(tables, cache_size=0)
    names = ["李㐀", "王㐁", "张㐀"] * 200
    with ThreadPoolExecutor(max_workers=8) as ex:
        list(ex.map(lambda s: tr.transliterate_counted(s, "hy"), names))
    assert tr.unmapped_counts() == {"㐀": 400, "㐁": 200}


def test_form_caches_are_bounded(tables):
    tr = Transliterator(tables, cache_size=2)
    first = tr.phonetic_forms_ce("李雷")
    for name in ("王芳", "张伟", "刘洋"):
        tr.phonetic_forms_ce(name)
        tr.transforms_cc(name)
    assert tr._ce_forms.cache_info().currsize == 2
    assert tr._cc_forms.cache_info().currsize == 2
    assert tr.phonetic_forms_ce("李雷") == first
    with pytest.raises(ConfigError):
        Transliterator(tables, cache_size=-1)


def test_traditional_of(translit):
    assert translit.traditional_of("龙") == "龍"
    assert translit.traditional_of("李") is None


@pytest.mark.parametrize("value,system", [
    ("hy", RomanizationSystem.HANYU),
    ("Cantonese", RomanizationSystem.CANTONESE),
    ("tongyong", RomanizationSystem.TONGYONG),
    ("WadeGiles", RomanizationSystem.WADEGILES),
])
def test_parse_system(value, system):
    assert parse_system(value) is system


def test_parse_system_unknown():
    with pytest.raises(ConfigError):
        parse_system("yale")


def test_table_versions_are_read(tables):
    assert tables.versions["hanyu.tsv"] == "2026.1"
    assert set(TABLE_FILES.values()) <= set(tables.versions)


def test_missing_table_names_the_file(tmp_path):
    for f in TABLES.iterdir():
        shutil.copy(f, tmp_path / f.name)
    (tmp_path / "wadegiles.tsv").unlink()
    with pytest.raises(TableError) as ex:
        TransliterationTables.load(tmp_path)
    assert "wadegiles.tsv" in str(ex.value)


def test_malformed_table_line_reports_line_number(tmp_path):
    for f in TABLES.iterdir():
        shutil.copy(f, tmp_path / f.name)
    with open(tmp_path / "hanyu.tsv", "a", encoding="utf-8") as fh:
        fh.write("李\tLi Lei\n")
    with pytest.raises(TableError) as ex:
        TransliterationTables.load(tmp_path)
    assert "hanyu.tsv:" in str(ex.value)


def test_stray_family_polyphone_is_rejected(tmp_path):
    for f in TABLES.iterdir():
        shutil.copy(f, tmp_path / f.name)
    with open(tmp_path / "polyphone_family.tsv", "a", encoding="utf-8") as fh:
        fh.write("行\txing\thang\tsing\thsing\n")
    with pytest.raises(TableError):
        TransliterationTables.load(tmp_path)
