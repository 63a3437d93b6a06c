# -*- coding: utf-8 -*-
# dataset.py
# Line-delimited JSON records shared by gen, train, predict and eval.
#
#   accounts.jsonl    {"network": 1|2, "id": "...", "names": ["...", ...]}
#   positives.jsonl   {"id1": "...", "id2": "..."}
#   pairs.jsonl       {"id1": "...", "id2": "...", "label": 0|1}   (label defaults to 1)
#   candidates.jsonl  {"id1": "...", "id2": "..."}
#
# id1 always refers to network 1, id2 to network 2. Accounts with fewer names than
# their network's slot count are padded with absent slots.
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from errors import EmptyName, SchemaViolation
from text_model import DEFAULT_TEXT, Account, NameString, TextConfig, classify_name


@dataclass(frozen=True)
class LabeledPair:
    id1: str
    id2: str
    label: int = 1

    def key(self) -> Tuple[str, str]:
        return self.id1, self.id2


@dataclass
class Dataset:
    accounts1: Dict[str, Account]
    accounts2: Dict[str, Account]
    l: int
    n: int

    def account(self, network: int, account_id: str) -> Account:
        table = self.accounts1 if network == 1 else self.accounts2
        acc = table.get(account_id)
        if acc is None:
            raise SchemaViolation(f"unknown account {account_id!r} in network {network}")
        return acc

    def resolve(self, pair: LabeledPair) -> Tuple[Account, Account]:
        return self.account(1, pair.id1), self.account(2, pair.id2)

    def check_pairs(self, pairs: Iterable[LabeledPair]) -> None:
        for p in pairs:
            self.resolve(p)

    @property
    def size(self) -> Tuple[int, int]:
        return len(self.accounts1), len(self.accounts2)


def _records(path: Union[str, Path]) -> Iterator[Tuple[int, Dict[str, Any]]]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Data file not found: {p}")
    with p.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as ex:
                raise SchemaViolation(f"{p}:{lineno}: invalid JSON ({ex.msg})") from None
            if not isinstance(rec, dict):
                raise SchemaViolation(f"{p}:{lineno}: expected an object")
            yield lineno, rec


def make_account(network: int, account_id: str, names: Sequence[str], slots: int,
                 text_cfg: TextConfig = DEFAULT_TEXT) -> Account:
    if len(names) > slots:
        raise SchemaViolation(
            f"account {account_id!r} in network {network} has {len(names)} names, at most {slots} allowed")
    typed: List[Optional[NameString]] = [classify_name(str(x), text_cfg) for x in names]
    typed.extend([None] * (slots - len(typed)))
    return Account(network, account_id, tuple(typed))


def load_accounts(path: Union[str, Path], l: int = 0, n: int = 0,
                  text_cfg: TextConfig = DEFAULT_TEXT) -> Dataset:
    """Reads accounts; slot counts of 0 are inferred as the largest name count per network."""
    raw: Dict[int, Dict[str, List[str]]] = {1: {}, 2: {}}
    where: Dict[Tuple[int, str], int] = {}
    for lineno, rec in _records(path):
        missing = [k for k in ("network", "id", "names") if k not in rec]
        if missing:
            raise SchemaViolation(f"{path}:{lineno}: missing {', '.join(missing)}")
        net = rec["network"]
        if net not in (1, 2):
            raise SchemaViolation(f"{path}:{lineno}: network must be 1 or 2, got {net!r}")
        acc_id = str(rec["id"])
        names = rec["names"]
        if not isinstance(names, list) or not names:
            raise SchemaViolation(f"{path}:{lineno}: names must be a non-empty list")
        if acc_id in raw[net]:
            raise SchemaViolation(f"{path}:{lineno}: duplicate account {acc_id!r} in network {net} "
                                  f"(first seen on line {where[(net, acc_id)]})")
        if any(not isinstance(x, str) or x == "" for x in names):
            raise EmptyName(f"{path}:{lineno}: account {acc_id!r} has an empty or non-string name")
        raw[net][acc_id] = names
        where[(net, acc_id)] = lineno

    slots = {1: l, 2: n}
    for net in (1, 2):
        if slots[net] <= 0:
            slots[net] = max((len(v) for v in raw[net].values()), default=1)

    built: Dict[int, Dict[str, Account]] = {1: {}, 2: {}}
    for net in (1, 2):
        for acc_id, names in raw[net].items():
            try:
                built[net][acc_id] = make_account(net, acc_id, names, slots[net], text_cfg)
            except SchemaViolation as ex:
                raise SchemaViolation(f"{path}:{where[(net, acc_id)]}: {ex}") from None
    return Dataset(built[1], built[2], slots[1], slots[2])


def load_pairs(path: Union[str, Path], dataset: Optional[Dataset] = None,
               default_label: int = 1, labeled: bool = True) -> List[LabeledPair]:
    out: List[LabeledPair] = []
    for lineno, rec in _records(path):
        if "id1" not in rec or "id2" not in rec:
            raise SchemaViolation(f"{path}:{lineno}: id1 and id2 are required")
        label = default_label
        if labeled and "label" in rec:
            label = rec["label"]
            if label not in (0, 1):
                raise SchemaViolation(f"{path}:{lineno}: label must be 0 or 1")
        pair = LabeledPair(str(rec["id1"]), str(rec["id2"]), int(label))
        if dataset is not None:
            try:
                dataset.resolve(pair)
            except SchemaViolation as ex:
                raise SchemaViolation(f"{path}:{lineno}: {ex}") from None
        out.append(pair)
    return out


def load_positives(path: Union[str, Path], dataset: Optional[Dataset] = None) -> List[LabeledPair]:
    return [LabeledPair(p.id1, p.id2, 1) for p in load_pairs(path, dataset, labeled=False)]


def load_candidates(path: Union[str, Path], dataset: Optional[Dataset] = None) -> List[LabeledPair]:
    return load_pairs(path, dataset, default_label=0, labeled=False)


# ------------------------------
# Writers
# ------------------------------

def dumps_record(rec: Mapping[str, Any]) -> str:
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: Union[str, Path], records: Iterable[Mapping[str, Any]]) -> int:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with p.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")
            count += 1
    return count


def account_record(acc: Account) -> Dict[str, Any]:
    return {"network": acc.network, "id": acc.account_id,
            "names": [x.raw for x in acc.names if x is not None]}


def pair_record(pair: LabeledPair, with_label: bool = True) -> Dict[str, Any]:
    rec: Dict[str, Any] = {"id1": pair.id1, "id2": pair.id2}
    if with_label:
        rec["label"] = pair.label
    return rec
