"""Readers for the raw layouts accepted by ``eddyclass import``.

* ``long-csv``  -- one file, header ``record_id,class_id,ch1,ch2``, one row per
  sample, rows of a record contiguous and in time order;
* ``class-dirs`` -- one sub-directory per class (``<class_id>`` or
  ``<class_id>_<name>``), one two-column text file per record (comma or
  whitespace separated, optional ``ch1,ch2`` header);
* ``canonical`` -- an existing manifest (file or directory); importing it
  re-exports the same dataset.
"""
from __future__ import annotations

import csv
import math
import re
from pathlib import Path

import numpy as np

from .dataset import Dataset, SignalRecord, load_manifest
from .errors import ConfigError, DataError

FORMATS = ("long-csv", "class-dirs", "canonical")
_CLASS_DIR = re.compile(r"^(\d+)(?:_(.+))?$")


def _sample(text: str, where: str, record_id: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise DataError(f"{where}: record {record_id!r}: non-numeric sample {text!r}") from None
    if not math.isfinite(x):
        raise DataError(f"{where}: record {record_id!r}: non-finite sample")
    return x


def _check_lengths(records: list[SignalRecord], source) -> None:
    lengths = {r.n_samples for r in records}
    if len(lengths) > 1:
        raise DataError(f"{source}: inconsistent sample counts across records: {sorted(lengths)}")


def _build(rid: str, cid: int, ch1: list, ch2: list, where: str) -> SignalRecord:
    try:
        return SignalRecord(rid, cid, np.array(ch1), np.array(ch2))
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None


def read_long_csv(path: Path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input not found: {path}")
    records: list[SignalRecord] = []
    seen: set[str] = set()
    cur_id, cur_cls, ch1, ch2 = None, None, [], []

    def flush():
        if cur_id is not None:
            records.append(_build(cur_id, cur_cls, ch1, ch2, str(path)))

    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["record_id", "class_id", "ch1", "ch2"]:
            raise DataError(f"{path}:1: expected header 'record_id,class_id,ch1,ch2'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) != 4:
                raise DataError(f"{where}: expected 4 columns, got {len(row)}")
            rid = row[0].strip()
            try:
                cid = int(row[1])
            except ValueError:
                raise DataError(f"{where}: class_id {row[1]!r} is not an integer") from None
            if rid != cur_id:
                if rid in seen:
                    raise DataError(f"{where}: rows of record {rid!r} are not contiguous")
                flush()
                seen.add(rid)
                cur_id, cur_cls, ch1, ch2 = rid, cid, [], []
            elif cid != cur_cls:
                raise DataError(f"{where}: record {rid!r} changes class_id")
            ch1.append(_sample(row[2], where, rid))
            ch2.append(_sample(row[3], where, rid))
    flush()
    if not records:
        raise DataError(f"{path}: no records")
    _check_lengths(records, path)
    return Dataset(tuple(records))


def _read_two_columns(path: Path, rid: str) -> tuple[list, list]:
    ch1, ch2 = [], []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in re.split(r"[,\s;]+", line) if p]
        if lineno == 1 and [p.lower() for p in parts] == ["ch1", "ch2"]:
            continue
        where = f"{path}:{lineno}"
        if len(parts) != 2:
            raise DataError(f"{where}: record {rid!r}: expected 2 columns, got {len(parts)}")
        ch1.append(_sample(parts[0], where, rid))
        ch2.append(_sample(parts[1], where, rid))
    return ch1, ch2


def read_class_dirs(root: Path) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"input directory not found: {root}")
    records, names = [], {}
    dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name)
    for d in dirs:
        m = _CLASS_DIR.match(d.name)
        if not m:
            raise DataError(f"{d}: class directory must be named <class_id> or <class_id>_<name>")
        cid = int(m.group(1))
        if m.group(2):
            names[cid] = m.group(2)
        for f in sorted(p for p in d.iterdir() if p.is_file()):
            rid = f.stem
            ch1, ch2 = _read_two_columns(f, rid)
            records.append(_build(rid, cid, ch1, ch2, str(f)))
    if not records:
        raise DataError(f"{root}: no records")
    _check_lengths(records, root)
    return Dataset(tuple(records), names)


def read_canonical(path: Path) -> Dataset:
    return load_manifest(path)


def import_raw(path: Path, fmt: str) -> Dataset:
    readers = {"long-csv": read_long_csv, "class-dirs": read_class_dirs, "canonical": read_canonical}
    if fmt not in readers:
        raise ConfigError(f"unknown import format {fmt!r}; choose from {', '.join(FORMATS)}")
    return readers[fmt](path)
