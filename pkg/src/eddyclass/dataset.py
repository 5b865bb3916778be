"""Canonical on-disk dataset format, one-vs-rest tasks and stratified fold plans.

A dataset directory holds a manifest (``record_id,class_id,path``) plus one
CSV per record with header ``ch1,ch2`` and one row per sample.  Sample values
are written with Python's shortest round-trip float repr, so a
write/load cycle reproduces every sample bit-for-bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

MANIFEST_HEADER = ["record_id", "class_id", "path"]
RECORD_HEADER = ["ch1", "ch2"]
CLASSES_FILE = "classes.csv"
DEFAULT_SAMPLE_RATE_HZ = 10000.0


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class SignalRecord:
    """One two-channel acquisition with its defect-class label."""

    record_id: str
    class_id: int
    channel1: np.ndarray
    channel2: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        ch1 = np.array(self.channel1, dtype=float)
        ch2 = np.array(self.channel2, dtype=float)
        if ch1.ndim != 1 or ch2.ndim != 1:
            raise DataError(f"record {self.record_id!r}: channels must be one-dimensional")
        if len(ch1) != len(ch2):
            raise DataError(
                f"record {self.record_id!r}: channel lengths differ ({len(ch1)} vs {len(ch2)})"
            )
        if not _is_power_of_two(len(ch1)):
            raise DataError(
                f"record {self.record_id!r}: sample count {len(ch1)} is not a power of two"
            )
        if not (np.all(np.isfinite(ch1)) and np.all(np.isfinite(ch2))):
            raise DataError(f"record {self.record_id!r}: non-finite sample")
        if not self.sample_rate_hz > 0:
            raise DataError(f"record {self.record_id!r}: sample_rate_hz must be > 0")
        if int(self.class_id) < 0:
            raise DataError(f"record {self.record_id!r}: negative class_id")
        ch1.setflags(write=False)
        ch2.setflags(write=False)
        object.__setattr__(self, "channel1", ch1)
        object.__setattr__(self, "channel2", ch2)
        object.__setattr__(self, "class_id", int(self.class_id))

    @property
    def n_samples(self) -> int:
        return len(self.channel1)

    def channel(self, mode: str = "ch1") -> np.ndarray:
        """Return x(n) for ``ch1``, ``ch2`` or ``complex`` (ch1 + j*ch2)."""
        if mode == "ch1":
            return self.channel1
        if mode == "ch2":
            return self.channel2
        if mode == "complex":
            return self.channel1 + 1j * self.channel2
        raise ConfigError(f"unknown channel mode {mode!r} (expected ch1, ch2 or complex)")


@dataclass(frozen=True)
class Dataset:
    records: tuple[SignalRecord, ...]
    class_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for rec in records:
            if rec.record_id in seen:
                raise DataError(f"duplicate record_id {rec.record_id!r}")
            seen.add(rec.record_id)
        names = dict(self.class_names)
        for rec in records:
            names.setdefault(rec.class_id, f"class_{rec.class_id}")
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "class_names", dict(sorted(names.items())))

    def __len__(self):
        return len(self.records)

    @property
    def record_ids(self) -> list[str]:
        return [r.record_id for r in self.records]

    @property
    def class_ids(self) -> list[int]:
        return sorted({r.class_id for r in self.records})

    def by_id(self) -> dict[str, SignalRecord]:
        return {r.record_id: r for r in self.records}

    def labels(self) -> np.ndarray:
        return np.array([r.class_id for r in self.records], dtype=int)


@dataclass(frozen=True)
class BinaryTask:
    """One-vs-rest split of a dataset: ``positive_class`` against everything else."""

    positives: tuple[str, ...]
    negatives: tuple[str, ...]
    positive_class: int

    def __post_init__(self):
        object.__setattr__(self, "positives", tuple(self.positives))
        object.__setattr__(self, "negatives", tuple(self.negatives))
        if set(self.positives) & set(self.negatives):
            raise DataError("positives and negatives overlap")

    @property
    def record_ids(self) -> tuple[str, ...]:
        return self.positives + self.negatives

    def label_of(self) -> dict[str, bool]:
        out = {rid: True for rid in self.positives}
        out.update({rid: False for rid in self.negatives})
        return out


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: Mapping[str, int]
    seed: int

    def fold_members(self, fold: int) -> list[str]:
        return [rid for rid, f in self.assignments.items() if f == fold]

    def to_text(self) -> str:
        lines = [f"# k={self.k} seed={self.seed}", "record_id,fold"]
        lines += [f"{rid},{f}" for rid, f in self.assignments.items()]
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Seeded shuffling
# --------------------------------------------------------------------------

class Lcg64:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``state <- state * 6364136223846793005 + 1442695040888963407 (mod 2**64)``.
    :meth:`below` maps the high 32 bits of the state onto ``[0, n)`` by
    multiply-shift.  Kept deliberately simple so fold plans can be reproduced
    outside Python.
    """

    MULT = 6364136223846793005
    INC = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK
        self.next()

    def next(self) -> int:
        self.state = (self.state * self.MULT + self.INC) & self.MASK
        return self.state

    def below(self, n: int) -> int:
        return ((self.next() >> 32) * n) >> 32

    def shuffle(self, items: list) -> list:
        """Fisher-Yates, in place; returns ``items`` for convenience."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


# --------------------------------------------------------------------------
# Tasks and folds
# --------------------------------------------------------------------------

def make_binary_task(dataset: Dataset, positive_class: int) -> BinaryTask:
    if positive_class not in dataset.class_ids:
        raise DataError(f"unknown class_id {positive_class}")
    pos = [r.record_id for r in dataset.records if r.class_id == positive_class]
    neg = [r.record_id for r in dataset.records if r.class_id != positive_class]
    return BinaryTask(tuple(pos), tuple(neg), positive_class)


def stratified_kfold(task: BinaryTask, k: int, seed: int) -> FoldPlan:
    """Split ``task`` into ``k`` folds stratified by the binary label.

    Each label's records are shuffled with :class:`Lcg64` and dealt round-robin.
    Negatives continue the deal where positives stopped, so total fold sizes
    also differ by at most one.
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    smallest = min(len(task.positives), len(task.negatives))
    if smallest < 1:
        raise DataError("stratified folds need at least one record of each label")
    if k > smallest:
        raise DataError(
            f"k={k} exceeds the smaller label count ({smallest}); a fold would lack a label"
        )
    rng = Lcg64(seed)
    assignments: dict[str, int] = {}
    offset = 0
    for group in (task.positives, task.negatives):
        order = rng.shuffle(list(group))
        for pos, rid in enumerate(order):
            assignments[rid] = (offset + pos) % k
        offset = (offset + len(order)) % k
    ordered = {rid: assignments[rid] for rid in task.record_ids}
    return FoldPlan(k=k, assignments=ordered, seed=seed)


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_record_file(path: Path, record: SignalRecord) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["ch1,ch2"]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(record.channel1, record.channel2)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_record_file(path: Path, record_id: str, class_id: int,
                     sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> SignalRecord:
    path = Path(path)
    if not path.exists():
        raise DataError(f"record {record_id!r}: file not found: {path}")
    ch1, ch2 = [], []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RECORD_HEADER:
            raise DataError(f"{path}:1: expected header 'ch1,ch2'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric sample") from None
            if not (math.isfinite(a) and math.isfinite(b)):
                raise DataError(f"record {record_id!r}: {path}:{lineno}: non-finite sample")
            ch1.append(a)
            ch2.append(b)
    if not _is_power_of_two(len(ch1)):
        raise DataError(
            f"record {record_id!r}: {path}: {len(ch1)} samples is not a power of two"
        )
    return SignalRecord(record_id, class_id, np.array(ch1), np.array(ch2), sample_rate_hz)


def write_manifest(dataset: Dataset, directory: Path, manifest_name: str = "manifest.csv") -> Path:
    """Write ``dataset`` in canonical form under ``directory``; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = ["record_id,class_id,path"]
    for rec in dataset.records:
        rel = f"records/{rec.record_id}.csv"
        write_record_file(directory / rel, rec)
        rows.append(f"{rec.record_id},{rec.class_id},{rel}")
    manifest = directory / manifest_name
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    names = ["class_id,name"] + [f"{cid},{name}" for cid, name in dataset.class_names.items()]
    (directory / CLASSES_FILE).write_text("\n".join(names) + "\n", encoding="utf-8")
    return manifest


def _read_class_names(directory: Path) -> dict[int, str]:
    path = directory / CLASSES_FILE
    if not path.exists():
        return {}
    names = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                names[int(row["class_id"])] = row["name"]
            except (KeyError, TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: malformed class row") from None
    return names


def load_manifest(path: Path) -> Dataset:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.csv"
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    base = path.parent
    records = []
    seen = set()
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise DataError(f"{path}:1: expected header 'record_id,class_id,path'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            rid, cid, rel = (c.strip() for c in row)
            if not rid:
                raise DataError(f"{path}:{lineno}: empty record_id")
            if rid in seen:
                raise DataError(f"{path}:{lineno}: duplicate record_id {rid!r}")
            seen.add(rid)
            try:
                class_id = int(cid)
            except ValueError:
                raise DataError(f"{path}:{lineno}: class_id {cid!r} is not an integer") from None
            if class_id < 0:
                raise DataError(f"{path}:{lineno}: negative class_id")
            try:
                records.append(read_record_file(base / rel, rid, class_id))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise DataError(f"{path}: no records")
    return Dataset(tuple(records), _read_class_names(base))


def dataset_from_arrays(record_ids: Sequence[str], class_ids: Iterable[int],
                        channel1: np.ndarray, channel2: np.ndarray,
                        class_names: Mapping[int, str] | None = None) -> Dataset:
    recs = [
        SignalRecord(rid, int(cid), c1, c2)
        for rid, cid, c1, c2 in zip(record_ids, class_ids, channel1, channel2)
    ]
    return Dataset(tuple(recs), dict(class_names or {}))
