import numpy as np
import pytest

from eddyclass import dataset, synth
from eddyclass.dataset import (Lcg64, SignalRecord, load_manifest, make_binary_task,
                               stratified_kfold, write_manifest)
from eddyclass.errors import ConfigError, DataError


def _set2():
    return synth.make_set(2, seed=3, n=64)


def test_record_validation():
    with pytest.raises(DataError, match="power of two"):
        SignalRecord("a", 1, np.zeros(4095), np.zeros(4095))
    with pytest.raises(DataError):
        SignalRecord("a", 1, np.array([0.0, np.nan]), np.zeros(2))
    with pytest.raises(DataError):
        SignalRecord("a", 1, np.zeros(4), np.zeros(8))


def test_binary_task_sizes():
    ds = _set2()
    t = make_binary_task(ds, 3)
    assert len(t.positives) == 20 and len(t.negatives) == 220
    single = dataset.Dataset(tuple(r for r in ds.records if r.class_id == 3))
    t1 = make_binary_task(single, 3)
    assert len(t1.positives) == 20 and len(t1.negatives) == 0
    with pytest.raises(DataError):
        make_binary_task(ds, 99)


def test_stratified_folds_set2_shape():
    t = make_binary_task(_set2(), 3)
    plan = stratified_kfold(t, 10, 7)
    for f in range(10):
        members = set(plan.fold_members(f))
        assert len(members & set(t.positives)) == 2
        assert len(members & set(t.negatives)) == 22
    assert plan.to_text() == stratified_kfold(t, 10, 7).to_text()


def test_fold_partition_property():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p, q = int(rng.integers(2, 30)), int(rng.integers(2, 30))
        k = int(rng.integers(2, min(p, q) + 1))
        task = dataset.BinaryTask(tuple(f"p{i}" for i in range(p)), tuple(f"n{i}" for i in range(q)), 1)
        plan = stratified_kfold(task, k, int(rng.integers(0, 2**32)))
        assert sorted(plan.assignments) == sorted(task.record_ids)
        sizes = np.bincount(list(plan.assignments.values()), minlength=k)
        assert sizes.max() - sizes.min() <= 1
        for group in (task.positives, task.negatives):
            c = np.bincount([plan.assignments[r] for r in group], minlength=k)
            assert c.max() - c.min() <= 1


def test_fold_errors():
    task = dataset.BinaryTask(tuple(f"p{i}" for i in range(5)), tuple(f"n{i}" for i in range(30)), 1)
    with pytest.raises(DataError):
        stratified_kfold(task, 10, 0)
    with pytest.raises(ConfigError):
        stratified_kfold(task, 1, 0)


def test_lcg_reference_values():
    # state after seeding is one step from the seed: s1 = a*s0 + c mod 2^64
    g = Lcg64(0)
    assert g.state == Lcg64.INC
    assert g.next() == (Lcg64.INC * Lcg64.MULT + Lcg64.INC) % 2**64
    assert all(0 <= Lcg64(5).below(7) < 7 for _ in range(10))


def test_manifest_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    ds = dataset.dataset_from_arrays(["a", "b"], [1, 2], rng.normal(size=(2, 16)) * 1e-7,
                                     rng.normal(size=(2, 16)) * 1e5, {1: "crack", 2: "notch"})
    m = write_manifest(ds, tmp_path / "d")
    back = load_manifest(m)
    assert back.class_names == {1: "crack", 2: "notch"}
    for r0, r1 in zip(ds.records, back.records):
        assert np.array_equal(r0.channel1, r1.channel1) and np.array_equal(r0.channel2, r1.channel2)
    write_manifest(back, tmp_path / "e")
    assert (tmp_path / "d/manifest.csv").read_bytes() == (tmp_path / "e/manifest.csv").read_bytes()


def test_set1_manifest_shape(tmp_path):
    m = write_manifest(synth.make_set(1, n=64), tmp_path)
    ds = load_manifest(m)
    assert len(ds) == 40 and len(ds.class_names) == 2


def test_manifest_errors(tmp_path):
    (tmp_path / "manifest.csv").write_text("record_id,class_id,path\n")
    with pytest.raises(DataError, match="no records"):
        load_manifest(tmp_path / "manifest.csv")
    (tmp_path / "r.csv").write_text("ch1,ch2\n" + "0,0\n" * 4095)
    (tmp_path / "manifest.csv").write_text("record_id,class_id,path\nbad_one,1,r.csv\n")
    with pytest.raises(DataError, match="bad_one"):
        load_manifest(tmp_path / "manifest.csv")
    with pytest.raises(DataError, match="not found"):
        load_manifest(tmp_path / "nope.csv")
