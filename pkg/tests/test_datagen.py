import json

import numpy as np
import pytest

from layoutbench.datagen import (DatasetSpec, UnsupportedTaskError, build_dataset, derive_seed,
                                 export_dataset, generate_instance, load_dataset, manifest_path,
                                 split_counts)
from layoutbench.tasks import life_step, lu_verify, transpose


@pytest.mark.parametrize("task,size", [("transpose", 12), ("life", 4), ("lu", 3)])
def test_generate_instance_deterministic(task, size):
    a = generate_instance(task, size, 99)
    b = generate_instance(task, size, 99)
    assert a == b
    assert a.input.tobytes() == b.input.tobytes()
    assert generate_instance(task, size, 100) != a


def test_instance_targets_follow_oracles():
    for seed in range(20):
        t = generate_instance("transpose", 12, seed)
        np.testing.assert_array_equal(t.target, transpose(t.input))
        assert t.input.min() >= 0 and t.input.max() <= 99
        g = generate_instance("life", 4, seed)
        np.testing.assert_array_equal(g.target, life_step(g.input))
        x = generate_instance("lu", 3, seed)
        assert lu_verify(x.input, x.target)


def test_life_density_is_half():
    cells = np.concatenate([generate_instance("life", 8, s).input.ravel() for s in range(400)])
    # 25600 Bernoulli(0.5) draws: 5 sigma is about 0.016
    assert abs(cells.mean() - 0.5) < 0.016


def test_unsupported_task():
    with pytest.raises(UnsupportedTaskError):
        generate_instance("sudoku", 4, 0)
    with pytest.raises(UnsupportedTaskError):
        DatasetSpec("sudoku", {4: 6})
    with pytest.raises(ValueError):
        generate_instance("lu", 1, 0)


def test_id_is_function_of_task_size_seed_index():
    a = generate_instance("life", 5, 42, index=3, split="train")
    b = generate_instance("life", 5, 42, index=3, split="test")
    assert a.id == b.id
    assert generate_instance("life", 5, 42, index=4).id != a.id


def test_split_counts_rounding():
    assert split_counts(600) == (500, 100)
    assert split_counts(7) == (6, 1)
    assert split_counts(5) == (5, 0)


def test_five_to_one_split():
    ds = build_dataset(DatasetSpec("transpose", {12: 600}, master_seed=1))
    assert len(ds.train) == 500 and len(ds.test) == 100


def test_mixed_one_one_one():
    ds = build_dataset(DatasetSpec("transpose", {12: 120, 14: 120, 16: 120},
                                   mix_ratio=[1, 1, 1]))
    assert len(ds.train) == 300
    for split in (ds.train, ds.test):
        sizes = [x.size for x in split]
        assert sizes.count(12) == sizes.count(14) == sizes.count(16)
    assert [x.size for x in ds.train[:6]] == [12, 14, 16, 12, 14, 16]


def test_mixed_weights_redistribute():
    ds = build_dataset(DatasetSpec("life", {4: 60, 5: 60, 6: 60}, mix_ratio=[2, 1, 1]))
    sizes = [x.size for x in ds]
    assert (sizes.count(4), sizes.count(5), sizes.count(6)) == (90, 45, 45)


def test_no_mix_is_grouped_by_size():
    ds = build_dataset(DatasetSpec("life", {4: 12, 5: 12}, mix_ratio=[]))
    assert [x.size for x in ds.train] == [4] * 10 + [5] * 10


def test_split_disjoint_ids_and_seeds():
    ds = build_dataset(DatasetSpec("lu", {3: 60, 4: 60}))
    train, test = ds.train, ds.test
    assert not {x.id for x in train} & {x.id for x in test}
    assert not {x.seed for x in train} & {x.seed for x in test}
    assert len({x.id for x in ds}) == len(ds)


def test_life_test_side_is_held_out():
    # 4x4 boards collide often enough at this count to exercise the resampling
    ds = build_dataset(DatasetSpec("life", {4: 6000}))
    train_inputs = {x.input.tobytes() for x in ds.train}
    assert not any(x.input.tobytes() in train_inputs for x in ds.test)
    # the resample really happened for at least one test slot
    first_try = [derive_seed(0, "life", 4, "test", i) for i in range(len(ds.test))]
    assert [x.seed for x in ds.test] != first_try


def test_life_held_out_impossible_raises():
    with pytest.raises(ValueError):
        build_dataset(DatasetSpec("life", {1: 12}))


@pytest.mark.parametrize("bad", [
    dict(task="life", sizes={}),
    dict(task="life", sizes={4: 0}),
    dict(task="life", sizes={4: 6}, split_ratio=(5, 0)),
    dict(task="life", sizes={4: 6, 5: 6}, mix_ratio=[1]),
    dict(task="life", sizes={4: 6}, mix_ratio=[0]),
])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        DatasetSpec(**bad)


def test_export_round_trip_and_manifest(tmp_path):
    spec = DatasetSpec("lu", {3: 12, 4: 18}, master_seed=5)
    ds = build_dataset(spec)
    manifest = export_dataset(ds, tmp_path / "lu.jsonl")
    back = load_dataset(tmp_path / "lu.jsonl")
    assert back.instances == ds.instances
    assert back.spec == spec
    assert manifest["counts"] == {"train": len(ds.train), "test": len(ds.test)}
    assert manifest["counts_by_size"] == {"train": {"3": 10, "4": 15}, "test": {"3": 2, "4": 3}}
    assert manifest["master_seed"] == 5
    on_disk = json.loads(manifest_path(tmp_path / "lu.jsonl").read_text())
    assert on_disk == manifest
    assert len((tmp_path / "lu.jsonl").read_text().splitlines()) == len(ds)


def test_export_digest_is_function_of_spec(tmp_path):
    spec = DatasetSpec("transpose", {12: 12}, master_seed=9)
    m1 = export_dataset(build_dataset(spec), tmp_path / "a.jsonl")
    m2 = export_dataset(build_dataset(spec), tmp_path / "b.jsonl")
    assert m1["sha256"] == m2["sha256"]
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    m3 = export_dataset(build_dataset(DatasetSpec("transpose", {12: 12}, master_seed=10)),
                        tmp_path / "c.jsonl")
    assert m3["sha256"] != m1["sha256"]
