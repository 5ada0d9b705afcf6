import numpy as np
import pytest

from capexeq.dispatch import simulate
from capexeq.sampler import (
    Dataset,
    DatasetError,
    check_schema,
    generate_dataset,
    read_dataset,
    sample_buildouts,
    split_dataset,
    write_dataset,
)
from capexeq.scenario import Buildout

from helpers import mini_scenario, stylized_scenario


def test_sample_counts_and_bounds():
    s = stylized_scenario()
    buildouts = sample_buildouts(5000, s.sampling_bounds, seed=1, pairs=s.pairs)
    assert len(buildouts) == 5000
    for b in buildouts[:200] + buildouts[-200:]:
        for (lo, hi), pair in zip(s.sampling_bounds, s.pairs):
            assert lo <= b.capacity[pair] <= hi


def test_degenerate_interval():
    s = mini_scenario()
    bounds = [(5.0, 5.0)] * len(s.pairs)
    (b,) = sample_buildouts(1, bounds, seed=0, pairs=s.pairs)
    assert all(v == 5.0 for v in b.capacity.values())


def test_seed_determinism():
    s = mini_scenario()
    a = sample_buildouts(50, s.sampling_bounds, seed=9, pairs=s.pairs)
    b = sample_buildouts(50, s.sampling_bounds, seed=9, pairs=s.pairs)
    assert a == b
    c = sample_buildouts(50, s.sampling_bounds, seed=10, pairs=s.pairs)
    assert a != c


def test_invalid_inputs():
    s = mini_scenario()
    with pytest.raises(ValueError, match="count"):
        sample_buildouts(0, s.sampling_bounds, seed=0, pairs=s.pairs)
    with pytest.raises(ValueError, match="lo > hi"):
        sample_buildouts(1, [(2.0, 1.0)] * len(s.pairs), seed=0, pairs=s.pairs)
    with pytest.raises(ValueError, match="at least one buildout"):
        generate_dataset(s, [])


def test_known_target_row():
    s = stylized_scenario()
    rows = [
        Buildout({("main", "ST"): 300.0, ("main", "CT"): 0.0, ("main", "CCGT"): 0.0}),
        Buildout({("main", "ST"): 0.0, ("main", "CT"): 0.0, ("main", "CCGT"): 0.0}),
    ]
    ds = generate_dataset(s, rows)
    assert ds.feature_names == ("k_main_ST", "k_main_CT", "k_main_CCGT")
    assert ds.targets[0, 0] == pytest.approx(3_592_800.0)
    assert np.all(ds.targets[1] == 0.0)
    assert np.array_equal(ds.inputs[0], [300.0, 0.0, 0.0])


def test_targets_match_fresh_simulation():
    s = mini_scenario()
    buildouts = sample_buildouts(20, s.sampling_bounds, seed=4, pairs=s.pairs)
    ds = generate_dataset(s, buildouts)
    for i in (0, 7, 19):
        res = simulate(s, buildouts[i])
        expect = [res.operational_profit[p] for p in s.pairs]
        assert np.array_equal(ds.targets[i], expect)


def test_parallel_generation_is_byte_identical(tmp_path):
    s = mini_scenario()
    buildouts = sample_buildouts(60, s.sampling_bounds, seed=2, pairs=s.pairs)
    seq = generate_dataset(s, buildouts, workers=1)
    par = generate_dataset(s, buildouts, workers=3)
    p1, p2 = tmp_path / "seq.csv", tmp_path / "par.csv"
    write_dataset(seq, p1)
    write_dataset(par, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_write_read_roundtrip(tmp_path):
    s = mini_scenario()
    buildouts = sample_buildouts(25, s.sampling_bounds, seed=6, pairs=s.pairs)
    ds = generate_dataset(s, buildouts)
    path = tmp_path / "data.csv"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert back.feature_names == ds.feature_names
    assert back.target_names == ds.target_names
    assert np.array_equal(back.inputs, ds.inputs)
    assert np.array_equal(back.targets, ds.targets)


def test_schema_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DatasetError, match="empty"):
        read_dataset(empty)

    no_targets = tmp_path / "nt.csv"
    no_targets.write_text("k_main_A,k_main_B\n1.0,2.0\n")
    with pytest.raises(DatasetError, match="profit_"):
        read_dataset(no_targets)

    unknown = tmp_path / "unk.csv"
    unknown.write_text("k_main_A,profit_main_A,bogus\n1.0,2.0,3.0\n")
    with pytest.raises(DatasetError, match="bogus"):
        read_dataset(unknown)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("k_main_A,profit_main_A\n1.0\n")
    with pytest.raises(DatasetError, match="line 2"):
        read_dataset(ragged)

    header_only = tmp_path / "header.csv"
    header_only.write_text("k_main_A,profit_main_A\n")
    with pytest.raises(DatasetError, match="no rows"):
        read_dataset(header_only)


def test_check_schema_names_missing_column():
    s = mini_scenario()
    ds = Dataset(
        inputs=np.zeros((2, 2)),
        targets=np.zeros((2, 1)),
        feature_names=("k_main_A", "k_main_B"),
        target_names=("profit_main_A",),
    )
    with pytest.raises(DatasetError, match="profit_main_B"):
        check_schema(ds, s)


def test_split_dataset():
    s = mini_scenario()
    buildouts = sample_buildouts(40, s.sampling_bounds, seed=3, pairs=s.pairs)
    ds = generate_dataset(s, buildouts)
    train, test = split_dataset(ds, test_fraction=0.25, seed=5)
    assert len(train) == 30 and len(test) == 10
    again_train, again_test = split_dataset(ds, test_fraction=0.25, seed=5)
    assert np.array_equal(train.inputs, again_train.inputs)
    assert np.array_equal(test.targets, again_test.targets)
    # every original row lands in exactly one side
    combined = np.vstack([train.inputs, test.inputs])
    assert np.array_equal(np.sort(combined, axis=0), np.sort(ds.inputs, axis=0))
