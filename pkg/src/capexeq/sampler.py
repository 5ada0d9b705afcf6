"""Training-data generation: random buildouts simulated through dispatch.

Each buildout coordinate is drawn independently and uniformly inside its
configured interval.  The random stream is split per row from the master
seed, so rows can be simulated on any number of workers (or re-simulated in
isolation) without changing a single byte of the resulting dataset.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dispatch
from .scenario import Buildout, Scenario


class DatasetError(ValueError):
    """A dataset file does not match the expected CSV schema."""


@dataclass
class Dataset:
    """Aligned (buildout -> per-technology profit) rows for surrogate training."""

    inputs: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DatasetError("inputs and targets must have the same number of rows")
        if self.inputs.shape[1] != len(self.feature_names):
            raise DatasetError("feature_names must match the input width")
        if self.targets.shape[1] != len(self.target_names):
            raise DatasetError("target_names must match the target width")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def target_column(self, name: str) -> np.ndarray:
        if name not in self.target_names:
            raise DatasetError(f"dataset has no target column '{name}'")
        return self.targets[:, self.target_names.index(name)]


def sample_buildouts(
    n: int,
    bounds: Sequence[tuple[float, float]],
    seed: int,
    pairs: Sequence[tuple[str, str]],
) -> list[Buildout]:
    """Draw ``n`` buildouts, one independent uniform draw per coordinate."""
    if n <= 0:
        raise ValueError("sample count must be > 0")
    for lo, hi in bounds:
        if lo > hi:
            raise ValueError(f"sampling bound [{lo}, {hi}] has lo > hi")
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    children = np.random.SeedSequence(seed).spawn(n)
    rows = [np.random.default_rng(child).uniform(lo, hi) for child in children]
    return [Buildout.from_array(pairs, row) for row in rows]


def _simulate_row(args: tuple[Scenario, Buildout, int]) -> tuple[int, list[float]]:
    scenario, buildout, i = args
    try:
        result = dispatch.simulate(scenario, buildout)
    except Exception as exc:  # surface which row broke
        raise RuntimeError(f"simulation failed on dataset row {i}: {exc}") from exc
    return i, [result.operational_profit[p] for p in scenario.pairs]


def generate_dataset(
    scenario: Scenario,
    buildouts: Sequence[Buildout],
    workers: int = 1,
) -> Dataset:
    """Simulate every buildout; row order and values are worker-count-invariant."""
    if len(buildouts) == 0:
        raise ValueError("generate_dataset needs at least one buildout")
    pairs = scenario.pairs
    inputs = np.array([b.as_array(pairs) for b in buildouts])
    jobs = [(scenario, b, i) for i, b in enumerate(buildouts)]
    targets = np.empty((len(buildouts), len(pairs)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, row in pool.map(_simulate_row, jobs, chunksize=64):
                targets[i] = row
    else:
        for job in jobs:
            i, row = _simulate_row(job)
            targets[i] = row
    return Dataset(
        inputs=inputs,
        targets=targets,
        feature_names=scenario.feature_names,
        target_names=scenario.target_names,
    )


def split_dataset(ds: Dataset, test_fraction: float = 0.25, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled train/test split (default 75/25)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(ds))
    n_test = max(1, int(round(len(ds) * test_fraction)))
    test_idx = order[:n_test]
    train_idx = order[n_test:]
    make = lambda idx: Dataset(
        ds.inputs[idx], ds.targets[idx], ds.feature_names, ds.target_names
    )
    return make(train_idx), make(test_idx)


def write_dataset(ds: Dataset, path: str | Path) -> None:
    """CSV with header ``k_<region>_<tech>...,profit_<region>_<tech>...``.

    UTF-8, '.' decimal separator, newline-terminated rows; floats are written
    with full round-trip precision.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + list(ds.target_names))
        for x, y in zip(ds.inputs, ds.targets):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def read_dataset(path: str | Path) -> Dataset:
    """Read a dataset written by :func:`write_dataset`; lossless round trip."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty dataset file") from None
        feature_names = tuple(h for h in header if h.startswith("k_"))
        target_names = tuple(h for h in header if h.startswith("profit_"))
        if not feature_names:
            raise DatasetError(f"{path}: header has no k_<region>_<tech> input columns")
        if not target_names:
            raise DatasetError(f"{path}: header has no profit_<region>_<tech> target columns")
        if len(feature_names) + len(target_names) != len(header):
            unknown = [h for h in header if not h.startswith(("k_", "profit_"))]
            raise DatasetError(f"{path}: unrecognized columns {unknown}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DatasetError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: dataset has a header but no rows")
    data = np.array(rows)
    return Dataset(
        inputs=data[:, : len(feature_names)],
        targets=data[:, len(feature_names) :],
        feature_names=feature_names,
        target_names=target_names,
    )


def expected_columns(scenario: Scenario) -> tuple[tuple[str, ...], tuple[str, ...]]:
    return scenario.feature_names, scenario.target_names


def check_schema(ds: Dataset, scenario: Scenario) -> None:
    """Raise :class:`DatasetError` naming any column that is missing or extra."""
    want_f, want_t = expected_columns(scenario)
    for name in want_f:
        if name not in ds.feature_names:
            raise DatasetError(f"dataset is missing input column '{name}'")
    for name in want_t:
        if name not in ds.target_names:
            raise DatasetError(f"dataset is missing target column '{name}'")
    extra = (set(ds.feature_names) - set(want_f)) | (set(ds.target_names) - set(want_t))
    if extra:
        raise DatasetError(f"dataset has columns unknown to the scenario: {sorted(extra)}")
