"""Synthetic blobs, CSV ingestion and retain/forget/test splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import LabeledBatch, make_rng
from .errors import DomainError, ParseError

TEST_FRACTION = 0.2


@dataclass(frozen=True)
class BlobSpec:
    """Gaussian class clusters.

    When ``centers`` is omitted they are placed on a circle (first two
    dimensions) of radius ``radius``. ``conflict_overlap`` pulls every centre
    towards the common mean by that fraction, making classes overlap.
    """

    classes: int = 3
    dims: int = 2
    samples_per_class: int = 100
    centers: tuple | None = None
    spread: float | tuple = 1.0
    conflict_overlap: float = 0.0
    radius: float = 3.0

    def __post_init__(self):
        if self.classes < 2:
            raise DomainError("need at least 2 classes")
        if self.dims < 2:
            raise DomainError("need at least 2 dims")
        if self.samples_per_class < 2:
            raise DomainError("need at least 2 samples per class")
        if not 0.0 <= self.conflict_overlap < 1.0:
            raise DomainError("conflict_overlap must lie in [0, 1)")
        spreads = np.broadcast_to(np.asarray(self.spread, dtype=np.float64), (self.classes,))
        if np.any(spreads < 0):
            raise DomainError("spread must be non-negative")
        c = self.resolved_centers()
        if len({tuple(row) for row in c}) != self.classes:
            raise DomainError("class centres must be pairwise distinct")

    def resolved_centers(self) -> np.ndarray:
        if self.centers is not None:
            c = np.asarray(self.centers, dtype=np.float64)
            if c.shape != (self.classes, self.dims):
                raise DomainError(f"centers must have shape ({self.classes}, {self.dims})")
        else:
            angles = 2.0 * np.pi * np.arange(self.classes) / self.classes
            c = np.zeros((self.classes, self.dims))
            c[:, 0] = self.radius * np.cos(angles)
            c[:, 1] = self.radius * np.sin(angles)
        mean = c.mean(axis=0)
        return mean + (1.0 - self.conflict_overlap) * (c - mean)

    def spreads(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.spread, dtype=np.float64), (self.classes,)).copy()


def make_blobs(spec: BlobSpec, seed: int) -> tuple[LabeledBatch, LabeledBatch]:
    """Sample ``(train, test)``; each class contributes ``round(0.2 * n)`` test rows."""
    rng = make_rng(seed, stream=10)
    centers, spreads = spec.resolved_centers(), spec.spreads()
    n = spec.samples_per_class
    n_test = int(round(TEST_FRACTION * n))
    train_x, train_y, test_x, test_y = [], [], [], []
    for k in range(spec.classes):
        x = centers[k] + spreads[k] * rng.standard_normal((n, spec.dims))
        order = rng.permutation(n)
        test_x.append(x[order[:n_test]])
        train_x.append(x[order[n_test:]])
        test_y.append(np.full(n_test, k))
        train_y.append(np.full(n - n_test, k))
    return (LabeledBatch(np.concatenate(train_x), np.concatenate(train_y)),
            LabeledBatch(np.concatenate(test_x), np.concatenate(test_y)))


@dataclass(frozen=True)
class DatasetSplit:
    retain: LabeledBatch
    forget: LabeledBatch
    test: LabeledBatch
    retain_index: np.ndarray = field(repr=False)
    forget_index: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)

    @property
    def train(self) -> LabeledBatch:
        """The original training set ``D = D_r + D_f`` in its original order."""
        n = self.retain_index.size + self.forget_index.size
        x = np.empty((n, self.retain.inputs.shape[1]))
        y = np.empty(n, dtype=np.int64)
        x[self.retain_index], y[self.retain_index] = self.retain.inputs, self.retain.labels
        x[self.forget_index], y[self.forget_index] = self.forget.inputs, self.forget.labels
        return LabeledBatch(x, y)


def _make_split(train, test, forget_mask, provenance) -> DatasetSplit:
    forget_idx = np.flatnonzero(forget_mask)
    retain_idx = np.flatnonzero(~forget_mask)
    if forget_idx.size == 0:
        raise DomainError("forget set is empty")
    if retain_idx.size == 0:
        raise DomainError("retain set is empty")
    return DatasetSplit(train.subset(retain_idx), train.subset(forget_idx), test,
                        retain_idx, forget_idx, provenance)


def split_random_forget(train: LabeledBatch, fraction: float, seed: int,
                        test: LabeledBatch | None = None) -> DatasetSplit:
    """Forget a uniformly random subset of ``round(fraction * N)`` samples."""
    if not 0.0 < fraction < 1.0:
        raise DomainError("fraction must lie in (0, 1)")
    n = len(train)
    k = int(round(fraction * n))
    mask = np.zeros(n, dtype=bool)
    mask[make_rng(seed, stream=11).permutation(n)[:k]] = True
    prov = {"source": "random", "seed": int(seed), "forget_mode": "random",
            "forget_fraction": float(fraction)}
    return _make_split(train, _empty_like(train) if test is None else test, mask, prov)


def split_classwise_forget(train: LabeledBatch, classes: Sequence[int],
                           test: LabeledBatch | None = None) -> DatasetSplit:
    """Forget every sample whose label is in ``classes``."""
    present = set(np.unique(train.labels).tolist())
    classes = [int(c) for c in classes]
    unknown = [c for c in classes if c not in present]
    if unknown:
        raise DomainError(f"classes not present in data: {unknown}")
    mask = np.isin(train.labels, classes)
    prov = {"source": "classwise", "seed": None, "forget_mode": "classwise",
            "forget_classes": sorted(classes)}
    return _make_split(train, _empty_like(train) if test is None else test, mask, prov)


def _empty_like(batch: LabeledBatch) -> LabeledBatch:
    return LabeledBatch(np.zeros((0, batch.inputs.shape[1])), np.zeros(0, dtype=np.int64))


# CSV format: header f0,...,f{d-1},label

def write_csv(path, batch: LabeledBatch) -> None:
    d = batch.inputs.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(d)] + ["label"])
        for x, y in zip(batch.inputs, batch.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_csv(path) -> LabeledBatch:
    """Read a ``f0,...,f{d-1},label`` file, preserving row order."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        header = [h.strip() for h in header]
        d = len(header) - 1
        if d < 1 or header != [f"f{i}" for i in range(d)] + ["label"]:
            raise ParseError(f"bad header {header}", line=1)
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d + 1:
                raise ParseError(f"expected {d + 1} columns, got {len(row)}", line=lineno)
            try:
                xs.append([float(v) for v in row[:d]])
            except ValueError as exc:
                raise ParseError(f"bad feature value: {exc}", line=lineno) from None
            label = row[d].strip()
            try:
                ys.append(int(label))
            except ValueError:
                raise ParseError(f"label {label!r} is not an integer", line=lineno) from None
            if not np.all(np.isfinite(xs[-1])):
                raise ParseError("non-finite feature", line=lineno)
    if not xs:
        return LabeledBatch(np.zeros((0, d)), np.zeros(0, dtype=np.int64))
    return LabeledBatch(np.array(xs), np.array(ys, dtype=np.int64))
