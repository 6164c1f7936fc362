"""Synthetic tasks and CSV I/O."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import UsageError


class ParseError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


@dataclass(eq=False)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(f"{self.inputs.shape[0]} input rows vs {self.targets.shape[0]} target rows")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite values")

    def __len__(self):
        return self.inputs.shape[0]

    def equals(self, other: "Dataset") -> bool:
        return np.array_equal(self.inputs, other.inputs) and np.array_equal(self.targets, other.targets)


def gen_xor(signed: bool = False) -> Dataset:
    """XOR truth table; ``signed`` maps targets to {-1, +1}."""
    inputs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    targets = np.array([0.0, 1.0, 1.0, 0.0])
    if signed:
        targets = 2.0 * targets - 1.0
    return Dataset(inputs, targets, "xor")


def gen_two_moons(n: int = 200, noise: float = 0.1, seed: int = 0, signed: bool = False) -> Dataset:
    """Two interleaved half circles, ``n/2`` points each, label 0 on the upper arc."""
    if n < 2 or n % 2:
        raise UsageError(f"two-moons needs an even n >= 2, got {n}")
    if noise < 0:
        raise UsageError(f"noise must be >= 0, got {noise}")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.stack([np.cos(t), np.sin(t)], axis=1)
    lower = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    inputs = np.concatenate([upper, lower])
    if noise > 0:
        inputs = inputs + np.random.default_rng(seed).normal(0.0, noise, size=inputs.shape)
    labels = np.concatenate([np.zeros(half), np.ones(half)])
    if signed:
        labels = 2.0 * labels - 1.0
    return Dataset(inputs, labels, "two_moons")


GENERATORS = {"xor": gen_xor, "two_moons": gen_two_moons}


def save_csv(dataset: Dataset, path) -> None:
    d, k = dataset.inputs.shape[1], dataset.targets.shape[1]
    header = [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in np.concatenate([dataset.inputs, dataset.targets], axis=1):
            writer.writerow([format(v, ".17g") for v in row])


def load_csv(path) -> Dataset:
    """Read ``x0..x{d-1},y0..y{k-1}`` columns. Data rows are numbered from 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file: missing header", 0) from None
        header = [h.strip() for h in header]
        xs = [h for h in header if h.startswith("x")]
        ys = [h for h in header if h.startswith("y")]
        if (header != xs + ys or xs != [f"x{i}" for i in range(len(xs))]
                or ys != [f"y{i}" for i in range(len(ys))] or not xs or not ys):
            raise ParseError(f"bad header {header!r}; expected x0..x{{d-1}},y0..y{{k-1}}", 0)
        rows = []
        for rownum, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ParseError(f"row {rownum}: expected {len(header)} columns, got {len(cells)}", rownum)
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ParseError(f"row {rownum}: non-numeric cell in {cells!r}", rownum) from None
    if not rows:
        raise ParseError("no data rows", 0)
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0, 0]) + 1
        raise ParseError(f"row {bad}: non-finite value", bad)
    return Dataset(arr[:, : len(xs)], arr[:, len(xs):], Path(path).stem)
