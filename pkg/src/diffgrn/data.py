"""Tabular regression data: CSV loading, seeded splitting and min-max scaling."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyFile, ParseError, RaggedRows, TooFewRows


@dataclass(frozen=True)
class Table:
    """Raw numeric table with the indices of its target columns."""

    values: np.ndarray
    target_columns: tuple[int, ...]
    header: tuple[str, ...] | None = None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def feature_columns(self) -> tuple[int, ...]:
        return tuple(c for c in range(self.values.shape[1]) if c not in self.target_columns)

    def take(self, rows) -> "Table":
        return Table(self.values[rows], self.target_columns, self.header)


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    lo: np.ndarray  # per-column minimum of the training rows (features then targets)
    hi: np.ndarray

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    @property
    def n_targets(self) -> int:
        return self.y.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def rows(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.x, self.y))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, target_columns: Sequence[int] | None = None) -> Table:
    """Read a numeric CSV; a first row with any non-numeric cell is taken as a header.

    ``target_columns`` are 0-based (negative indices allowed); default is
    the last column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    header = None
    if not all(_is_number(c.strip()) for c in rows[0][1]):
        header = tuple(c.strip() for c in rows[0][1])
        rows = rows[1:]
        if not rows:
            raise EmptyFile(f"{path}: header only")
    width = len(header) if header else len(rows[0][1])
    values = np.empty((len(rows), width))
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise RaggedRows(f"{path}: line {lineno} has {len(cells)} columns, expected {width}")
        for c, cell in enumerate(cells):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", lineno, c + 1) from None
    targets = (width - 1,) if target_columns is None else tuple(sorted({int(c) % width for c in target_columns}))
    if len(targets) >= width:
        raise ValueError("at least one feature column is required")
    return Table(values, targets, header)


def table_from_arrays(x, y) -> Table:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(x.shape[0], -1)
    values = np.hstack([x, y])
    return Table(values, tuple(range(x.shape[1], values.shape[1])))


def write_csv(path, table: Table) -> None:
    header = table.header or tuple(
        f"y{c}" if c in table.target_columns else f"x{c}" for c in range(table.values.shape[1])
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table.values:
            w.writerow([repr(float(v)) for v in row])


def split(table: Table, test_fraction: float = 0.25, seed: int = 0) -> tuple[Table, Table]:
    """Seeded permutation split; the test part has ``floor(n * test_fraction)`` rows."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = table.n_rows
    if n < 4:
        raise TooFewRows(f"need at least 4 rows to split, got {n}")
    n_test = int(np.floor(n * test_fraction))
    perm = np.random.default_rng(seed).permutation(n)
    return table.take(np.sort(perm[n_test:])), table.take(np.sort(perm[:n_test]))


def normalize(train: Table, test: Table | None = None) -> tuple[Dataset, Dataset | None]:
    """Min-max scale every column with statistics from ``train`` only.

    Constant columns map to 0; test values are clipped into [0, 1].
    """
    if train.n_rows == 0:
        raise ValueError("training table is empty")
    cols = list(train.feature_columns) + list(train.target_columns)
    lo = train.values[:, cols].min(axis=0)
    hi = train.values[:, cols].max(axis=0)
    n_feat = len(train.feature_columns)

    def scale(tab: Table, clip: bool) -> Dataset:
        v = tab.values[:, cols]
        span = hi - lo
        out = np.where(span > 0, (v - lo) / np.where(span > 0, span, 1.0), 0.0)
        if clip:
            out = np.clip(out, 0.0, 1.0)
        return Dataset(out[:, :n_feat], out[:, n_feat:], lo, hi)

    return scale(train, clip=False), (scale(test, clip=True) if test is not None else None)


def denormalize(values, lo, hi) -> np.ndarray:
    """Inverse of the min-max map for the given column statistics."""
    return np.asarray(values) * (np.asarray(hi) - np.asarray(lo)) + np.asarray(lo)


# --- synthetic tasks --------------------------------------------------------


def synthetic_mean(n_rows: int = 200, n_features: int = 5, seed: int = 0) -> Table:
    """Features uniform on [0, 1]; target is their mean."""
    x = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n_rows, n_features))
    return table_from_arrays(x, x.mean(axis=1))


def synthetic_housing(n_rows: int = 506, n_features: int = 13, seed: int = 0) -> Table:
    """Housing-shaped regression stand-in: skewed correlated features, nonlinear noisy target."""
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=(n_rows, 3))
    mix = rng.normal(size=(3, n_features))
    x = latent @ mix + 0.5 * rng.normal(size=(n_rows, n_features))
    x[:, ::3] = np.exp(0.5 * x[:, ::3])
    y = 22.0 + 4.0 * latent[:, 0] - 2.5 * np.tanh(latent[:, 1]) + 1.5 * latent[:, 2] ** 2 + rng.normal(scale=2.0, size=n_rows)
    return table_from_arrays(x, y)
