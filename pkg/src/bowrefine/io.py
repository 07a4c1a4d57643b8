"""Readers and writers for dense CSV and Matrix Market files."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .core import BowMatrix, Matrix, as_array

FLOAT_FMT = "%.17g"


def write_dense_csv(path, values: np.ndarray, header: Sequence[str]) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ValueError(f"header has {len(header)} names for shape {values.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in values:
            writer.writerow([FLOAT_FMT % v for v in row])


def read_dense_csv(path):
    """Return ``(values, header)`` from a CSV written by :func:`write_dense_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [[float(v) for v in row] for row in reader if row]
    values = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return values, header


def write_bow_csv(path, bow: BowMatrix) -> None:
    write_dense_csv(path, bow.values, bow.feature_ids)


def read_bow_csv(path) -> BowMatrix:
    values, header = read_dense_csv(path)
    return BowMatrix(values, header)


def write_affinity_csv(path, A: Matrix) -> None:
    A = as_array(A)
    write_dense_csv(path, A, [f"im{i}" for i in range(A.shape[0])])


def read_affinity_csv(path) -> np.ndarray:
    values, _ = read_dense_csv(path)
    return values


def write_mtx(path, M: Matrix, comment: str = "") -> None:
    """Write a matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(M), comment=comment, precision=17)


def read_mtx(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def read_bow(path) -> BowMatrix:
    """Read a BowMatrix from ``.csv`` or ``.mtx`` according to the suffix."""
    path = Path(path)
    if path.suffix == ".mtx":
        return BowMatrix(read_mtx(path).toarray())
    return read_bow_csv(path)


def write_bow(path, bow: BowMatrix) -> None:
    path = Path(path)
    if path.suffix == ".mtx":
        write_mtx(path, bow.values)
    else:
        write_bow_csv(path, bow)
