"""Column-sparse binary matrices and the syndrome algebra of fault-column sets.

Syndromes are plain ``uint8`` numpy vectors holding 0/1 per check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse


@dataclass(frozen=True, eq=False)
class SparseBitMatrix:
    """Binary matrix over GF(2) stored column by column (CSC layout).

    ``indices[indptr[j]:indptr[j+1]]`` are the strictly increasing row indices
    of the nonzero entries of column ``j``.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if indptr.shape != (self.n_cols + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("malformed column pointer array")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("column pointers must be non-decreasing")
        if len(indices) and (indices.min() < 0 or indices.max() >= self.n_rows):
            raise ValueError("row index out of range")
        # strictly increasing inside each column
        if len(indices) > 1:
            starts_column = np.zeros(len(indices), dtype=bool)
            starts_column[indptr[:-1][indptr[:-1] < len(indices)]] = True
            if np.any(np.diff(indices)[~starts_column[1:]] <= 0):
                raise ValueError("row indices within a column must be strictly increasing")
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_columns(cls, columns: Iterable[Iterable[int]], n_rows: int) -> "SparseBitMatrix":
        """Build from per-column row lists; rows are sorted, duplicates rejected."""
        indptr = [0]
        indices: list[int] = []
        for col in columns:
            rows = sorted(int(r) for r in col)
            if len(set(rows)) != len(rows):
                raise ValueError("duplicate row index inside a column")
            indices.extend(rows)
            indptr.append(len(indices))
        return cls(n_rows, len(indptr) - 1, np.array(indptr), np.array(indices, dtype=np.int64))

    @classmethod
    def from_dense(cls, dense) -> "SparseBitMatrix":
        a = np.asarray(dense) % 2
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        csc = sparse.csc_matrix(a.astype(np.uint8))
        csc.sort_indices()
        return cls(a.shape[0], a.shape[1], csc.indptr, csc.indices)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def column(self, j: int) -> np.ndarray:
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    @property
    def columns(self) -> list[np.ndarray]:
        return [self.column(j) for j in range(self.n_cols)]

    def column_weights(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row_weights(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n_rows)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        cols = np.repeat(np.arange(self.n_cols), self.column_weights())
        out[self.indices, cols] = 1
        return out

    @cached_property
    def csc(self) -> sparse.csc_matrix:
        data = np.ones(self.nnz, dtype=np.uint8)
        return sparse.csc_matrix((data, self.indices, self.indptr), shape=self.shape)

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        """Row-sparse view, built once on first use."""
        m = self.csc.tocsr()
        m.sort_indices()
        return m

    def row(self, i: int) -> np.ndarray:
        m = self.csr
        return m.indices[m.indptr[i]:m.indptr[i + 1]]

    def append_columns(self, columns: Iterable[Iterable[int]]) -> "SparseBitMatrix":
        extra = SparseBitMatrix.from_columns(columns, self.n_rows)
        indptr = np.concatenate([self.indptr, self.indptr[-1] + extra.indptr[1:]])
        indices = np.concatenate([self.indices, extra.indices])
        return SparseBitMatrix(self.n_rows, self.n_cols + extra.n_cols, indptr, indices)

    def __eq__(self, other):
        if not isinstance(other, SparseBitMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseBitMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


@dataclass(frozen=True)
class ComboMetrics:
    """Syndrome weight ``w``, unique checks ``n_u`` and canceled checks ``n_c``."""

    w: int
    n_u: int
    n_c: int

    def __post_init__(self):
        if self.n_c != self.n_u - self.w or self.n_c < 0:
            raise ValueError(f"inconsistent metrics {self}")


def _check_indices(H: SparseBitMatrix, idx: Sequence[int]) -> np.ndarray:
    idx = np.asarray(list(idx), dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("column indices must be a flat list")
    if len(idx) and (idx.min() < 0 or idx.max() >= H.n_cols):
        raise IndexError(f"column index out of range for {H.n_cols} columns")
    if len(np.unique(idx)) != len(idx):
        raise ValueError("column indices must be distinct")
    return idx


def _row_incidence(H: SparseBitMatrix, idx: Sequence[int]) -> np.ndarray:
    idx = _check_indices(H, idx)
    if not len(idx):
        return np.zeros(H.n_rows, dtype=np.int64)
    rows = np.concatenate([H.column(int(j)) for j in idx])
    return np.bincount(rows, minlength=H.n_rows)


def xor_columns(H: SparseBitMatrix, idx: Sequence[int]) -> np.ndarray:
    """Mod-2 sum of the distinct columns ``idx`` of ``H``."""
    return (_row_incidence(H, idx) & 1).astype(np.uint8)


def hamming_weight(s) -> int:
    return int(np.count_nonzero(np.asarray(s)))


def unique_checks(H: SparseBitMatrix, idx: Sequence[int]) -> int:
    """Number of rows touched by at least one of the listed columns."""
    return int(np.count_nonzero(_row_incidence(H, idx)))


def canceled_checks(H: SparseBitMatrix, idx: Sequence[int]) -> ComboMetrics:
    counts = _row_incidence(H, idx)
    n_u = int(np.count_nonzero(counts))
    w = int(np.count_nonzero(counts & 1))
    return ComboMetrics(w=w, n_u=n_u, n_c=n_u - w)


def mat_vec_mod2(H: SparseBitMatrix, e) -> np.ndarray:
    e = np.asarray(e)
    if e.shape != (H.n_cols,):
        raise ValueError(f"fault vector has shape {e.shape}, expected ({H.n_cols},)")
    return (H.csr @ (e.astype(np.int64) & 1) & 1).astype(np.uint8)


def indicator(n: int, idx: Iterable[int]) -> np.ndarray:
    v = np.zeros(n, dtype=np.uint8)
    v[list(idx)] = 1
    return v
