"""Dense GF(2) elimination helpers on ``uint8`` arrays."""

from __future__ import annotations

import numpy as np


def row_reduce(A, col_order=None, max_pivots=None):
    """Reduced row echelon form over GF(2), scanning columns in ``col_order``.

    Returns ``(R, pivots, T)`` where ``R = T @ A mod 2`` is reduced, ``pivots`` lists
    the pivot columns in discovery order (pivot ``k`` sits in row ``k``) and ``T`` is
    the accumulated row transform.
    """
    R = np.array(A, dtype=np.uint8) & 1
    m, n = R.shape
    T = np.eye(m, dtype=np.uint8)
    order = range(n) if col_order is None else col_order
    limit = m if max_pivots is None else min(m, max_pivots)
    pivots: list[int] = []
    r = 0
    for c in order:
        if r >= limit:
            break
        col = R[r:, c]
        hits = np.flatnonzero(col)
        if not len(hits):
            continue
        p = r + hits[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
            T[[r, p]] = T[[p, r]]
        others = np.flatnonzero(R[:, c])
        others = others[others != r]
        if len(others):
            R[others] ^= R[r]
            T[others] ^= T[r]
        pivots.append(int(c))
        r += 1
    return R, pivots, T


def rank(A) -> int:
    A = np.asarray(A)
    if A.size == 0:
        return 0
    return len(row_reduce(A)[1])


def nullspace(A) -> np.ndarray:
    """Basis of ``{x : A x = 0}`` as rows of a ``(n - rank, n)`` array."""
    A = np.asarray(A, dtype=np.uint8)
    m, n = A.shape
    R, pivots, _ = row_reduce(A)
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for row, p in enumerate(pivots):
            basis[k, p] = R[row, f]
    return basis


def row_basis_complement(span, space) -> np.ndarray:
    """Rows of ``space`` that extend a basis of ``span`` to a basis of ``span + space``."""
    span = np.asarray(span, dtype=np.uint8)
    space = np.asarray(space, dtype=np.uint8)
    stacked = np.vstack([span, space])
    # eliminate on the transpose: pivot columns of stacked.T pick independent rows
    _, pivots, _ = row_reduce(stacked.T)
    picked = [p - len(span) for p in pivots if p >= len(span)]
    return space[picked]
