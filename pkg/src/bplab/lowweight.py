"""Shared-column statistics of check pairs and weight-four error construction.

A weight-four error is built from two check pairs ``p0 = (c1, c2)`` and
``p1 = (c3, c4)`` that each share ``n_shared`` (normally 8) fault columns: two
shared columns of ``p0`` plus two shared columns of ``p1``.  Hard errors are
selected by the canceled-check counts of each column pair and of the whole set.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .gf2core import ComboMetrics, canceled_checks, xor_columns
from .modelio import DecodingModel

Pair = tuple[int, int]


@dataclass(frozen=True, eq=False)
class PairStats:
    """``counts[a, b]`` is the number of columns nonzero at both ``checks[a]`` and
    ``checks[b]``; the diagonal is zeroed and carries no meaning."""

    checks: np.ndarray
    counts: np.ndarray
    group: Optional[int] = None

    def index(self, check: int) -> int:
        hit = np.flatnonzero(self.checks == check)
        if not len(hit):
            raise KeyError(f"check {check} is not in scope")
        return int(hit[0])

    def n_s(self, ci: int, cj: int) -> int:
        return int(self.counts[self.index(ci), self.index(cj)])

    def pairs(self) -> list[tuple[int, int, int]]:
        """All ``(c_i, c_j, n_s)`` with ``i < j`` in scope order."""
        iu, ju = np.triu_indices(len(self.checks), k=1)
        return [
            (int(self.checks[a]), int(self.checks[b]), int(self.counts[a, b]))
            for a, b in zip(iu, ju)
        ]


def shared_column_counts(model: DecodingModel, check_scope, group: Optional[int] = None) -> PairStats:
    scope = np.asarray(check_scope, dtype=np.int64).reshape(-1)
    if not len(scope):
        return PairStats(scope, np.zeros((0, 0), dtype=np.int64), group)
    sub = model.H.csr[scope].astype(np.int64)
    counts = (sub @ sub.T).toarray()
    np.fill_diagonal(counts, 0)
    return PairStats(scope, counts, group)


def shared_count_frequency(stats: PairStats, check: int) -> np.ndarray:
    """Number of peers of ``check`` at each value of ``n_s`` (index = n_s)."""
    a = stats.index(check)
    peers = np.delete(stats.counts[a], a)
    top = int(stats.counts.max()) if stats.counts.size else 0
    return np.bincount(peers, minlength=top + 1)


def max_shared_pairs(model: DecodingModel, group, n_shared: int = 8) -> list[Pair]:
    """Check pairs inside ``group`` sharing exactly ``n_shared`` columns.

    ``group`` is a group id or an explicit array of rows.
    """
    rows = model.check_groups[group] if np.isscalar(group) else np.asarray(group)
    stats = shared_column_counts(model, rows)
    return [(ci, cj) for ci, cj, ns in stats.pairs() if ns == n_shared]


def shared_columns(model: DecodingModel, pair: Pair) -> np.ndarray:
    a, b = pair
    return np.intersect1d(model.H.row(a), model.H.row(b))


@dataclass(frozen=True)
class Decomposition:
    """One way of reading a weight-four error as two column pairs of two check pairs."""

    p0: Pair
    p1: Pair
    cols_a: Pair
    cols_b: Pair
    nc_a: int
    nc_b: int

    @property
    def columns(self) -> tuple[int, int, int, int]:
        return self.cols_a + self.cols_b


@dataclass(frozen=True, eq=False)
class ErrorCombo:
    fault_ids: tuple[int, ...]
    syndrome: np.ndarray
    metrics: ComboMetrics
    provenance: tuple[Decomposition, ...] = ()
    parent: Optional[tuple[int, ...]] = None

    @property
    def weight(self) -> int:
        return len(self.fault_ids)

    @property
    def w(self) -> int:
        return self.metrics.w

    @property
    def n_c(self) -> int:
        return self.metrics.n_c

    @property
    def n_u(self) -> int:
        return self.metrics.n_u


def make_combo(model: DecodingModel, fault_ids: Iterable[int], **kw) -> ErrorCombo:
    ids = tuple(sorted(int(j) for j in fault_ids))
    return ErrorCombo(ids, xor_columns(model.H, ids), canceled_checks(model.H, ids), **kw)


class _Masks:
    """Columns as Python-int bitsets over rows, built on demand."""

    def __init__(self, model: DecodingModel):
        self.H = model.H
        self._cache: dict[int, int] = {}

    def __getitem__(self, j: int) -> int:
        m = self._cache.get(j)
        if m is None:
            m = 0
            for r in self.H.column(j):
                m |= 1 << int(r)
            self._cache[j] = m
        return m

    def n_c(self, cols: Sequence[int]) -> int:
        union = 0
        xor = 0
        for j in cols:
            union |= self[j]
            xor ^= self[j]
        return union.bit_count() - xor.bit_count()


def _norm(pair) -> Pair:
    a, b = (int(x) for x in pair)
    return (a, b) if a <= b else (b, a)


def _enumerate_raw(model: DecodingModel, anchor: Pair, all_pairs, n_shared: int, masks=None):
    """Map sorted fault tuple -> list of decompositions, for one anchor pair."""
    anchor = _norm(anchor)
    cols0 = shared_columns(model, anchor)
    if len(cols0) != n_shared:
        raise ValueError(f"anchor pair {anchor} shares {len(cols0)} columns, expected {n_shared}")
    masks = masks or _Masks(model)
    out: dict[tuple[int, ...], list[Decomposition]] = {}
    pairs_a = [(int(a), int(b)) for a, b in combinations(cols0, 2)]
    nc_a = {pa: masks.n_c(pa) for pa in pairs_a}
    for p1 in sorted({_norm(p) for p in all_pairs}):
        if p1 == anchor:
            continue
        cols1 = shared_columns(model, p1)
        for pb in combinations(cols1, 2):
            pb = (int(pb[0]), int(pb[1]))
            nc_b = masks.n_c(pb)
            for pa in pairs_a:
                key = tuple(sorted(set(pa + pb)))
                if len(key) < 4:
                    continue
                out.setdefault(key, []).append(Decomposition(anchor, p1, pa, pb, nc_a[pa], nc_b))
    return out


def _decomp_key(d: Decomposition):
    return (d.p0, d.p1, d.cols_a, d.cols_b)


def _finish(model: DecodingModel, raw: dict) -> list[ErrorCombo]:
    combos = []
    for key in sorted(raw):
        decomps = tuple(sorted(set(raw[key]), key=_decomp_key))
        combos.append(make_combo(model, key, provenance=decomps))
    return combos


def enumerate_weight4(model: DecodingModel, anchor_pair: Pair, all_pairs, n_shared: int = 8) -> list[ErrorCombo]:
    """All distinct weight-four errors built from two shared columns of
    ``anchor_pair`` and two shared columns of each other pair in ``all_pairs``.

    Output is sorted by fault ids; each combo keeps every decomposition that
    produced it.
    """
    return _finish(model, _enumerate_raw(model, anchor_pair, all_pairs, n_shared))


def _raw_worker(args):
    model, anchors, all_pairs, n_shared = args
    masks = _Masks(model)
    merged: dict = {}
    for a in anchors:
        for k, v in _enumerate_raw(model, a, all_pairs, n_shared, masks).items():
            merged.setdefault(k, []).extend(v)
    return merged


def enumerate_group(
    model: DecodingModel,
    group,
    anchors: str | Sequence[Pair] = "first",
    n_shared: int = 8,
    workers: int = 1,
) -> list[ErrorCombo]:
    """Weight-four errors of one check group.

    ``anchors="first"`` fixes the first maximal pair, ``"all"`` sweeps every
    maximal pair of the group as anchor; an explicit list is also accepted.
    """
    pairs = max_shared_pairs(model, group, n_shared)
    if not pairs:
        return []
    if anchors == "first":
        chosen = pairs[:1]
    elif anchors == "all":
        chosen = pairs
    else:
        chosen = [_norm(p) for p in anchors]
    if workers > 1 and len(chosen) > 1:
        chunks = [chosen[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_raw_worker, [(model, c, pairs, n_shared) for c in chunks if c]))
    else:
        parts = [_raw_worker((model, chosen, pairs, n_shared))]
    merged: dict = {}
    for part in parts:
        for k, v in part.items():
            merged.setdefault(k, []).extend(v)
    return _finish(model, merged)


@dataclass(frozen=True)
class FilterSpec:
    """Accepted canceled-check counts per column pair and for all four columns.

    ``alternatives`` are further specs OR-ed with this one.
    """

    pair_nc: frozenset = frozenset({2})
    total_nc: frozenset = frozenset({8})
    alternatives: tuple = ()

    def __post_init__(self):
        for name in ("pair_nc", "total_nc"):
            v = getattr(self, name)
            v = frozenset({v}) if isinstance(v, (int, np.integer)) else frozenset(int(x) for x in v)
            if any(x < 0 for x in v):
                raise ValueError(f"{name} values must be non-negative")
            object.__setattr__(self, name, v)

    @classmethod
    def relaxed(cls) -> "FilterSpec":
        """Default plus total n_c in {6, 7}, plus column pairs with n_c = 4."""
        return cls(alternatives=(cls(total_nc={6, 7}), cls(pair_nc={4})))

    def accepts(self, d: Decomposition, total_nc: int) -> bool:
        if d.nc_a in self.pair_nc and d.nc_b in self.pair_nc and total_nc in self.total_nc:
            return True
        return any(alt.accepts(d, total_nc) for alt in self.alternatives)


def filter_hard_errors(combos: Iterable[ErrorCombo], spec: FilterSpec = FilterSpec()) -> list[ErrorCombo]:
    """Keep combos with at least one decomposition meeting ``spec``; the kept
    combo's provenance is narrowed to the accepted decompositions."""
    kept: dict[tuple, ErrorCombo] = {}
    for c in combos:
        ok = tuple(d for d in c.provenance if spec.accepts(d, c.metrics.n_c))
        if ok and c.fault_ids not in kept:
            kept[c.fault_ids] = replace(c, provenance=ok)
    return [kept[k] for k in sorted(kept)]


def decomposition_stats(combos: Iterable[ErrorCombo]) -> tuple[int, int]:
    """``(distinct column pairs, distinct pair-of-pairs decompositions)`` over all
    provenance entries."""
    col_pairs = set()
    splits = set()
    for c in combos:
        for d in c.provenance:
            col_pairs.add(d.cols_a)
            col_pairs.add(d.cols_b)
            splits.add(frozenset((d.cols_a, d.cols_b)))
    return len(col_pairs), len(splits)


def nc_distribution(combos: Iterable[ErrorCombo]) -> dict[int, int]:
    out: dict[int, int] = {}
    for c in combos:
        out[c.n_c] = out.get(c.n_c, 0) + 1
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class StructureRow:
    check: int
    members: tuple[bool, ...]
    kind: str  # "pair0", "pair1", "cross" or "all"


def combo_structure(model: DecodingModel, combo: ErrorCombo) -> list[StructureRow]:
    """Canceled checks of a combo and which of its columns contain each one.

    Columns are ordered ``(s1, s2, s3, s4)`` from the first decomposition; rows
    come within-pair first, then cross-pair, then checks hit by all four.
    """
    cols = combo.provenance[0].columns if combo.provenance else combo.fault_ids
    sets = [set(model.H.column(j).tolist()) for j in cols]
    counts: dict[int, int] = {}
    for s in sets:
        for r in s:
            counts[r] = counts.get(r, 0) + 1
    rows = []
    for r, k in counts.items():
        if k % 2:
            continue
        members = tuple(r in s for s in sets)
        if k == len(cols):
            kind = "all"
        elif len(cols) == 4 and members == (True, True, False, False):
            kind = "pair0"
        elif len(cols) == 4 and members == (False, False, True, True):
            kind = "pair1"
        else:
            kind = "cross"
        rows.append(StructureRow(int(r), members, kind))
    rank = {"pair0": 0, "pair1": 1, "cross": 2, "all": 3}
    return sorted(rows, key=lambda row: (rank[row.kind], row.check))


def neighborhood_columns(model: DecodingModel, combo: ErrorCombo) -> np.ndarray:
    """Columns outside the combo touching at least one check of its columns."""
    rows = np.unique(np.concatenate([model.H.column(j) for j in combo.fault_ids]))
    if not len(rows):
        return np.zeros(0, dtype=np.int64)
    csr = model.H.csr
    cand = np.unique(np.concatenate([csr.indices[csr.indptr[r]:csr.indptr[r + 1]] for r in rows]))
    return np.setdiff1d(cand, combo.fault_ids).astype(np.int64)


def extend_weight5(model: DecodingModel, combo: ErrorCombo, limit: Optional[int] = None) -> list[ErrorCombo]:
    """Weight-five errors adding one neighbouring column, in column-index order."""
    if combo.weight != 4:
        raise ValueError("extend_weight5 needs a weight-four combo")
    cand = neighborhood_columns(model, combo)
    if limit is not None:
        cand = cand[:limit]
    return [
        make_combo(model, combo.fault_ids + (int(j),), provenance=combo.provenance, parent=combo.fault_ids)
        for j in cand
    ]
