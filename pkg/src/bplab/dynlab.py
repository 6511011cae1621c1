"""Repeated stochastic decoding of error combos and statistics of iteration counts."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .decoder import DecodeResult, RelayConfig, bp_osd_decode, logical_flip, relay_decode
from .gf2core import indicator
from .lowweight import ErrorCombo, extend_weight5, neighborhood_columns
from .modelio import DecodingModel

DECODERS = ("relay", "bp_osd")


class NoEstimateError(ValueError):
    """Every record is censored, so no rate can be estimated."""


@dataclass(frozen=True)
class TrialRecord:
    combo_id: int
    trial: int
    trial_seed: int
    iterations: int
    converged: bool
    logical_error: bool
    decoder: str = "relay"
    w: int = 0


def derive_seed(base_seed: int, combo_id: int, trial: int) -> int:
    """Stable 63-bit seed for one (combo, trial), independent of execution order."""
    h = hashlib.blake2b(digest_size=8)
    for v in (base_seed, combo_id, trial):
        h.update(int(v).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little") >> 1


def decode_once(
    model: DecodingModel,
    combo: ErrorCombo,
    cfg: RelayConfig,
    seed: int,
    decoder: str = "relay",
    record_trace: bool = False,
) -> DecodeResult:
    e_true = indicator(model.n_faults, combo.fault_ids)
    if decoder == "relay":
        res = relay_decode(model, combo.syndrome, cfg.replace(seed=seed), record_trace=record_trace)
    elif decoder == "bp_osd":
        res = bp_osd_decode(model, combo.syndrome, cfg.global_iteration_cap, cfg.min_sum_scale)
    else:
        raise ValueError(f"unknown decoder {decoder!r}; expected one of {DECODERS}")
    if res.estimate is not None:
        res.logical_flip = logical_flip(model, e_true, res.estimate)
    return res


def _trial_chunk(args) -> list[TrialRecord]:
    model, items, cfg, trials, base_seed, decoder = args
    out = []
    for cid, combo in items:
        for t in range(trials):
            seed = derive_seed(base_seed, cid, t)
            res = decode_once(model, combo, cfg, seed, decoder)
            # a decode that never reaches a syndrome-compatible answer counts as a failure
            failed = not res.converged or bool(res.logical_flip.any())
            out.append(TrialRecord(cid, t, seed, res.iterations, res.converged, failed, decoder, combo.w))
    return out


def run_trials(
    model: DecodingModel,
    combos: Sequence[ErrorCombo],
    relay_cfg: RelayConfig,
    trials_per_combo: int,
    base_seed: int,
    decoder: str = "relay",
    combo_ids: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> list[TrialRecord]:
    """Decode every combo ``trials_per_combo`` times.

    Trial ``t`` of combo ``i`` uses seed ``derive_seed(base_seed, i, t)``; records
    come back sorted by ``(combo_id, trial)`` whatever ``workers`` is.
    """
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}; expected one of {DECODERS}")
    if trials_per_combo < 0:
        raise ValueError("trials_per_combo must be non-negative")
    ids = list(range(len(combos))) if combo_ids is None else [int(i) for i in combo_ids]
    if len(ids) != len(combos):
        raise ValueError("combo_ids must match combos")
    items = list(zip(ids, combos))
    if not items or not trials_per_combo:
        return []
    if workers > 1 and len(items) > 1:
        chunks = [items[k::workers] for k in range(workers)]
        args = [(model, c, relay_cfg, trials_per_combo, base_seed, decoder) for c in chunks if c]
        with ProcessPoolExecutor(workers) as ex:
            records = [r for part in ex.map(_trial_chunk, args) for r in part]
    else:
        records = _trial_chunk((model, items, relay_cfg, trials_per_combo, base_seed, decoder))
    return sorted(records, key=lambda r: (r.combo_id, r.trial))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def density(self) -> np.ndarray:
        total = self.counts.sum()
        widths = np.diff(self.edges)
        if not total:
            return np.zeros(len(self.counts))
        return self.counts / (total * widths)


def iteration_histogram(
    records: Iterable[TrialRecord],
    bin_width: int,
    n_bins: Optional[int] = None,
    stratify: Optional[str | Callable] = None,
):
    """Counts in bins ``[k*bin_width, (k+1)*bin_width)``, the last bin closed.

    With ``n_bins`` the range is fixed and larger values land in the last bin.
    With ``stratify`` (a record attribute name or a key function) a dict of
    histograms on shared edges is returned, keyed by stratum.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be at least 1")
    records = list(records)
    values = np.array([r.iterations for r in records], dtype=np.int64)
    if n_bins is None:
        top = int(values.max()) if len(values) else 0
        n_bins = max(1, math.ceil(top / bin_width))
    edges = np.arange(n_bins + 1, dtype=np.int64) * bin_width

    def hist(v):
        idx = np.minimum(v // bin_width, n_bins - 1)
        return Histogram(edges, np.bincount(idx, minlength=n_bins)[:n_bins])

    if stratify is None:
        return hist(values)
    key = (lambda r: getattr(r, stratify)) if isinstance(stratify, str) else stratify
    keys = [key(r) for r in records]
    return {k: hist(values[[kk == k for kk in keys]]) for k in sorted(set(keys))}


@dataclass(frozen=True)
class SurvivalCurve:
    """``survival[k]`` is the fraction of records with more than ``n[k]`` iterations."""

    n: np.ndarray
    survival: np.ndarray

    def log_points(self) -> tuple[np.ndarray, np.ndarray]:
        keep = self.survival > 0
        return self.n[keep], self.survival[keep]


def survival_curve(records: Iterable[TrialRecord], bin_width: Optional[int] = None) -> SurvivalCurve:
    """Empirical ``1 - P(N <= n)``, at every observed count or on a bin grid."""
    values = np.sort(np.array([r.iterations for r in records], dtype=np.int64))
    if not len(values):
        raise ValueError("survival curve of an empty record set")
    if bin_width is None:
        grid = np.unique(np.concatenate([[0], values]))
    else:
        grid = np.arange(0, values[-1] + bin_width, bin_width)
    below = np.searchsorted(values, grid, side="right")
    return SurvivalCurve(grid, 1.0 - below / len(values))


def censored_exponential_mle(times, censored) -> tuple[float, float]:
    """Rate of an exponential with right-censoring: events / total exposure."""
    times = np.asarray(times, dtype=np.float64)
    censored = np.asarray(censored, dtype=bool)
    events = int((~censored).sum())
    if not events:
        raise NoEstimateError("all records are censored")
    exposure = float(times.sum())
    if exposure <= 0:
        raise NoEstimateError("zero total exposure")
    rate = events / exposure
    return rate, rate / math.sqrt(events)


def fit_exponential_rate(records: Iterable[TrialRecord], cap: int) -> tuple[float, float]:
    """Censored MLE of the per-iteration escape rate and its standard error.

    Non-converged records that hit ``cap`` are right-censored at ``cap``.
    """
    records = list(records)
    times = [min(r.iterations, cap) for r in records]
    censored = [(not r.converged) and r.iterations >= cap for r in records]
    return censored_exponential_mle(times, censored)


def mean_iterations(records: Iterable[TrialRecord]) -> dict[int, float]:
    by: dict[int, list[int]] = {}
    for r in records:
        by.setdefault(r.combo_id, []).append(r.iterations)
    return {k: float(np.mean(v)) for k, v in sorted(by.items())}


@dataclass
class Weight5Spread:
    base_mean: float
    fault_ids: list
    means: np.ndarray
    bin_edges: np.ndarray
    bin_counts: np.ndarray
    records: list = field(repr=False, default_factory=list)


def weight5_spread(
    model: DecodingModel,
    combo: ErrorCombo,
    relay_cfg: RelayConfig,
    trials: int,
    base_seed: int,
    limit: Optional[int] = None,
    bin_width: int = 1000,
    n_bins: int = 10,
    workers: int = 1,
) -> Weight5Spread:
    """Mean iterations of every weight-five extension of ``combo``, binned.

    Combo id 0 is the weight-four base; extensions are ids 1, 2, ...
    """
    ext = extend_weight5(model, combo, limit)
    records = run_trials(model, [combo] + ext, relay_cfg, trials, base_seed, workers=workers)
    means = mean_iterations(records)
    base = means.get(0, float("nan"))
    ext_means = np.array([means[i] for i in range(1, len(ext) + 1)]) if ext and trials else np.zeros(0)
    edges = np.arange(n_bins + 1) * bin_width
    idx = np.minimum((ext_means // bin_width).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)[:n_bins] if len(idx) else np.zeros(n_bins, dtype=np.int64)
    return Weight5Spread(base, [c.fault_ids for c in ext], ext_means, edges, counts, records)


def feature_table(
    model: DecodingModel,
    combos: Sequence[ErrorCombo],
    records: Iterable[TrialRecord],
    combo_ids: Optional[Sequence[int]] = None,
) -> list[dict]:
    """Per-combo structural features next to its mean iteration count."""
    means = mean_iterations(records)
    ids = range(len(combos)) if combo_ids is None else combo_ids
    rows = []
    for i, c in zip(ids, combos):
        rows.append(dict(
            combo_id=i,
            w=c.w,
            n_u=c.n_u,
            n_c=c.n_c,
            neighborhood=len(neighborhood_columns(model, c)),
            mean_iterations=means.get(i, float("nan")),
        ))
    return rows


@dataclass(frozen=True)
class TraceExport:
    fault_ids: np.ndarray
    matrix: np.ndarray
    leg_starts: tuple


def export_trace(result: DecodeResult, top_k: int = 121) -> TraceExport:
    """Faults ranked by how many iterations decided them as 1 (ties by index),
    truncated to ``top_k``; faults never decided 1 are dropped."""
    if result.trace is None:
        raise ValueError("decode result carries no trace; decode with record_trace=True")
    tr = result.trace
    bright = tr.brightness()
    order = np.lexsort((np.arange(len(bright)), -bright))
    order = order[bright[order] > 0][:top_k]
    mat = np.zeros((len(order), tr.n_iterations), dtype=np.uint8)
    for t, ones in enumerate(tr.ones):
        mat[np.isin(order, ones), t] = 1
    return TraceExport(order, mat, tuple(tr.leg_starts))
