"""Amending a decoding model with composite columns for known hard errors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .decoder import RelayConfig
from .dynlab import derive_seed, run_trials
from .gf2core import xor_columns
from .lowweight import ErrorCombo
from .modelio import DecodingModel

log = logging.getLogger(__name__)

MIN_PRIOR = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class AddedColumn:
    checks: tuple[int, ...]
    observables: tuple[int, ...]
    prior: float
    source_id: int
    faults: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class AmendedModel:
    base: DecodingModel
    added: tuple[AddedColumn, ...]

    @cached_property
    def model(self) -> DecodingModel:
        """The base model with the added columns appended after the original ones."""
        if not self.added:
            return self.base
        b = self.base
        return DecodingModel(
            H=b.H.append_columns(a.checks for a in self.added),
            priors=np.concatenate([b.priors, [a.prior for a in self.added]]),
            L=b.L.append_columns(a.observables for a in self.added),
            n_groups=b.n_groups,
            name=b.name,
            basis=b.basis,
        )


def _composite(model: DecodingModel, faults, source_id: int, prior_value: Optional[float]) -> AddedColumn:
    faults = tuple(sorted(int(f) for f in faults))
    checks = tuple(np.flatnonzero(xor_columns(model.H, faults)).tolist())
    obs = tuple(np.flatnonzero(xor_columns(model.L, faults)).tolist())
    if prior_value is None:
        p = float(np.prod(model.priors[list(faults)]))
        p = min(max(p, MIN_PRIOR), 0.5)
    else:
        p = prior_value
    return AddedColumn(checks, obs, p, source_id, faults)


def amend_model(
    model: DecodingModel,
    combos: Sequence[ErrorCombo],
    subset_fraction: float,
    prior_value: Optional[float] = None,
    seed: int = 0,
    pairwise: bool = False,
) -> AmendedModel:
    """Append the syndromes of a random ``subset_fraction`` of ``combos``.

    ``round(fraction * len(combos))`` combos are drawn without replacement (a
    prefix of one seeded permutation, so subsets nest across fractions); each
    added column carries the XOR of its faults' observable columns.  The prior
    defaults to the product of the constituent priors.  With ``pairwise`` the
    distinct column pairs of each chosen combo's decompositions are added instead.
    """
    if not 0 <= subset_fraction <= 1:
        raise ValueError("subset_fraction must lie in [0, 1]")
    if prior_value is not None and not 0 < prior_value <= 0.5:
        raise ValueError("prior_value must lie in (0, 0.5]")
    n = len(combos)
    k = int(math.floor(subset_fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    # one permutation per seed, so larger fractions extend smaller ones
    chosen = sorted(rng.permutation(n)[:k].tolist())

    added = []
    if pairwise:
        seen = set()
        for i in chosen:
            for d in combos[i].provenance:
                for pair in (d.cols_a, d.cols_b):
                    if pair not in seen:
                        seen.add(pair)
                        added.append(_composite(model, pair, i, prior_value))
    else:
        added = [_composite(model, combos[i].fault_ids, i, prior_value) for i in chosen]

    existing = {tuple(model.H.column(j).tolist()) for j in range(model.n_faults)}
    collisions = sum(a.checks in existing for a in added)
    if collisions:
        log.info("%d added columns duplicate existing check-matrix columns", collisions)
    return AmendedModel(model, tuple(added))


@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    decoder: str
    mean_iterations: float
    logical_error_prob: float
    n_trials: int
    max_iterations: int
    n_added: int


def sweep_fraction(
    model: DecodingModel,
    combos: Sequence[ErrorCombo],
    fractions: Sequence[float],
    relay_cfg: RelayConfig,
    trials: int,
    base_seed: int,
    decoder_kind: str = "relay",
    prior_value: Optional[float] = None,
    workers: int = 1,
) -> list[SweepPoint]:
    """Decode the whole combo population against models amended with growing
    fractions of it.  Logical failures are judged with the amended observables."""
    for f in fractions:
        if not 0 <= f <= 1:
            raise ValueError("fractions must lie in [0, 1]")
    out = []
    amend_seed = derive_seed(base_seed, -1, 0)
    for f in fractions:
        amended = amend_model(model, combos, f, prior_value, seed=amend_seed)
        records = run_trials(amended.model, combos, relay_cfg, trials, base_seed, decoder_kind, workers=workers)
        its = np.array([r.iterations for r in records])
        errs = np.array([r.logical_error for r in records])
        out.append(SweepPoint(
            fraction=float(f),
            decoder=decoder_kind,
            mean_iterations=float(its.mean()) if len(its) else float("nan"),
            logical_error_prob=float(errs.mean()) if len(errs) else float("nan"),
            n_trials=len(records),
            max_iterations=int(its.max()) if len(its) else 0,
            n_added=len(amended.added),
        ))
    return out
