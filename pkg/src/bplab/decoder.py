"""Min-sum belief propagation with per-fault memory, Relay-BP, and OSD-0.

Message schedule is flooding.  With memory strengths ``gamma`` the prior entering
each iteration is ``(1 - gamma) * llr0 + gamma * M`` where ``M`` is the previous
posterior, so ``gamma = 0`` is plain min-sum and negative ``gamma`` pushes the
prior away from the current belief.  A relay leg is a bounded run of this
iteration, warm-started from the posteriors left by the previous leg.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .gf2core import mat_vec_mod2
from .modelio import DecodingModel

# magnitude sent by a check with no other neighbours
MAX_MESSAGE = 1000.0


class InconsistentSyndromeError(ValueError):
    """The syndrome is not in the column space of the check matrix."""


@dataclass
class IterationTrace:
    """Hard decisions per executed iteration, stored sparsely.

    ``ones[t]`` holds the fault indices decided as 1 after iteration ``t``;
    ``leg_starts`` are iteration indices where each relay leg begins.
    """

    n_faults: int
    ones: list = field(default_factory=list)
    leg_starts: list = field(default_factory=list)

    @property
    def n_iterations(self) -> int:
        return len(self.ones)

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.n_faults, self.n_iterations), dtype=np.uint8)
        for t, idx in enumerate(self.ones):
            out[idx, t] = 1
        return out

    def brightness(self) -> np.ndarray:
        if not self.ones:
            return np.zeros(self.n_faults, dtype=np.int64)
        return np.bincount(np.concatenate(self.ones).astype(np.int64), minlength=self.n_faults)


@dataclass
class DecodeResult:
    estimate: Optional[np.ndarray]
    converged: bool
    iterations: int
    legs: int = 1
    logical_flip: Optional[np.ndarray] = None
    trace: Optional[IterationTrace] = None
    osd_used: bool = False


@dataclass(frozen=True)
class RelayConfig:
    """Relay-BP parameters.  ``max_legs`` counts the warm-up leg."""

    max_legs: int = 200
    iters_per_leg: int = 25
    warmup_iters: Optional[int] = None
    gamma_min: float = -0.24
    gamma_max: float = 0.66
    min_sum_scale: float = 0.9
    stop_on_first_valid: bool = True
    global_iteration_cap: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.warmup_iters is None:
            object.__setattr__(self, "warmup_iters", self.iters_per_leg)
        if self.global_iteration_cap is None:
            object.__setattr__(self, "global_iteration_cap", self.budget)
        if self.gamma_min > self.gamma_max:
            raise ValueError("gamma_min must not exceed gamma_max")
        if self.max_legs < 1 or self.iters_per_leg < 0 or self.warmup_iters < 0:
            raise ValueError("leg counts must be positive and iteration counts non-negative")
        if not 0 < self.min_sum_scale <= 1:
            raise ValueError("min_sum_scale must lie in (0, 1]")
        if not 0 <= self.global_iteration_cap <= self.max_legs * self.iters_per_leg + self.warmup_iters:
            raise ValueError("global_iteration_cap exceeds what the legs can execute")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def budget(self) -> int:
        return self.warmup_iters + (self.max_legs - 1) * self.iters_per_leg

    def replace(self, **kw) -> "RelayConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "iters_per_leg" in kw and "warmup_iters" not in kw:
            d["warmup_iters"] = None
        if {"iters_per_leg", "max_legs", "warmup_iters"} & kw.keys() and "global_iteration_cap" not in kw:
            d["global_iteration_cap"] = None
        d.update(kw)
        return RelayConfig(**d)


class _Tanner:
    """Edge arrays of the Tanner graph, edges sorted by check."""

    def __init__(self, model: DecodingModel):
        csr = model.H.csr
        self.n_checks, self.n_vars = model.H.shape
        deg = np.diff(csr.indptr)
        self.edge_var = csr.indices.astype(np.int64)
        self.edge_check = np.repeat(np.arange(self.n_checks), deg)
        self.active = deg > 0
        self.starts = csr.indptr[:-1][self.active]
        self.csr = csr


def _tanner(model: DecodingModel) -> _Tanner:
    # models are immutable, so the graph is cached on the instance
    t = model.__dict__.get("_tanner")
    if t is None:
        t = _Tanner(model)
        model.__dict__["_tanner"] = t
    return t


def _check_to_var(g: _Tanner, mu: np.ndarray, syndrome: np.ndarray, scale: float) -> np.ndarray:
    if not len(mu):
        return mu.copy()
    a = np.abs(mu)
    neg = (mu < 0).astype(np.uint8)
    ec = g.edge_check
    parity = np.zeros(g.n_checks, dtype=np.uint8)
    parity[g.active] = np.bitwise_xor.reduceat(neg, g.starts)
    parity ^= syndrome
    min1 = np.full(g.n_checks, np.inf)
    min1[g.active] = np.minimum.reduceat(a, g.starts)
    is_min = a == min1[ec]
    n_min = np.zeros(g.n_checks, dtype=np.int64)
    n_min[g.active] = np.add.reduceat(is_min.astype(np.int64), g.starts)
    min2 = np.full(g.n_checks, np.inf)
    min2[g.active] = np.minimum.reduceat(np.where(is_min, np.inf, a), g.starts)
    min2 = np.minimum(min2, MAX_MESSAGE)
    mag = np.where(is_min & (n_min[ec] == 1), min2[ec], min1[ec])
    sign = 1.0 - 2.0 * (parity[ec] ^ neg)
    return scale * sign * mag


def _syndrome_ok(g: _Tanner, hard: np.ndarray, syndrome: np.ndarray) -> bool:
    return np.array_equal((g.csr @ hard) & 1, syndrome)


def _validate(model: DecodingModel, syndrome) -> np.ndarray:
    s = np.asarray(syndrome)
    if s.shape != (model.n_checks,):
        raise ValueError(f"syndrome has shape {s.shape}, expected ({model.n_checks},)")
    return (s.astype(np.uint8) & 1)


def bp_min_sum(
    model: DecodingModel,
    syndrome,
    n_iters: int,
    memory_strengths=None,
    initial_posteriors=None,
    scale: float = 0.9,
    trace: Optional[IterationTrace] = None,
) -> tuple[DecodeResult, np.ndarray]:
    """Run up to ``n_iters`` flooding min-sum iterations.

    Returns the result and the final posterior LLRs.  Iteration stops as soon as
    the hard decision (bit is 1 iff posterior < 0) reproduces the syndrome; the
    all-zero estimate is tested before the first iteration.
    """
    s = _validate(model, syndrome)
    n = model.n_faults
    if memory_strengths is None:
        gamma = np.zeros(n)
    else:
        gamma = np.asarray(memory_strengths, dtype=np.float64)
        if gamma.shape != (n,):
            raise ValueError(f"memory_strengths has shape {gamma.shape}, expected ({n},)")
    g = _tanner(model)
    lam0 = model.llrs
    if initial_posteriors is None:
        lam = lam0.copy()
    else:
        prev = np.asarray(initial_posteriors, dtype=np.float64)
        if prev.shape != (n,):
            raise ValueError(f"initial_posteriors has shape {prev.shape}, expected ({n},)")
        lam = (1.0 - gamma) * lam0 + gamma * prev

    if not s.any():
        return DecodeResult(np.zeros(n, dtype=np.uint8), True, 0, trace=trace), lam

    ev = g.edge_var
    mu = lam[ev]
    post = lam
    hard = np.zeros(n, dtype=np.uint8)
    for it in range(1, n_iters + 1):
        c2v = _check_to_var(g, mu, s, scale)
        total = np.bincount(ev, weights=c2v, minlength=n)
        post = lam + total
        hard = (post < 0).astype(np.uint8)
        if trace is not None:
            trace.ones.append(np.flatnonzero(hard).astype(np.int32))
        if _syndrome_ok(g, hard, s):
            return DecodeResult(hard, True, it, trace=trace), post
        lam = (1.0 - gamma) * lam0 + gamma * post
        mu = lam[ev] + total[ev] - c2v
    return DecodeResult(hard, False, n_iters, trace=trace), post


def leg_strengths(cfg: RelayConfig, leg: int, n: int) -> np.ndarray:
    """Memory strengths of relay leg ``leg``; leg 0 is the zero-memory warm-up."""
    if leg == 0:
        return np.zeros(n)
    rng = np.random.default_rng([cfg.seed, leg])
    return rng.uniform(cfg.gamma_min, cfg.gamma_max, size=n)


def _solution_weight(model: DecodingModel, e: np.ndarray) -> float:
    return float(model.llrs[e.astype(bool)].sum())


def relay_decode(model: DecodingModel, syndrome, cfg: RelayConfig, record_trace: bool = False) -> DecodeResult:
    """Relay-BP: a zero-memory warm-up leg followed by legs with fresh random
    memory strengths, each warm-started from the previous leg's posteriors."""
    s = _validate(model, syndrome)
    n = model.n_faults
    trace = IterationTrace(n) if record_trace else None
    used = 0
    post = None
    best = None
    legs = 0
    for leg in range(cfg.max_legs):
        length = cfg.warmup_iters if leg == 0 else cfg.iters_per_leg
        length = min(length, cfg.global_iteration_cap - used)
        if length <= 0 and leg > 0:
            break
        if trace is not None:
            trace.leg_starts.append(used)
        res, post = bp_min_sum(
            model, s, length, leg_strengths(cfg, leg, n), post, cfg.min_sum_scale, trace
        )
        used += res.iterations
        legs = leg + 1
        if res.converged:
            if cfg.stop_on_first_valid:
                return DecodeResult(res.estimate, True, used, legs, trace=trace)
            w = _solution_weight(model, res.estimate)
            if best is None or w < best[0]:
                best = (w, res.estimate)
            if res.iterations == 0:
                break
    if best is not None:
        return DecodeResult(best[1], True, used, legs, trace=trace)
    return DecodeResult(res.estimate, False, used, legs, trace=trace)


def osd0(model: DecodingModel, syndrome, soft_outputs) -> DecodeResult:
    """Order-0 ordered statistics decoding.

    Columns are ranked by ascending posterior LLR (likeliest errors first, stable
    on ties), an information set is picked greedily by GF(2) elimination, and the
    estimate supported on it is solved exactly.
    """
    s = _validate(model, syndrome)
    soft = np.asarray(soft_outputs, dtype=np.float64)
    if soft.shape != (model.n_faults,):
        raise ValueError(f"soft_outputs has shape {soft.shape}, expected ({model.n_faults},)")
    n = model.n_faults
    if not s.any():
        return DecodeResult(np.zeros(n, dtype=np.uint8), True, 0, osd_used=True)
    order = np.argsort(soft, kind="stable")
    aug = np.hstack([model.H.to_dense(), s[:, None]])
    R, pivots, _ = linalg.row_reduce(aug, col_order=order)
    r = len(pivots)
    if R[r:, n].any():
        raise InconsistentSyndromeError("syndrome is outside the column space of H")
    est = np.zeros(n, dtype=np.uint8)
    est[pivots] = R[:r, n]
    return DecodeResult(est, True, 0, osd_used=True)


def bp_osd_decode(model: DecodingModel, syndrome, max_iters: int = 5000, scale: float = 0.9) -> DecodeResult:
    """Plain min-sum BP; OSD-0 on its posteriors when BP does not converge."""
    res, post = bp_min_sum(model, syndrome, max_iters, scale=scale)
    if res.converged:
        return res
    osd = osd0(model, syndrome, post)
    osd.iterations = res.iterations
    return osd


def logical_flip(model: DecodingModel, e_true, estimate) -> np.ndarray:
    e_true = np.asarray(e_true)
    estimate = np.asarray(estimate)
    if e_true.shape != (model.n_faults,) or estimate.shape != (model.n_faults,):
        raise ValueError("fault vectors must have one entry per fault")
    return mat_vec_mod2(model.L, (e_true.astype(np.uint8) ^ estimate.astype(np.uint8)) & 1)
