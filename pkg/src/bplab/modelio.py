"""Decoding models: the check matrix, fault priors, logical observables and cycle groups.

On-disk format (UTF-8, line oriented)::

    DECODING_MODEL v1
    checks <R> faults <C> observables <K> groups <G>
    group_size <R/G>
    col <j> prior <p> checks <i1 i2 ...> obs <k1 k2 ...>
    ...

Lines starting with ``#`` are comments.  A ``# meta name=<name> basis=<basis>``
comment, when present, carries the model name and error basis.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .gf2core import SparseBitMatrix

MAGIC = "DECODING_MODEL v1"
BASES = ("X", "Z", "generic")
DEFAULT_PRIOR = 0.001


class ModelFormatError(ValueError):
    """A model file line could not be parsed."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class ModelValidationError(ValueError):
    """A model violates one of its structural invariants."""


@dataclass(frozen=True)
class ModelMeta:
    """Descriptive metadata.

    ``n_cycles`` equals the number of check groups.  For the gross-code idle
    cycle the circuit distance is at most 10, so weight-4 errors sit at the
    correctable radius floor((10 - 1) / 2); neither number is computed here.
    """

    name: str = ""
    basis: str = "generic"
    n_cycles: int = 1


@dataclass(frozen=True, eq=False)
class DecodingModel:
    H: SparseBitMatrix
    priors: np.ndarray
    L: SparseBitMatrix
    n_groups: int = 1
    name: str = ""
    basis: str = "generic"

    def __post_init__(self):
        priors = np.array(self.priors, dtype=np.float64)
        priors.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        self.validate()

    def validate(self) -> None:
        H, L = self.H, self.L
        if not (H.n_cols == L.n_cols == len(self.priors)):
            raise ModelValidationError(
                "column counts differ: "
                f"H has {H.n_cols}, L has {L.n_cols}, priors has {len(self.priors)}"
            )
        if self.priors.ndim != 1 or np.any(~((self.priors > 0) & (self.priors <= 0.5))):
            raise ModelValidationError("every prior must lie in (0, 0.5]")
        if self.n_groups < 1 or H.n_rows % self.n_groups:
            raise ModelValidationError(
                f"check groups must partition {H.n_rows} rows into {self.n_groups} equal groups"
            )
        if self.basis not in BASES:
            raise ModelValidationError(f"basis must be one of {BASES}")

    @property
    def n_checks(self) -> int:
        return self.H.n_rows

    @property
    def n_faults(self) -> int:
        return self.H.n_cols

    @property
    def n_observables(self) -> int:
        return self.L.n_rows

    @property
    def group_size(self) -> int:
        return self.H.n_rows // self.n_groups

    @property
    def check_groups(self) -> list[np.ndarray]:
        g = self.group_size
        return [np.arange(k * g, (k + 1) * g) for k in range(self.n_groups)]

    @property
    def meta(self) -> ModelMeta:
        return ModelMeta(self.name, self.basis, self.n_groups)

    @cached_property
    def llrs(self) -> np.ndarray:
        return np.log((1.0 - self.priors) / self.priors)

    def __eq__(self, other):
        if not isinstance(other, DecodingModel):
            return NotImplemented
        return (
            self.H == other.H
            and self.L == other.L
            and np.array_equal(self.priors, other.priors)
            and self.n_groups == other.n_groups
            and self.name == other.name
            and self.basis == other.basis
        )

    __hash__ = None


def _ints(tokens, lineno, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ModelFormatError(lineno, f"non-integer {what} index") from None


def parse_model(text: str, name: str = "") -> DecodingModel:
    lines = [(n, ln.strip()) for n, ln in enumerate(text.splitlines(), start=1)]
    meta = {}
    body = []
    for n, ln in lines:
        if not ln:
            continue
        if ln.startswith("#"):
            parts = ln[1:].split()
            if parts and parts[0] == "meta":
                for kv in parts[1:]:
                    k, _, v = kv.partition("=")
                    meta[k] = v
            continue
        body.append((n, ln))
    if not body or body[0][1] != MAGIC:
        raise ModelFormatError(body[0][0] if body else 1, f"expected header {MAGIC!r}")
    if len(body) < 3:
        raise ModelFormatError(body[-1][0], "truncated header")

    n, ln = body[1]
    tok = ln.split()
    if len(tok) != 8 or tok[0::2] != ["checks", "faults", "observables", "groups"]:
        raise ModelFormatError(n, "expected 'checks <R> faults <C> observables <K> groups <G>'")
    n_checks, n_faults, n_obs, n_groups = _ints(tok[1::2], n, "header")

    n, ln = body[2]
    tok = ln.split()
    if len(tok) != 2 or tok[0] != "group_size":
        raise ModelFormatError(n, "expected 'group_size <R/G>'")
    (group_size,) = _ints(tok[1:], n, "group size")
    if n_groups < 1 or group_size * n_groups != n_checks:
        raise ModelValidationError(
            f"check groups must partition {n_checks} rows: groups={n_groups}, group_size={group_size}"
        )

    h_cols: list[list[int]] = []
    l_cols: list[list[int]] = []
    priors: list[float] = []
    for n, ln in body[3:]:
        tok = ln.split()
        if len(tok) < 5 or tok[0] != "col" or tok[2] != "prior" or tok[4] != "checks":
            raise ModelFormatError(n, "expected 'col <j> prior <p> checks ... obs ...'")
        (j,) = _ints(tok[1:2], n, "column")
        if j != len(h_cols):
            raise ModelFormatError(n, f"column {j} out of order, expected {len(h_cols)}")
        try:
            p = float(tok[3])
        except ValueError:
            raise ModelFormatError(n, f"bad prior {tok[3]!r}") from None
        rest = tok[5:]
        if "obs" not in rest:
            raise ModelFormatError(n, "missing 'obs' section")
        k = rest.index("obs")
        checks = _ints(rest[:k], n, "check")
        obs = _ints(rest[k + 1:], n, "observable")
        if any(c < 0 or c >= n_checks for c in checks):
            raise ModelFormatError(n, "check index out of range")
        if any(o < 0 or o >= n_obs for o in obs):
            raise ModelFormatError(n, "observable index out of range")
        if len(set(checks)) != len(checks) or len(set(obs)) != len(obs):
            raise ModelFormatError(n, "repeated index")
        h_cols.append(checks)
        l_cols.append(obs)
        priors.append(p)
    if len(h_cols) != n_faults:
        raise ModelValidationError(f"header declares {n_faults} faults, found {len(h_cols)}")

    return DecodingModel(
        H=SparseBitMatrix.from_columns(h_cols, n_checks),
        priors=np.array(priors),
        L=SparseBitMatrix.from_columns(l_cols, n_obs),
        n_groups=n_groups,
        name=meta.get("name", name),
        basis=meta.get("basis", "generic"),
    )


def load_model(path) -> DecodingModel:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_model(text)


def format_model(model: DecodingModel) -> str:
    out = []
    if model.name or model.basis != "generic":
        out.append(f"# meta name={model.name} basis={model.basis}")
    out.append(MAGIC)
    out.append(
        f"checks {model.n_checks} faults {model.n_faults} "
        f"observables {model.n_observables} groups {model.n_groups}"
    )
    out.append(f"group_size {model.group_size}")
    for j in range(model.n_faults):
        checks = " ".join(map(str, model.H.column(j)))
        obs = " ".join(map(str, model.L.column(j)))
        line = f"col {j} prior {float(model.priors[j])!r} checks"
        line += f" {checks}" if checks else ""
        line += " obs"
        line += f" {obs}" if obs else ""
        out.append(line)
    return "\n".join(out) + "\n"


def save_model(model: DecodingModel, path) -> None:
    if any(c.isspace() for c in model.name):
        raise ModelValidationError("model name must not contain whitespace")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_model(model))
    os.replace(tmp, path)


def generate_random_model(
    n_checks: int,
    n_faults: int,
    max_col_wt: int,
    max_row_wt: int,
    seed: int,
    n_observables: int = 1,
    n_groups: int = 1,
    prior: float = DEFAULT_PRIOR,
) -> DecodingModel:
    """Random sparse model with column weights in ``[1, max_col_wt]`` and row weights
    at most ``max_row_wt``.  Deterministic in ``seed``."""
    if n_checks < 0 or n_faults < 0 or max_col_wt < 1 or max_row_wt < 1:
        raise ValueError("sizes must be non-negative and degree bounds positive")
    if max_col_wt > n_checks and n_faults:
        raise ValueError("max_col_wt exceeds the number of checks")
    if n_faults > n_checks * max_row_wt:
        raise ValueError("degree bounds cannot accommodate every column")
    rng = np.random.default_rng(seed)
    row_load = np.zeros(n_checks, dtype=np.int64)
    h_cols = []
    l_cols = []
    capacity = n_checks * max_row_wt
    for j in range(n_faults):
        open_rows = np.flatnonzero(row_load < max_row_wt)
        want = int(rng.integers(1, max_col_wt + 1))
        # leave room so every later column still gets at least one check
        spare = capacity - int(row_load.sum()) - (n_faults - j - 1)
        k = max(1, min(want, len(open_rows), spare))
        rows = np.sort(rng.choice(open_rows, size=k, replace=False))
        row_load[rows] += 1
        h_cols.append(rows.tolist())
        l_cols.append(np.flatnonzero(rng.random(n_observables) < 0.5).tolist())
    return DecodingModel(
        H=SparseBitMatrix.from_columns(h_cols, n_checks),
        priors=np.full(n_faults, prior),
        L=SparseBitMatrix.from_columns(l_cols, n_observables),
        n_groups=n_groups if n_checks else 1,
    )


def _monomial_sum(l: int, m: int, terms) -> np.ndarray:
    terms = [tuple(t) for t in terms]
    for t in terms:
        if len(t) != 2 or not all(isinstance(e, (int, np.integer)) and e >= 0 for e in t):
            raise ValueError(f"invalid exponent term {t!r}; expected (x_power, y_power) >= 0")
    reduced = [(a % l, b % m) for a, b in terms]
    if len(set(reduced)) != len(reduced):
        raise ValueError("repeated monomials cancel mod 2")
    if not reduced:
        raise ValueError("empty monomial sum")
    Sl = np.roll(np.eye(l, dtype=np.uint8), 1, axis=1)
    Sm = np.roll(np.eye(m, dtype=np.uint8), 1, axis=1)
    out = np.zeros((l * m, l * m), dtype=np.uint8)
    for a, b in reduced:
        x = np.kron(np.linalg.matrix_power(Sl, a), np.eye(m, dtype=np.uint8))
        y = np.kron(np.eye(l, dtype=np.uint8), np.linalg.matrix_power(Sm, b))
        out ^= (x @ y % 2).astype(np.uint8)
    return out


def bb_check_matrices(l: int, m: int, a_exponents, b_exponents) -> tuple[np.ndarray, np.ndarray]:
    """``(H_X, H_Z) = ([A | B], [B^T | A^T])`` for a bivariate bicycle code."""
    if l < 1 or m < 1:
        raise ValueError("l and m must be positive")
    A = _monomial_sum(l, m, a_exponents)
    B = _monomial_sum(l, m, b_exponents)
    return np.hstack([A, B]), np.hstack([B.T, A.T])


def generate_bb_code_capacity(
    l: int,
    m: int,
    a_exponents,
    b_exponents,
    basis: str = "X",
    prior: float = DEFAULT_PRIOR,
) -> DecodingModel:
    """Code-capacity model for one check type of a bivariate bicycle code.

    ``basis="X"`` uses H_X as the check matrix (it detects Z errors) and the
    logical observables are the X logicals; ``basis="Z"`` is the mirror.
    Exponent terms are ``(i, j)`` pairs for the monomial ``x^i y^j``.
    """
    if basis not in ("X", "Z"):
        raise ValueError("basis must be 'X' or 'Z'")
    HX, HZ = bb_check_matrices(l, m, a_exponents, b_exponents)
    H, other = (HX, HZ) if basis == "X" else (HZ, HX)
    # logicals measured by this check type: ker(other) modulo rowspace(H)
    logicals = linalg.row_basis_complement(H, linalg.nullspace(other))
    n = H.shape[1]
    return DecodingModel(
        H=SparseBitMatrix.from_dense(H),
        priors=np.full(n, prior),
        L=SparseBitMatrix.from_dense(logicals.reshape(-1, n)),
        name=f"bb{l}x{m}",
        basis="Z" if basis == "X" else "X",
    )


GROSS_CODE = dict(l=12, m=6, a_exponents=[(3, 0), (0, 1), (0, 2)], b_exponents=[(0, 3), (1, 0), (2, 0)])
