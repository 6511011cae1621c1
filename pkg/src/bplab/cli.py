"""Command-line entry point: ``bplab <command> [options]``.

Every option can also come from an INI file given with ``--config``; keys in the
``[common]`` section and in the section named after the command use the long
option name without dashes (``iters_per_leg = 50``).  Command-line flags win.

Exit codes: 0 success, 1 usage or configuration error, 2 data or validation
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import dynlab, lowweight, modelio
from .amend import sweep_fraction
from .decoder import RelayConfig
from .dynlab import decode_once, derive_seed, export_trace
from .lowweight import FilterSpec, make_combo
from .modelio import ModelFormatError, ModelValidationError

log = logging.getLogger("bplab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- options

RELAY_OPTS = [
    ("legs", int, 200, "relay legs, warm-up included"),
    ("iters_per_leg", int, 25, "iterations per relay leg"),
    ("warmup_iters", int, None, "iterations of the warm-up leg (default: iters_per_leg)"),
    ("cap", int, None, "global iteration cap (default: all legs)"),
    ("gamma_min", float, -0.24, "lower memory strength"),
    ("gamma_max", float, 0.66, "upper memory strength"),
    ("scale", float, 0.9, "min-sum scaling factor"),
]


def _add(p, name, typ=str, help=None, **kw):
    p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None, help=help, **kw)


def _common(p, seed_help="RNG seed"):
    _add(p, "config", help="INI config file")
    _add(p, "out", help="output directory")
    _add(p, "seed", int, seed_help)
    _add(p, "threads", int, "worker processes (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bplab", description="Low-weight error laboratory for BP decoding")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ap.subcommands = sub.choices

    p = sub.add_parser("gen-model", help="write a synthetic decoding model")
    _common(p)
    _add(p, "model", help="output model file")
    _add(p, "kind", help="random | bb")
    for name in ("checks", "faults", "max_col_wt", "max_row_wt", "observables", "groups"):
        _add(p, name, int)
    _add(p, "prior", float)
    _add(p, "l", int)
    _add(p, "m", int)
    _add(p, "a", help="x,y exponent terms of A, e.g. '3,0;0,1;0,2'")
    _add(p, "b", help="x,y exponent terms of B")
    _add(p, "basis", help="X | Z check type for bb models")
    p.add_argument("--gross", action="store_true", default=None, help="gross-code exponents")

    p = sub.add_parser("pairs", help="shared-column counts of check pairs")
    _common(p)
    _add(p, "model")
    _add(p, "scope", help="group:<g> | all | rows:<i,j,...> (default group:0)")

    p = sub.add_parser("enumerate", help="construct and filter weight-four errors")
    _common(p)
    p.add_argument("--model", dest="model", action="append", default=None)
    p.add_argument("--group", dest="group", action="append", type=int, default=None)
    _add(p, "anchors", help="first | all (default first)")
    _add(p, "n_shared", int)
    _add(p, "pair_nc", help="comma-separated accepted pair n_c (default 2)")
    _add(p, "total_nc", help="comma-separated accepted total n_c (default 8)")
    p.add_argument("--relaxed", action="store_true", default=None)

    for name, help_ in (("dynamics", "repeated stochastic decoding of combos"),
                        ("amend", "decoding-matrix amendment sweep"),
                        ("trace", "hard-decision trace of one decode")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        _add(p, "model")
        _add(p, "combos", help="combos.csv written by 'enumerate'")
        _add(p, "model_name", help="row tag in combos.csv (default: model name)")
        for opt, typ, _, h in RELAY_OPTS:
            _add(p, opt, typ, h)
        if name == "trace":
            _add(p, "combo_id", int)
            _add(p, "faults", help="comma-separated fault ids (instead of --combos)")
            _add(p, "top_k", int)
        else:
            _add(p, "which", help="filtered | all (default filtered)")
            _add(p, "limit", int, "use at most this many combos")
            _add(p, "trials", int)
        if name == "dynamics":
            _add(p, "decoder", help="relay | bp_osd")
            _add(p, "bin_width", int)
        if name == "amend":
            _add(p, "fractions", help="comma-separated fractions")
            _add(p, "decoders", help="comma-separated decoders (default relay,bp_osd)")
            _add(p, "prior", float, "prior of added columns (default: product of priors)")
    return ap


DEFAULTS = {
    "scope": "group:0",
    "anchors": "first",
    "n_shared": 8,
    "pair_nc": "2",
    "total_nc": "8",
    "relaxed": False,
    "which": "filtered",
    "decoder": "relay",
    "bin_width": 100,
    "trials": 50,
    "top_k": 121,
    "fractions": "0,0.25,0.5,0.75,1",
    "decoders": "relay,bp_osd",
    "kind": "random",
    "observables": 1,
    "groups": 1,
    "prior": None,
    "basis": "X",
    "gross": False,
    **{name: default for name, _, default, _ in RELAY_OPTS},
}
NOT_HASHED = {"out", "threads", "config", "verbose"}


def resolve(args) -> dict:
    """Merge built-in defaults, config-file values and flags (flags win)."""
    vals = {k: v for k, v in vars(args).items()}
    file_vals: dict = {}
    if vals.get("config"):
        path = vals["config"]
        if not os.path.exists(path):
            raise UsageError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        cp.read(path, encoding="utf-8")
        for section in ("common", args.command):
            if cp.has_section(section):
                file_vals.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    types = {a.dest: a for a in build_parser().subcommands[args.command]._actions}
    out = {}
    for k, v in vals.items():
        if v is None and k in file_vals:
            raw = file_vals[k]
            act = types.get(k)
            if isinstance(act, argparse._AppendAction):
                conv = act.type or str
                v = [conv(s.strip()) for s in raw.split(",") if s.strip()]
            elif isinstance(act, argparse._StoreTrueAction):
                v = raw.strip().lower() in ("1", "true", "yes", "on")
            elif act is not None and act.type is not None:
                v = act.type(raw)
            else:
                v = raw
        if v is None:
            v = DEFAULTS.get(k)
        out[k] = v
    if out.get("threads") is None:
        out["threads"] = os.cpu_count() or 1
    return out


def config_hash(cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k not in NOT_HASHED}
    # input files are identified by content, not location
    def digest(p):
        return "sha256:" + hashlib.sha256(Path(p).read_bytes()).hexdigest() if os.path.exists(p) else p

    for key in ("model", "combos"):
        paths = payload.get(key)
        if isinstance(paths, list):
            payload[key] = [digest(p) for p in paths]
        elif paths is not None:
            payload[key] = digest(paths)
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_csv(path: Path, header, rows, chash: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config-hash={chash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _require(cfg, *keys):
    for k in keys:
        if cfg.get(k) in (None, [], ""):
            raise UsageError(f"missing required option --{k.replace('_', '-')}")


def _ints(text) -> list[int]:
    return [int(t) for t in re.split(r"[,\s]+", str(text).strip()) if t]


def _model_tag(model, path) -> str:
    return model.name or Path(path).stem


def relay_config(cfg) -> RelayConfig:
    return RelayConfig(
        max_legs=cfg["legs"],
        iters_per_leg=cfg["iters_per_leg"],
        warmup_iters=cfg["warmup_iters"],
        gamma_min=cfg["gamma_min"],
        gamma_max=cfg["gamma_max"],
        min_sum_scale=cfg["scale"],
        global_iteration_cap=cfg["cap"],
    )


# ---------------------------------------------------------------- commands

def cmd_gen_model(cfg) -> None:
    _require(cfg, "model")
    prior = cfg["prior"] if cfg["prior"] is not None else modelio.DEFAULT_PRIOR
    if cfg["kind"] == "random":
        _require(cfg, "seed", "checks", "faults", "max_col_wt", "max_row_wt")
        model = modelio.generate_random_model(
            cfg["checks"], cfg["faults"], cfg["max_col_wt"], cfg["max_row_wt"], cfg["seed"],
            n_observables=cfg["observables"], n_groups=cfg["groups"], prior=prior,
        )
    elif cfg["kind"] == "bb":
        if cfg["gross"]:
            params = dict(modelio.GROSS_CODE)
        else:
            _require(cfg, "l", "m", "a", "b")
            terms = lambda s: [tuple(int(x) for x in t.split(",")) for t in s.split(";") if t]
            params = dict(l=cfg["l"], m=cfg["m"], a_exponents=terms(cfg["a"]), b_exponents=terms(cfg["b"]))
        model = modelio.generate_bb_code_capacity(**params, basis=cfg["basis"], prior=prior)
    else:
        raise UsageError(f"unknown --kind {cfg['kind']!r}")
    modelio.save_model(model, cfg["model"])


def _scope_rows(model, scope: str) -> np.ndarray:
    if scope == "all":
        return np.arange(model.n_checks)
    kind, _, rest = scope.partition(":")
    if kind == "group":
        g = int(rest)
        if not 0 <= g < model.n_groups:
            raise ValueError(f"group {g} out of range (model has {model.n_groups})")
        return model.check_groups[g]
    if kind == "rows":
        rows = np.array(_ints(rest), dtype=np.int64)
        if len(rows) and (rows.min() < 0 or rows.max() >= model.n_checks):
            raise ValueError("scope row out of range")
        return rows
    raise UsageError(f"bad --scope {scope!r}")


def cmd_pairs(cfg) -> None:
    _require(cfg, "model", "out")
    model = modelio.load_model(cfg["model"])
    rows = _scope_rows(model, cfg["scope"])
    stats = lowweight.shared_column_counts(model, rows)
    out = Path(cfg["out"])
    h = config_hash(cfg)
    write_csv(out / "pairs.csv", ["row", "col", "n_s"], stats.pairs(), h)
    freq_rows = []
    for c in stats.checks:
        for ns, count in enumerate(lowweight.shared_count_frequency(stats, int(c))):
            freq_rows.append((int(c), ns, int(count)))
    write_csv(out / "ns_frequency.csv", ["check", "n_s", "count"], freq_rows, h)


COMBO_HEADER = ["model", "combo_id", "fault_ids", "w", "n_u", "n_c",
                "p0", "p1", "cols_a", "cols_b", "nc_a", "nc_b", "filtered"]


def cmd_enumerate(cfg) -> None:
    _require(cfg, "model", "out")
    paths = cfg["model"] if isinstance(cfg["model"], list) else [cfg["model"]]
    groups = cfg["group"] or [0] * len(paths)
    if len(groups) != len(paths):
        raise UsageError("give one --group per --model")
    if cfg["relaxed"]:
        spec = FilterSpec.relaxed()
    else:
        spec = FilterSpec(pair_nc=_ints(cfg["pair_nc"]), total_nc=_ints(cfg["total_nc"]))
    h = config_hash(cfg)
    combo_rows, dist_rows, summary = [], [], []
    for path, g in zip(paths, groups):
        model = modelio.load_model(path)
        tag = _model_tag(model, path)
        if not 0 <= g < model.n_groups:
            raise ValueError(f"group {g} out of range for {path}")
        combos = lowweight.enumerate_group(model, g, cfg["anchors"], cfg["n_shared"], workers=cfg["threads"])
        kept = {c.fault_ids for c in lowweight.filter_hard_errors(combos, spec)}
        filtered = [c for c in combos if c.fault_ids in kept]
        for i, c in enumerate(combos):
            d = c.provenance[0]
            combo_rows.append((tag, i, c.fault_ids, c.w, c.n_u, c.n_c, d.p0, d.p1,
                               d.cols_a, d.cols_b, d.nc_a, d.nc_b, c.fault_ids in kept))
        for nc, count in lowweight.nc_distribution(combos).items():
            dist_rows.append((tag, nc, count))
        n_pairs, n_splits = lowweight.decomposition_stats(lowweight.filter_hard_errors(filtered, spec))
        summary.append((tag, g, len(combos), len(filtered), n_pairs, n_splits))
    out = Path(cfg["out"])
    write_csv(out / "combos.csv", COMBO_HEADER, combo_rows, h)
    write_csv(out / "nc_distribution.csv", ["model", "n_c", "count"], dist_rows, h)
    write_csv(out / "summary.csv",
              ["model", "group", "constructed", "filtered", "column_pairs", "decompositions"], summary, h)


def load_combos(cfg, model, path):
    """Combos of one model from a combos CSV, as ``(combo_ids, combos)``."""
    tag = cfg.get("model_name") or _model_tag(model, path)
    rows = [r for r in read_csv(cfg["combos"]) if r["model"] == tag]
    if cfg.get("which", "filtered") == "filtered":
        rows = [r for r in rows if r["filtered"] == "1"]
    if cfg.get("limit") is not None:
        rows = rows[: cfg["limit"]]
    ids, combos = [], []
    for r in rows:
        prov = lowweight.Decomposition(
            tuple(_ints(r["p0"])), tuple(_ints(r["p1"])),
            tuple(_ints(r["cols_a"])), tuple(_ints(r["cols_b"])),
            int(r["nc_a"]), int(r["nc_b"]),
        )
        ids.append(int(r["combo_id"]))
        combos.append(make_combo(model, [int(x) for x in r["fault_ids"].split()], provenance=(prov,)))
    return ids, combos


def cmd_dynamics(cfg) -> None:
    _require(cfg, "model", "combos", "out", "seed")
    model = modelio.load_model(cfg["model"])
    ids, combos = load_combos(cfg, model, cfg["model"])
    rcfg = relay_config(cfg)
    records = dynlab.run_trials(model, combos, rcfg, cfg["trials"], cfg["seed"], cfg["decoder"],
                                combo_ids=ids, workers=cfg["threads"])
    out = Path(cfg["out"])
    h = config_hash(cfg)
    write_csv(out / "trials.csv", ["combo_id", "trial", "iterations", "converged", "logical_error"],
              [(r.combo_id, r.trial, r.iterations, r.converged, r.logical_error) for r in records], h)
    hist_rows, strat_rows, surv_rows, fit_rows = [], [], [], []
    if records:
        hist = dynlab.iteration_histogram(records, cfg["bin_width"])
        hist_rows = [(lo, hi, c) for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts)]
        by_w = dynlab.iteration_histogram(records, cfg["bin_width"], len(hist.counts), stratify="w")
        for w, hw in by_w.items():
            strat_rows += [(w, lo, hi, c) for lo, hi, c in zip(hw.edges[:-1], hw.edges[1:], hw.counts)]
        curve = dynlab.survival_curve(records)
        surv_rows = list(zip(*curve.log_points()))
        try:
            rate, err = dynlab.fit_exponential_rate(records, rcfg.global_iteration_cap)
            fit_rows = [(rate, err, sum(not r.converged for r in records), len(records))]
        except dynlab.NoEstimateError:
            fit_rows = []
    write_csv(out / "histogram.csv", ["bin_lo", "bin_hi", "count"], hist_rows, h)
    write_csv(out / "histogram_by_w.csv", ["w", "bin_lo", "bin_hi", "count"], strat_rows, h)
    write_csv(out / "survival.csv", ["n", "survival"], surv_rows, h)
    write_csv(out / "fit.csv", ["rate", "stderr", "n_censored", "n_records"], fit_rows, h)
    feats = dynlab.feature_table(model, combos, records, combo_ids=ids)
    write_csv(out / "features.csv", ["combo_id", "w", "n_u", "n_c", "neighborhood", "mean_iterations"],
              [tuple(f.values()) for f in feats], h)


def cmd_trace(cfg) -> None:
    _require(cfg, "model", "out", "seed")
    model = modelio.load_model(cfg["model"])
    if cfg["faults"]:
        combo = make_combo(model, _ints(cfg["faults"]))
        cid = -1
    else:
        _require(cfg, "combos", "combo_id")
        cfg_all = dict(cfg, which="all", limit=None)
        ids, combos = load_combos(cfg_all, model, cfg["model"])
        if cfg["combo_id"] not in ids:
            raise ValueError(f"combo {cfg['combo_id']} not found")
        cid = cfg["combo_id"]
        combo = combos[ids.index(cid)]
    seed = derive_seed(cfg["seed"], cid, 0)
    res = decode_once(model, combo, relay_config(cfg), seed, "relay", record_trace=True)
    tr = export_trace(res, cfg["top_k"])
    out = Path(cfg["out"])
    h = config_hash(cfg)
    rows = [(int(f), t, int(tr.matrix[k, t]))
            for k, f in enumerate(tr.fault_ids) for t in range(tr.matrix.shape[1])]
    write_csv(out / "trace.csv", ["fault_id", "iter", "bit"], rows, h)
    write_csv(out / "trace_legs.csv", ["leg", "start_iter"], list(enumerate(tr.leg_starts)), h)
    write_csv(out / "trace_summary.csv", ["converged", "iterations", "legs", "logical_flip"],
              [(res.converged, res.iterations, res.legs, bool(res.logical_flip.any()))], h)


def cmd_amend(cfg) -> None:
    _require(cfg, "model", "combos", "out", "seed")
    model = modelio.load_model(cfg["model"])
    _, combos = load_combos(cfg, model, cfg["model"])
    fractions = [float(x) for x in str(cfg["fractions"]).split(",") if x.strip()]
    rcfg = relay_config(cfg)
    rows = []
    for kind in [d.strip() for d in cfg["decoders"].split(",") if d.strip()]:
        for pt in sweep_fraction(model, combos, fractions, rcfg, cfg["trials"], cfg["seed"], kind,
                                 prior_value=cfg["prior"], workers=cfg["threads"]):
            rows.append((pt.fraction, pt.decoder, pt.mean_iterations, pt.logical_error_prob, pt.n_trials))
    write_csv(Path(cfg["out"]) / "sweep.csv",
              ["fraction", "decoder", "mean_iterations", "logical_error_prob", "n_trials"], rows,
              config_hash(cfg))


COMMANDS = {
    "gen-model": cmd_gen_model,
    "pairs": cmd_pairs,
    "enumerate": cmd_enumerate,
    "dynamics": cmd_dynamics,
    "trace": cmd_trace,
    "amend": cmd_amend,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
    except UsageError as e:
        print(f"bplab: error: {e}", file=sys.stderr)
        return 1
    except (ModelFormatError, ModelValidationError, ValueError, KeyError, OSError) as e:
        print(f"bplab: data error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"bplab: internal error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
