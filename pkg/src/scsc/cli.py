"""Command-line front end.

Every subcommand resolves one flat configuration mapping from built-in
defaults, an optional YAML/JSON ``--config`` file and command-line flags
(flags win).  The resolved mapping and the tool version are embedded in
every output, so any output can be reproduced by passing it back through
``--config``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import secrets
import sys
import time
from pathlib import Path

import yaml

from . import __version__
from .ensemble import (
    ComponentCodeSpec,
    EnsembleSpec,
    EnsembleValidationError,
    decoupling_probability,
    decoupling_probability_bundles,
    decoupling_upper_bound,
    design_rate,
    log_decoupling_probability,
    mixture_rate,
    primitive_bch,
    sample_graph,
    shortened_bch,
    staircase_spec,
    validate,
)
from .numerics import BracketError, ConfigurationError, DomainError, capacity
from .peeling import DecodingModel, apply_channel, monte_carlo, peel_batch, simulated_threshold, trend_check
from .potential import PotentialSpec, bbd_profiles, potential_threshold, weight_pulling
from .recursion import export_fixed_point_csv, recursion_threshold, run, RecursionSpec, tail_for_codes
from .results import ThresholdResult, gap_to_capacity

log = logging.getLogger("scsc")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 2, 3
DESK_BITS = 2_000_000
FULL_BITS_PER_BLOCK = 2_000_000

DEFAULTS = {
    "codes": [],
    "M": [],
    "staircase": False,
    "v": 2,
    "w": 2,
    "L": 40,
    "channel": "BEC",
    "model": None,
    "p": None,
    "trials": 20,
    "seed": None,
    "parallelism": 1,
    "method": "potential",
    "tol_p": 1e-7,
    "tol_fix": 1e-10,
    "target": 1e-3,
    "sim_tol_p": 1e-3,
    "rho": None,
    "figure": "bec",
    "m_c": None,
    "d_c": None,
    "t_c": None,
    "methods": None,
    "full": False,
    "threshold": False,
    "N": [2, 3, 4, 5, 6, 7, 8],
    "k": None,
    "peel_iterations": 0,
    "fixed_point_csv": None,
}

THRESHOLD_COLUMNS = [
    "schema_version",
    "code_id",
    "m_c",
    "n_c",
    "k_c",
    "d_c",
    "rho",
    "v",
    "w",
    "L",
    "channel",
    "model",
    "curve",
    "rate",
    "method",
    "p_star",
    "tolerance",
    "capacity",
    "gap_epsilon",
    "upper_bound",
    "flags",
]


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# configuration


def _parse_code(text: str) -> list[int]:
    code = ComponentCodeSpec.parse(text)
    return [code.n, code.k, code.d]


def _csv_list(kind):
    def parse(text: str):
        return [kind(s) for s in text.split(",") if s.strip()]

    return parse


def _coerce_numbers(data: dict) -> dict:
    # YAML 1.1 reads exponent floats without a dot (1e-7) as strings
    for key, val in data.items():
        if isinstance(DEFAULTS.get(key), float) and isinstance(val, str):
            try:
                data[key] = float(val)
            except ValueError as exc:
                raise CliError(f"config key {key} needs a number, got {val!r}") from exc
    return data


def load_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    data = (json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)) or {}
    if not isinstance(data, dict):
        raise CliError(f"config file {path} must hold a mapping")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return _coerce_numbers(data)


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    cfg["codes"] = [list(c) for c in cfg["codes"]]
    if cfg["seed"] is None:
        cfg["seed"] = secrets.randbits(63)
        log.warning("no --seed given; using random seed %d", cfg["seed"])
    if cfg["model"] is None:
        cfg["model"] = "bec-bdd" if cfg["channel"] == "BEC" else "bsc-mf"
    if cfg["channel"] not in ("BEC", "BSC"):
        raise CliError(f"unknown channel {cfg['channel']!r}")
    expected = "BEC" if cfg["model"] == "bec-bdd" else "BSC"
    if expected != cfg["channel"]:
        raise CliError(f"decoding model {cfg['model']} does not apply to the {cfg['channel']}")
    return cfg


def codes_of(cfg) -> list[ComponentCodeSpec]:
    if not cfg["codes"]:
        raise CliError("no component code given (use --code n,k,d)")
    try:
        return [ComponentCodeSpec(*c) for c in cfg["codes"]]
    except EnsembleValidationError as exc:
        raise CliError("; ".join(exc.errors)) from exc


def ensemble_of(cfg, need_multiplicity: bool = True) -> EnsembleSpec:
    """Validated ensemble; without multiplicities, ``M_i = v`` stands in for checks that do not depend on M."""
    codes = codes_of(cfg)
    if cfg["staircase"]:
        if len(codes) != 1:
            raise CliError("--staircase takes exactly one code")
        try:
            spec = staircase_spec(codes[0])
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    else:
        M = list(cfg["M"] or [])
        if not M:
            if need_multiplicity:
                raise CliError("multiplicities missing (use --M or --staircase)")
            M = [cfg["v"]] * len(codes)
        if len(M) != len(codes):
            raise CliError(f"{len(codes)} codes but {len(M)} multiplicities")
        spec = EnsembleSpec(tuple(zip(codes, M)), cfg["v"], cfg["w"])
    try:
        return validate(spec)
    except EnsembleValidationError as exc:
        raise CliError("invalid ensemble: " + "; ".join(exc.errors)) from exc


def check_analysis_inputs(cfg, codes) -> list[float]:
    """Checks for analysis-only runs, where no graph is built and ``w`` need not divide ``n_c``.

    Returns the mixture weights implied by ``--M`` (equal multiplicities if absent).
    """
    errors = []
    if cfg["v"] < 2:
        errors.append(f"variable degree v must be >= 2, got {cfg['v']}")
    if cfg["w"] < 1 or cfg["L"] < 1:
        errors.append("need w >= 1 and L >= 1")
    M = list(cfg["M"] or [1] * len(codes))
    if len(M) != len(codes):
        errors.append(f"{len(codes)} codes but {len(M)} multiplicities")
        M = [1] * len(codes)
    total = sum(m * c.n for m, c in zip(M, codes))
    rho = [m * c.n / total for m, c in zip(M, codes)]
    grid = [[r, 1.0 - r] for r in cfg["rho"]] if cfg["rho"] and len(codes) == 2 else [rho]
    if cfg["v"] >= 2 and any(mixture_rate(codes, r, cfg["v"]) <= 0 for r in grid):
        errors.append("nonpositive design rate: need sum rho_i R_i > 1 - 1/v")
    if errors:
        raise CliError("invalid ensemble: " + "; ".join(errors))
    return rho


def decoding_model(cfg, code: ComponentCodeSpec | None = None, profile=None) -> DecodingModel:
    if cfg["model"] == "beyond-bdd":
        if profile is None:
            if code is None:
                raise CliError("beyond-bdd needs a component code")
            profile = bbd_profiles(code)[0]
        return DecodingModel("beyond-bdd", profile)
    return DecodingModel(cfg["model"])


# ---------------------------------------------------------------------------
# output


def run_document(command: str, cfg: dict, results, timing: dict | None = None) -> dict:
    doc = {
        "tool": "scsc",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "results": results,
    }
    if timing is not None:
        doc["timing"] = timing
    return doc


def _fmt(val):
    if val is None:
        return ""
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, (list, tuple)):
        return ";".join(_fmt(v) for v in val)
    return str(val)


def write_output(command, cfg, rows, columns, fmt, out, timing=None):
    """CSV (with a ``.meta.json`` sidecar when writing a file) or one JSON document."""
    if fmt == "json":
        text = json.dumps(run_document(command, cfg, rows, timing), indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
        if fmt != "json":
            meta = run_document(command, cfg, None)
            meta["columns"] = columns
            Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text)


def threshold_row(res: ThresholdResult, codes, rho, cfg, *, curve="", m_c=None, rate=None, w=None, L=None) -> dict:
    if rate is None:
        rate = mixture_rate(codes, rho or [1.0], cfg["v"])
    res.rate = rate
    try:
        cap = capacity(res.channel, res.p_star)
        gap = gap_to_capacity(res.p_star, rate, res.channel) if cap > 0 else None
    except DomainError:
        cap, gap = None, None
    if len(codes) == 1:
        code_id = codes[0].label()
    else:
        code_id = "+".join(f"{r:g}*{c.label()}" for r, c in zip(rho, codes))
    return {
        "schema_version": SCHEMA_VERSION,
        "code_id": code_id,
        "m_c": m_c,
        "n_c": "/".join(str(c.n) for c in codes),
        "k_c": "/".join(str(c.k) for c in codes),
        "d_c": "/".join(str(c.d) for c in codes),
        "rho": "/".join(f"{r:g}" for r in rho) if rho else "1",
        "v": cfg["v"],
        "w": w,
        "L": L,
        "channel": res.channel,
        "model": cfg["model"],
        "curve": curve,
        "rate": rate,
        "method": res.method,
        "p_star": res.p_star,
        "tolerance": res.tolerance,
        "capacity": cap,
        "gap_epsilon": gap,
        "upper_bound": res.upper_bound,
        "flags": list(res.flags),
        "converged": res.converged,
    }


# ---------------------------------------------------------------------------
# threshold computation shared by `threshold` and `sweep-figure`


def compute_threshold(method, codes, rho, cfg, *, profile=None, L=None, w=None, spec=None) -> ThresholdResult:
    model = cfg["model"]
    channel = cfg["channel"]
    v = cfg["v"]
    L = cfg["L"] if L is None else L
    w = cfg["w"] if w is None else w
    if method == "weight-pulling":
        if model == "beyond-bdd":
            raise CliError("the weight-pulling bound applies to bounded-distance models only")
        tail = tail_for_codes(codes, rho, model)
        return ThresholdResult(min(weight_pulling((tail, v)), 1.0), "weight-pulling", 0.0, channel)
    if method == "potential":
        if model == "beyond-bdd":
            raise CliError("potential thresholds need a closed-form integral; use --method recursion for profiles")
        return potential_threshold(PotentialSpec(tail_for_codes(codes, rho, model), v, channel=channel))
    if method == "recursion":
        if model == "beyond-bdd" and profile is None:
            profile = bbd_profiles(codes[0])[0]
        tail = tail_for_codes(codes, rho, model, profile)
        return recursion_threshold(tail, v, L, w, tol_p=cfg["tol_p"], tol_fix=cfg["tol_fix"], channel=channel)
    if method == "simulation":
        if spec is None:
            raise CliError("simulation thresholds need a full ensemble (codes with --M or --staircase)")
        dm = decoding_model(cfg, codes[0], profile)
        return simulated_threshold(
            spec, L, channel, dm, cfg["target"], cfg["seed"], cfg["trials"], cfg["sim_tol_p"], parallelism=cfg["parallelism"]
        )
    raise CliError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_rate(cfg, args):
    spec = ensemble_of(cfg)
    row = {
        "schema_version": SCHEMA_VERSION,
        "ensemble": spec.label(),
        "N": spec.N,
        "L": cfg["L"],
        "rate_L": design_rate(spec, cfg["L"]),
        "rate_inf": design_rate(spec, math.inf),
    }
    write_output("rate", cfg, [row], list(row), args.format, args.out)
    return EXIT_OK


def cmd_sample(cfg, args):
    spec = ensemble_of(cfg)
    graph = sample_graph(spec, cfg["L"], cfg["seed"])
    out = args.out or "graph.json"
    graph.save(out)
    print(json.dumps({"graph": str(out), "edges": graph.n_edges, "variables": graph.n_variables, "seed": cfg["seed"]}))
    return EXIT_OK


def cmd_simulate(cfg, args):
    spec = ensemble_of(cfg)
    if cfg["trials"] < 1:
        raise CliError("--trials must be >= 1")
    dm = decoding_model(cfg, spec.codes[0])
    start = time.perf_counter()
    code = EXIT_OK
    if cfg["threshold"]:
        res = simulated_threshold(
            spec, cfg["L"], cfg["channel"], dm, cfg["target"], cfg["seed"], cfg["trials"], cfg["sim_tol_p"],
            parallelism=cfg["parallelism"],
        )
        results = res.to_dict()
        if not res.converged:
            code = EXIT_NONCONVERGENCE
    else:
        if cfg["p"] is None:
            raise CliError("--p is required unless --threshold is given")
        stats = monte_carlo(spec, cfg["L"], cfg["channel"], cfg["p"], dm, cfg["trials"], cfg["seed"], cfg["parallelism"], args.log)
        results = stats.to_dict()
        if stats.capped_trials:
            code = EXIT_NONCONVERGENCE
    doc = run_document("simulate", cfg, results, {"elapsed_s": time.perf_counter() - start})
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def _rho_grid(cfg, codes):
    if cfg["rho"] is None:
        return [None]
    if len(codes) != 2:
        raise CliError("--rho sweeps need exactly two codes")
    return [[r, 1.0 - r] for r in cfg["rho"]]


def cmd_threshold(cfg, args):
    codes = codes_of(cfg)
    method = cfg["method"]
    if method == "simulation":
        spec = ensemble_of(cfg)
        default_rho = list(spec.rho)
    else:
        spec = None
        default_rho = check_analysis_inputs(cfg, codes)
    rows, code = [], EXIT_OK
    for rho in _rho_grid(cfg, codes):
        if rho is None and len(codes) > 1:
            rho = default_rho
        res = compute_threshold(method, codes, rho, cfg, spec=spec)
        rate = mixture_rate(codes, rho or [1.0], cfg["v"])
        rows.append(threshold_row(res, codes, rho, cfg, rate=rate, w=cfg["w"], L=cfg["L"]))
        if not res.converged:
            code = EXIT_NONCONVERGENCE
        if cfg["fixed_point_csv"] and method == "recursion":
            tail = tail_for_codes(codes, rho, cfg["model"], bbd_profiles(codes[0])[0] if cfg["model"] == "beyond-bdd" else None)
            fp = run(RecursionSpec(tail, cfg["v"], cfg["L"], cfg["w"], min(1.0, res.p_star * 1.001)), cfg["tol_fix"])
            export_fixed_point_csv(fp.y, cfg["fixed_point_csv"])
    write_output("threshold", cfg, rows, THRESHOLD_COLUMNS, args.format, args.out)
    return code


def _figure_codes(cfg):
    fig = cfg["figure"]
    if fig == "bbd":
        ms = cfg["m_c"] or ([8, 9, 10, 11] if cfg["full"] else [8, 9])
        ts = cfg["t_c"] or [2, 3, 4, 5, 6]
        return [(m, primitive_bch(m, t)) for m in ms for t in ts if 2**m - 1 - m * t > 0]
    ms = cfg["m_c"] or ([7, 9, 11] if cfg["full"] else [7, 9])
    ds = cfg["d_c"] or list(range(5, 23, 2))
    out = []
    for m in ms:
        for d in ds:
            n = 2**m - 2
            k = n - m * (d - 1) // 2
            if k > 0:
                out.append((m, ComponentCodeSpec(n, k, d)))
    return out


def cmd_sweep_figure(cfg, args):
    fig = cfg["figure"]
    if fig not in ("bec", "bsc", "bbd"):
        raise CliError(f"unknown figure {fig!r}")
    if cfg["full"]:
        log.warning("--full uses publication-scale parameters; simulation rows can take many hours")
    v = cfg["v"]
    rows, code = [], EXIT_OK
    if fig in ("bec", "bsc"):
        cfg["channel"] = "BEC" if fig == "bec" else "BSC"
        cfg["model"] = "bec-bdd" if fig == "bec" else "bsc-mf"
        methods = cfg["methods"] or ["weight-pulling", "potential"]
        if cfg["full"]:
            cfg["target"] = 1e-6
        for m, code_spec in _figure_codes(cfg):
            rate = mixture_rate([code_spec], [1.0], v)
            if rate <= 0:
                continue
            for method in methods:
                spec = None
                if method == "simulation":
                    if cfg["full"]:
                        M = FULL_BITS_PER_BLOCK // code_spec.n
                    else:
                        M = max(1, min(code_spec.n // 2, (DESK_BITS * v) // (cfg["L"] * code_spec.n)))
                    spec = validate(EnsembleSpec.single(code_spec, M, v, cfg["w"]))
                res = compute_threshold(method, [code_spec], None, cfg, spec=spec)
                rows.append(threshold_row(res, [code_spec], None, cfg, m_c=m, rate=rate, w=cfg["w"], L=cfg["L"]))
                code = code if res.converged else EXIT_NONCONVERGENCE
    else:
        cfg["channel"] = "BSC"
        for m, code_spec in _figure_codes(cfg):
            rate = mixture_rate([code_spec], [1.0], v)
            if rate <= 0:
                continue
            existence, limit = bbd_profiles(code_spec)
            curves = [("bdd", "bsc-mf", None), ("existence", "beyond-bdd", existence), ("fundamental-limit", "beyond-bdd", limit)]
            for name, model, profile in curves:
                cfg_m = dict(cfg, model=model)
                res = compute_threshold("recursion", [code_spec], None, cfg_m, profile=profile)
                rows.append(threshold_row(res, [code_spec], None, cfg_m, curve=name, m_c=m, rate=rate, w=cfg["w"], L=cfg["L"]))
                code = code if res.converged else EXIT_NONCONVERGENCE
    write_output("sweep-figure", cfg, rows, THRESHOLD_COLUMNS, args.format, args.out)
    return code


def cmd_decoupling_prob(cfg, args):
    v = cfg["v"]
    rows = []
    for N in cfg["N"]:
        prob = decoupling_probability(N, v)
        scale = -(v - 1) * N * math.log(N) if N > 1 else 0.0
        row = {
            "schema_version": SCHEMA_VERSION,
            "N": N,
            "v": v,
            "probability": prob,
            "log_probability": log_decoupling_probability(N, v),
            "upper_bound": decoupling_upper_bound(N, v),
            "log_ratio_to_scale": log_decoupling_probability(N, v) - scale,
            "w": cfg["w"],
            "probability_w_bundles": decoupling_probability_bundles(N, v, cfg["w"]) if (N * v) % cfg["w"] == 0 else None,
        }
        rows.append(row)
    write_output("decoupling-prob", cfg, rows, list(rows[0]), args.format, args.out)
    return EXIT_OK


def cmd_trend_check(cfg, args):
    spec = ensemble_of(cfg)
    if cfg["p"] is None:
        raise CliError("--p is required")
    dm = decoding_model(cfg, spec.codes[0])
    graph = sample_graph(spec, cfg["L"], cfg["seed"])
    residual = apply_channel(graph, cfg["channel"], cfg["p"], cfg["seed"] + 1)
    if cfg["peel_iterations"]:
        out = peel_batch(residual, dm, cfg["seed"], max_iter=cfg["peel_iterations"])
        residual = residual.restrict(out.final_edges)
    report = trend_check(residual, cfg["trials"], cfg["seed"] + 2, k=cfg["k"], model=dm)
    doc = run_document("trend-check", cfg, dict(report.to_dict(), max_abs_z=report.max_abs_z()))
    text = json.dumps(doc, indent=2, sort_keys=True, default=list) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "rate": cmd_rate,
    "sample": cmd_sample,
    "simulate": cmd_simulate,
    "threshold": cmd_threshold,
    "sweep-figure": cmd_sweep_figure,
    "decoupling-prob": cmd_decoupling_prob,
    "trend-check": cmd_trend_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON file with configuration keys (flags override)")
    common.add_argument("--code", dest="codes", action="append", type=_parse_code, help="component code n,k,d (repeatable)")
    common.add_argument("--M", type=_csv_list(int), help="comma-separated multiplicities, one per code")
    common.add_argument("--staircase", action="store_true", default=None, help="staircase parameters M=n/2, v=w=2")
    common.add_argument("--v", type=int)
    common.add_argument("--w", type=int)
    common.add_argument("--L", type=int)
    common.add_argument("--channel", choices=["BEC", "BSC"])
    common.add_argument("--model", choices=["bec-bdd", "bsc-mf", "beyond-bdd"])
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="scsc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("rate", parents=[common], help="design rate R(L) and its limit")
    sub.add_parser("sample", parents=[common], help="sample a code graph and dump it as JSON")

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo peeling simulation")
    p.add_argument("--p", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--threshold", action="store_true", default=None, help="bisect for the simulated threshold")
    p.add_argument("--target", type=float, help="target output bit probability for --threshold")
    p.add_argument("--sim-tol-p", dest="sim_tol_p", type=float)
    p.add_argument("--log", help="append per-trial NDJSON records to this file")

    p = sub.add_parser("threshold", parents=[common], help="decoding thresholds")
    p.add_argument("--method", choices=["recursion", "potential", "weight-pulling", "simulation"])
    p.add_argument("--rho", type=_csv_list(float), help="weights of the first of two codes to sweep")
    p.add_argument("--tol-p", dest="tol_p", type=float)
    p.add_argument("--tol-fix", dest="tol_fix", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--target", type=float)
    p.add_argument("--sim-tol-p", dest="sim_tol_p", type=float)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--fixed-point-csv", dest="fixed_point_csv", help="write the recursion fixed point just above threshold")

    p = sub.add_parser("sweep-figure", parents=[common], help="threshold/gap dataset for a figure family")
    p.add_argument("--figure", choices=["bec", "bsc", "bbd"])
    p.add_argument("--m-c", dest="m_c", type=_csv_list(int))
    p.add_argument("--d-c", dest="d_c", type=_csv_list(int))
    p.add_argument("--t-c", dest="t_c", type=_csv_list(int))
    p.add_argument("--methods", type=_csv_list(str), help="subset of weight-pulling,potential,recursion,simulation")
    p.add_argument("--full", action="store_true", default=None, help="publication-scale parameters (slow)")
    p.add_argument("--tol-p", dest="tol_p", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--target", type=float)
    p.add_argument("--parallelism", type=int)

    p = sub.add_parser("decoupling-prob", parents=[common], help="probability that an interleaver decouples")
    p.add_argument("--N", type=_csv_list(int))

    p = sub.add_parser("trend-check", parents=[common], help="statistical check of the one-step degree-type trend")
    p.add_argument("--p", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--k", type=int, help="sub-ensemble index (default: most recoverable edges)")
    p.add_argument("--peel-iterations", dest="peel_iterations", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (EnsembleValidationError, ConfigurationError, DomainError, BracketError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
