"""Command-line front end: ``fading-service {rate,simulate,queue,sweep,cf-check}``.

Parameters come from an optional flat JSON file (``--config``) overridden by
flags.  Every JSON output echoes the resolved configuration under ``"config"``;
passing that file back through ``--config`` repeats the run exactly.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 sample-budget refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict
from importlib import resources
from pathlib import Path

from . import __version__
from .channel import (
    RNG_ALGORITHM,
    Deterministic,
    LinkBudget,
    Nakagami,
    Rayleigh,
    Rician,
    lognormal_power,
)
from .errors import BudgetExceeded, DomainError, InsufficientData, NumericalFailure, UnsupportedOperation
from .mcsim import DEFAULT_SAMPLE_BUDGET, SimConfig, empirical_cf, linearity_stats, simulate_service
from .queue import QueueConfig, run_fluid_queue, summarize
from .service_rate import service_rate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_BUDGET = 0, 2, 3, 4

LOG2E = 1.0 / math.log(2.0)
PAPER_SETUP = "paper-setup.json"

MODELS = ("rayleigh", "nakagami", "rician", "awgn", "lognormal")
PHYSICAL_KEYS = ("pr_db", "pt_dbw", "n0_w_per_hz", "d_m", "alpha")

# key -> type; file values and flags share these names
CONFIG_KEYS = {
    "model": str,
    "m": float,
    "k": float,
    "sigma": float,
    "rho": float,
    "pr_db": float,
    "pt_dbw": float,
    "w_hz": float,
    "n0_w_per_hz": float,
    "d_m": float,
    "alpha": float,
    "delta_tau_s": float,
    "horizon_s": float,
    "rounds": int,
    "checkpoints": int,
    "seed": int,
    "sample_budget": int,
    "source_rate": float,
    "utilization": float,
    "initial_backlog": float,
    "record_every": int,
    "settle_s": float,
    "sweep_param": str,
    "grid": list,
    "lambda_ct": list,
}

DEFAULTS = {
    "model": "rayleigh",
    "w_hz": 1000.0,
    "delta_tau_s": 1e-5,
    "horizon_s": 1.0,
    "rounds": 100,
    "checkpoints": 100,
    "seed": 2012,
    "sample_budget": DEFAULT_SAMPLE_BUDGET,
    "initial_backlog": 0.0,
    "settle_s": 0.1,
    "lambda_ct": [0.0, 0.1, 1.0, 10.0],
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Unit conversions
# ---------------------------------------------------------------------------

def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbw_to_watts(dbw: float) -> float:
    return 10.0 ** (dbw / 10.0)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _coerce(key, value):
    kind = CONFIG_KEYS[key]
    if value is None:
        return None
    try:
        if kind is list:
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split() if v]
            return [float(v) for v in value]
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot read {value!r} as {kind.__name__}") from None


def load_config_file(path) -> dict:
    """Read a flat JSON config.  Keys starting with '_' are comments.

    A JSON output of this tool (with its ``"config"`` member) is accepted too.
    """
    p = Path(path)
    if not p.exists() and p.name in (PAPER_SETUP, "paper-setup"):
        text = resources.files("fading_service").joinpath("data", PAPER_SETUP).read_text()
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if isinstance(raw, dict) and isinstance(raw.get("config"), dict):
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in raw.items():
        if key.startswith("_"):
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(file_cfg: dict, flag_cfg: dict) -> dict:
    """Merge defaults, file values and flags (highest precedence last).

    A composite ``rho`` and the physical link fields exclude each other; when
    one of them is given on the command line, the other is dropped from the file.
    """
    file_cfg = {k: v for k, v in file_cfg.items() if v is not None}
    flag_cfg = {k: v for k, v in flag_cfg.items() if v is not None}
    if "rho" in flag_cfg:
        for key in PHYSICAL_KEYS:
            file_cfg.pop(key, None)
    if any(key in flag_cfg for key in PHYSICAL_KEYS):
        file_cfg.pop("rho", None)
    cfg = dict(DEFAULTS)
    cfg.update(file_cfg)
    cfg.update(flag_cfg)
    if "rho" in cfg and any(key in cfg for key in PHYSICAL_KEYS):
        raise ConfigError("give either rho or the physical link fields, not both")
    if cfg["model"] not in MODELS:
        raise ConfigError(f"model must be one of {', '.join(MODELS)}, got {cfg['model']!r}")
    return cfg


def build_link(cfg: dict) -> LinkBudget:
    if "rho" in cfg:
        return LinkBudget.from_rho(cfg["rho"], cfg["w_hz"])
    if "n0_w_per_hz" not in cfg:
        raise ConfigError("specify --rho or the link budget including --n0 (or --config paper-setup.json)")
    return LinkBudget(
        pt_watts=dbw_to_watts(cfg.get("pt_dbw", 0.0)),
        n0_w_per_hz=cfg["n0_w_per_hz"],
        w_hz=cfg["w_hz"],
        d_meters=cfg.get("d_m", 1.0),
        alpha=cfg.get("alpha", 0.0),
        pr=db_to_linear(cfg.get("pr_db", 0.0)),
    )


def build_model(cfg: dict, link: LinkBudget):
    name = cfg["model"]
    if name == "nakagami":
        if "m" not in cfg:
            raise ConfigError("model nakagami needs --m (m must be >= 0.5)")
        return Nakagami(cfg["m"])
    if name == "rician":
        if "k" not in cfg:
            raise ConfigError("model rician needs --k")
        return Rician(cfg["k"])
    if name == "lognormal":
        return lognormal_power(cfg.get("sigma", 1.0), link.pr)
    if name == "awgn":
        return Deterministic()
    return Rayleigh()


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _emit(args, files: dict, stdout_text: str):
    """Write ``files`` under --out (if given) and print ``stdout_text``."""
    if args.out:
        for name, text in files.items():
            atomic_write(Path(args.out) / name, text)
    sys.stdout.write(stdout_text)


def _rate_dict(res):
    d = asdict(res)
    d["c_star_bits"] = res.c_star_bits
    return d


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_rate(args, cfg):
    link = build_link(cfg)
    model = build_model(cfg, link)
    res = service_rate(model, link)
    w = link.w_hz
    payload = {"rate": _rate_dict(res), "rho": link.rho, "config": cfg}
    text = (
        f"model        {cfg['model']}\n"
        f"rho          {link.rho!r}\n"
        f"method       {res.method}\n"
        f"c*           {res.c_star!r} nats/s\n"
        f"c*           {res.c_star_bits!r} bits/s\n"
        f"bounds       [{w * res.lower_bound_a!r}, {w * res.upper_bound!r}] nats/s\n"
        f"error est.   {res.abs_error_estimate!r} nats/s\n"
    )
    if args.format == "json":
        text = _json(payload)
    elif args.format == "csv":
        text = "c_star_nats,c_star_bits,lower_nats,upper_nats,method,abs_error\n" + ",".join(
            [repr(res.c_star), repr(res.c_star_bits), repr(w * res.lower_bound_a), repr(w * res.upper_bound),
             res.method, repr(res.abs_error_estimate)]
        ) + "\n"
    _emit(args, {"rate.json": _json(payload)}, text)
    return EXIT_OK


def _sim_config(cfg):
    return SimConfig(
        delta_tau_s=cfg["delta_tau_s"],
        horizon_s=cfg["horizon_s"],
        rounds=cfg["rounds"],
        base_seed=cfg["seed"],
        checkpoints=cfg["checkpoints"],
        sample_budget=cfg["sample_budget"],
    )


def cmd_simulate(args, cfg):
    link = build_link(cfg)
    model = build_model(cfg, link)
    scfg = _sim_config(cfg)
    rate = service_rate(model, link)
    trace = simulate_service(model, link, scfg, threads=args.threads)
    stats = linearity_stats(trace, rate.c_star)
    payload = asdict(stats)
    payload.update(
        slope_rel_error=stats.slope_rel_error,
        rate_method=rate.method,
        rng_algorithm=RNG_ALGORITHM,
        config=cfg,
    )
    csv_text = trace.to_csv()
    if args.format == "csv":
        text = csv_text
    elif args.format == "json":
        text = _json(payload)
    else:
        text = (
            f"c*              {rate.c_star!r} nats/s ({rate.method})\n"
            f"mean S(T)/T     {stats.mean_final / scfg.horizon_s!r} nats/s\n"
            f"max_dev_ratio   {stats.max_dev_ratio!r}\n"
            f"slope_fit       {stats.slope_fit!r} nats/s (relative error {stats.slope_rel_error:.3e})\n"
            f"intercept_fit   {stats.intercept_fit!r} nats\n"
            f"r_squared       {stats.r_squared!r}\n"
        )
    _emit(args, {"trace.csv": csv_text, "stats.json": _json(payload)}, text)
    return EXIT_OK


def cmd_queue(args, cfg):
    link = build_link(cfg)
    model = build_model(cfg, link)
    rate = service_rate(model, link)
    if "source_rate" in cfg and "utilization" in cfg:
        raise ConfigError("give either source_rate or utilization, not both")
    if "source_rate" in cfg:
        r = cfg["source_rate"]
    elif "utilization" in cfg:
        r = cfg["utilization"] * rate.c_star
    else:
        raise ConfigError("queue needs --source-rate or --utilization")
    qcfg = QueueConfig(
        source_rate_r=r,
        horizon_s=cfg["horizon_s"],
        delta_tau_s=cfg["delta_tau_s"],
        initial_backlog=cfg["initial_backlog"],
        record_every=cfg.get("record_every"),
        sample_budget=cfg["sample_budget"],
    )
    trace = run_fluid_queue(model, link, qcfg, cfg["seed"])
    summary = summarize(trace, cfg["settle_s"])
    payload = summary.to_dict()
    payload.update(
        source_rate_r=r,
        c_star=rate.c_star,
        utilization=r / rate.c_star if rate.c_star > 0 else None,
        rng_algorithm=RNG_ALGORITHM,
        config=cfg,
    )
    csv_text = trace.to_csv()
    if args.format == "csv":
        text = csv_text
    elif args.format == "json":
        text = _json(payload)
    else:
        text = (
            f"R               {r!r} nats/s (c* = {rate.c_star!r})\n"
            f"max backlog     {summary.max_backlog!r} nats "
            f"({summary.max_backlog_after_settle!r} after t={summary.settle_s})\n"
            f"mean delay      {summary.mean_delay!r} s ({summary.censored_count} censored)\n"
            f"growth slope    {summary.growth_slope!r} nats/s\n"
        )
    _emit(args, {"queue.csv": csv_text, "queue_summary.json": _json(payload)}, text)
    return EXIT_OK


def cmd_sweep(args, cfg):
    param = cfg.get("sweep_param")
    grid = cfg.get("grid")
    if param not in ("m", "k", "rho"):
        raise ConfigError("sweep needs --param m, k or rho")
    if not grid:
        raise ConfigError("sweep grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sweep grid must be sorted ascending")
    rows = []
    if param == "rho":
        base = {k: v for k, v in cfg.items() if k not in PHYSICAL_KEYS}
        for value in grid:
            link = LinkBudget.from_rho(value, cfg["w_hz"])
            model = build_model(dict(base, rho=value), link)
            rows.append(("rho", value, service_rate(model, link), link.w_hz))
        for value in grid:
            link = LinkBudget.from_rho(value, cfg["w_hz"])
            rows.append(("awgn", value, service_rate(Deterministic(), link), link.w_hz))
    else:
        link = build_link(cfg)
        for value in grid:
            model = Nakagami(value) if param == "m" else Rician(value)
            rows.append((param, value, service_rate(model, link), link.w_hz))
        rows.append(("awgn", math.inf, service_rate(Deterministic(), link), link.w_hz))
    lines = ["param,value,c_star_nats,lower_nats,upper_nats,method"]
    for name, value, res, w in rows:
        lines.append(",".join([name, repr(float(value)), repr(res.c_star), repr(w * res.lower_bound_a),
                               repr(w * res.upper_bound), res.method]))
    csv_text = "\n".join(lines) + "\n"
    swept = [res.c_star for name, _, res, _ in rows if name == param]
    monotone = all(b >= a for a, b in zip(swept, swept[1:]))
    note = f"c* nondecreasing in {param}: {'yes' if monotone else 'no'}\n"
    text = csv_text if args.format in ("csv", None) else _json({"rows": lines, "monotone": monotone, "config": cfg})
    _emit(args, {"sweep.csv": csv_text}, text)
    sys.stderr.write(note)
    return EXIT_OK


def cmd_cf_check(args, cfg):
    link = build_link(cfg)
    model = build_model(cfg, link)
    scfg = _sim_config(cfg)
    rate = service_rate(model, link)
    trace = simulate_service(model, link, scfg, threads=args.threads)
    target = rate.c_star * scfg.horizon_s
    if target == 0.0 and any(cfg["lambda_ct"]):
        raise ConfigError("lambda_ct grid needs c* > 0; use lambda_ct = [0] for a zero-rate link")
    lambdas = [v / target if v else 0.0 for v in cfg["lambda_ct"]]
    result = empirical_cf(trace.finals, rate.c_star, scfg.horizon_s, lambdas)
    lines = ["lambda,lambda_ct,deviation"]
    for ct, (lam, dev) in zip(cfg["lambda_ct"], result):
        lines.append(f"{lam!r},{ct!r},{dev!r}")
    csv_text = "\n".join(lines) + "\n"
    payload = {
        "c_star": rate.c_star,
        "rows": [{"lambda": lam, "lambda_ct": ct, "deviation": dev} for ct, (lam, dev) in zip(cfg["lambda_ct"], result)],
        "rng_algorithm": RNG_ALGORITHM,
        "config": cfg,
    }
    text = _json(payload) if args.format == "json" else csv_text
    _emit(args, {"cf.csv": csv_text, "cf.json": _json(payload)}, text)
    return EXIT_OK


COMMANDS = {
    "rate": cmd_rate,
    "simulate": cmd_simulate,
    "queue": cmd_queue,
    "sweep": cmd_sweep,
    "cf-check": cmd_cf_check,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run")
    g.add_argument("--config", help="flat JSON config; 'paper-setup.json' loads the bundled setup")
    g.add_argument("--out", help="directory for CSV/JSON outputs")
    g.add_argument("--seed", type=int)
    g.add_argument("--format", choices=("csv", "json"), help="stdout format (default: text summary)")
    g.add_argument("--threads", type=int, default=1, help="worker threads for rounds (results do not depend on it)")

    g = p.add_argument_group("link")
    g.add_argument("--rho", type=float, help="mean SNR scale, linear (bypasses the physical fields)")
    g.add_argument("--pr-db", dest="pr_db", type=float)
    g.add_argument("--pt-dbw", dest="pt_dbw", type=float)
    g.add_argument("--w-hz", dest="w_hz", type=float)
    g.add_argument("--n0", dest="n0_w_per_hz", type=float, help="noise PSD in W/Hz")
    g.add_argument("--d-m", dest="d_m", type=float)
    g.add_argument("--alpha", type=float)

    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODELS)
    g.add_argument("--m", type=float)
    g.add_argument("--k", type=float)
    g.add_argument("--sigma", type=float, help="lognormal log-std")

    g = p.add_argument_group("simulation")
    g.add_argument("--delta-tau", dest="delta_tau_s", type=float)
    g.add_argument("--horizon", dest="horizon_s", type=float)
    g.add_argument("--rounds", type=int)
    g.add_argument("--checkpoints", type=int)
    g.add_argument("--sample-budget", dest="sample_budget", type=int)
    return p


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="fading-service", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("rate", parents=[common], help="service rate c* and its bounds")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo S(t) and linearity statistics")

    q = sub.add_parser("queue", parents=[common], help="fluid FIFO queue driven by the channel")
    q.add_argument("--source-rate", dest="source_rate", type=float, help="R in nats/s")
    q.add_argument("--utilization", type=float, help="R as a fraction of c*")
    q.add_argument("--initial-backlog", dest="initial_backlog", type=float)
    q.add_argument("--record-every", dest="record_every", type=int)
    q.add_argument("--settle", dest="settle_s", type=float, help="ignore backlog before this time in max_backlog_after_settle")

    s = sub.add_parser("sweep", parents=[common], help="c* over a grid of m, K or rho")
    s.add_argument("--param", dest="sweep_param", choices=("m", "k", "rho"))
    s.add_argument("--grid", help="comma-separated ascending values")

    c = sub.add_parser("cf-check", parents=[common], help="empirical characteristic function of S(T)")
    c.add_argument("--lambda-ct", dest="lambda_ct", help="comma-separated values of lambda*c*T")
    return parser


_NOT_CONFIG = {"command", "config", "out", "format", "threads"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = load_config_file(args.config) if args.config else {}
        flags = {k: _coerce(k, v) for k, v in vars(args).items() if k not in _NOT_CONFIG and v is not None}
        cfg = resolve_config(file_cfg, flags)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, DomainError, InsufficientData, UnsupportedOperation) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (NumericalFailure, OverflowError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except BudgetExceeded as exc:
        sys.stderr.write(f"refused: {exc}\n")
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
