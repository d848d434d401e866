"""Command-line front end.

Every command reads one config (``--config`` or the pinned ``--reference``),
writes its artifacts under the output directory and prints a short summary.
Exit status: 0 on success, 1 when a checked contract fails, 2 on errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import drawback_report
from .config import COMMANDS, RunConfig, load_config, parse_config, reference_document
from .errors import ConfigError, HoLeeError
from .lattice import (
    RECOMBINE_TOL,
    build_lattice,
    lattice_records,
    short_rate_records,
    simulate_paths,
    verify_recombination,
)
from .model import (
    NO_ARBITRAGE_TOL,
    PORTFOLIO_TOL,
    TELESCOPING_TOL,
    max_hedge_residual,
    max_portfolio_residual,
    verify_no_arbitrage,
    verify_telescoping,
)
from .pricing import mc_price, price_european

U64_MAX = 2**64 - 1


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else f"{float(x):.15g}"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if not math.isfinite(x) else float(f"{x:.15g}")
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_table(path: Path, columns, rows, kind: str) -> Path:
    """Write rows as ``<path>.csv`` or ``<path>.json`` (a list of records)."""
    rows = list(rows)
    if kind == "json":
        out = path.with_suffix(".json")
        write_json(out, [dict(zip(columns, r)) for r in rows])
        return out
    out = path.with_suffix(".csv")
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return out


def _need(value, what: str, command: str):
    if value is None:
        raise ConfigError(f"command {command!r} needs {what} in the config")
    return value


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig, out: Path, kind: str) -> int:
    checks = [
        ("no_arbitrage", verify_no_arbitrage(cfg.model), NO_ARBITRAGE_TOL),
        ("telescoping", verify_telescoping(cfg.model), TELESCOPING_TOL),
        ("portfolio_identity", max_portfolio_residual(cfg.model), PORTFOLIO_TOL),
        ("hedge_ratio", max_hedge_residual(cfg.model, cfg.curve.values), PORTFOLIO_TOL),
        (
            "recombination",
            verify_recombination(cfg.curve, cfg.model, cfg.recombination_depth),
            RECOMBINE_TOL,
        ),
    ]
    rows = [(name, res, tol, "pass" if res < tol else "fail") for name, res, tol in checks]
    write_table(out / "verify", ("check", "residual", "tolerance", "status"), rows, kind)
    for name, res, tol, status in rows:
        print(f"{name:<20} {fmt(res):>24}  < {fmt(tol):<8} {status}")
    return 0 if all(r[3] == "pass" for r in rows) else 1


def _lattice(cfg: RunConfig, command: str):
    depth = _need(cfg.lattice_depth, "a lattice block", command)
    return build_lattice(cfg.curve, cfg.model, depth)


def cmd_lattice(cfg: RunConfig, out: Path, kind: str) -> int:
    lat = _lattice(cfg, "lattice")
    path = write_table(out / "lattice", ("step", "ups", "maturity", "price"), lattice_records(lat), kind)
    print(f"lattice depth {lat.depth}: {sum(len(b) for b in lat.curves)} nodes -> {path}")
    return 0


def cmd_shortrates(cfg: RunConfig, out: Path, kind: str) -> int:
    lat = _lattice(cfg, "shortrates")
    cols = ("step", "ups", "rate_per_period", "rate_annualized")
    path = write_table(out / "shortrates", cols, short_rate_records(lat), kind)
    print(f"short rates to depth {lat.depth} -> {path}")
    return 0


def cmd_price(cfg: RunConfig, out: Path, kind: str, seed: int | None) -> int:
    claim = _need(cfg.claim, "a claim block", "price")
    n_paths = _need(cfg.mc_paths, "an mc block", "price")
    seed = _need(seed, "a seed", "price")
    m_e, _ = claim.steps(cfg.grid)
    lattice_value = price_european(build_lattice(cfg.curve, cfg.model, m_e), claim)
    estimate, se = mc_price(cfg.curve, cfg.model, claim, n_paths, seed)
    z = abs(estimate - lattice_value) / se if se > 0 else (0.0 if estimate == lattice_value else math.inf)
    report = {
        "claim": claim.describe(),
        "lattice_price": lattice_value,
        "mc_estimate": estimate,
        "mc_standard_error": se,
        "mc_paths": n_paths,
        "seed": seed,
        "z_score": z,
    }
    if kind == "json":
        write_json(out / "price.json", report)
    else:
        cols = sorted(report)
        write_table(out / "price", cols, [[report[c] for c in cols]], kind)
    print(f"{report['claim']}")
    print(f"lattice {fmt(lattice_value)}  mc {fmt(estimate)} +/- {fmt(se)}  (|z| = {z:.3f})")
    return 0


def cmd_simulate(cfg: RunConfig, out: Path, kind: str, seed: int | None) -> int:
    n_paths, horizon = _need(cfg.simulate, "a simulate block", "simulate")
    seed = _need(seed, "a seed", "simulate")
    paths = simulate_paths(cfg.model, horizon, n_paths, seed)
    ups = np.cumsum(paths, axis=1, dtype=np.int64)
    steps = np.arange(1, horizon + 1)
    p = cfg.model.p.at_steps(steps)
    rows = []
    for k in range(horizon):
        frac = float(paths[:, k].mean())
        rows.append((int(steps[k]), float(p[k]), frac, float(ups[:, k].mean()), float(ups[:, k].var())))
    cols = ("step", "p", "up_fraction", "mean_ups", "var_ups")
    path = write_table(out / "simulate", cols, rows, kind)
    print(f"simulated {n_paths} paths over {horizon} steps (seed {seed}) -> {path}")
    return 0


def cmd_asymptotics(cfg: RunConfig, out: Path, kind: str) -> int:
    a = _need(cfg.asymptotics, "an asymptotics block", "asymptotics")
    report = drawback_report(cfg.curve, a.classical, a.extended, a.depth)
    write_table(out / "drawback", report.COLUMNS, report.rows(), kind)
    verdicts = {k: v.as_dict() for k, v in report.verdicts.items()}
    windows = {
        f"{mode.lower()}_{path_type}": {"lo": r.window[0], "hi": r.window[1], "truncated": r.truncated}
        for (mode, path_type), r in report.reports.items()
    }
    write_json(
        out / "verdicts.json",
        {"depth": a.depth, "verdicts": verdicts, "windows": windows, "contract_holds": report.contract_holds},
    )
    series = []
    for (mode, path_type), r in sorted(report.reports.items()):
        for step, rate, bond, f_inf in r.records():
            series.append((mode, path_type, step, rate, bond, f_inf))
    write_table(out / "series", ("mode", "path", "step", "rate", "bond", "f_inf"), series, kind)
    for name, v in report.verdicts.items():
        print(f"{name:<18} {v}")
    print(f"contract {'holds' if report.contract_holds else 'FAILS'}")
    return 0 if report.contract_holds else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an integer") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed {value} outside [0, 2**64 - 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holee-lattice", description="Ho-Lee lattice engine with time-dependent parameters.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON run configuration")
    src.add_argument("--reference", action="store_true", help="use the pinned reference configuration")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=_seed, help="random seed (overrides the config)")
    parser.add_argument("--format", choices=("csv", "json"), help="table format (overrides the config)")
    return parser


def run_command(cfg: RunConfig, command: str, out: Path | None = None, seed: int | None = None, kind: str | None = None) -> int:
    out = _need(out or cfg.out_dir, "an output directory (output block or --out)", command)
    kind = _need(kind or cfg.fmt, "an output format (output block or --format)", command)
    seed = cfg.seed if seed is None else seed
    out.mkdir(parents=True, exist_ok=True)
    if command == "verify":
        return cmd_verify(cfg, out, kind)
    if command == "lattice":
        return cmd_lattice(cfg, out, kind)
    if command == "shortrates":
        return cmd_shortrates(cfg, out, kind)
    if command == "price":
        return cmd_price(cfg, out, kind, seed)
    if command == "simulate":
        return cmd_simulate(cfg, out, kind, seed)
    if command == "asymptotics":
        return cmd_asymptotics(cfg, out, kind)
    raise ConfigError(f"unknown command {command!r}")


def _error(exc: Exception) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("step", "node", "spread"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    print(json.dumps(_jsonable(payload), sort_keys=True), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(reference_document(), Path.cwd()) if args.reference else load_config(args.config)
        return run_command(cfg, args.command, args.out, args.seed, args.format)
    except (HoLeeError, ValueError, ArithmeticError, OSError) as exc:
        return _error(exc)


if __name__ == "__main__":
    sys.exit(main())
