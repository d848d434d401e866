"""Run configuration: JSON loading, strict schema validation, curve CSV ingestion."""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError, OffGridError
from .lattice import DiscountCurve
from .model import (
    PHYSICAL,
    ConstantScale,
    Convention,
    LinearScale,
    ModelParams,
    ProbSchedule,
    SaturatingScale,
    TableEta,
    TableScale,
    TimeGrid,
    TruncatedGeometricEta,
    UniformEta,
    classical_model,
    recombining_eta,
)
from .pricing import Claim

COMMANDS = ("verify", "lattice", "shortrates", "price", "simulate", "asymptotics")
DEFAULT_RECOMBINATION_DEPTH = 10

# Pinned setup for the classical-versus-extended demonstration (--reference).
REFERENCE = {
    "grid": {"dt": 1.0, "n_steps": 20},
    "model": {
        "mode": "extended",
        "eta": {"family": "recombining"},
        "scale": {"family": "saturating", "c_inf": 0.4, "tau": 5.0},
        "q": 0.5,
        "p": 0.5,
        "convention": "time_to_maturity",
    },
    "curve": {"flat_yield": 0.05},
    "lattice": {"depth": 10},
    "verify": {"recombination_depth": 10},
    "claim": {"kind": "zcb_call", "exercise": 2.0, "maturity": 4.0, "strike": math.exp(-0.1)},
    "mc": {"n_paths": 200000},
    "simulate": {"n_paths": 100000, "horizon": 10},
    "asymptotics": {
        "depth": 500,
        "classical": {"mode": "classical", "q": 0.5, "delta": 0.99, "p": 0.5},
        "extended": {
            "mode": "extended",
            "eta": {"family": "uniform"},
            "scale": {"family": "saturating", "c_inf": 0.4, "tau": 5.0},
            "q": 0.5,
            "p": 0.5,
            "convention": "time_to_maturity",
        },
    },
    "seed": 20240229,
    "output": {"dir": "holee-out", "format": "csv"},
}


@dataclass(frozen=True)
class AsymptoticsConfig:
    depth: int
    classical: ModelParams
    extended: ModelParams


@dataclass(frozen=True, eq=False)
class RunConfig:
    grid: TimeGrid
    model: ModelParams
    curve: DiscountCurve
    lattice_depth: int | None = None
    recombination_depth: int = DEFAULT_RECOMBINATION_DEPTH
    claim: Claim | None = None
    mc_paths: int | None = None
    simulate: tuple[int, int] | None = None  # (n_paths, horizon)
    asymptotics: AsymptoticsConfig | None = None
    seed: int | None = None
    out_dir: Path | None = None
    fmt: str | None = None


def schema() -> dict:
    text = resources.files("holee_lattice").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _where(path) -> str:
    parts = [f"[{p}]" if isinstance(p, int) else f".{p}" for p in path]
    return "".join(parts).lstrip(".") or "<root>"


def _validate_schema(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        raise ConfigError(f"{_where(err.absolute_path)}: {err.message}")


def _probs(value, role: str) -> ProbSchedule:
    return ProbSchedule(tuple(value) if isinstance(value, list) else (value,), role)


def _scale(block: dict):
    family = block["family"]
    if family == "constant":
        return ConstantScale(block["c"])
    if family == "linear":
        return LinearScale(block["kappa"])
    if family == "saturating":
        return SaturatingScale(block["c_inf"], block["tau"])
    return TableScale(tuple(block["values"]))


def _eta(block: dict, scale, grid: TimeGrid):
    family = block["family"]
    if family == "uniform":
        return UniformEta()
    if family == "truncated_geometric":
        return TruncatedGeometricEta(block["rho"])
    if family == "recombining":
        return recombining_eta(scale, grid)
    return TableEta(tuple(tuple(row) for row in block["pmf"]))


def build_model(block: dict, grid: TimeGrid, where: str = "model") -> ModelParams:
    try:
        if block["mode"] == "classical":
            return classical_model(block["q"], block["delta"], grid, p=_probs(block["p"], PHYSICAL).values)
        scale = _scale(block["scale"])
        return ModelParams(
            grid=grid,
            eta=_eta(block["eta"], scale, grid),
            scale=scale,
            q=_probs(block["q"], "risk_neutral"),
            p=_probs(block["p"], PHYSICAL),
            convention=Convention(block["convention"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_curve_csv(path, grid: TimeGrid) -> DiscountCurve:
    """Read a ``maturity,discount`` CSV that covers every grid maturity once.

    B(0,0) = 1 is prepended when the file omits maturity 0.  No interpolation.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read curve file {path}: {exc.strerror}") from exc
    values: dict[int, float] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["maturity", "discount"]:
            raise ConfigError(f"{path}: header must be 'maturity,discount'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                maturity, discount = float(row[0]), float(row[1])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: malformed number ({exc})") from exc
            if not (math.isfinite(discount) and discount > 0):
                raise ConfigError(f"{path}:{lineno}: discount {row[1].strip()} must be positive")
            try:
                k = grid.step(maturity, "maturity")
            except OffGridError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            if k in values:
                raise ConfigError(f"{path}:{lineno}: maturity {maturity:g} listed twice")
            values[k] = discount
    values.setdefault(0, 1.0)
    missing = [k for k in range(grid.n_steps + 1) if k not in values]
    if missing:
        raise ConfigError(f"{path}: no discount for maturity {grid.time(missing[0]):g}")
    try:
        return DiscountCurve(grid, [values[k] for k in range(grid.n_steps + 1)])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a config document and build every model object it names."""
    _validate_schema(doc)
    try:
        grid = TimeGrid(doc["grid"]["dt"], doc["grid"]["n_steps"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    model = build_model(doc["model"], grid)

    curve_block = doc["curve"]
    if "csv" in curve_block:
        curve = load_curve_csv(base_dir / curve_block["csv"], grid)
    else:
        curve = DiscountCurve.flat(grid, curve_block["flat_yield"])

    lattice_depth = None
    if "lattice" in doc:
        lattice_depth = doc["lattice"]["depth"]
        if lattice_depth > grid.n_steps:
            raise ConfigError(f"lattice.depth: {lattice_depth} exceeds grid n_steps {grid.n_steps}")

    recombination_depth = min(DEFAULT_RECOMBINATION_DEPTH, grid.n_steps)
    if "verify" in doc:
        recombination_depth = doc["verify"]["recombination_depth"]
        if recombination_depth > grid.n_steps:
            raise ConfigError(f"verify.recombination_depth: {recombination_depth} exceeds grid n_steps {grid.n_steps}")

    claim = None
    if "claim" in doc:
        c = doc["claim"]
        try:
            claim = Claim(c["kind"], c["exercise"], c.get("maturity"), c["strike"])
            claim.steps(grid)
        except ValueError as exc:
            raise ConfigError(f"claim: {exc}") from exc

    simulate = None
    if "simulate" in doc:
        s = doc["simulate"]
        if s["horizon"] > grid.n_steps:
            raise ConfigError(f"simulate.horizon: {s['horizon']} exceeds grid n_steps {grid.n_steps}")
        simulate = (s["n_paths"], s["horizon"])

    asym = None
    if "asymptotics" in doc:
        a = doc["asymptotics"]
        asym = AsymptoticsConfig(
            a["depth"],
            build_model(a["classical"], grid, "asymptotics.classical"),
            build_model(a["extended"], grid, "asymptotics.extended"),
        )

    out = doc.get("output", {})
    return RunConfig(
        grid=grid,
        model=model,
        curve=curve,
        lattice_depth=lattice_depth,
        recombination_depth=recombination_depth,
        claim=claim,
        mc_paths=doc["mc"]["n_paths"] if "mc" in doc else None,
        simulate=simulate,
        asymptotics=asym,
        seed=doc.get("seed"),
        out_dir=base_dir / out["dir"] if "dir" in out else None,
        fmt=out.get("format"),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(doc, path.parent)


def reference_document() -> dict:
    return copy.deepcopy(REFERENCE)
