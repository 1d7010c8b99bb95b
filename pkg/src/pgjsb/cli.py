"""Command-line front end.

Every subcommand writes a single artifact (CSV with ``# key: value`` header
lines, or one JSON document) to ``--out`` or stdout.  Exit codes: 0 success,
1 input or configuration error, 2 model non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .data import DataError, Dataset, load_dataset
from .diagnostics import SCHEMES, TARGETS, case_deletion_rc, local_influence, residual_report
from .kernel import KERNELS, LINKS
from .regression import VARIANTS, FitOptions, ModelSpec, fit, predict_quantile, quantile_scan, wald_table
from .simulation import DEFAULT_SAMPLE_SIZES, StudyConfig, default_cells, run_study, truth_for

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
FLOAT_FORMAT = "%.10g"

# Hard defaults, applied after the command line and any --config file.
DEFAULTS = {
    "variant": "rpgjsb1",
    "q": 0.5,
    "kernel": "logistic",
    "link": "logit",
    "seed": 0,
    "format": "csv",
    "quantile_covariates": [],
    "scale_covariates": [],
    "max_restarts": 100,
}


class ConfigError(ValueError):
    """Bad command-line or config-file input."""


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def fmt_float(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return FLOAT_FORMAT % v


def _round10(v):
    """Value as it reads back from the 10-significant-digit text form."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if not math.isfinite(v) else float(FLOAT_FORMAT % v)
    if isinstance(v, dict):
        return {k: _round10(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round10(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_round10(x) for x in v.tolist()]
    return v


def _meta_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_meta_value(x) for x in v)
    if isinstance(v, (float, np.floating)) and not isinstance(v, bool):
        return fmt_float(v)
    return str(v)


@dataclass
class Artifact:
    """Output of one subcommand: metadata, named tables and the exit code."""

    command: str
    config: dict
    meta: dict
    tables: dict
    exit_code: int = EXIT_OK

    def _echo(self) -> dict:
        # where the artifact is written is not part of the run's inputs
        return {k: v for k, v in self.config.items() if k != "out"}

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "config": _round10(self._echo()),
            "results": _round10(self.meta),
            "tables": {name: _frame_records(df) for name, df in self.tables.items()},
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        head = [f"# command: {self.command}"]
        head += [f"# config.{k}: {_meta_value(v)}" for k, v in self._echo().items() if v is not None]
        head += [f"# {k}: {_meta_value(v)}" for k, v in self.meta.items()]
        parts = ["\n".join(head) + "\n"]
        for i, (name, df) in enumerate(self.tables.items()):
            if len(self.tables) > 1:
                parts.append(("\n" if i else "") + f"# table: {name}\n")
            parts.append(df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
        return "".join(parts)

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _frame_records(df: pd.DataFrame) -> list:
    return [{k: _round10(v) for k, v in row.items()} for row in df.to_dict(orient="records")]


def read_csv_artifact(text: str) -> tuple[dict, dict]:
    """Parse an emitted CSV back into (metadata, {table name: DataFrame})."""
    import io

    meta, blocks, name, lines = {}, {}, "main", []
    for line in text.splitlines():
        if line.startswith("# table: "):
            if lines:
                blocks[name] = lines
            name, lines = line[len("# table: "):], []
        elif line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif line.strip():
            lines.append(line)
    if lines:
        blocks[name] = lines
    tables = {k: pd.read_csv(io.StringIO("\n".join(v)), float_precision="round_trip")
              for k, v in blocks.items()}
    return meta, tables


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _csv_list(text) -> list:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    return [t.strip() for t in str(text).split(",") if t.strip()]


def parse_q_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` inclusive of ``hi`` up to rounding."""
    try:
        lo, hi, step = (float(t) for t in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"--q-grid expects lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise ConfigError("--q-grid needs step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = np.round(lo + step * np.arange(count), 10)
    _check_q(grid)
    return grid


def _check_q(q):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(~((q > 0.0) & (q < 1.0))):
        raise ConfigError("q values must lie strictly inside (0, 1)")


def _common(p: argparse.ArgumentParser, data=True):
    p.add_argument("--config", help="JSON file whose keys mirror the long options")
    if data:
        p.add_argument("--example", action="store_true",
                       help="use the bundled synthetic mortality dataset and its model config")
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--response", help="response column, values strictly inside (0, 1)")
        p.add_argument("--quantile-covariates", help="comma-separated columns for the quantile submodel")
        p.add_argument("--scale-covariates", help="comma-separated columns for the scale submodel")
        p.add_argument("--q", type=float, help="quantile level in (0, 1)")
        p.add_argument("--max-restarts", type=int, help="random restarts after the zero start")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--kernel", choices=KERNELS)
    p.add_argument("--link", choices=LINKS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgjsb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("fit", help="fit one model and write the Wald table"))

    p = sub.add_parser("scan", help="AIC/BIC over a grid of q for both variants")
    _common(p)
    p.add_argument("--q-grid", help="lo:hi:step, e.g. 0.05:0.95:0.05")

    _common(sub.add_parser("residuals", help="quantile residuals and four normality tests"))

    p = sub.add_parser("influence", help="local-influence index data and case deletion")
    _common(p)
    p.add_argument("--scheme", help=f"comma list from {SCHEMES} or 'all'")
    p.add_argument("--target", help=f"comma list from {TARGETS} or 'all'")
    p.add_argument("--drop", type=int, help="1-based row to delete for RC/RCSE")

    p = sub.add_parser("curves", help="fitted quantile curves over a covariate sweep")
    _common(p)
    p.add_argument("--levels", help="comma-separated quantile levels")
    p.add_argument("--sweep", nargs=4, metavar=("COLUMN", "LO", "HI", "STEPS"))
    p.add_argument("--at", help="fixed covariate values, e.g. cont=America,surface=10")

    p = sub.add_parser("simulate", help="Monte-Carlo recovery study")
    _common(p, data=False)
    p.add_argument("--cell", action="append", help="kernel,link,q (repeatable)")
    p.add_argument("--n", help="comma-separated sample sizes")
    p.add_argument("--reps", type=int)
    p.add_argument("--all-paper-cells", dest="all_cells", action="store_true", default=None,
                   help="every built-in truth cell at each --n")
    p.add_argument("--workers", type=int)
    p.add_argument("--max-restarts", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge command line over --config (or --example) over defaults."""
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "example", "verbose")}
    file_cfg, base = {}, None
    if getattr(args, "example", False):
        base = Path(str(resources.files("pgjsb") / "data"))
        file_cfg = json.loads((base / "covid_example.json").read_text(encoding="utf-8"))
    if args.config:
        path = Path(args.config)
        try:
            extra = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(extra, dict):
            raise ConfigError("config file must hold a JSON object")
        file_cfg.update(extra)
        base = path.parent
    for key, value in file_cfg.items():
        key = key.replace("-", "_")
        if cfg.get(key) is None:
            cfg[key] = value
    if base is not None and isinstance(file_cfg.get("data"), str) and args.data is None:
        data = Path(file_cfg["data"])
        cfg["data"] = str(data if data.is_absolute() else base / data)
    defaults = dict(DEFAULTS)
    if cfg.get("command") == "simulate":
        defaults["seed"] = StudyConfig.seed
    for key, value in defaults.items():
        if key in cfg and cfg[key] is None:
            cfg[key] = value
    for key in ("quantile_covariates", "scale_covariates", "levels"):
        if key in cfg and cfg[key] is not None:
            cfg[key] = _csv_list(cfg[key])
    if cfg.get("variant") not in VARIANTS:
        raise ConfigError(f"unknown variant {cfg.get('variant')!r}")
    if cfg.get("kernel") not in KERNELS:
        raise ConfigError(f"unknown kernel {cfg.get('kernel')!r}")
    if cfg.get("link") not in LINKS:
        raise ConfigError(f"unknown link {cfg.get('link')!r}")
    if "q" in cfg:
        _check_q(cfg["q"])
    return cfg


def _load(cfg: dict) -> Dataset:
    if not cfg.get("data"):
        raise ConfigError("--data is required (or use --example)")
    if not cfg.get("response"):
        raise ConfigError("--response is required")
    return load_dataset(cfg["data"], cfg["response"], cfg["quantile_covariates"], cfg["scale_covariates"])


def _spec(cfg: dict, ds: Dataset, q=None, variant=None) -> ModelSpec:
    return ModelSpec(variant or cfg["variant"], cfg["q"] if q is None else q, cfg["kernel"], cfg["link"],
                     ds.X, ds.Z, ds.x_design.names, ds.z_design.names)


def _options(cfg: dict) -> FitOptions:
    return FitOptions(max_restarts=int(cfg["max_restarts"]), seed=int(cfg["seed"]))


def _fit_meta(res) -> dict:
    return {"n": res.n, "variant": res.variant, "q": res.q, "loglik": res.loglik, "aic": res.aic,
            "bic": res.bic, "alpha": res.alpha, "converged": res.converged,
            "restarts_used": res.restarts_used, "message": res.message}


def _wald_frame(res) -> pd.DataFrame:
    out = wald_table(res).reset_index()
    out["parameter"] = [("quantile:" if j < len(res.theta_hat.beta) else "scale:") + nm
                        if nm != "log_alpha" else nm for j, nm in enumerate(out["parameter"])]
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(cfg: dict) -> Artifact:
    ds = _load(cfg)
    spec = _spec(cfg, ds)
    res = fit(spec, ds.y, _options(cfg))
    code = EXIT_OK if res.converged else EXIT_NONCONVERGED
    return Artifact("fit", cfg, _fit_meta(res), {"wald": _wald_frame(res)}, code)


def cmd_scan(cfg: dict) -> Artifact:
    if not cfg.get("q_grid"):
        raise ConfigError("scan needs --q-grid lo:hi:step")
    grid = parse_q_grid(cfg["q_grid"])
    ds = _load(cfg)
    table = quantile_scan(_spec(cfg, ds, q=float(grid[0])), ds.y, grid, options=_options(cfg))
    table["converged"] = table["converged"].astype(bool)
    ok = int(table["converged"].sum())
    meta = {"n": ds.y.size, "cells": len(table), "cells_converged": ok}
    return Artifact("scan", cfg, meta, {"scan": table}, EXIT_OK if ok else EXIT_NONCONVERGED)


def cmd_residuals(cfg: dict) -> Artifact:
    ds = _load(cfg)
    spec = _spec(cfg, ds)
    res = fit(spec, ds.y, _options(cfg))
    meta = _fit_meta(res)
    if not res.converged:
        return Artifact("residuals", cfg, meta, {}, EXIT_NONCONVERGED)
    rep = residual_report(res, spec, ds.y)
    meta.update({f"p_{k}": v for k, v in rep.test_pvalues.items()})
    meta["n_clamped"] = rep.n_clamped
    table = pd.DataFrame({"index": np.arange(1, ds.y.size + 1), "residual": rep.residuals})
    return Artifact("residuals", cfg, meta, {"residuals": table})


def _choices(text, allowed, default) -> list:
    items = _csv_list(text) or [default]
    if items == ["all"]:
        return list(allowed)
    bad = [s for s in items if s not in allowed]
    if bad:
        raise ConfigError(f"unknown choice(s) {bad}; expected {allowed} or 'all'")
    return items


def cmd_influence(cfg: dict) -> Artifact:
    schemes = _choices(cfg.get("scheme"), SCHEMES, "case_weight")
    targets = _choices(cfg.get("target"), TARGETS, "theta")
    ds = _load(cfg)
    spec = _spec(cfg, ds)
    drop = cfg.get("drop")
    if drop is not None and not 1 <= int(drop) <= ds.y.size:
        raise ConfigError(f"--drop must be a row number in 1..{ds.y.size}")
    res = fit(spec, ds.y, _options(cfg))
    meta = _fit_meta(res)
    if not res.converged:
        return Artifact("influence", cfg, meta, {}, EXIT_NONCONVERGED)
    frames = []
    for scheme in schemes:
        for target in targets:
            rep = local_influence(res, spec, ds.y, scheme=scheme, target=target)
            df = rep.to_frame()
            df.insert(0, "target", target)
            df.insert(0, "scheme", scheme)
            frames.append(df)
    tables = {"influence": pd.concat(frames, ignore_index=True)}
    code = EXIT_OK
    if drop is not None:
        rc = case_deletion_rc(res, spec, ds.y, int(drop) - 1, _options(cfg))
        meta["drop"] = int(drop)
        meta["drop_converged"] = bool(rc.attrs.get("converged", False))
        tables["case_deletion"] = rc.reset_index()
        if not meta["drop_converged"]:
            code = EXIT_NONCONVERGED
    return Artifact("influence", cfg, meta, tables, code)


def _parse_at(text) -> dict:
    if text is None:
        return {}
    if isinstance(text, dict):
        return dict(text)
    out = {}
    for item in _csv_list(text):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--at expects column=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def cmd_curves(cfg: dict) -> Artifact:
    try:
        levels = np.array([float(v) for v in (cfg.get("levels") or ["0.05", "0.25", "0.5", "0.75", "0.95"])])
    except ValueError:
        raise ConfigError("--levels must be numbers") from None
    _check_q(levels)
    levels = np.sort(levels)
    sweep = cfg.get("sweep")
    if not sweep or len(sweep) != 4:
        raise ConfigError("curves needs --sweep COLUMN LO HI STEPS")
    column = str(sweep[0])
    try:
        lo, hi, steps = float(sweep[1]), float(sweep[2]), int(sweep[3])
    except ValueError:
        raise ConfigError("--sweep LO HI must be numbers and STEPS an integer") from None
    if steps < 1:
        raise ConfigError("--sweep STEPS must be >= 1")
    ds = _load(cfg)
    frame = ds.frame
    if column not in frame.columns:
        raise DataError(f"unknown sweep column {column!r}; available: {list(frame.columns)}")
    if not pd.api.types.is_numeric_dtype(frame[column]):
        raise ConfigError(f"sweep column {column!r} is not numeric")
    at = _parse_at(cfg.get("at"))
    for key in at:
        if key not in frame.columns:
            raise DataError(f"unknown --at column {key!r}")
    grid = np.linspace(lo, hi, steps)
    new = pd.DataFrame({column: grid})
    used = dict.fromkeys(t.column for t in (*ds.x_design.terms, *ds.z_design.terms))
    for col in used:
        if col == column:
            continue
        if col in at:
            value = at[col]
            if pd.api.types.is_numeric_dtype(frame[col]):
                try:
                    value = float(value)
                except ValueError:
                    raise ConfigError(f"--at {col} needs a number") from None
        elif pd.api.types.is_numeric_dtype(frame[col]):
            value = float(frame[col].mean())
        else:
            value = str(frame[col].astype(str).iloc[0])
        new[col] = value
    spec = _spec(cfg, ds)
    res = fit(spec, ds.y, _options(cfg))
    meta = _fit_meta(res)
    meta["sweep_column"] = column
    meta.update({f"at.{k}": (v if isinstance(v, str) else float(v)) for k, v in new.iloc[0].items() if k != column})
    if not res.converged:
        return Artifact("curves", cfg, meta, {}, EXIT_NONCONVERGED)
    Xn, Zn = ds.x_design.matrix(new), ds.z_design.matrix(new)
    quant = predict_quantile(res, spec, Xn, levels, Zn)
    table = pd.DataFrame({
        "sweep": np.repeat(grid, levels.size),
        "level": np.tile(levels, grid.size),
        "quantile": quant.ravel(),
    })
    return Artifact("curves", cfg, meta, {"curves": table})


def _parse_cell(text: str) -> tuple:
    parts = [t.strip() for t in str(text).split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--cell expects kernel,link,q; got {text!r}")
    kernel, link, q = parts
    if kernel not in KERNELS or link not in LINKS:
        raise ConfigError(f"invalid cell {text!r}")
    try:
        q = float(q)
    except ValueError:
        raise ConfigError(f"invalid q in cell {text!r}") from None
    _check_q(q)
    return kernel, link, q


def cmd_simulate(cfg: dict) -> Artifact:
    reps = int(cfg.get("reps") or 1000)
    if reps < 1:
        raise ConfigError("--reps must be >= 1")
    seed = int(cfg["seed"])
    ns = [int(v) for v in (_csv_list(cfg.get("n")) or [str(v) for v in DEFAULT_SAMPLE_SIZES])]
    kw = dict(replicates=reps, seed=seed, variant=cfg["variant"], parallel_workers=cfg.get("workers"),
              max_restarts=int(cfg["max_restarts"]))
    if cfg.get("all_cells"):
        configs = default_cells(tuple(ns), **kw)
    else:
        cells = cfg.get("cell") or []
        if isinstance(cells, str):
            cells = [cells]
        if not cells:
            raise ConfigError("simulate needs --cell kernel,link,q or --all-paper-cells")
        configs = []
        for text in cells:
            kernel, link, q = _parse_cell(text)
            try:
                truth_for(kernel, link, q)
            except KeyError as exc:
                raise ConfigError(str(exc.args[0])) from None
            configs += [StudyConfig(kernel, link, q, n, **kw) for n in ns]
    frames = []
    for c in configs:
        rep = run_study(c)
        df = rep.to_frame()
        df["replicates_used"] = rep.replicates_used
        df["replicates_failed"] = rep.replicates_failed
        df["se1_missing"] = rep.se1_missing
        frames.append(df)
    table = pd.concat(frames, ignore_index=True)
    meta = {"cells": len(configs), "replicates": reps, "seed": seed}
    return Artifact("simulate", cfg, meta, {"simulation": table})


COMMANDS = {
    "fit": cmd_fit,
    "scan": cmd_scan,
    "residuals": cmd_residuals,
    "influence": cmd_influence,
    "curves": cmd_curves,
    "simulate": cmd_simulate,
}


def run(argv=None) -> tuple[int, Optional[Artifact]]:
    """Parse, execute and write; returns the exit code and the artifact."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_INPUT), None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        artifact = COMMANDS[args.command](cfg)
    except (ConfigError, DataError, ValueError, KeyError) as exc:
        print(f"pgjsb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT, None
    text = artifact.render(cfg["format"])
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if artifact.exit_code == EXIT_NONCONVERGED:
        print(f"pgjsb {args.command}: model did not converge", file=sys.stderr)
    return artifact.exit_code, artifact


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
