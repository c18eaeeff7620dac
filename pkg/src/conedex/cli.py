"""Command line runner: `conedex <command> [MODEL] [options]`."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import indicial
from .catalog import CATALOG, get_model
from .index import (ChiSpec, channel_index_sum, grading_invariance_check, hybrid_index,
                    transition_additivity, verify_identities)
from .model import SIDES, ModelError, RadialOperator, from_config, validate_assumptions
from .spectral import (IndeterminateIndex, SpectralError, SweepAborted, TolPolicy, WeightedGrid, WeightError,
                       alpha_sweep, nullspace_asymptotics, numerical_index, v0_spectrum)

EXIT_OK, EXIT_IDENTITY, EXIT_INDETERMINATE, EXIT_CONFIG = 0, 2, 3, 4
COMMANDS = ("models", "bspec", "defect", "index", "sweep", "nullspace", "verify", "transition", "channels")
DEFAULT_TAUS = (1e-3, 1e-2, 1e-1, 0.5)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: str | dict | None = None
    params: dict = field(default_factory=dict)
    alphas: list = field(default_factory=list)
    taus: list = field(default_factory=lambda: list(DEFAULT_TAUS))
    grid_nodes: int = 1200
    grid_decades: float = 4.0
    tol_gap: float = 1e3
    seed: int = 0
    kappa_max: int = 6
    coupling: float = 1.0
    jobs: int = 1

    def grid(self) -> WeightedGrid:
        return WeightedGrid(self.grid_nodes, self.grid_decades)

    def tol(self) -> TolPolicy:
        return TolPolicy(gap=self.tol_gap)

    def operator(self) -> RadialOperator:
        if self.model is None:
            raise ConfigError("no model given (positional MODEL, --model or --config)")
        if isinstance(self.model, dict):
            return from_config(self.model)
        return get_model(self.model, **self.params)

    def echo(self) -> dict:
        return {"model": self.model, "params": self.params, "alphas": self.alphas, "taus": self.taus,
                "grid_nodes": self.grid_nodes, "grid_decades": self.grid_decades, "tol_gap": self.tol_gap,
                "seed": self.seed, "kappa_max": self.kappa_max, "coupling": self.coupling}


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conedex", description="Weighted index computations for radial Callias-type operators.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("model_pos", nargs="?", metavar="MODEL", help="built-in model name")
    p.add_argument("--model", help="built-in model name")
    p.add_argument("--config", type=Path, help="JSON experiment config or model config")
    p.add_argument("--alpha", type=float, action="append", help="weight (repeatable)")
    p.add_argument("--alphas", type=_floats, help="comma separated weights")
    p.add_argument("--tau-list", type=_floats, help="comma separated deformation parameters")
    p.add_argument("--grid-nodes", type=int)
    p.add_argument("--grid-decades", type=float)
    p.add_argument("--tol-gap", type=float)
    p.add_argument("--kappa-max", type=int)
    p.add_argument("--coupling", type=float, help="potential strength c for channels")
    p.add_argument("--jobs", type=int, help="parallel jobs for sweeps")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    return p


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "clifford" in raw:
            cfg.model = raw
        else:
            known = {"model", "params", "alphas", "taus", "grid_nodes", "grid_decades", "tol_gap", "seed",
                     "kappa_max", "coupling", "jobs"}
            extra = set(raw) - known
            if extra:
                raise ConfigError(f"unknown config keys: {sorted(extra)}")
            for k, v in raw.items():
                setattr(cfg, k, v)
    name = args.model or args.model_pos
    if name is not None:
        cfg.model = name
    if args.alpha:
        cfg.alphas = list(args.alpha)
    if args.alphas:
        cfg.alphas = list(args.alphas)
    for attr, val in (("taus", args.tau_list), ("grid_nodes", args.grid_nodes), ("grid_decades", args.grid_decades),
                      ("tol_gap", args.tol_gap), ("seed", args.seed), ("kappa_max", args.kappa_max),
                      ("coupling", args.coupling), ("jobs", args.jobs)):
        if val is not None:
            setattr(cfg, attr, val)
    return cfg


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x + 0.0 if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _require_alphas(cfg: ExperimentConfig, single: bool = False) -> list[float]:
    if not cfg.alphas:
        raise ConfigError("this command needs --alpha or --alphas")
    if single and len(cfg.alphas) != 1:
        raise ConfigError("this command takes exactly one --alpha")
    return [float(a) for a in cfg.alphas]


# -- commands: each returns (results, table rows or None, checks) -------------


def cmd_models(cfg):
    rows = [{"name": e.name, "summary": e.summary, "params": json.dumps(e.params, sort_keys=True)}
            for e in CATALOG.values()]
    return {"models": [{"name": e.name, "summary": e.summary, "params": e.params} for e in CATALOG.values()]}, rows, []


def cmd_bspec(cfg):
    P = cfg.operator()
    spec = v0_spectrum(P)
    out = {}
    rows = []
    for side in SIDES:
        out[side] = [{"root": r.value, "order": r.order, "nullity": r.nullity, "multiplicity": r.multiplicity}
                     for r in spec.roots if r.side == side]
        rows += [dict(side=side, **d) for d in out[side]]
    return {"model": P.name, "roots": out, "symmetric": spec.is_symmetric()}, rows, []


def cmd_defect(cfg):
    P = cfg.operator()
    spec = v0_spectrum(P)
    rows = [{"alpha": a, "defect": indicial.defect(spec, a)} for a in _require_alphas(cfg)]
    return {"model": P.name, "defect": rows}, rows, []


def cmd_index(cfg):
    P = cfg.operator()
    reports = []
    for a in _require_alphas(cfg):
        rep = numerical_index(P, cfg.grid(), a, cfg.tol())
        d = rep.as_dict()
        d["breakdown"] = hybrid_index(P, a).as_dict()
        reports.append(d)
    rows = [{k: d[k] for k in ("alpha", "dim_ker", "dim_coker", "index", "gap_ratio", "grid_nodes")} for d in reports]
    return {"model": P.name, "reports": reports}, rows, []


def cmd_sweep(cfg):
    P = cfg.operator()
    res = alpha_sweep(P, _require_alphas(cfg), cfg.grid(), cfg.tol(), jobs=cfg.jobs)
    rows = [r.as_dict() for r in res.rows]
    checks = [{"name": f"ledger[{a1:g},{a2:g}]", "passed": ok, "drop": d, "ledger": led}
              for a1, a2, d, led, ok in res.ledger_checks()]
    checks += [{"name": f"antisymmetry[{a:g}]", "passed": ok, "index": i, "mirror": j}
               for a, i, j, ok in res.antisymmetry_checks()]
    return {"model": P.name, "rows": rows}, rows, checks


def cmd_nullspace(cfg):
    P = cfg.operator()
    (a,) = _require_alphas(cfg, single=True)
    rep = nullspace_asymptotics(P, cfg.grid(), a, cfg.tol())
    fits = [f.__dict__ for f in rep.fits]
    return {"model": P.name, "alpha": a, "dim_ker": rep.dim_ker, "fits": fits, "filtration": rep.filtration,
            "expected": rep.expected}, fits, []


def cmd_verify(cfg):
    P = cfg.operator()
    checks = [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in validate_assumptions(P).checks]
    for c in verify_identities(P, _require_alphas(cfg), cfg.grid(), cfg.tol()):
        checks.append({"name": c.name, "passed": c.passed, **c.detail})
    g = grading_invariance_check(P, np.random.default_rng(cfg.seed))
    checks.append({"name": g.name, "passed": g.passed, **g.detail})
    rows = [{"name": c["name"], "passed": c["passed"]} for c in checks]
    return {"model": P.name}, rows, checks


def cmd_transition(cfg):
    P = cfg.operator()
    (a,) = _require_alphas(cfg, single=True)
    rep = transition_additivity(P, a, cfg.taus, cfg.grid(), cfg.tol(), chis=(ChiSpec(2.0), ChiSpec(1.0)))
    checks = [{"name": n, "passed": ok, "detail": d} for n, ok, d in rep.checks]
    rows = [{"chi_tau": k, "index": v} for k, v in rep.tau_indices.items()]
    return {"model": P.name, "alpha": a, "tau_indices": rep.tau_indices, "ind_zf": rep.ind_zf,
            "ind_tf": rep.ind_tf, "ind_tf_components": rep.ind_tf_components, "jump": rep.jump}, rows, checks


def cmd_channels(cfg):
    rep = channel_index_sum(cfg.kappa_max, cfg.coupling, 0.0, cfg.grid(), cfg.tol())
    rows = [r.as_dict() for r in rep.rows]
    checks = [{"name": f"channel[{r.kappa}]", "passed": r.index == r.boundary_index} for r in rep.rows]
    checks.append({"name": "weighted-sum", "passed": rep.weighted_sum == rep.boundary_sum,
                   "weighted_sum": rep.weighted_sum, "boundary_sum": rep.boundary_sum})
    return {"kappa_max": cfg.kappa_max, "rows": rows, "weighted_sum": rep.weighted_sum,
            "boundary_sum": rep.boundary_sum}, rows, checks


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}
CSV_DEFAULT = {"defect", "sweep"}


def render(command: str, cfg: ExperimentConfig, results: dict, rows, checks: list, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        rows = _plain(rows or [])
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in r.items()})
        return buf.getvalue()
    report = {"command": command, "config": cfg.echo(), "results": results, "checks": checks,
              "passed": all(c["passed"] for c in checks)}
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def run(command: str, cfg: ExperimentConfig, fmt: str | None = None) -> tuple[int, str]:
    fmt = fmt or ("csv" if command in CSV_DEFAULT else "json")
    results, rows, checks = HANDLERS[command](cfg)
    text = render(command, cfg, results, rows, checks, fmt)
    code = EXIT_OK if all(c["passed"] for c in checks) else EXIT_IDENTITY
    if command == "verify" and not checks:
        code = EXIT_IDENTITY
    return code, text


def _error(kind: str, exc: Exception, extra: dict | None = None) -> str:
    return json.dumps(_plain({"error": kind, "message": str(exc), **(extra or {})}), sort_keys=True)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args)
        code, text = run(args.command, cfg, args.format)
    except (ConfigError, ModelError, WeightError, indicial.IndicialError) as exc:
        print(_error("config", exc), file=sys.stderr)
        return EXIT_CONFIG
    except SweepAborted as exc:
        print(_error("indeterminate", exc, {"partial": [r.as_dict() for r in exc.partial]}), file=sys.stderr)
        return EXIT_INDETERMINATE
    except IndeterminateIndex as exc:
        print(_error("indeterminate", exc, {"diagnostics": exc.diagnostics}), file=sys.stderr)
        return EXIT_INDETERMINATE
    except SpectralError as exc:
        print(_error("indeterminate", exc), file=sys.stderr)
        return EXIT_INDETERMINATE
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    # wall time goes to stderr so that reports stay byte-identical across runs
    print(f"{args.command}: exit {code}, {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
