"""Command-line front end: scenario configs, sweeps, exports.

Subcommands
-----------
list                 registered families and their parameters
sweep  CONFIG        full diagnostic sweep -> CSV (and optional JSON) report
green  CONFIG --epsilon E   Green-matrix grid tabulation -> CSV
solve  CONFIG --epsilon E   solution trace -> CSV
check  CONFIG        characteristic determinants per eps

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure (degenerate problem, integrator breakdown).

The JSON config schema is documented in the README; all numeric output is
written with 17 significant digits and newline line endings, so identical
configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, asdict

import numpy as np

from . import linalg
from .bvp import (NonUniqueError, SingularBoundaryError, VerificationError,
                  green_matrix, solve_bvp, green_grid_csv, tabulation_grid,
                  _characteristic)
from .families import REGISTRY, build_scenario, registry_list
from .ode import Interval, StepUnderflowError, DEFAULT_TOL
from .sweep import run_sweep

__all__ = ["ConfigError", "ScenarioConfig", "run", "main"]

_NUMERIC_ERRORS = (NonUniqueError, SingularBoundaryError, VerificationError,
                   StepUnderflowError, linalg.SingularMatrixError)


class ConfigError(ValueError):
    """Config validation failure, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ScenarioConfig:
    """Parsed, normalized scenario configuration (JSON round-trippable)."""

    family: str
    name: str = ""
    params: dict = field(default_factory=dict)
    interval: tuple[float, float] | None = None
    epsilons: tuple[float, ...] | None = None
    tol: float = DEFAULT_TOL
    sup_grid: int = 2001
    green_grid: int = 201
    out: str | None = None
    json_out: str | None = None

    def __post_init__(self):
        if not self.name:
            self.name = self.family

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"family", "name", "params", "interval", "epsilons", "tol",
                 "sup_grid", "green_grid", "out", "json_out",
                 "boundary", "f", "c"}
        for k in d:
            if k not in known:
                raise ConfigError(k, "unknown config field")
        fam = d.get("family")
        if isinstance(fam, dict):
            name = fam.get("name")
            params = fam.get("params", {})
        else:
            name, params = fam, d.get("params", {})
        if not isinstance(name, str) or not name:
            raise ConfigError("family", "expected a family name string")
        if name not in REGISTRY:
            raise ConfigError("family",
                              f"unknown family '{name}' (known: {', '.join(sorted(REGISTRY))})")
        if not isinstance(params, dict):
            raise ConfigError("family.params", "expected an object")
        params = dict(params)
        # top-level boundary / f / c shorthands feed the family parameters
        for key in ("boundary", "f", "c"):
            if key in d:
                params[key] = d[key]
        interval = None
        if "interval" in d:
            iv = d["interval"]
            if (not isinstance(iv, (list, tuple)) or len(iv) != 2
                    or not all(isinstance(x, (int, float)) for x in iv)):
                raise ConfigError("interval", "expected [a, b] with numbers")
            interval = (float(iv[0]), float(iv[1]))
            if not interval[0] < interval[1]:
                raise ConfigError("interval", "requires a < b")
        epsilons = None
        if "epsilons" in d:
            eps = d["epsilons"]
            if (not isinstance(eps, (list, tuple)) or not eps
                    or not all(isinstance(x, (int, float)) and x > 0 for x in eps)):
                raise ConfigError("epsilons", "expected a list of positive numbers")
            epsilons = tuple(float(x) for x in eps)
            if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
                raise ConfigError("epsilons", "must be strictly decreasing")
        def _num(key, default, kind, cond, what):
            v = d.get(key, default)
            if not isinstance(v, (int, float)) or not cond(v):
                raise ConfigError(key, what)
            return kind(v)
        tol = _num("tol", DEFAULT_TOL, float, lambda v: 1e-12 <= v <= 1e-2,
                   "expected a number in [1e-12, 1e-2]")
        sup_grid = _num("sup_grid", 2001, int, lambda v: v >= 2,
                        "expected an integer >= 2")
        green_grid = _num("green_grid", 201, int, lambda v: v >= 2,
                          "expected an integer >= 2")
        for key in ("out", "json_out", "name"):
            if key in d and not isinstance(d[key], str):
                raise ConfigError(key, "expected a string")
        return cls(family=name, name=d.get("name", ""), params=params,
                   interval=interval, epsilons=epsilons, tol=tol,
                   sup_grid=sup_grid, green_grid=green_grid,
                   out=d.get("out"), json_out=d.get("json_out"))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = None if self.interval is None else list(self.interval)
        d["epsilons"] = None if self.epsilons is None else list(self.epsilons)
        return {k: v for k, v in d.items() if v not in (None, {})}

    def build(self):
        try:
            iv = None if self.interval is None else Interval(*self.interval)
            return build_scenario(self.family, self.params, interval=iv,
                                  epsilons=self.epsilons, tol=self.tol,
                                  sup_grid=self.sup_grid, green_grid=self.green_grid)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from exc


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(path, f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(data)


def _member(scenario, eps: float):
    return scenario.baseline if eps == 0 else scenario.family(eps)


def _cmd_list(_args) -> int:
    for spec in registry_list():
        print(f"{spec.name}: {spec.summary}")
        for key, doc in spec.params_doc.items():
            print(f"    {key}: {doc}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.tol is not None:
        cfg.tol = args.tol
    scenario = cfg.build()
    report = run_sweep(scenario, jobs=args.jobs)
    out = args.out or cfg.out or f"{cfg.name}_report.csv"
    report.to_csv(out)
    print(f"wrote {out} ({len(report.rows)} rows)")
    json_out = args.json or cfg.json_out
    if json_out:
        report.to_json(json_out)
        print(f"wrote {json_out}")
    for key in sorted(report.trends):
        print(f"trend {key}: {report.trends[key]}")
    bad = [r for r in report.rows if r.status != "ok"]
    for r in bad:
        print(f"epsilon {r.epsilon:g}: {r.status}", file=sys.stderr)
    return 0


def _cmd_green(args) -> int:
    cfg = load_config(args.config)
    if args.tol is not None:
        cfg.tol = args.tol
    scenario = cfg.build()
    p = _member(scenario, args.epsilon)
    G = green_matrix(p.A, p.U, p.interval, cfg.tol)
    n = args.grid or cfg.green_grid
    pts = tabulation_grid(p.interval, n, avoid=p.U.atom_locations.tolist())
    out = args.out or cfg.out or f"{cfg.name}_green.csv"
    with open(out, "w", newline="") as fh:
        fh.write(green_grid_csv(G, pts, pts))
    print(f"wrote {out} ({n}x{n} grid)")
    return 0


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.tol is not None:
        cfg.tol = args.tol
    scenario = cfg.build()
    p = _member(scenario, args.epsilon)
    y = solve_bvp(p, cfg.tol)
    n = args.grid or 1001
    ts = p.interval.grid(n)
    vals = y.eval_many(ts)
    header = ["t"]
    for i in range(1, p.dim + 1):
        header += [f"y_{i}_re", f"y_{i}_im"]
    lines = [",".join(header)]
    for t, row in zip(ts, vals):
        cells = [f"{t:.17g}"]
        for z in row:
            cells += [f"{z.real:.17g}", f"{z.imag:.17g}"]
        lines.append(",".join(cells))
    out = args.out or cfg.out or f"{cfg.name}_solution.csv"
    with open(out, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {out} ({n} points)")
    return 0


def _cmd_check(args) -> int:
    cfg = load_config(args.config)
    if args.tol is not None:
        cfg.tol = args.tol
    scenario = cfg.build()
    print("epsilon,det_re,det_im")
    d0 = scenario.baseline_det
    print(f"0,{d0.real:.17g},{d0.imag:.17g}")
    for eps in scenario.epsilons:
        p = scenario.family(eps)
        _, _, _, d = _characteristic(p.A, p.U, p.interval, cfg.tol)
        print(f"{eps:.17g},{d.real:.17g},{d.imag:.17g}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvpgreen",
        description="Boundary value problems, Green matrices and "
                    "parameter-convergence sweeps for linear ODE systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="show registered families").set_defaults(fn=_cmd_list)

    def common(p):
        p.add_argument("config", help="path to a JSON scenario config")
        p.add_argument("--tol", type=float, default=None, help="integration tolerance")
        p.add_argument("--out", default=None, help="output file path")

    p = sub.add_parser("sweep", help="run the full diagnostic sweep")
    common(p)
    p.add_argument("--json", default=None, help="also write a JSON report")
    p.add_argument("--jobs", type=int, default=1, help="parallel rows")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("green", help="tabulate the Green matrix on a grid")
    common(p)
    p.add_argument("--epsilon", type=float, required=True,
                   help="family parameter (0 selects the baseline)")
    p.add_argument("--grid", type=int, default=None, help="grid points per axis")
    p.set_defaults(fn=_cmd_green)

    p = sub.add_parser("solve", help="solve one member and trace the solution")
    common(p)
    p.add_argument("--epsilon", type=float, required=True,
                   help="family parameter (0 selects the baseline)")
    p.add_argument("--grid", type=int, default=None, help="trace points")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("check", help="characteristic determinants per epsilon")
    common(p)
    p.set_defaults(fn=_cmd_check)
    return parser


def run(argv=None) -> int:
    """Programmatic entry point; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
