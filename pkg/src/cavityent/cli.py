"""Command-line front end.

    cavityent steady   --scenario closed_n2 --pi 0.04 --k 1
    cavityent sweep    --scenario closed_n2 --csv grid.csv --svg grid.svg
    cavityent maximize --seed 7 --json best.json
    cavityent evolve   --scenario open_pi_pulse --t-max 20 --csv trace.csv

Settings come from built-in defaults, then an optional ``--config`` JSON file,
then flags. Exit codes: 0 ok, 1 runtime/IO failure, 2 invalid input,
3 optimizer budget exhausted.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis
from .analysis import OptimizerBudgetError, make_scenario, run_scenario
from .kinetics import DegenerateSteadyStateError, build_rate_matrix, evolve
from .dressed import build_ladder
from .svg import heatmap_svg

log = logging.getLogger("cavityent")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3
SIG_DIGITS = 12
CSV_HEADER = ("pi", "k", "p_g", "p_s1", "p_s2", "p_oprime2", "script_c", "concurrence")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "closed_n2"
    gamma: float = 1.0
    gamma21: float | None = None
    gamma23: float | None = None
    pi: float = 1.0
    k: float = 1.0
    g: float = 1.0
    n_max: int | None = None
    leak_mult: dict[int, float] = field(default_factory=dict)
    factor: float = 100.0
    strict_collective_decay: bool = False
    units_of_gamma: bool = False
    pi_range: tuple[float, float] = (0.05, 5.0)
    k_range: tuple[float, float] = (0.05, 5.0)
    resolution: int = 50
    workers: int = 1
    seed: int = 0
    starts: int = 6
    max_iter: int = 4000
    t_max: float = 20.0
    steps: int = 201
    json: str | None = None
    csv: str | None = None
    svg: str | None = None
    svg_field: str = "script_c"

    def validate(self) -> "RunConfig":
        if self.scenario not in analysis.SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        rates = [self.gamma, self.pi, self.k, self.gamma21, self.gamma23,
                 *self.pi_range, *self.k_range]
        if any(r is not None and not r >= 0 for r in rates):
            raise ConfigError("rates must be non-negative")
        if self.resolution < 2:
            raise ConfigError("resolution must be at least 2")
        if self.steps < 2 or self.t_max < 0:
            raise ConfigError("evolve needs steps >= 2 and t_max >= 0")
        if self.svg_field not in ("script_c", "concurrence", "p_g", "p_s1", "p_s2", "p_oprime2"):
            raise ConfigError(f"unknown svg field {self.svg_field!r}")
        return self


# --------------------------------------------------------------------------
# formatting

def fmt(x: float) -> str:
    return format(float(x), f".{SIG_DIGITS}g")


def canonical(obj: Any) -> Any:
    """Round floats to 12 significant digits; NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else None
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory so no partial file is left."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".",
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def print_table(rows: list[tuple[str, Any]], out=None) -> None:
    out = out or sys.stdout
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        if isinstance(v, (float, np.floating)):
            v = fmt(v)
        print(f"{k:<{width}} = {v}", file=out)


# --------------------------------------------------------------------------
# scenario plumbing

def _scenario(cfg: RunConfig):
    gamma = cfg.gamma21 if cfg.gamma21 is not None else cfg.gamma
    gamma23 = cfg.gamma23
    pump, leak = cfg.pi, cfg.k
    if cfg.units_of_gamma:
        pump, leak = pump / gamma, leak / gamma
        gamma23 = None if gamma23 is None else gamma23 / gamma
        gamma = 1.0
    return make_scenario(cfg.scenario, gamma=gamma, pump=pump, leak=leak, gamma23=gamma23,
                         g=cfg.g, n_max=cfg.n_max, leak_multiplier=cfg.leak_mult,
                         factor=cfg.factor, strict_collective_decay=cfg.strict_collective_decay)


def _params_record(p) -> dict:
    rec = {"gamma": p.gamma, "k": p.leak, "pi": p.pump, "g": p.g, "n_max": p.n_max,
           "leak_mult": {str(n): f for n, f in sorted(p.leak_multiplier.items())}}
    if p.gamma23 is not None:
        rec.update(gamma21=p.gamma, gamma23=p.gamma23,
                   strict_collective_decay=p.strict_collective_decay)
    return rec


def cmd_steady(cfg: RunConfig) -> int:
    s = _scenario(cfg)
    res = run_scenario(s)
    sp = res.split
    rows = [("scenario", s.name), *[(k, v) for k, v in _params_record(s.params).items()
                                    if k != "leak_mult"]]
    rows += [("P_g", sp.p_g), ("P_s1", sp.p_s1), ("P_s2", sp.p_s2), ("P_oprime2", sp.p_oprime2),
             ("P_dark", sp.p_dark)]
    if sp.p_33 is not None:
        rows.append(("P_33", sp.p_33))
    for k, v in res.measures.items():
        rows.append((k, "n/a" if v is None else v))
    print_table(rows)
    if cfg.json:
        record = {"command": "steady", "scenario": s.name, "params": _params_record(s.params),
                  "populations": res.steady.as_dict(),
                  "split": {"p_g": sp.p_g, "p_s1": sp.p_s1, "p_s2": sp.p_s2,
                            "p_oprime2": sp.p_oprime2, "p_dark": sp.p_dark, "p_33": sp.p_33},
                  "measures": dict(res.measures)}
        write_atomic(cfg.json, dumps(record))
    return EXIT_OK


def sweep_csv(res: analysis.SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(CSV_HEADER)
    if res.bell_fraction is not None:
        header.append("bell_fraction")
    w.writerow(header)
    for i, row in enumerate(res.rows()):
        line = [fmt(row[h]) for h in CSV_HEADER]
        if res.bell_fraction is not None:
            line.append(fmt(res.bell_fraction.flat[i]))
        w.writerow(line)
    return buf.getvalue()


def cmd_sweep(cfg: RunConfig) -> int:
    if not (cfg.csv or cfg.svg):
        raise ConfigError("sweep needs --csv and/or --svg")
    s = _scenario(cfg)
    res = analysis.sweep(s, tuple(cfg.pi_range), tuple(cfg.k_range), cfg.resolution,
                         workers=cfg.workers)
    if cfg.csv:
        write_atomic(cfg.csv, sweep_csv(res))
    if cfg.svg:
        z = res.script_c if cfg.svg_field == "script_c" else (
            res.concurrence if cfg.svg_field == "concurrence" else res.populations[cfg.svg_field])
        write_atomic(cfg.svg, heatmap_svg(res.pi, res.k, z, title=f"{s.name}: {cfg.svg_field}"))
    finite = res.script_c[np.isfinite(res.script_c)]
    rows = [("scenario", s.name), ("points", res.script_c.size)]
    if finite.size:
        rows += [("max script_c", float(finite.max())),
                 ("max concurrence", float(np.nanmax(res.concurrence)))]
    if res.bell_fraction is not None:
        rows += [("min bell_fraction", float(res.bell_fraction.min())),
                 ("max bell_fraction", float(res.bell_fraction.max()))]
    print_table(rows)
    return EXIT_OK


def _maximize_record(r: analysis.MaximizeResult, cfg: RunConfig) -> dict:
    sp = r.split
    return {"command": "maximize", "seed": cfg.seed,
            "leak_mult": {str(n): f for n, f in sorted(cfg.leak_mult.items())},
            "pi": r.pump, "k": r.leak,
            "split": {"p_g": sp.p_g, "p_s1": sp.p_s1, "p_s2": sp.p_s2, "p_oprime2": sp.p_oprime2},
            "concurrence": r.concurrence, "script_c": r.script_c,
            "at_bound": r.at_bound, "converged": r.converged, "evaluations": r.evaluations}


def _print_maximize(r: analysis.MaximizeResult) -> None:
    sp = r.split
    print_table([("pi", r.pump), ("k", r.leak), ("p_g", sp.p_g), ("p_s1", sp.p_s1),
                 ("p_s2", sp.p_s2), ("p_oprime2", sp.p_oprime2), ("concurrence", r.concurrence),
                 ("script_c", r.script_c), ("at_bound", r.at_bound)])


def cmd_maximize(cfg: RunConfig) -> int:
    gamma = cfg.gamma21 if cfg.gamma21 is not None else cfg.gamma
    try:
        r = analysis.maximize_ps1(1.0 if cfg.units_of_gamma else gamma, seed=cfg.seed,
                                  n_starts=cfg.starts, max_iter=cfg.max_iter,
                                  leak_multiplier=cfg.leak_mult, n_max=cfg.n_max or 2)
    except OptimizerBudgetError as exc:
        print(f"error: {exc}; best so far:", file=sys.stderr)
        _print_maximize(exc.best)
        return EXIT_BUDGET
    _print_maximize(r)
    if cfg.json:
        write_atomic(cfg.json, dumps(_maximize_record(r, cfg)))
    return EXIT_OK


def cmd_evolve(cfg: RunConfig) -> int:
    if not cfg.csv:
        raise ConfigError("evolve needs --csv")
    s = _scenario(cfg)
    m = build_rate_matrix(build_ladder(s.params.n_max, s.params.kind), s.params)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *m.labels])
    for t in np.linspace(0.0, cfg.t_max, cfg.steps):
        p = evolve(m, s.initial, float(t))
        w.writerow([fmt(t), *(fmt(v) for v in p.values)])
    write_atomic(cfg.csv, buf.getvalue())
    print_table([("scenario", s.name), ("rows", cfg.steps), ("csv", cfg.csv)])
    return EXIT_OK


COMMANDS = {"steady": cmd_steady, "sweep": cmd_sweep, "maximize": cmd_maximize,
            "evolve": cmd_evolve}


# --------------------------------------------------------------------------
# argument parsing

def _leak_mult(text: str) -> tuple[int, float]:
    try:
        n, f = text.split(":")
        return int(n), float(f)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MANIFOLD:FACTOR, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with settings; flags override it")
    common.add_argument("--scenario", choices=analysis.SCENARIOS)
    common.add_argument("--gamma", type=float, help="Gamma (closed) or Gamma21")
    common.add_argument("--gamma21", type=float)
    common.add_argument("--gamma23", type=float)
    common.add_argument("--pi", type=float, help="pump rate Pi")
    common.add_argument("--k", type=float, help="cavity leakage K")
    common.add_argument("--g", type=float, help="coupling (diagnostics only)")
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--leak-mult", dest="leak_mult", type=_leak_mult, action="append",
                        metavar="N:FACTOR", help="multiply leakage out of manifold N")
    common.add_argument("--factor", type=float, help="n=2 leak factor for nonlinear_leak")
    common.add_argument("--strict-collective-decay", dest="strict_collective_decay",
                        action="store_true")
    common.add_argument("--units-of-gamma", dest="units_of_gamma", action="store_true",
                        help="divide every rate by Gamma before computing")
    common.add_argument("--json", help="write a JSON record here")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cavityent", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("steady", parents=[common], help="steady state of one scenario")
    sw = sub.add_parser("sweep", parents=[common], help="(Pi, K) grid to CSV/SVG",
                        argument_default=argparse.SUPPRESS)
    sw.add_argument("--pi-range", dest="pi_range", type=float, nargs=2, metavar=("LO", "HI"))
    sw.add_argument("--k-range", dest="k_range", type=float, nargs=2, metavar=("LO", "HI"))
    sw.add_argument("--resolution", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--csv")
    sw.add_argument("--svg")
    sw.add_argument("--svg-field", dest="svg_field")
    mx = sub.add_parser("maximize", parents=[common], help="maximize steady-state P_s1",
                        argument_default=argparse.SUPPRESS)
    mx.add_argument("--seed", type=int)
    mx.add_argument("--starts", type=int)
    mx.add_argument("--max-iter", dest="max_iter", type=int)
    ev = sub.add_parser("evolve", parents=[common], help="transient populations to CSV",
                        argument_default=argparse.SUPPRESS)
    ev.add_argument("--t-max", dest="t_max", type=float)
    ev.add_argument("--steps", type=int)
    ev.add_argument("--csv")
    return p


_FIELDS = {f.name for f in fields(RunConfig)}


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """defaults < --config file < flags; unknown file keys are rejected."""
    values: dict[str, Any] = {}
    path = getattr(ns, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(data)
    flags = {k: v for k, v in vars(ns).items() if k in _FIELDS}
    if "leak_mult" in flags:
        flags["leak_mult"] = dict(flags["leak_mult"])
    values.update(flags)
    if "leak_mult" in values:
        try:
            values["leak_mult"] = {int(n): float(f) for n, f in dict(values["leak_mult"]).items()}
        except (TypeError, ValueError):
            raise ConfigError("leak_mult must map manifold numbers to factors")
    for key in ("pi_range", "k_range"):
        if key in values:
            values[key] = tuple(float(x) for x in values[key])
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(ns)
        return COMMANDS[ns.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, DegenerateSteadyStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
