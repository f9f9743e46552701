"""Command-line front end.

    momentcurve count --k 2 --s 3 --N 64 --out j.csv
    momentcurve exponents --k 4 --verify
    momentcurve whitney --N 2 --emit squares.jsonl

Every output file starts with the generating configuration (a ``# config:``
comment line for CSV, a ``config`` member or first record for JSON/JSONL).
A ``--config`` file of key=value lines overrides built-in defaults;
explicit flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import counting, exponents, geometry, torus, whitney
from .errors import ConvergenceError, ResourceBudgetError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_NONCONVERGED = 4
EXIT_SWEEP_FAILED = 5

FORMATS = ("csv", "json", "jsonl")


class ValidationError(ValueError):
    pass


def parse_int_list(text: str) -> list[int]:
    """'4', '16,32,64' or '4..24' (inclusive)."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return out


def read_config_file(path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, Fraction):
        return str(value)
    return value


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def render(config: dict, rows: list[dict], fmt: str) -> str:
    config = _jsonable(config)
    rows = [_jsonable(r) for r in rows]
    if fmt == "json":
        return json.dumps({"config": config, "rows": rows}, indent=2, sort_keys=True) + "\n"
    if fmt == "jsonl":
        lines = [json.dumps({"config": config}, sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        fields: list[str] = []
        for r in rows:
            fields += [f for f in r if f not in fields]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(v) for k, v in r.items()})
        return buf.getvalue()
    raise ValidationError(f"unknown format {fmt!r}")


def read_config_header(path) -> dict:
    """Recover the generating configuration from an output file."""
    text = Path(path).read_text()
    first = text.splitlines()[0]
    if first.startswith("# config: "):
        return json.loads(first[len("# config: "):])
    try:
        return json.loads(text)["config"]
    except json.JSONDecodeError:
        return json.loads(first)["config"]


def sweep(cells: Iterable, run_cell: Callable[..., list[dict]]) -> tuple[list[dict], int]:
    """Run every cell, isolating failures; returns (rows, number of failed cells)."""
    rows: list[dict] = []
    failed = 0
    for cell in cells:
        try:
            rows.extend(run_cell(cell))
        except (ResourceBudgetError, ConvergenceError, ValueError) as exc:
            failed += 1
            rows.append({**cell, "error": type(exc).__name__, "message": str(exc)})
    return rows, failed


def _weights(source: str, N: int, seed: int) -> torus.WeightSequence:
    if source == "unit":
        return torus.WeightSequence.unit(N)
    if source == "random":
        return torus.WeightSequence.random_phases(N, seed)
    w = torus.WeightSequence.from_csv(source)
    if w.N != N:
        raise ValidationError(f"weights file has N={w.N}, expected {N}")
    return w


# -- command handlers: each returns (rows, status) ---------------------------

def cmd_count(args) -> tuple[list[dict], int]:
    cells = [{"k": k, "s": s, "N": N} for k in args.k for s in args.s for N in args.N]

    def run(cell):
        if args.verify:
            brute = counting.brute_force_count(cell["N"], cell["s"], cell["k"])
        res = counting.vinogradov_count(cell["N"], cell["s"], cell["k"], args.budget)
        row = res.row()
        row["rho"] = res.J / counting.mean_value_bound_shape(res.N, res.s, res.k)
        if args.verify:
            row["brute_force"] = str(brute)
        return [row]

    rows, failed = sweep(cells, run)
    for k in args.k:
        for s in args.s:
            ok = [r for r in rows if r.get("k") == k and r.get("s") == s and "error" not in r]
            if len(ok) >= 2:
                Ns = [r["N"] for r in ok]
                rows.append({"k": k, "s": s, "fit": "slope",
                             "slope_log_J": counting._ls_slope(Ns, [int(r["J"]) for r in ok]),
                             "slope_log_rho": counting._ls_slope(Ns, [r["rho"] for r in ok])})
    return rows, _sweep_status(failed, len(cells))


def _sweep_status(failed: int, total: int) -> int:
    if failed == 0:
        return EXIT_OK
    return EXIT_SWEEP_FAILED if failed == total else EXIT_OK


def cmd_moment(args):
    cells = [{"k": args.k, "s": args.s, "N": N} for N in args.N]

    def run(cell):
        w = _weights(args.weights, cell["N"], args.seed)
        value = torus.exact_moment(args.k, args.s, w, args.method, args.grid_budget, args.budget)
        return [{**cell, "weights": args.weights, "seed": args.seed, "moment": value}]

    rows, failed = sweep(cells, run)
    return rows, _sweep_status(failed, len(cells))


def cmd_ratio(args):
    cells = [{"k": args.k, "N": N} for N in args.N]

    def run(cell):
        w = _weights(args.weights, cell["N"], args.seed)
        rep = torus.decoupling_ratio(args.k, w, args.method, args.grid_budget, args.budget,
                                     seed=args.seed if args.weights == "random" else None)
        return [rep.to_json()]

    rows, failed = sweep(cells, run)
    return rows, _sweep_status(failed, len(cells))


def cmd_growth(args):
    if args.weights not in ("unit", "random"):
        raise ValidationError("growth supports --weights unit or random")
    rep = torus.growth_exponent(args.k, args.N, args.weights, args.seed, args.budget)
    rows = [{"k": args.k, "N": N, "D": D} for N, D in rep.values]
    rows.append({"k": args.k, "fit": "slope", "slope": rep.slope,
                 "weights": args.weights, "seed": rep.seed, "model": torus.MODEL_LABEL})
    return rows, EXIT_OK


def cmd_bilinear(args):
    I = geometry.DyadicInterval(2, args.I)
    Ip = geometry.DyadicInterval(2, args.Ip)
    rows = []
    status = EXIT_OK
    for seed in range(args.seed, args.seed + args.trials):
        w = _weights(args.weights, args.N, seed)
        rep = torus.bilinear_ratio(args.k, args.N, I, Ip, w, args.tol, args.max_doublings,
                                   args.grid_budget,
                                   seed=seed if args.weights == "random" else None)
        rows.append(rep.to_json())
        if not rep.converged:
            status = EXIT_NONCONVERGED
    return rows, status


def cmd_geometry(args):
    rows = []
    for k in args.k:
        for l in range(1, k):
            value = geometry.transversality_value(k, l, 0.0, 1.0)
            const = geometry.transversality_constant(k, l)
            rows.append({"k": k, "l": l, "value": value, "constant": const,
                         "rel_error": abs(value - const) / const,
                         "match": round(value) == const and abs(value - const) <= 1e-9 * const})
    return rows, EXIT_OK


def cmd_whitney(args):
    rows = []
    for N in args.N:
        cover = whitney.whitney_cover(N)
        mult = whitney.multiplicity_report(N)
        rows.append({"N": N, "squares": len(cover), "area": str(whitney.cover_area(cover)),
                     "disjoint": whitney.find_overlap(cover) is None,
                     "max_diag": mult.max_diag,
                     "max_offdiag": max(mult.max_offdiag.values()),
                     "within_bounds": mult.within_bounds()})
    if args.emit:
        records = [sq.record() for sq in whitney.whitney_cover(args.N[-1])]
        config = {"command": args.command, **vars_config(args)}
        Path(args.emit).write_text(render(config, records, "jsonl"))
    return rows, EXIT_OK


def cmd_exponents(args):
    rows = []
    for k in args.k:
        row = exponents.build_system(k).to_json()
        if args.verify:
            res = exponents.verify_cancellation(k)
            row.update(res.to_json())
            row["collinearity_exact"] = all(exponents.holder_check(k, l).ok for l in range(1, k))
            row["eta"] = str(exponents.deduced_eta(k))
        rows.append(row)
    return rows, EXIT_OK


COMMANDS = {
    "count": cmd_count, "moment": cmd_moment, "ratio": cmd_ratio,
    "growth": cmd_growth, "bilinear": cmd_bilinear, "geometry": cmd_geometry,
    "whitney": cmd_whitney, "exponents": cmd_exponents,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentcurve", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key=value file overriding defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=FORMATS, help="default: from --out suffix, else json")
        p.add_argument("--budget", type=int, default=None,
                       help="histogram entry budget (env MOMENTCURVE_BUDGET)")
        # recorded in every output even where nothing is random
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("count", help="exact Vinogradov mean values")
    p.add_argument("--k", type=parse_int_list, required=True)
    p.add_argument("--s", type=parse_int_list, required=True)
    p.add_argument("--N", type=parse_int_list, required=True)
    p.add_argument("--verify", action="store_true", help="also run the brute-force oracle")
    common(p)

    for name, helptext in (("moment", "exact even moments of Weyl sums"),
                           ("ratio", "periodic decoupling ratio")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--k", type=int, required=True)
        if name == "moment":
            p.add_argument("--s", type=int, required=True)
        p.add_argument("--N", type=parse_int_list, required=True)
        p.add_argument("--weights", default="unit", help="unit, random, or a CSV path")
        p.add_argument("--method", default="auto", choices=("auto", "quadrature", "histogram"))
        p.add_argument("--grid-budget", type=int, default=torus.DEFAULT_GRID_BUDGET)
        common(p)

    p = sub.add_parser("growth", help="fitted growth exponent of the decoupling ratio")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--N", type=parse_int_list, required=True)
    p.add_argument("--weights", default="unit", choices=("unit", "random"))
    common(p)

    p = sub.add_parser("bilinear", help="symmetric bilinear ratio for two quarter arcs")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--I", type=int, default=0, help="index of the first arc at level 2")
    p.add_argument("--Ip", type=int, default=2, help="index of the second arc at level 2")
    p.add_argument("--weights", default="random")
    p.add_argument("--trials", type=int, default=1, help="consecutive seeds from --seed")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-doublings", type=int, default=6)
    p.add_argument("--grid-budget", type=int, default=torus.DEFAULT_GRID_BUDGET)
    common(p)

    p = sub.add_parser("geometry", help="transversality constants table")
    p.add_argument("--k", type=parse_int_list, default=parse_int_list("2..8"))
    common(p)

    p = sub.add_parser("whitney", help="Whitney cover checks")
    p.add_argument("--N", type=parse_int_list, required=True)
    p.add_argument("--emit", help="write the squares of the last N as JSONL")
    common(p)

    p = sub.add_parser("exponents", help="exponent system and cancellation")
    p.add_argument("--k", type=parse_int_list, required=True)
    p.add_argument("--verify", action="store_true")
    common(p)
    return parser


def vars_config(args) -> dict:
    skip = {"out", "format", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config_file(known.config)
    command = next((a for a in rest if a in COMMANDS), None)
    sub = parser._subparsers._group_actions[0].choices.get(command) if command else None
    if sub is None:
        return
    dests = {a.dest for a in sub._actions}
    unknown = set(values) - dests
    if unknown:
        raise ValidationError(f"unknown config keys for {command}: {sorted(unknown)}")
    for action in sub._actions:
        if action.dest in values:
            action.required = False
    sub.set_defaults(**{k: v for k, v in values.items()})
    # string defaults pass through type=, except for store_true flags
    for action in sub._actions:
        if isinstance(action, argparse._StoreTrueAction) and action.dest in values:
            sub.set_defaults(**{action.dest: values[action.dest].lower() in ("1", "true", "yes")})


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    if args.budget is not None and args.budget <= 0:
        print(f"error: --budget must be positive, got {args.budget}", file=sys.stderr)
        return EXIT_VALIDATION
    fmt = args.format
    if fmt is None:
        suffix = Path(args.out).suffix.lstrip(".") if args.out else ""
        fmt = suffix if suffix in FORMATS else "json"
    try:
        rows, status = COMMANDS[args.command](args)
    except ResourceBudgetError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = render({"command": args.command, **vars_config(args)}, rows, fmt)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
