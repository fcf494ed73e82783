"""Command-line front end.

Exit codes: 0 success, 2 invalid input (spec, scenario, file format), 3 solver failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

from . import analytic
from .model import SpecError
from .scenarios import (CSV_HEADER, FORMULATIONS, SCENARIOS, ResultTable, Row, build, emit_csv, emit_plot,
                        run_scenario)
from .sdp import SolverSettings, SdpaParseError, export_interchange, import_interchange, solve
from .specfile import load_spec, spec_from_dict, tomllib

EXIT_OK, EXIT_SPEC, EXIT_SOLVER = 0, 2, 3


def parse_ns(text: str) -> list[int]:
    """``"1-6"``, ``"1,3,7"`` or a mix such as ``"1-3,7"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise SpecError(f"cannot read N list {text!r}") from None
    if not out or min(out) < 1:
        raise SpecError(f"N list must contain positive integers, got {text!r}")
    return out


def _formulations(text: str | None) -> list[str] | None:
    if text is None:
        return None
    forms = [f.strip() for f in text.split(",") if f.strip()]
    for f in forms:
        if f not in FORMULATIONS:
            raise SpecError(f"unknown formulation {f!r}; choose from {', '.join(FORMULATIONS)}")
    return forms


def _settings(args) -> SolverSettings:
    return SolverSettings(abs_tol=args.tol, rel_tol=args.tol)


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise SpecError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v) if v.strip().lower() != "inf" else math.inf
        except ValueError:
            out[k.strip()] = v.strip()
    return out


def _write_table(table: ResultTable, args):
    out = getattr(args, "out", None)
    if out:
        emit_csv(table, out, timings=not args.no_timings)
    else:
        print(",".join(CSV_HEADER))
        for r in table.rows:
            seconds = f"{r.seconds:.6f}" if not args.no_timings else "0"
            print(f"{r.scenario},{r.series},{r.N},{float(r.value)!r},{r.status},{seconds}")
    if getattr(args, "plot", None):
        emit_plot(table, args.plot, log=not args.linear)


def _table_exit(table: ResultTable) -> int:
    return EXIT_SOLVER if any(r.status == "numerical-failure" for r in table.rows) else EXIT_OK


# -- subcommands -------------------------------------------------------------

def cmd_bound(args) -> int:
    spec = load_spec(args.spec)
    problem = build(args.formulation, spec, args.tie_deterministic, args.exact_max_n)
    report = solve(problem, _settings(args))
    result = {"formulation": args.formulation, "N": spec.N, "value": report.value,
              "status": report.status, "primal_residual": report.primal_residual,
              "dual_residual": report.dual_residual, "seconds": report.solve_time,
              "active_constraints": report.active_constraints}
    text = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_SOLVER if report.status == "numerical-failure" else EXIT_OK


def cmd_scenario(args) -> int:
    table = run_scenario(args.name, _overrides(args.set), _formulations(args.formulation),
                         parse_ns(args.n) if args.n else None, _settings(args), args.exact_max_n,
                         args.tie_deterministic, args.workers)
    _write_table(table, args)
    return _table_exit(table)


def _spec_for_n(data: dict, N: int) -> dict:
    data = copy.deepcopy(data)
    method = data.setdefault("method", {})
    if method.get("kind", "sgd") == "silver":
        k = int(round(math.log2(N + 1)))
        if 2**k - 1 != N:
            raise SpecError(f"the silver schedule needs N = 2^k - 1, got N = {N}")
        method["k"] = k
        method.pop("N", None)
    elif method.get("kind", "sgd") == "sgd":
        method["N"] = N
        if "steps" in method:
            raise SpecError("sweeps need a constant 'step' (an explicit 'steps' list fixes N)")
    else:
        raise SpecError("sweeps over N need method kind 'sgd' or 'silver'")
    return data


def cmd_sweep(args) -> int:
    try:
        data = tomllib.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise SpecError(f"cannot read spec file {args.spec}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"invalid spec file: {exc}") from None
    forms = _formulations(args.formulation) or ["single"]
    Ns = parse_ns(args.n)
    specs = {N: spec_from_dict(_spec_for_n(data, N)) for N in Ns}
    settings = _settings(args)
    table = ResultTable()
    name = Path(args.spec).stem
    for f in forms:
        for N in Ns:
            if f == "exact" and N > args.exact_max_n:
                continue
            report = solve(build(f, specs[N], args.tie_deterministic, args.exact_max_n), settings)
            table.add(Row(name, f, N, report.value, report.status, report.solve_time))
    _write_table(table, args)
    return _table_exit(table)


def cmd_analytic(args) -> int:
    params = _overrides(args.set)
    unknown = set(params) - set(analytic.RATE_FIELDS)
    if unknown:
        raise SpecError(f"unknown parameter(s) {', '.join(sorted(unknown))}; "
                        f"known: {', '.join(analytic.RATE_FIELDS)}")
    for key in ("N", "d", "n"):
        if key in params:
            params[key] = int(params[key])
    Ns = parse_ns(args.n) if args.n else [int(params.pop("N", 1))]
    params.pop("N", None)
    for N in Ns:
        value = analytic.evaluate(args.name, analytic.RateInputs(N=N, **params))
        print(f"{args.name},{N},{value!r}")
    return EXIT_OK


def cmd_export(args) -> int:
    spec = load_spec(args.spec)
    text = export_interchange(build(args.formulation, spec, args.tie_deterministic, args.exact_max_n))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_import(args) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {args.file}: {exc}") from None
    std = import_interchange(text)
    print(f"{std.name}: {std.m} constraints, blocks {std.block_struct}")
    if args.no_solve:
        return EXIT_OK
    report = solve(std, _settings(args))
    print(json.dumps({"value": report.value, "status": report.status,
                      "primal_residual": report.primal_residual,
                      "dual_residual": report.dual_residual}, indent=2))
    return EXIT_SOLVER if report.status == "numerical-failure" else EXIT_OK


# -- parser -----------------------------------------------------------------

def _common(p, formulation=True):
    if formulation:
        p.add_argument("--formulation", default="single" if formulation == "one" else None,
                       help="formulation(s): " + ", ".join(FORMULATIONS))
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance (absolute and relative)")
    p.add_argument("--exact-max-n", type=int, default=3, help="largest N solved with the exact formulation")
    p.add_argument("--tie-deterministic", action="store_true",
                   help="also tie x_0 and g_0 across copies as vectors")


def _table_outputs(p):
    p.add_argument("--out", help="CSV output path (default: print to stdout)")
    p.add_argument("--plot", help="SVG plot output path")
    p.add_argument("--linear", action="store_true", help="linear instead of log y-axis")
    p.add_argument("--no-timings", action="store_true", help="write 0 for seconds so reruns are byte-identical")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochpep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="solve one formulation for a spec file")
    p.add_argument("spec")
    _common(p, "one")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("scenario", help="run a preset study")
    p.add_argument("name", choices=sorted(SCENARIOS))
    p.add_argument("--n", help="N values, e.g. 1-6 or 1,3,7")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario parameter")
    p.add_argument("--workers", type=int, default=1)
    _common(p)
    _table_outputs(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sweep", help="solve a spec file over a range of N")
    p.add_argument("spec")
    p.add_argument("--n", required=True, help="N values, e.g. 1-6")
    _common(p)
    _table_outputs(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analytic", help="evaluate a closed-form bound")
    p.add_argument("name", choices=sorted(analytic.BOUNDS))
    p.add_argument("--n", help="N values, e.g. 1-6")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="parameter: " + ", ".join(analytic.RATE_FIELDS))
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("export-sdpa", help="write the SDPA sparse form of a spec file")
    p.add_argument("spec")
    _common(p, "one")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("import-sdpa", help="read and solve an SDPA sparse file")
    p.add_argument("file")
    p.add_argument("--no-solve", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_import)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, SdpaParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
