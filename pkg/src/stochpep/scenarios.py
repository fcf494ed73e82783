"""Preset studies: SDP bounds over a sweep of N next to closed-form comparators."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import analytic
from .analytic import DomainError, RateInputs
from .model import (FunctionClass, InitialCondition, Method, NoiseModel, PerformanceMeasure,
                    ProblemSpec, SpecError, constant_step_sgd, noise_preset, sgd_method,
                    silver_schedule)
from .sdp import (SolverSettings, build_exact, build_single, build_sym2, build_worst_scenario,
                  solve)

FORMULATIONS = ("worst", "single", "sym2", "exact")
CSV_HEADER = ("scenario", "series", "N", "value", "status", "seconds")


def build(formulation: str, spec: ProblemSpec, tie_deterministic: bool = False, exact_max_n: int = 8):
    if formulation == "worst":
        return build_worst_scenario(spec)
    if formulation == "single":
        return build_single(spec)
    if formulation == "sym2":
        return build_sym2(spec, tie_deterministic)
    if formulation == "exact":
        return build_exact(spec, max_n=exact_max_n, tie_deterministic=tie_deterministic)
    raise SpecError(f"unknown formulation {formulation!r}; choose from {', '.join(FORMULATIONS)}")


# -- scenario definitions ----------------------------------------------------

SpecTemplate = Callable[[int, dict], ProblemSpec]
RateTemplate = Callable[[int, dict], RateInputs]


@dataclass
class Scenario:
    name: str
    description: str
    template: SpecTemplate
    params: dict
    sweep: tuple[int, ...]
    formulations: tuple[str, ...]
    comparators: dict[str, RateTemplate] = field(default_factory=dict)
    extra_series: dict[str, SpecTemplate] = field(default_factory=dict)

    def spec(self, N: int, overrides: dict | None = None) -> ProblemSpec:
        return self.template(N, self.merged(overrides))

    def merged(self, overrides: dict | None) -> dict:
        params = dict(self.params)
        for key, value in (overrides or {}).items():
            if key not in params:
                raise SpecError(f"scenario {self.name!r} has no parameter {key!r}; "
                                f"known: {', '.join(sorted(params))}")
            params[key] = type(params[key])(value) if params[key] is not None else value
        return params


def _fclass(p):
    return FunctionClass(p["mu"], p["L"])


def _const_sgd(N, p):
    return constant_step_sgd(N, p["alpha"] / p["L"])


def _additive(N, p):
    return ProblemSpec(_const_sgd(N, p), _fclass(p), noise_preset("additive-bounded", {"sigma2": p["sigma2"]}),
                       InitialCondition("dist", p["dist0"]), PerformanceMeasure(p["measure"]))


def _silver_method(N: int, L: float) -> Method:
    k = int(round(math.log2(N + 1)))
    if 2**k - 1 != N:
        raise SpecError(f"the silver schedule needs N = 2^k - 1, got N = {N}")
    m = sgd_method(N, [s / L for s in silver_schedule(k)])
    return Method(m.alpha, name="silver")


def _silver(N, p, sigma2=None):
    s2 = p["sigma2"] if sigma2 is None else sigma2
    return ProblemSpec(_silver_method(N, p["L"]), _fclass(p), noise_preset("relative", {"sigma2": s2}),
                       InitialCondition("dist", p["dist0"]), PerformanceMeasure("dist"))


def _finite_sum(N, p, A1=None):
    noise = NoiseModel(A1=(p["A1"] if A1 is None else A1) * p["L"], D1=p["D1"])
    return ProblemSpec(_const_sgd(N, p), _fclass(p), noise, InitialCondition("dist", p["dist0"]),
                       PerformanceMeasure("dist"))


def _rcd(N, p):
    return ProblemSpec(constant_step_sgd(N, 1.0 / (p["d"] * p["L"])), _fclass(p),
                       noise_preset("rcd", {"d": p["d"]}), InitialCondition("dist", p["dist0"]),
                       PerformanceMeasure(p["measure"]))


def _saga(N, p):
    alpha = p["alpha"] / p["L"]
    w = 4 * p["n"] * alpha**2
    return ProblemSpec(constant_step_sgd(N, alpha), _fclass(p), noise_preset("saga", {"L": p["L"], "n": p["n"]}),
                       InitialCondition("dist_sigma", p["dist0"], w), PerformanceMeasure("dist_sigma", w))


def _rates(N, p, **extra) -> RateInputs:
    base = {k: p[k] for k in ("mu", "L", "dist0") if k in p}
    if "alpha" in p:
        base["alpha"] = p["alpha"] / p["L"]
    for k in ("sigma2", "D1", "d", "n"):
        if k in p:
            base[k] = p[k]
    if "A1" in p:
        base["A1"] = p["A1"] * p["L"]
    base.update(extra)
    return RateInputs(N=N, **base)


SCENARIOS: dict[str, Scenario] = {
    "fig1a": Scenario(
        "fig1a", "SGD, step 1/L, convex smooth, additive noise, function-value gap",
        _additive, {"mu": 0.0, "L": 1.0, "alpha": 1.0, "sigma2": 0.01, "dist0": 1.0, "measure": "fgap"},
        (1, 2, 3, 4, 5, 6), ("worst", "single", "sym2"),
        {"taylor_bach": _rates}),
    "fig1b": Scenario(
        "fig1b", "SGD, step 1/(2L), strongly convex, additive noise, distance",
        _additive, {"mu": 0.1, "L": 1.0, "alpha": 0.5, "sigma2": 0.01, "dist0": 1.0, "measure": "dist"},
        (1, 2, 3, 4, 5, 6), ("worst", "single", "sym2"),
        {"additive_sc": _rates, "gorbunov_additive": _rates}),
    "fig2": Scenario(
        "fig2", "silver schedule, relative noise, strongly convex, distance",
        _silver, {"mu": 0.1, "L": 1.0, "sigma2": 0.0225, "dist0": 1.0},
        (1, 3, 7), ("worst", "single", "sym2", "exact"),
        extra_series={"noiseless": lambda N, p: _silver(N, p, sigma2=0.0)}),
    "fig3a": Scenario(
        "fig3a", "finite-sum noise A1 = 4L, D1 = 0.01, step 1/(2L), distance",
        _finite_sum, {"mu": 0.1, "L": 1.0, "alpha": 0.5, "A1": 4.0, "D1": 0.01, "dist0": 1.0},
        (1, 2, 3, 4, 5, 6), ("single",),
        {"gorbunov_additive": lambda N, p: _rates(N, p, sigma2=p["D1"]), "A1D1": _rates, "cortild": _rates}),
    "fig3b": Scenario(
        "fig3b", "interpolated finite sum A1 = 2L, D1 = 0 (series single_A1_4L uses A1 = 4L)",
        _finite_sum, {"mu": 0.1, "L": 1.0, "alpha": 0.5, "A1": 2.0, "D1": 0.0, "dist0": 1.0},
        (1, 2, 3, 4, 5, 6), ("single",),
        {"gorbunov_additive": lambda N, p: _rates(N, p, sigma2=p["D1"]), "A1D1": _rates, "cortild": _rates},
        extra_series={"single_A1_4L": lambda N, p: _finite_sum(N, p, A1=4.0)}),
    "fig4a": Scenario(
        "fig4a", "randomized coordinate descent, strongly convex, step 1/(dL), distance",
        _rcd, {"mu": 0.1, "L": 1.0, "d": 10, "dist0": 1.0, "measure": "dist"},
        (1, 2, 3, 4, 5, 6), ("single",),
        {"rcd_sc": _rates,
         "gorbunov_additive": lambda N, p: _rates(N, p, alpha=1.0 / (p["d"] * p["L"]), sigma2=0.0)}),
    "fig4b": Scenario(
        "fig4b", "randomized coordinate descent, convex, step 1/(dL), function-value gap",
        _rcd, {"mu": 0.0, "L": 1.0, "d": 10, "dist0": 1.0, "measure": "fgap"},
        (1, 2, 3, 4, 5, 6), ("single",),
        {"rcd_cvx": _rates}),
    "fig5": Scenario(
        "fig5", "SAGA, step 1/(6L), Lyapunov measure ||x - x*||^2 + 4 n alpha^2 sigma^2",
        _saga, {"mu": 0.1, "L": 1.0, "alpha": 1.0 / 6.0, "n": 10, "dist0": 1.0},
        (1, 2, 3, 4, 5, 6), ("single",),
        {"gorbunov_saga": _rates}),
}


def get_scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise SpecError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return SCENARIOS[name]


# -- results -----------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    scenario: str
    series: str
    N: int
    value: float
    status: str
    seconds: float


class ResultTable:
    def __init__(self, rows: Iterable[Row] = ()):
        self._rows: dict[tuple[str, str, int], Row] = {}
        for r in rows:
            self.add(r)

    def add(self, row: Row):
        key = (row.scenario, row.series, row.N)
        if key in self._rows:
            raise ValueError(f"duplicate row {key}")
        self._rows[key] = row

    @property
    def rows(self) -> list[Row]:
        return list(self._rows.values())

    def __len__(self):
        return len(self._rows)

    def get(self, series: str, N: int, scenario: str | None = None) -> Row:
        for (sc, se, n), r in self._rows.items():
            if se == series and n == N and (scenario is None or sc == scenario):
                return r
        raise KeyError((scenario, series, N))

    def value(self, series: str, N: int) -> float:
        return self.get(series, N).value

    def series(self) -> list[str]:
        out = []
        for r in self._rows.values():
            if r.series not in out:
                out.append(r.series)
        return out

    def failures(self) -> list[Row]:
        return [r for r in self._rows.values() if r.status not in ("optimal", "near-optimal", "analytic")]


def emit_csv(table: ResultTable, path: str | Path, timings: bool = True):
    """Write the table; values use repr so re-reading is exact. ``timings=False`` writes 0 seconds."""
    if not len(table):
        raise ValueError("cannot write an empty result table")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in table.rows:
                w.writerow([r.scenario, r.series, r.N, repr(float(r.value)), r.status,
                            f"{r.seconds:.6f}" if timings else "0"])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path: str | Path) -> ResultTable:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            return ResultTable(Row(r["scenario"], r["series"], int(r["N"]), float(r["value"]),
                                   r["status"], float(r["seconds"])) for r in reader)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def emit_plot(table: ResultTable, path: str | Path, log: bool = True, title: str | None = None):
    """One line per series against N, written as a standalone SVG (or any matplotlib format)."""
    if not len(table):
        raise ValueError("cannot plot an empty result table")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "stochpep"}):   # stable element ids
        _draw(plt, table, path, log, title)


def _draw(plt, table: ResultTable, path, log: bool, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in table.series():
        pts = sorted((r.N, r.value) for r in table.rows
                     if r.series == name and math.isfinite(r.value) and (r.value > 0 or not log))
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=name)
    if log:
        ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("bound")
    ax.set_title(title or ", ".join(sorted({r.scenario for r in table.rows})))
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    try:
        fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


# -- running ----------------------------------------------------------------

def _solve_row(scenario: str, series: str, N: int, make, settings) -> Row:
    start = time.perf_counter()
    try:
        report = solve(make(), settings)
    except SpecError:
        return Row(scenario, series, N, math.nan, "numerical-failure", time.perf_counter() - start)
    return Row(scenario, series, N, report.value, report.status, time.perf_counter() - start)


def run_scenario(name: str, overrides: dict | None = None, formulations: Iterable[str] | None = None,
                 Ns: Iterable[int] | None = None, settings: SolverSettings | None = None,
                 exact_max_n: int = 3, tie_deterministic: bool = False, workers: int = 1,
                 comparators: bool = True) -> ResultTable:
    """Solve each formulation of the scenario for every N and evaluate its comparators.

    Exact rows are skipped above ``exact_max_n``. Solver failures are
    recorded in the row status and never abort the run.
    """
    sc = get_scenario(name)
    params = sc.merged(overrides)
    forms = tuple(formulations) if formulations is not None else sc.formulations
    for f in forms:
        if f not in FORMULATIONS:
            raise SpecError(f"unknown formulation {f!r}; choose from {', '.join(FORMULATIONS)}")
    Ns = tuple(Ns) if Ns is not None else sc.sweep
    settings = settings or SolverSettings()

    jobs = []
    for f in forms:
        for N in Ns:
            if f == "exact" and N > exact_max_n:
                continue
            jobs.append((f, N, lambda f=f, N=N: build(f, sc.template(N, params), tie_deterministic,
                                                      max(exact_max_n, 1))))
    for series, template in sc.extra_series.items():
        for N in Ns:
            jobs.append((series, N, lambda t=template, N=N: build_single(t(N, params))))
    # specs are validated eagerly so bad overrides fail before any solve
    for N in Ns:
        sc.template(N, params)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda j: _solve_row(name, j[0], j[1], j[2], settings), jobs))
    else:
        rows = [_solve_row(name, s, N, make, settings) for s, N, make in jobs]
    table = ResultTable(rows)

    if comparators:
        for cname, rates in sc.comparators.items():
            for N in Ns:
                try:
                    value, status = analytic.evaluate(cname, rates(N, params)), "analytic"
                except DomainError:
                    value, status = math.nan, "out-of-domain"
                table.add(Row(name, cname, N, value, status, 0.0))
    return table
