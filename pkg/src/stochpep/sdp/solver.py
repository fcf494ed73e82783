"""Conic backend: cvxpy with Clarabel (CVXOPT and SCS as alternatives)."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Hashable

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from .problem import SdpProblem

STATUSES = ("optimal", "near-optimal", "infeasible", "unbounded", "numerical-failure")

_STATUS_MAP = {
    cp.OPTIMAL: "optimal",
    cp.OPTIMAL_INACCURATE: "near-optimal",
    cp.INFEASIBLE: "infeasible",
    cp.INFEASIBLE_INACCURATE: "infeasible",
    cp.UNBOUNDED: "unbounded",
    cp.UNBOUNDED_INACCURATE: "unbounded",
}


@dataclass(frozen=True)
class SolverSettings:
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_iters: int = 500
    verbosity: int = 0
    solver: str = "CLARABEL"

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")

    def solver_options(self) -> dict:
        if self.solver == "CLARABEL":
            return {"tol_gap_abs": self.abs_tol, "tol_gap_rel": self.rel_tol,
                    "tol_feas": self.abs_tol, "max_iter": self.max_iters}
        if self.solver == "CVXOPT":
            return {"abstol": self.abs_tol, "reltol": self.rel_tol, "feastol": self.abs_tol,
                    "max_iters": self.max_iters}
        if self.solver == "SCS":
            return {"eps_abs": self.abs_tol, "eps_rel": self.rel_tol, "max_iters": 100 * self.max_iters}
        return {}


@dataclass
class BoundReport:
    value: float
    status: str
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    active_constraints: list[str] = field(default_factory=list)
    solve_time: float = 0.0
    F: np.ndarray | None = None
    blocks: dict[Hashable, np.ndarray] | None = None
    message: str = ""
    certificate: object = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "near-optimal")


def _no_value(status: str) -> float:
    return {"unbounded": math.inf, "infeasible": -math.inf}.get(status, math.nan)


def stack(exprs, f_dim: int, blocks: list, n: int):
    """Sparse rows of a list of affine expressions: (A_F, {block: A_b}, c)."""
    m = len(exprs)
    AF = np.zeros((m, f_dim))
    c = np.zeros(m)
    rows = {b: ([], [], []) for b in blocks}
    for i, e in enumerate(exprs):
        AF[i] = e.fcoeffs
        c[i] = e.constant
        for b, Q in e.quad.items():
            nz = np.flatnonzero(Q.ravel(order="F"))
            r, cc, v = rows[b]
            r.extend([i] * len(nz))
            cc.extend(nz.tolist())
            v.extend(Q.ravel(order="F")[nz].tolist())
    Ab = {b: sp.csr_matrix((v, (r, cc)), shape=(m, n * n)) for b, (r, cc, v) in rows.items()}
    return sp.csr_matrix(AF), Ab, c


def _affine(AF, Ab, c, F, B):
    expr = c
    if F is not None and AF.shape[1]:
        expr = expr + AF @ F
    for b, A in Ab.items():
        if A.nnz:
            expr = expr + A @ cp.vec(B[b], order="F")
    return expr


def _labels(exprs, prefix):
    return [e.label or f"{prefix}[{i}]" for i, e in enumerate(exprs)]


def _sym(M):
    return (M + M.T) / 2


def solve(problem, settings: SolverSettings | None = None) -> BoundReport:
    """Maximize the objective of an :class:`SdpProblem` (or a standard-form SDP)."""
    from .sdpa import StandardSdp, solve_standard

    settings = settings or SolverSettings()
    if isinstance(problem, StandardSdp):
        return solve_standard(problem, settings)
    if not isinstance(problem, SdpProblem):
        raise TypeError(f"cannot solve {type(problem).__name__}")

    n, fd = problem.gram_dim, problem.f_dim
    F = cp.Variable(fd, name="F") if fd else None
    B = {b: cp.Variable((n, n), symmetric=True, name=f"G{b}") for b in problem.blocks}

    obj_AF, obj_Ab, obj_c = stack([problem.objective], fd, problem.blocks, n)
    objective = cp.Maximize(_affine(obj_AF, obj_Ab, obj_c, F, B)[0])

    cons = []
    ineq = eq = None
    if problem.inequalities:
        ineq = stack(problem.inequalities, fd, problem.blocks, n)
        cons.append(_affine(*ineq, F, B) <= 0)
    if problem.equalities:
        eq = stack(problem.equalities, fd, problem.blocks, n)
        cons.append(_affine(*eq, F, B) == 0)
    n_lin = len(cons)
    for combo in problem.psd:
        S = sum(c * B[b] for b, c in combo.terms)
        cons.append(S >> 0)

    prob = cp.Problem(objective, cons)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob.solve(solver=settings.solver, verbose=settings.verbosity > 0, **settings.solver_options())
    except Exception as exc:  # backend breakdowns surface as a status, never as an exception
        return BoundReport(math.nan, "numerical-failure", solve_time=time.perf_counter() - start,
                           message=str(exc))
    elapsed = time.perf_counter() - start
    status = _STATUS_MAP.get(prob.status, "numerical-failure")
    if status not in ("optimal", "near-optimal") or prob.value is None:
        return BoundReport(_no_value(status), status, solve_time=elapsed, message=str(prob.status))

    Fv = F.value if F is not None else np.zeros(0)
    Bv = {b: _sym(v.value) for b, v in B.items()}

    # primal residual: worst violation over all constraint families
    viol = [0.0]
    ineq_vals = np.array([e.evaluate(Fv, Bv) for e in problem.inequalities])
    eq_vals = np.array([e.evaluate(Fv, Bv) for e in problem.equalities])
    if ineq_vals.size:
        viol.append(float(np.max(ineq_vals)))
    if eq_vals.size:
        viol.append(float(np.max(np.abs(eq_vals))))
    for combo in problem.psd:
        viol.append(-float(np.linalg.eigvalsh(_sym(combo.assemble(Bv)))[0]))
    primal = max(viol)

    # dual residual: stationarity of the Lagrangian in F and in each block
    lam = np.atleast_1d(cons[0].dual_value) if ineq is not None else np.zeros(0)
    nu = np.atleast_1d(cons[1 if ineq is not None else 0].dual_value) if eq is not None else np.zeros(0)
    Z = [_sym(np.asarray(c.dual_value)) for c in cons[n_lin:]]
    gF = obj_AF.toarray()[0].copy()
    if ineq is not None:
        gF -= ineq[0].T @ lam
    if eq is not None:
        gF -= eq[0].T @ nu
    res = [float(np.max(np.abs(gF))) if gF.size else 0.0]
    for b in problem.blocks:
        g = obj_Ab[b].toarray()[0].reshape((n, n), order="F")
        if ineq is not None:
            g = g - (ineq[1][b].T @ lam).reshape((n, n), order="F")
        if eq is not None:
            g = g - (eq[1][b].T @ nu).reshape((n, n), order="F")
        for combo, z in zip(problem.psd, Z):
            g = g + combo.signs.get(b, 0.0) * z
        res.append(float(np.max(np.abs(_sym(g)))))
    dual = max(res)

    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)
    active = [lbl for lbl, v, d in zip(_labels(problem.inequalities, "ineq"), ineq_vals, lam)
              if v > -1e-6 or d > 1e-6 * scale]
    return BoundReport(float(prob.value), status, primal, dual, active, elapsed, Fv, Bv,
                       message=str(prob.status))
