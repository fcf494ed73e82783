"""Linear-SDP standard form and the sparse SDPA (``.dat-s``) text format.

Standard form (SDPA "dual" orientation)::

    maximize   <F0, Y> + offset
    subject to <Fi, Y> = c_i,  i = 1..m,   Y = diag(Y_1, ..., Y_B) >= 0

Positive block sizes are PSD blocks, negative sizes are nonnegative
diagonal (LP) blocks. An :class:`SdpProblem` maps to this form with one PSD
block per PSD combination, one LP block holding the inequality slacks and
the split free vector ``F = F+ - F-``, and entrywise equalities tying every
combination to the original blocks.
"""

from __future__ import annotations

import math
import re
import time
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from .problem import SdpProblem

OFFSET_TAG = "objective_offset"


class SdpaParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class StandardSdp:
    """Sparse standard-form SDP. Entries are 1-based ``(mat, blk, i, j)`` with ``i <= j``; ``mat = 0`` is the objective."""

    block_struct: list[int]
    c: np.ndarray
    entries: dict[tuple[int, int, int, int], float]
    offset: float = 0.0
    name: str = "sdp"
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.c)

    def add(self, mat: int, blk: int, i: int, j: int, value: float):
        if i > j:
            i, j = j, i
        key = (mat, blk, i, j)
        total = self.entries.get(key, 0.0) + value
        if total == 0.0:
            self.entries.pop(key, None)
        else:
            self.entries[key] = total

    def validate(self):
        for (mat, blk, i, j) in self.entries:
            if not 0 <= mat <= self.m:
                raise ValueError(f"constraint index {mat} out of range")
            if not 1 <= blk <= len(self.block_struct):
                raise ValueError(f"block index {blk} out of range")
            size = abs(self.block_struct[blk - 1])
            if not 1 <= i <= j <= size:
                raise ValueError(f"entry ({i}, {j}) out of range for block {blk}")
            if self.block_struct[blk - 1] < 0 and i != j:
                raise ValueError(f"off-diagonal entry in LP block {blk}")

    def __eq__(self, other):
        if not isinstance(other, StandardSdp):
            return NotImplemented
        return (self.block_struct == other.block_struct and np.array_equal(self.c, other.c)
                and self.entries == other.entries and self.offset == other.offset
                and self.name == other.name)


# -- conversion --------------------------------------------------------------

def _left_inverse(S: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Rows of ``S`` forming a square invertible subsystem and its (snapped) inverse."""
    chosen: list[int] = []
    for r in range(S.shape[0]):
        trial = chosen + [r]
        if np.linalg.matrix_rank(S[trial]) == len(trial):
            chosen = trial
        if len(chosen) == S.shape[1]:
            break
    if len(chosen) < S.shape[1]:
        raise ValueError("PSD combinations do not determine every block")
    inv = np.linalg.inv(S[chosen])
    snapped = np.round(inv * 2**20) / 2**20
    inv = np.where(np.abs(inv - snapped) < 1e-12, snapped, inv)
    return chosen, inv


def to_standard(problem: SdpProblem) -> StandardSdp:
    n, fd = problem.gram_dim, problem.f_dim
    K, nb = len(problem.psd), len(problem.blocks)
    bidx = {b: t for t, b in enumerate(problem.blocks)}
    S = np.zeros((K, nb))
    for c, combo in enumerate(problem.psd):
        for b, v in combo.terms:
            S[c, bidx[b]] = v
    leaves, inv = _left_inverse(S)
    T = np.zeros((nb, K))                     # block_b = sum_c T[b, c] W_c
    T[:, leaves] = inv

    n_ineq = len(problem.inequalities)
    lp = n_ineq + 2 * fd
    struct = [n] * K + ([-lp] if lp else [])
    lp_blk = K + 1
    out = StandardSdp(struct, np.zeros(0), {}, name=problem.name,
                      meta={"formulation": problem.formulation})
    rhs: list[float] = []

    def put(mat: int, expr) -> float:
        for b, Q in expr.quad.items():
            t = bidx[b]
            for c in np.flatnonzero(T[t]):
                M = T[t, c] * Q
                rows, cols = np.nonzero(np.triu(M))
                for i, j in zip(rows, cols):
                    out.add(mat, c + 1, i + 1, j + 1, float(M[i, j]))
        for k in np.flatnonzero(expr.fcoeffs):
            out.add(mat, lp_blk, n_ineq + k + 1, n_ineq + k + 1, float(expr.fcoeffs[k]))
            out.add(mat, lp_blk, n_ineq + fd + k + 1, n_ineq + fd + k + 1, -float(expr.fcoeffs[k]))
        return 0.0 - expr.constant

    put(0, problem.objective)
    out.offset = problem.objective.constant
    mat = 0
    for i, e in enumerate(problem.inequalities):
        mat += 1
        rhs.append(put(mat, e))
        out.add(mat, lp_blk, i + 1, i + 1, 1.0)
    for e in problem.equalities:
        mat += 1
        rhs.append(put(mat, e))
    # coupling: W_c = sum_b S[c, b] block_b for combinations outside the chosen basis
    coupling = np.eye(K) - S @ T
    for c in range(K):
        row = coupling[c]
        if not np.any(np.abs(row) > 1e-14):
            continue
        for i in range(n):
            for j in range(i, n):
                mat += 1
                rhs.append(0.0)
                w = 1.0 if i == j else 0.5
                for c2 in np.flatnonzero(np.abs(row) > 1e-14):
                    out.add(mat, c2 + 1, i + 1, j + 1, float(w * row[c2]))
    out.c = np.array(rhs, dtype=float)
    out.validate()
    return out


# -- text format -------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def export_interchange(problem) -> str:
    std = problem if isinstance(problem, StandardSdp) else to_standard(problem)
    name = re.sub(r"\s+", " ", std.name).strip()
    lines = [f'" {name}', f'" {OFFSET_TAG} {float(std.offset)!r}',
             str(std.m), str(len(std.block_struct)),
             " ".join(str(b) for b in std.block_struct),
             " ".join(_fmt(v) for v in std.c) if std.m else ""]
    for key in sorted(std.entries):
        mat, blk, i, j = key
        lines.append(f"{mat} {blk} {i} {j} {_fmt(std.entries[key])}")
    return "\n".join(lines) + "\n"


_SEP = re.compile(r"[,{}()\s]+")


def _numbers(text: str, lineno: int, kind=float) -> list:
    out = []
    for tok in _SEP.split(text.strip()):
        if not tok:
            continue
        try:
            out.append(kind(tok))
        except ValueError:
            raise SdpaParseError(lineno, f"cannot read {tok!r} as {kind.__name__}") from None
    return out


def import_interchange(text: str) -> StandardSdp:
    """Parse sparse SDPA text. The header comment may carry the name and objective offset."""
    lines = text.splitlines()
    pos, name, offset = 0, "sdp", 0.0
    while pos < len(lines) and (lines[pos].startswith('"') or lines[pos].startswith("*")):
        body = lines[pos][1:].strip()
        if body.startswith(OFFSET_TAG):
            try:
                offset = float(body[len(OFFSET_TAG):])
            except ValueError:
                raise SdpaParseError(pos + 1, "bad objective offset") from None
        elif pos == 0:
            name = body
        pos += 1

    def take(what: str):
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip() and what != "objective":
            pos += 1
        if pos >= len(lines):
            raise SdpaParseError(pos + 1, f"unexpected end of input, expected {what}")
        pos += 1
        return pos, lines[pos - 1]

    ln, t = take("number of constraints")
    m = _numbers(t, ln, int)
    if len(m) < 1 or m[0] < 0:
        raise SdpaParseError(ln, "expected a nonnegative constraint count")
    m = m[0]
    ln, t = take("number of blocks")
    nblocks = _numbers(t, ln, int)
    if len(nblocks) < 1 or nblocks[0] < 1:
        raise SdpaParseError(ln, "expected a positive block count")
    nblocks = nblocks[0]
    ln, t = take("block structure")
    struct = _numbers(t, ln, int)
    if len(struct) != nblocks or 0 in struct:
        raise SdpaParseError(ln, f"expected {nblocks} nonzero block sizes")
    ln, t = take("objective")
    c = _numbers(t, ln, float)
    if len(c) != m:
        raise SdpaParseError(ln, f"expected {m} right-hand-side values, got {len(c)}")
    std = StandardSdp(struct, np.array(c, dtype=float), {}, offset, name)
    for idx in range(pos, len(lines)):
        raw = lines[idx].strip()
        if not raw or raw.startswith('"') or raw.startswith("*"):
            continue
        parts = _SEP.split(raw)
        parts = [p for p in parts if p]
        if len(parts) != 5:
            raise SdpaParseError(idx + 1, "expected 'constraint block row col value'")
        try:
            mat, blk, i, j = (int(p) for p in parts[:4])
            v = float(parts[4])
        except ValueError:
            raise SdpaParseError(idx + 1, "malformed entry") from None
        if not 0 <= mat <= m:
            raise SdpaParseError(idx + 1, f"constraint index {mat} out of range")
        if not 1 <= blk <= nblocks:
            raise SdpaParseError(idx + 1, f"block index {blk} out of range")
        size = abs(struct[blk - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise SdpaParseError(idx + 1, f"entry ({i}, {j}) out of range for block {blk}")
        if struct[blk - 1] < 0 and i != j:
            raise SdpaParseError(idx + 1, f"off-diagonal entry in LP block {blk}")
        if (mat, blk, min(i, j), max(i, j)) in std.entries:
            raise SdpaParseError(idx + 1, "duplicate entry")
        if v != 0.0:
            std.add(mat, blk, i, j, v)
    return std


# -- solving the standard form ----------------------------------------------

def solve_standard(std: StandardSdp, settings):
    from .solver import _STATUS_MAP, BoundReport, _no_value

    blocks = []
    for b, size in enumerate(std.block_struct):
        blocks.append(cp.Variable((size, size), PSD=True) if size > 0 else cp.Variable(-size, nonneg=True))
    offsets = np.cumsum([0] + [s * s if s > 0 else -s for s in std.block_struct])
    total = int(offsets[-1])
    rows, cols, vals = [], [], []
    obj = np.zeros(total)
    for (mat, blk, i, j), v in std.entries.items():
        size = std.block_struct[blk - 1]
        base = offsets[blk - 1]
        if size > 0:
            idx = [base + (i - 1) + (j - 1) * size]
            if i != j:
                idx.append(base + (j - 1) + (i - 1) * size)
        else:
            idx = [base + i - 1]
        for col in idx:
            if mat == 0:
                obj[col] += v
            else:
                rows.append(mat - 1)
                cols.append(col)
                vals.append(v)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(std.m, total))
    y = cp.hstack([cp.vec(Y, order="F") if Y.ndim == 2 else Y for Y in blocks])
    cons = [A @ y == std.c] if std.m else []
    prob = cp.Problem(cp.Maximize(obj @ y + std.offset), cons)
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
    yv = y.value
    primal = float(np.max(np.abs(A @ yv - std.c))) if std.m else 0.0
    for Y, size in zip(blocks, std.block_struct):
        if size > 0:
            primal = max(primal, -float(np.linalg.eigvalsh((Y.value + Y.value.T) / 2)[0]))
        else:
            primal = max(primal, -float(np.min(Y.value)))
    dual = math.nan
    if std.m:
        # dual slack A^T z - F0 must be PSD blockwise; report its worst violation
        slack = A.T @ np.asarray(cons[0].dual_value).ravel() - obj
        dual = 0.0
        for b, size in enumerate(std.block_struct):
            seg = slack[offsets[b]:offsets[b + 1]]
            if size > 0:
                Sb = seg.reshape((size, size), order="F")
                Sb = (Sb + Sb.T) / 2
                dual = max(dual, -float(np.linalg.eigvalsh(Sb)[0]))
            else:
                dual = max(dual, -float(np.min(seg)))
    return BoundReport(float(prob.value), status, primal, dual, [], elapsed, message=str(prob.status))
