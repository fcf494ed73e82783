"""Constraint families on the Gram representation.

All generators return :class:`~stochpep.gram.AffineGramExpr` objects read as
``expr <= 0`` (inequalities) or ``expr == 0`` (equalities).

Realization copies are indexed ``1..R``. In the super-symmetric formulation
the inner product between copy ``a`` and copy ``b`` lives in block
``((a - 1) ^ (b - 1)) + 1``, so every pair collapses onto ``G`` or one of
the first-row blocks ``G^{1j}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .gram import (DIAG, STAR, AffineGramExpr, GramLayout, const_expr, f_expr,
                   f_vector, inner, point_vector, state_expression)
from .model import FunctionClass, InitialCondition, Method, NoiseModel, SpecError

# A routed inner product: (copy_a, u, copy_b, w) -> expression for <u^(a), w^(b)>.
Router = Callable[[int, np.ndarray, int, np.ndarray], AffineGramExpr]


@dataclass(frozen=True)
class PsdCombination:
    """Asserts ``sum_b coeff_b * block_b`` is positive semidefinite."""

    terms: tuple[tuple[Hashable, float], ...]

    def __post_init__(self):
        coeffs = dict(self.terms)
        if coeffs.get(DIAG) != 1:
            raise ValueError("the diagonal block must enter every PSD combination with coefficient +1")
        if any(c not in (-1, 0, 1) for c in coeffs.values()):
            raise ValueError("PSD combination coefficients must be in {-1, 0, 1}")

    @classmethod
    def from_dict(cls, signs: dict) -> "PsdCombination":
        return cls(tuple((b, float(c)) for b, c in signs.items() if c != 0))

    @property
    def signs(self) -> dict:
        return dict(self.terms)

    def assemble(self, blocks: dict) -> np.ndarray:
        return sum(c * np.asarray(blocks[b]) for b, c in self.terms)

    def __str__(self):
        parts = []
        for b, c in self.terms:
            name = "G" if b == DIAG else f"G1{b}"
            parts.append(("+" if c > 0 else "-") + name)
        return "".join(parts).lstrip("+") + " >= 0"


@dataclass
class ConstraintSet:
    equalities: list[AffineGramExpr] = field(default_factory=list)
    inequalities: list[AffineGramExpr] = field(default_factory=list)
    psd_blocks: list[PsdCombination] = field(default_factory=list)

    def __add__(self, other: "ConstraintSet") -> "ConstraintSet":
        return ConstraintSet(self.equalities + other.equalities,
                             self.inequalities + other.inequalities,
                             self.psd_blocks + other.psd_blocks)


def supersymmetric_block(a: int, b: int) -> int:
    """Block key holding copy pair ``(a, b)`` (1-based copies)."""
    return ((a - 1) ^ (b - 1)) + 1


def symmetric_router(layout) -> Router:
    def route(ca, u, cb, w):
        return inner(layout, u, w, supersymmetric_block(ca, cb))
    return route


# -- interpolation ----------------------------------------------------------

@dataclass(frozen=True)
class _Point:
    copy: int
    x: np.ndarray
    g: np.ndarray
    f: np.ndarray
    name: str


def _routed(route: Router, left, right, f_dim: int) -> AffineGramExpr:
    """Bilinear expansion of <sum_a u_a, sum_b w_b> over copy-tagged terms."""
    out = AffineGramExpr(f_dim)
    for ca, u in left:
        for cb, w in right:
            if np.any(u) and np.any(w):
                out = out + route(ca, u, cb, w)
    return out


def fmul_inequality(fclass: FunctionClass, pi: _Point, pj: _Point, route: Router,
                    f_dim: int) -> AffineGramExpr:
    """``f_i - f_j + <g_i, x_j - x_i> + quadratic <= 0`` for F_{mu, L}."""
    mu, L = fclass.mu, fclass.L
    gi = [(pi.copy, pi.g)]
    dx = [(pj.copy, pj.x), (pi.copy, -pi.x)]        # x_j - x_i
    dg = [(pi.copy, pi.g), (pj.copy, -pj.g)]        # g_i - g_j
    expr = f_expr(pi.f - pj.f) + _routed(route, gi, dx, f_dim)
    if math.isfinite(L):
        expr = (expr
                + (1.0 / (2 * (L - mu))) * _routed(route, dg, dg, f_dim)
                + (L * mu / (2 * (L - mu))) * _routed(route, dx, dx, f_dim)
                + (mu / (L - mu)) * _routed(route, dg, dx, f_dim))
    elif mu:
        expr = expr + (mu / 2) * _routed(route, dx, dx, f_dim)
    return expr


def _points(layout: GramLayout, method: Method, copy: int, fvec=None) -> list[_Point]:
    fvec = fvec or (lambda k: f_vector(layout, k))
    out = []
    for k in [*range(layout.N + 1), STAR]:
        out.append(_Point(copy, point_vector(layout, method, "x", k),
                          point_vector(layout, method, "g", k), fvec(k), str(k)))
    return out


def interpolation_constraints(layout: GramLayout, method: Method, fclass: FunctionClass,
                              copy_pair: tuple[int, int] = (1, 1),
                              route: Router | None = None) -> list[AffineGramExpr]:
    """Interpolation inequalities for iterates and optimum of one or two copies.

    ``(1, 1)``: all ordered pairs of distinct points of a single copy.
    ``(1, j)``: all ordered pairs (including equal indices) with the first
    point in copy 1 and the second in copy ``j``; identically-zero pairs
    such as ``(*, *)`` are dropped.
    """
    if not fclass.mu < fclass.L:
        raise SpecError("interpolation needs mu < L")
    route = route or symmetric_router(layout)
    a, b = copy_pair
    left = _points(layout, method, a)
    right = _points(layout, method, b)
    out = []
    for pi in left:
        for pj in right:
            if a == b and pi.name == pj.name:
                continue
            expr = fmul_inequality(fclass, pi, pj, route, layout.f_dim)
            if not expr.is_zero(1e-15):
                tag = f"interp[{pi.name}@{a},{pj.name}@{b}]"
                out.append(expr.named(tag))
    return out


# -- initial condition, variance, uncorrelation ------------------------------

def init_optimality_constraints(layout: GramLayout, method: Method,
                                init: InitialCondition) -> ConstraintSet:
    """The initial condition; optimality and dynamics are structural in the layout."""
    if init.uses_sigma and not layout.tracks_sigma:
        raise SpecError("initial condition references sigma_0 on a sigma-free layout")
    expr = init.expression(layout, method) - init.bound
    return ConstraintSet(inequalities=[expr.named("init")])


def _norm2(layout, v):
    return inner(layout, v, v)


def variance_constraints(layout: GramLayout, method: Method, noise: NoiseModel,
                         as_equalities: bool = False) -> list[AffineGramExpr]:
    """Variance bound per step and, when tracked, the sigma recursion.

    Read as ``<= 0`` by default; with ``as_equalities`` the same expressions
    are labelled for the ``== 0`` list and the caller files them there.
    """
    if noise.uses_sigma and not layout.tracks_sigma:
        raise SpecError("noise model uses sigma but the layout does not track it")
    N, fd = layout.N, layout.f_dim
    tag, rtag = ("variance_eq", "sigma_recursion_eq") if as_equalities else ("variance", "sigma_recursion")
    out = []
    for k in range(N):
        eps = point_vector(layout, method, "eps", k)
        fk = state_expression(layout, method, k, "fgap")
        gk = state_expression(layout, method, k, "grad")
        xk = state_expression(layout, method, k, "dist")
        rhs = noise.A1 * fk + noise.B1 * gk + noise.C1 * xk + const_expr(fd, noise.D1)
        if noise.E1:
            rhs = rhs + noise.E1 * _norm2(layout, point_vector(layout, method, "sig", k))
        out.append((_norm2(layout, eps) - rhs).named(f"{tag}[{k}]"))
    if layout.tracks_sigma:
        for k in range(N):
            fk = state_expression(layout, method, k, "fgap")
            gk = state_expression(layout, method, k, "grad")
            xk = state_expression(layout, method, k, "dist")
            sk = _norm2(layout, point_vector(layout, method, "sig", k))
            nxt = _norm2(layout, point_vector(layout, method, "sig", k + 1))
            rhs = (noise.A2 * fk + noise.B2 * gk + noise.C2 * xk + const_expr(fd, noise.D2)
                   + (1 - noise.rho) * sk)
            out.append((nxt - rhs).named(f"{rtag}[{k}]"))
    return out


def uncorrelation_constraints(layout: GramLayout, method: Method) -> list[AffineGramExpr]:
    """Zero correlation of eps_k with later noise and with everything known at step k."""
    out = []
    for k in range(layout.N):
        eps = point_vector(layout, method, "eps", k)
        for i in range(k + 1):
            out.append(inner(layout, eps, point_vector(layout, method, "x", i)).named(f"uncorr[eps{k},x{i}]"))
            out.append(inner(layout, eps, point_vector(layout, method, "g", i)).named(f"uncorr[eps{k},g{i}]"))
            if layout.tracks_sigma:
                out.append(inner(layout, eps, point_vector(layout, method, "sig", i)).named(f"uncorr[eps{k},sig{i}]"))
        for l in range(k + 1, layout.N):
            out.append(inner(layout, eps, point_vector(layout, method, "eps", l)).named(f"uncorr[eps{k},eps{l}]"))
    return [e for e in out if not e.is_zero()]


def deterministic_tie_constraints(layout: GramLayout, R: int) -> list[AffineGramExpr]:
    """Optional: copies share x_0 and g_0 as vectors, not only in norm."""
    out = []
    for j in range(2, R + 1):
        for kind in ("x", "g"):
            v = layout.basis(kind, 0)
            out.append((inner(layout, v, v, j) - inner(layout, v, v, DIAG)).named(f"tie[{kind}0,{j}]"))
    return out


# -- covariance classes ------------------------------------------------------

@dataclass(frozen=True)
class CovarianceClass:
    """First-row correlation diagonals ``Sigma^{1j}``, j = 2..R."""

    R: int
    diagonals: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        diags = tuple(tuple(float(v) for v in d) for d in self.diagonals)
        object.__setattr__(self, "diagonals", diags)
        if self.R < 2 or self.R & (self.R - 1):
            raise SpecError(f"R must be a power of two >= 2, got {self.R}")
        if len(diags) != self.R - 1:
            raise SpecError(f"expected {self.R - 1} diagonals, got {len(diags)}")
        lengths = {len(d) for d in diags}
        if len(lengths) != 1:
            raise SpecError("all diagonals must have the same length N")
        if any(abs(v) > 1 for d in diags for v in d):
            raise SpecError("correlation entries must lie in [-1, 1]")

    @property
    def p(self) -> int:
        return self.R.bit_length() - 1

    @property
    def N(self) -> int:
        return len(self.diagonals[0])

    def diagonal(self, j: int) -> tuple[float, ...]:
        """Diagonal of ``Sigma^{1j}`` (``j >= 2``); ``j = 1`` is the identity."""
        return (1.0,) * self.N if j == 1 else self.diagonals[j - 2]

    def generating_matrix(self) -> np.ndarray:
        """Block matrix with identity diagonal and ``Sigma^{ab}`` off-diagonal blocks."""
        blocks = [np.diag(self.diagonal(j)) for j in range(1, self.R + 1)]
        return assemble_supersymmetric(blocks)


def exact_covariance(N: int) -> CovarianceClass:
    """All sign patterns in {-1, 1}^N, descending lexicographic, minus all-ones."""
    if N < 1:
        raise SpecError(f"N must be >= 1, got {N}")
    patterns = list(itertools.product((1.0, -1.0), repeat=N))[1:]
    return CovarianceClass(2**N, tuple(patterns))


def anti_correlated_pair(N: int) -> CovarianceClass:
    if N < 1:
        raise SpecError(f"N must be >= 1, got {N}")
    return CovarianceClass(2, ((-1.0,) * N,))


def covariance_constraints(layout: GramLayout, cov: CovarianceClass) -> list[AffineGramExpr]:
    if cov.N != layout.N:
        raise SpecError(f"covariance class has N = {cov.N}, layout has N = {layout.N}")
    out = []
    for j in range(2, cov.R + 1):
        diag = cov.diagonal(j)
        for k in range(layout.N):
            e = layout.basis("eps", k)
            expr = inner(layout, e, e, j) - diag[k] * inner(layout, e, e, DIAG)
            out.append(expr.named(f"covariance[{j},{k}]"))
    return out


# -- super-symmetric matrices ------------------------------------------------

def assemble_supersymmetric(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Full matrix whose (a, b) block is ``blocks[a ^ b]`` (0-based)."""
    R = len(blocks)
    if R < 1 or R & (R - 1):
        raise ValueError(f"need a power-of-two number of blocks, got {R}")
    return np.block([[np.asarray(blocks[a ^ b]) for b in range(R)] for a in range(R)])


def is_supersymmetric(M: np.ndarray, k: int, tol: float = 0.0) -> bool:
    """Recursive check of the order-p structure on a ``(2^p k) x (2^p k)`` matrix."""
    n = M.shape[0]
    if n == k:
        return True
    h = n // 2
    if n % k or (n // k) & (n // k - 1):
        return False
    A, B, C, D = M[:h, :h], M[:h, h:], M[h:, :h], M[h:, h:]
    if not (np.allclose(A, D, atol=tol, rtol=0) and np.allclose(B, C, atol=tol, rtol=0)):
        return False
    return is_supersymmetric(A, k, tol) and is_supersymmetric(B, k, tol)


def supersymmetric_permutations(p: int) -> list[list[int]]:
    """The ``2^p`` index permutations (0-based) leaving an order-p matrix unchanged."""
    if p == 0:
        return [[0]]
    if p == 1:
        return [[0, 1], [1, 0]]
    half = 2 ** (p - 1)
    out = []
    for perm in supersymmetric_permutations(p - 1):
        low, high = list(perm), [half + i for i in perm]
        out.append(low + high)
        out.append(high + low)
    return out


def psd_reduction(p: int, block_ids: Sequence[Hashable]) -> list[PsdCombination]:
    """``3^p`` signed block sums equivalent to PSD-ness of the assembled matrix."""
    if len(block_ids) != 2**p:
        raise SpecError(f"need 2^p = {2**p} blocks, got {len(block_ids)}")
    if block_ids[0] != DIAG:
        raise SpecError("the first block must be the diagonal block")

    def conditions(row: list[dict]) -> list[dict]:
        if len(row) == 1:
            return [row[0]]
        h = len(row) // 2
        head, tail = row[:h], row[h:]
        plus = [_combine(a, b, 1) for a, b in zip(head, tail)]
        minus = [_combine(a, b, -1) for a, b in zip(head, tail)]
        return conditions(head) + conditions(plus) + conditions(minus)

    rows = conditions([{b: 1.0} for b in block_ids])
    return [PsdCombination.from_dict(r) for r in rows]


def _combine(a: dict, b: dict, sign: int) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + sign * v
    return out
