"""Gram-matrix bookkeeping and affine expressions over (F, G, G^{1j}).

The reduced layout puts the minimizer at the origin (``x* = g* = 0``,
``f* = 0``) so the optimality condition and the method dynamics are
structural. Coordinates (0-based) are::

    x_0 -> 0,  g_k -> 1 + k (k = 0..N),  eps_k -> N + 2 + k (k < N),
    sig_k -> 2N + 2 + k (k = 0..N, when tracked)

Cross blocks are keyed by the copy index ``j >= 2`` and hold the inner
products ``<u^(1), w^(j)>`` between realization copies; the diagonal block
has key :data:`DIAG` (``= 1``, i.e. ``G^{11} = G``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np

from .model import Method, SpecError

DIAG = 1
STAR = "*"
SYMBOL_KINDS = ("x", "g", "eps", "sig")


def cross(j: int) -> int:
    """Block key of ``G^{1j}``."""
    if j < 2:
        raise ValueError(f"cross blocks start at j = 2, got {j}")
    return j


@dataclass(frozen=True)
class Symbol:
    kind: str
    index: int | str

    def __str__(self):
        return f"{self.kind}_{self.index}"


@dataclass(frozen=True)
class GramLayout:
    N: int
    sigma_count: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise SpecError(f"layout needs N >= 1, got {self.N}")
        if self.sigma_count not in (0, self.N + 1):
            raise SpecError(f"sigma_count must be 0 or N + 1, got {self.sigma_count}")

    @property
    def tracks_sigma(self) -> bool:
        return self.sigma_count > 0

    @property
    def dim(self) -> int:
        return 1 + (self.N + 1) + self.N + self.sigma_count

    @property
    def f_dim(self) -> int:
        return self.N + 1

    def index(self, kind: str, k: int) -> int:
        """0-based coordinate of a primitive symbol."""
        N = self.N
        if kind == "x" and k == 0:
            return 0
        if kind == "g" and 0 <= k <= N:
            return 1 + k
        if kind == "eps" and 0 <= k < N:
            return N + 2 + k
        if kind == "sig":
            if not self.tracks_sigma:
                raise SpecError("sigma requested on a sigma-free layout")
            if 0 <= k < self.sigma_count:
                return 2 * N + 2 + k
        raise SpecError(f"{kind}_{k} is not a primitive symbol of this layout")

    def symbol(self, coordinate: int) -> Symbol:
        N = self.N
        if not 0 <= coordinate < self.dim:
            raise IndexError(coordinate)
        if coordinate == 0:
            return Symbol("x", 0)
        if coordinate <= N + 1:
            return Symbol("g", coordinate - 1)
        if coordinate <= 2 * N + 1:
            return Symbol("eps", coordinate - N - 2)
        return Symbol("sig", coordinate - 2 * N - 2)

    def symbols(self) -> list[Symbol]:
        return [self.symbol(c) for c in range(self.dim)]

    def basis(self, kind: str, k: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index(kind, k)] = 1.0
        return v


def make_layout(N: int, track_sigma: bool = False) -> GramLayout:
    return GramLayout(N, N + 1 if track_sigma else 0)


def point_vector(layout: GramLayout, method: Method | None, kind: str, k: int | str) -> np.ndarray:
    """Selection vector of ``x_k``, ``g_k``, ``eps_k`` or ``sig_k`` (``k='*'`` for the optimum)."""
    if kind not in SYMBOL_KINDS:
        raise SpecError(f"unknown symbol kind {kind!r}")
    if k == STAR:
        if kind in ("x", "g"):
            return np.zeros(layout.dim)
        raise SpecError(f"{kind}_* is not defined")
    if kind != "x" or k == 0:
        return layout.basis(kind, k)
    if method is None:
        raise SpecError("x_k for k >= 1 needs the method coefficients")
    if not 1 <= k <= layout.N or method.N != layout.N:
        raise SpecError(f"x_{k} is out of range for N = {layout.N}")
    v = layout.basis("x", 0)
    for j in range(k):
        v += method.alpha[k - 1, j] * (layout.basis("g", j) + layout.basis("eps", j))
    return v


def f_vector(layout: GramLayout, k: int | str) -> np.ndarray:
    """Coefficients selecting ``f_k`` in ``F = [f_0, ..., f_N]`` (zero for ``f*``)."""
    v = np.zeros(layout.f_dim)
    if k != STAR:
        if not 0 <= k <= layout.N:
            raise SpecError(f"f_{k} is out of range for N = {layout.N}")
        v[k] = 1.0
    return v


class AffineGramExpr:
    """``constant + fcoeffs . F + sum_blocks <quad[b], block_b>``.

    Quadratic coefficient matrices are stored symmetrized; ``<., .>`` is the
    trace inner product. An optional label names the constraint it encodes.
    """

    __slots__ = ("constant", "fcoeffs", "quad", "label")

    def __init__(
        self,
        f_dim: int,
        constant: float = 0.0,
        fcoeffs: np.ndarray | None = None,
        quad: Mapping[Hashable, np.ndarray] | None = None,
        label: str = "",
    ):
        self.constant = float(constant)
        self.fcoeffs = np.zeros(f_dim) if fcoeffs is None else np.array(fcoeffs, dtype=float)
        if self.fcoeffs.shape != (f_dim,):
            raise ValueError(f"fcoeffs must have shape ({f_dim},), got {self.fcoeffs.shape}")
        self.quad = {}
        for key, m in (quad or {}).items():
            m = np.asarray(m, dtype=float)
            self.quad[key] = (m + m.T) / 2
        self.label = label

    @property
    def f_dim(self) -> int:
        return self.fcoeffs.shape[0]

    def blocks(self) -> set:
        return {b for b, m in self.quad.items() if np.any(m)}

    def is_zero(self, tol: float = 0.0) -> bool:
        return (
            abs(self.constant) <= tol
            and np.all(np.abs(self.fcoeffs) <= tol)
            and all(np.all(np.abs(m) <= tol) for m in self.quad.values())
        )

    def named(self, label: str) -> "AffineGramExpr":
        out = self.copy()
        out.label = label
        return out

    def copy(self) -> "AffineGramExpr":
        return AffineGramExpr(self.f_dim, self.constant, self.fcoeffs.copy(),
                              {k: m.copy() for k, m in self.quad.items()}, self.label)

    def evaluate(self, F, blocks: Mapping[Hashable, np.ndarray]) -> float:
        value = self.constant + float(np.dot(self.fcoeffs, F)) if self.f_dim else self.constant
        for key, m in self.quad.items():
            if np.any(m):
                value += float(np.sum(m * np.asarray(blocks[key])))
        return value

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.copy()
            out.constant += other
            out.label = ""
            return out
        if not isinstance(other, AffineGramExpr):
            return NotImplemented
        if other.f_dim != self.f_dim:
            raise ValueError("expressions live on different F vectors")
        quad = {k: m.copy() for k, m in self.quad.items()}
        for k, m in other.quad.items():
            quad[k] = quad[k] + m if k in quad else m.copy()
        return AffineGramExpr(self.f_dim, self.constant + other.constant,
                              self.fcoeffs + other.fcoeffs, quad)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, np.floating)):
            return NotImplemented
        s = float(scalar)
        return AffineGramExpr(self.f_dim, s * self.constant, s * self.fcoeffs,
                              {k: s * m for k, m in self.quad.items()})

    __rmul__ = __mul__

    def __repr__(self):
        blocks = sorted(self.blocks(), key=str)
        tag = f" {self.label!r}" if self.label else ""
        return f"<AffineGramExpr{tag} const={self.constant:g} blocks={blocks}>"


def zero_expr(f_dim: int) -> AffineGramExpr:
    return AffineGramExpr(f_dim)


def const_expr(f_dim: int, value: float) -> AffineGramExpr:
    return AffineGramExpr(f_dim, constant=value)


def f_expr(fcoeffs: np.ndarray) -> AffineGramExpr:
    return AffineGramExpr(len(fcoeffs), fcoeffs=fcoeffs)


def inner(layout, a: np.ndarray, b: np.ndarray, block: Hashable = DIAG) -> AffineGramExpr:
    """Expression whose value on the Gram blocks is ``a^T G_block b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return AffineGramExpr(layout.f_dim, quad={block: (np.outer(a, b) + np.outer(b, a)) / 2})


def sum_exprs(f_dim: int, exprs: Iterable[AffineGramExpr]) -> AffineGramExpr:
    total = zero_expr(f_dim)
    for e in exprs:
        total = total + e
    return total


def state_expression(layout: GramLayout, method: Method, k: int, kind: str,
                     weight: float = 0.0) -> AffineGramExpr:
    """Gram-representable quantity at iterate ``k`` relative to the optimum."""
    if kind == "fgap":
        return f_expr(f_vector(layout, k))
    if kind == "grad":
        g = point_vector(layout, method, "g", k)
        return inner(layout, g, g)
    x = point_vector(layout, method, "x", k)
    expr = inner(layout, x, x)
    if kind == "dist":
        return expr
    if kind == "dist_sigma":
        s = point_vector(layout, method, "sig", k)
        return expr + weight * inner(layout, s, s)
    raise SpecError(f"unknown state expression kind {kind!r}")
