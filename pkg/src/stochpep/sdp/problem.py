"""SDP instances for the relaxation hierarchy.

``build_single``      one Gram block, necessary conditions on expectations
``build_worst_scenario``  same without the uncorrelation equalities
``build_symmetric``   R = 2^p super-symmetric copies, PSD via 3^p block sums
``build_exact``       symmetric build with all 2^N sign patterns
``build_multi``       general R-copy build with one large PSD matrix
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from ..constraints import (ConstraintSet, CovarianceClass, PsdCombination, _points,
                           anti_correlated_pair, covariance_constraints,
                           deterministic_tie_constraints, exact_covariance,
                           fmul_inequality, init_optimality_constraints,
                           interpolation_constraints, psd_reduction,
                           supersymmetric_block, uncorrelation_constraints,
                           variance_constraints)
from ..gram import DIAG, AffineGramExpr, GramLayout, f_vector, inner, make_layout
from ..model import ProblemSpec, SpecError

EXACT_MAX_N = 8


@dataclass
class SdpProblem:
    """Maximize ``objective`` over F and symmetric blocks under affine and PSD constraints."""

    f_dim: int
    gram_dim: int
    blocks: list[Hashable]
    objective: AffineGramExpr
    equalities: list[AffineGramExpr] = field(default_factory=list)
    inequalities: list[AffineGramExpr] = field(default_factory=list)
    psd: list[PsdCombination] = field(default_factory=list)
    name: str = "sdp"
    formulation: str = "custom"
    spec: ProblemSpec | None = None
    layout: GramLayout | None = None
    copies: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        declared = set(self.blocks)
        if DIAG not in declared:
            raise SpecError("every problem declares the diagonal block")
        for expr in [self.objective, *self.equalities, *self.inequalities]:
            if expr.f_dim != self.f_dim:
                raise SpecError(f"expression {expr!r} has f_dim {expr.f_dim}, expected {self.f_dim}")
            unknown = expr.blocks() - declared
            if unknown:
                raise SpecError(f"expression {expr!r} references undeclared blocks {sorted(unknown)}")
            for m in expr.quad.values():
                if m.shape != (self.gram_dim, self.gram_dim):
                    raise SpecError(f"expression {expr!r} has a block of shape {m.shape}")
        psd_blocks = set()
        for combo in self.psd:
            psd_blocks |= set(combo.signs)
        if DIAG not in psd_blocks:
            raise SpecError("the diagonal block must appear in a PSD constraint")
        if psd_blocks - declared:
            raise SpecError(f"PSD constraints reference undeclared blocks {sorted(psd_blocks - declared)}")

    def counts(self) -> dict[str, int]:
        return {"equalities": len(self.equalities), "inequalities": len(self.inequalities),
                "psd": len(self.psd), "blocks": len(self.blocks), "gram_dim": self.gram_dim}


def _layout(spec: ProblemSpec) -> GramLayout:
    return make_layout(spec.N, spec.track_sigma)


def _single_constraints(spec: ProblemSpec, layout: GramLayout, uncorrelated: bool,
                        variance_equalities: bool) -> ConstraintSet:
    m = spec.method
    cs = ConstraintSet(inequalities=interpolation_constraints(layout, m, spec.fclass))
    cs = cs + init_optimality_constraints(layout, m, spec.init)
    variance = variance_constraints(layout, m, spec.noise, variance_equalities)
    if variance_equalities:
        cs.equalities += variance
    else:
        cs.inequalities += variance
    if uncorrelated:
        cs.equalities += uncorrelation_constraints(layout, m)
    return cs


def build_single(spec: ProblemSpec, variance_equalities: bool = False) -> SdpProblem:
    layout = _layout(spec)
    cs = _single_constraints(spec, layout, True, variance_equalities)
    return SdpProblem(layout.f_dim, layout.dim, [DIAG], spec.perf.expression(layout, spec.method),
                      cs.equalities, cs.inequalities, [PsdCombination.from_dict({DIAG: 1})],
                      name=f"single N={spec.N}", formulation="single", spec=spec, layout=layout)


def build_worst_scenario(spec: ProblemSpec) -> SdpProblem:
    """Noise as an adversarial perturbation: the variance bound holds pathwise."""
    layout = _layout(spec)
    cs = _single_constraints(spec, layout, False, False)
    return SdpProblem(layout.f_dim, layout.dim, [DIAG], spec.perf.expression(layout, spec.method),
                      cs.equalities, cs.inequalities, [PsdCombination.from_dict({DIAG: 1})],
                      name=f"worst N={spec.N}", formulation="worst", spec=spec, layout=layout)


def build_symmetric(spec: ProblemSpec, cov: CovarianceClass, tie_deterministic: bool = False,
                    variance_equalities: bool = False) -> SdpProblem:
    layout = _layout(spec)
    if cov.N != spec.N:
        raise SpecError(f"covariance class is for N = {cov.N}, spec has N = {spec.N}")
    cs = _single_constraints(spec, layout, True, variance_equalities)
    for j in range(2, cov.R + 1):
        cs.inequalities += interpolation_constraints(layout, spec.method, spec.fclass, (1, j))
    cs.equalities += covariance_constraints(layout, cov)
    if tie_deterministic:
        cs.equalities += deterministic_tie_constraints(layout, cov.R)
    blocks = list(range(1, cov.R + 1))
    return SdpProblem(layout.f_dim, layout.dim, blocks, spec.perf.expression(layout, spec.method),
                      cs.equalities, cs.inequalities, psd_reduction(cov.p, blocks),
                      name=f"sym R={cov.R} N={spec.N}", formulation=f"sym{cov.R}", spec=spec,
                      layout=layout, copies=cov.R)


def build_sym2(spec: ProblemSpec, tie_deterministic: bool = False) -> SdpProblem:
    return build_symmetric(spec, anti_correlated_pair(spec.N), tie_deterministic)


def build_exact(spec: ProblemSpec, max_n: int = EXACT_MAX_N, tie_deterministic: bool = False) -> SdpProblem:
    if spec.N > max_n:
        raise SpecError(f"exact formulation needs 2^N blocks; N = {spec.N} exceeds the guard {max_n}")
    problem = build_symmetric(spec, exact_covariance(spec.N), tie_deterministic)
    problem.formulation = "exact"
    problem.name = f"exact N={spec.N}"
    return problem


# -- general multi-copy formulation ------------------------------------------

class _MultiLayout:
    """Stacks R copies of a base layout into one big Gram matrix."""

    def __init__(self, base: GramLayout, R: int, aux: int):
        self.base, self.R, self.aux = base, R, aux
        self.N = base.N
        self.dim = R * base.dim
        self.f_dim = R * base.f_dim + aux

    def lift(self, v: np.ndarray, copy: int) -> np.ndarray:
        out = np.zeros(self.dim)
        d = self.base.dim
        out[(copy - 1) * d:copy * d] = v
        return out

    def fvec(self, copy: int, k) -> np.ndarray:
        out = np.zeros(self.f_dim)
        n = self.base.f_dim
        out[(copy - 1) * n:copy * n] = f_vector(self.base, k)
        return out

    def embed(self, expr: AffineGramExpr, copy: int) -> AffineGramExpr:
        d, n = self.base.dim, self.base.f_dim
        quad = np.zeros((self.dim, self.dim))
        if DIAG in expr.quad:
            quad[(copy - 1) * d:copy * d, (copy - 1) * d:copy * d] = expr.quad[DIAG]
        fco = np.zeros(self.f_dim)
        fco[(copy - 1) * n:copy * n] = expr.fcoeffs
        return AffineGramExpr(self.f_dim, expr.constant, fco, {DIAG: quad}, expr.label)

    def inner(self, u, cu, w, cw) -> AffineGramExpr:
        return inner(self, self.lift(u, cu), self.lift(w, cw), DIAG)


def _expand_covariance(full_cov, R: int, N: int) -> dict[tuple[int, int], np.ndarray]:
    if isinstance(full_cov, CovarianceClass):
        if full_cov.R != R:
            raise SpecError(f"covariance class has R = {full_cov.R}, expected {R}")
        return {(a, b): np.array(full_cov.diagonal(supersymmetric_block(a, b)))
                for a in range(1, R + 1) for b in range(a + 1, R + 1)}
    out = {}
    for (a, b), diag in dict(full_cov).items():
        diag = np.diag(diag) if np.ndim(diag) == 2 else np.asarray(diag, dtype=float)
        if not (1 <= a < b <= R) or diag.shape != (N,):
            raise SpecError(f"bad covariance entry for pair {(a, b)}")
        if np.any(np.abs(diag) > 1):
            raise SpecError("correlation entries must lie in [-1, 1]")
        out[(a, b)] = diag
    missing = [(a, b) for a in range(1, R + 1) for b in range(a + 1, R + 1) if (a, b) not in out]
    if missing:
        raise SpecError(f"missing covariance entries for pairs {missing}")
    return out


def build_multi(spec: ProblemSpec, full_cov: CovarianceClass | Mapping[tuple[int, int], Sequence[float]] | None,
                equal_norm: bool = False, R: int | None = None) -> SdpProblem:
    """R copies with their own (F^i, G^i), all cross blocks, one big PSD constraint.

    ``full_cov`` maps 1-based copy pairs ``(i, j)``, ``i < j``, to the
    diagonal of ``Sigma^{ij}`` (a CovarianceClass is expanded by the
    super-symmetric rule). With ``equal_norm`` the noise norms of all copies
    are equated and correlations are expressed against copy 1; otherwise an
    auxiliary ``m_k <= min_l ||eps_k^l||^2`` is used.
    """
    base = _layout(spec)
    if R is None:
        R = full_cov.R if isinstance(full_cov, CovarianceClass) else max((b for _, b in dict(full_cov or {})), default=1)
    cov = _expand_covariance(full_cov or {}, R, spec.N) if R > 1 else {}
    aux = 0 if (equal_norm or R == 1) else spec.N
    ml = _MultiLayout(base, R, aux)
    m = spec.method
    eqs, ineqs = [], []

    per_copy = _single_constraints(spec, base, True, False)
    for c in range(1, R + 1):
        eqs += [ml.embed(e, c).named(f"{e.label}@{c}") for e in per_copy.equalities]
        ineqs += [ml.embed(e, c).named(f"{e.label}@{c}") for e in per_copy.inequalities]

    def route(ca, u, cb, w):
        return ml.inner(u, ca, w, cb)

    for a in range(1, R + 1):
        for b in range(1, R + 1):
            if a == b:
                continue
            left = _points(base, m, a, lambda k, a=a: ml.fvec(a, k))
            right = _points(base, m, b, lambda k, b=b: ml.fvec(b, k))
            for pi in left:
                for pj in right:
                    expr = fmul_inequality(spec.fclass, pi, pj, route, ml.f_dim)
                    if not expr.is_zero(1e-15):
                        ineqs.append(expr.named(f"interp[{pi.name}@{a},{pj.name}@{b}]"))

    x0, g0 = base.basis("x", 0), base.basis("g", 0)
    for c in range(2, R + 1):
        eqs.append((ml.inner(x0, c, x0, c) - ml.inner(x0, 1, x0, 1)).named(f"same_x0[{c}]"))
        eqs.append((ml.inner(g0, c, g0, c) - ml.inner(g0, 1, g0, 1)).named(f"same_g0[{c}]"))
        eqs.append(AffineGramExpr(ml.f_dim, fcoeffs=ml.fvec(c, 0) - ml.fvec(1, 0), label=f"same_f0[{c}]"))

    for k in range(spec.N):
        e = base.basis("eps", k)
        if aux:
            mk = np.zeros(ml.f_dim)
            mk[R * base.f_dim + k] = 1.0
            m_expr = AffineGramExpr(ml.f_dim, fcoeffs=mk)
            ineqs.append((-1.0 * m_expr).named(f"min_nonneg[{k}]"))
            for c in range(1, R + 1):
                ineqs.append((m_expr - ml.inner(e, c, e, c)).named(f"min_norm[{k},{c}]"))
        else:
            m_expr = ml.inner(e, 1, e, 1)
            for c in range(2, R + 1):
                eqs.append((ml.inner(e, c, e, c) - m_expr).named(f"equal_norm[{k},{c}]"))
        for (a, b), diag in cov.items():
            eqs.append((ml.inner(e, a, e, b) - diag[k] * m_expr).named(f"correlation[{a},{b},{k}]"))

    perf = spec.perf.expression(base, m)
    objective = (1.0 / R) * sum((ml.embed(perf, c) for c in range(2, R + 1)), ml.embed(perf, 1))
    return SdpProblem(ml.f_dim, ml.dim, [DIAG], objective, eqs, ineqs,
                      [PsdCombination.from_dict({DIAG: 1})], name=f"multi R={R} N={spec.N}",
                      formulation=f"multi{R}", spec=spec, layout=base, copies=R)
