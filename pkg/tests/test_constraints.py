import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stochpep.constraints import (CovarianceClass, PsdCombination, anti_correlated_pair,
                                  assemble_supersymmetric, covariance_constraints,
                                  deterministic_tie_constraints, exact_covariance,
                                  init_optimality_constraints, interpolation_constraints,
                                  is_supersymmetric, psd_reduction, supersymmetric_block,
                                  supersymmetric_permutations, uncorrelation_constraints,
                                  variance_constraints)
from stochpep.gram import DIAG, make_layout, point_vector
from stochpep.model import (FunctionClass, InitialCondition, NoiseModel, PerformanceMeasure,
                            ProblemSpec, SpecError, constant_step_sgd, noise_preset, sgd_method)
from stochpep.sdp import build_exact, build_single, build_sym2


def realise(layout, rng, d):
    """Random coordinate vectors and the Gram matrix they induce."""
    P = rng.standard_normal((layout.dim, d))
    return P, P @ P.T


def x_vectors(layout, method, P):
    return [point_vector(layout, method, "x", k) @ P for k in range(layout.N + 1)]


# -- interpolation -----------------------------------------------------------

def test_interpolation_convex_smooth_single_copy():
    L = 2.0
    lay = make_layout(1)
    m = constant_step_sgd(1, 0.4)
    cons = interpolation_constraints(lay, m, FunctionClass(0.0, L))
    assert len(cons) == 6
    rng = np.random.default_rng(1)
    P, G = realise(lay, rng, 3)
    F = rng.standard_normal(2)
    x = x_vectors(lay, m, P) + [np.zeros(3)]
    g = [P[1], P[2], np.zeros(3)]
    f = list(F) + [0.0]
    names = ["0", "1", "*"]
    for c in cons:
        i, j = (names.index(t.split("@")[0]) for t in c.label[7:-1].split(","))
        # f_j >= f_i + <g_i, x_j - x_i> + ||g_i - g_j||^2 / (2L), written as "<= 0"
        direct = f[i] - f[j] + g[i] @ (x[j] - x[i]) + (g[i] - g[j]) @ (g[i] - g[j]) / (2 * L)
        assert c.evaluate(F, {DIAG: G}) == pytest.approx(direct, abs=1e-12)


def test_interpolation_cross_copy_matches_two_realisations():
    # copy 2 is a reflection of copy 1, which keeps G^{12} symmetric as in the SDP
    lay = make_layout(2)
    m = sgd_method(2, [0.5, 0.8])
    fc = FunctionClass(0.1, 1.0)
    rng = np.random.default_rng(2)
    d = 4
    P, G = realise(lay, rng, d)
    v = rng.standard_normal(d)
    U = np.eye(d) - 2 * np.outer(v, v) / (v @ v)
    Q = P @ U
    G12 = P @ Q.T
    F = rng.standard_normal(3)
    cons = interpolation_constraints(lay, m, fc, (1, 2))
    assert len(cons) == 4 * 4 - 1                  # all ordered pairs, (*, *) dropped
    names = ["0", "1", "2", "*"]
    pts1 = x_vectors(lay, m, P) + [np.zeros(d)], [P[1], P[2], P[3], np.zeros(d)]
    pts2 = x_vectors(lay, m, Q) + [np.zeros(d)], [Q[1], Q[2], Q[3], np.zeros(d)]
    f = list(F) + [0.0]
    mu, L = fc.mu, fc.L
    for c in cons:
        i, j = (names.index(t.split("@")[0]) for t in c.label[7:-1].split(","))
        xi, gi, xj, gj = pts1[0][i], pts1[1][i], pts2[0][j], pts2[1][j]
        dx, dg = xj - xi, gi - gj
        direct = (f[i] - f[j] + gi @ dx + dg @ dg / (2 * (L - mu)) + L * mu / (2 * (L - mu)) * dx @ dx
                  + mu / (L - mu) * dg @ dx)
        assert c.evaluate(F, {DIAG: G, 2: G12}) == pytest.approx(direct, abs=1e-10)


def test_cross_quadratic_term_uses_cross_block_for_mixed_gradients():
    lay = make_layout(1)
    m = constant_step_sgd(1, 1.0)
    cons = {c.label: c for c in interpolation_constraints(lay, m, FunctionClass(0.0, 1.0), (1, 2))}
    c = cons["interp[0@1,1@2]"]
    g0, g1 = lay.index("g", 0), lay.index("g", 1)
    # ||g_0^(1) - g_1^(2)||^2 / 2 puts -<g_0, g_1> in G^{12} and the squared norms in G
    assert c.quad[2][g0, g1] + c.quad[2][g1, g0] == pytest.approx(-1.0)
    assert c.quad[DIAG][g0, g0] == pytest.approx(0.5)
    assert c.quad[DIAG][g1, g1] == pytest.approx(0.5)
    assert c.quad[DIAG][g0, g1] == 0.0


def test_interpolation_infinite_L():
    lay = make_layout(1)
    m = constant_step_sgd(1, 1.0)
    cons = interpolation_constraints(lay, m, FunctionClass(0.0, math.inf))
    assert len(cons) == 6
    g1 = lay.index("g", 1)
    # without smoothness no ||g_i - g_j||^2 term appears
    assert all(c.quad.get(DIAG, np.zeros((lay.dim, lay.dim)))[g1, g1] == 0 for c in cons)


@given(st.integers(1, 3), st.integers(1, 6), st.floats(0.0, 0.5), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_interpolation_sound_on_quadratics(N, d, mu, seed):
    rng = np.random.default_rng(seed)
    L = 1.0
    fc = FunctionClass(mu, L)
    steps = list(rng.uniform(0.1, 2.0, size=N))
    m = sgd_method(N, steps)
    lay = make_layout(N)
    H = oracles.random_quadratic(rng, d, mu, L)
    sigma2 = 0.05
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    P = np.zeros((lay.dim, d))
    P[0] = x
    F = np.zeros(N + 1)
    for k in range(N + 1):
        g = H @ x
        P[lay.index("g", k)] = g
        F[k] = 0.5 * x @ H @ x
        if k < N:
            eps = rng.standard_normal(d)
            eps *= math.sqrt(sigma2) * rng.uniform() / np.linalg.norm(eps)
            P[lay.index("eps", k)] = eps
            x = x - steps[k] * (g + eps)
    G = P @ P.T
    cons = interpolation_constraints(lay, m, fc)
    cons += init_optimality_constraints(lay, m, InitialCondition("dist", 1.0)).inequalities
    cons += variance_constraints(lay, m, NoiseModel(D1=sigma2))
    for c in cons:
        assert c.evaluate(F, {DIAG: G}) <= 1e-10, c.label


# -- initial condition, variance, uncorrelation ------------------------------

def test_init_constraint_forms():
    lay = make_layout(1)
    m = constant_step_sgd(1, 1.0)
    (c,) = init_optimality_constraints(lay, m, InitialCondition("dist", 1.0)).inequalities
    assert c.constant == -1.0 and c.quad[DIAG][0, 0] == 1.0 and np.count_nonzero(c.quad[DIAG]) == 1
    slay = make_layout(1, True)
    (c,) = init_optimality_constraints(slay, m, InitialCondition("dist_sigma", 1.0, 0.4)).inequalities
    s0 = slay.index("sig", 0)
    assert c.quad[DIAG][0, 0] == 1.0 and c.quad[DIAG][s0, s0] == pytest.approx(0.4)
    with pytest.raises(SpecError):
        init_optimality_constraints(lay, m, InitialCondition("dist_sigma", 1.0, 0.4))


def test_variance_forms():
    lay = make_layout(1)
    m = constant_step_sgd(1, 1.0)
    e0, g0 = lay.index("eps", 0), lay.index("g", 0)
    (c,) = variance_constraints(lay, m, noise_preset("additive-bounded", {"sigma2": 0.01}))
    assert c.constant == -0.01 and c.quad[DIAG][e0, e0] == 1.0
    (c,) = variance_constraints(lay, m, noise_preset("relative", {"sigma2": 0.5}))
    assert c.quad[DIAG][g0, g0] == -0.5 and c.constant == 0.0
    (c,) = variance_constraints(lay, m, NoiseModel())
    assert c.constant == 0.0 and c.label == "variance[0]"
    (c,) = variance_constraints(lay, m, NoiseModel(), as_equalities=True)
    assert c.label == "variance_eq[0]"
    saga = noise_preset("saga", {"L": 1.0, "n": 10})
    slay = make_layout(2, True)
    cons = variance_constraints(slay, constant_step_sgd(2, 0.1), saga)
    assert [c.label for c in cons] == ["variance[0]", "variance[1]", "sigma_recursion[0]", "sigma_recursion[1]"]
    with pytest.raises(SpecError):
        variance_constraints(lay, m, saga)


def test_uncorrelation_sets():
    m1 = constant_step_sgd(1, 1.0)
    lay1 = make_layout(1)
    assert [c.label for c in uncorrelation_constraints(lay1, m1)] == ["uncorr[eps0,x0]", "uncorr[eps0,g0]"]
    lay2 = make_layout(2)
    m2 = sgd_method(2, [0.5, 1.0])
    labels = {c.label for c in uncorrelation_constraints(lay2, m2)}
    assert labels == {"uncorr[eps0,x0]", "uncorr[eps0,g0]", "uncorr[eps0,eps1]",
                      "uncorr[eps1,x0]", "uncorr[eps1,x1]", "uncorr[eps1,g0]", "uncorr[eps1,g1]"}
    c = {c.label: c for c in uncorrelation_constraints(lay2, m2)}["uncorr[eps1,x1]"]
    touched = {i for i in range(lay2.dim) if c.quad[DIAG][lay2.index("eps", 1), i] != 0}
    assert touched == {lay2.index("x", 0), lay2.index("g", 0), lay2.index("eps", 0)}


def test_example_single_counts():
    spec = ProblemSpec(constant_step_sgd(1, 1.0), FunctionClass(0.0, 1.0),
                       noise_preset("additive-bounded", {"sigma2": 0.01}),
                       InitialCondition("dist", 1.0), PerformanceMeasure("fgap"))
    p = build_single(spec)
    labels = [c.label for c in p.inequalities]
    assert p.gram_dim == 4
    assert sum(l.startswith("interp") for l in labels) == 6
    assert labels.count("init") == 1 and labels.count("variance[0]") == 1
    assert len(p.equalities) == 2


def test_example_two_copy_counts():
    spec = ProblemSpec(constant_step_sgd(1, 1.0), FunctionClass(0.0, 1.0),
                       noise_preset("additive-bounded", {"sigma2": 0.01}))
    p = build_sym2(spec)
    assert p.blocks == [1, 2] and len(p.psd) == 3
    cov = [c for c in p.equalities if c.label.startswith("covariance")]
    assert len(cov) == 1
    cross = [c for c in p.inequalities if c.label.startswith("interp") and "@2" in c.label]
    assert len(cross) == 3 * 3 - 1


def test_exact_counts():
    spec = ProblemSpec(constant_step_sgd(2, 1.0), noise=NoiseModel(D1=0.01))
    p = build_exact(spec)
    assert len(p.blocks) == 4 and len(p.psd) == 9
    assert sum(c.label.startswith("covariance") for c in p.equalities) == 6
    with pytest.raises(SpecError):
        build_exact(ProblemSpec(constant_step_sgd(4, 1.0)), max_n=3)


def test_tie_constraints():
    lay = make_layout(1)
    assert [c.label for c in deterministic_tie_constraints(lay, 4)] == [
        f"tie[{k}0,{j}]" for j in (2, 3, 4) for k in ("x", "g")]


# -- covariance classes ------------------------------------------------------

def test_exact_covariance_enumeration():
    assert exact_covariance(1).diagonals == ((-1.0,),)
    cov = exact_covariance(2)
    assert [cov.diagonal(j) for j in (2, 3, 4)] == [(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
    assert exact_covariance(3).diagonals[:3] == ((1.0, 1.0, -1.0), (1.0, -1.0, 1.0), (1.0, -1.0, -1.0))
    assert anti_correlated_pair(1).diagonals == ((-1.0,),)
    assert anti_correlated_pair(3).diagonals == ((-1.0, -1.0, -1.0),)
    assert exact_covariance(2).p == 2 and exact_covariance(2).N == 2


def test_covariance_validation():
    with pytest.raises(SpecError):
        CovarianceClass(3, ((1.0,), (1.0,)))
    with pytest.raises(SpecError):
        CovarianceClass(2, ((1.5,),))
    with pytest.raises(SpecError):
        CovarianceClass(4, ((1.0,), (1.0, 1.0), (1.0,)))


def test_covariance_constraint_forms():
    lay = make_layout(1)
    e0 = lay.index("eps", 0)
    (c,) = covariance_constraints(lay, anti_correlated_pair(1))
    assert c.quad[2][e0, e0] == 1.0 and c.quad[DIAG][e0, e0] == 1.0     # <e,e>_12 + ||e||^2 = 0
    (c,) = covariance_constraints(lay, CovarianceClass(2, ((0.0,),)))
    assert c.quad[2][e0, e0] == 1.0 and not c.quad[DIAG].any()
    with pytest.raises(SpecError):
        covariance_constraints(make_layout(2), anti_correlated_pair(1))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_generating_matrix_structure(N):
    cov = exact_covariance(N)
    M = cov.generating_matrix()
    R = cov.R
    blocks = {tuple(M[a * N:(a + 1) * N, b * N:(b + 1) * N].ravel()) for a in range(R) for b in range(R)}
    assert len(blocks) <= R
    assert is_supersymmetric(M, N)
    for perm in supersymmetric_permutations(cov.p):
        idx = np.concatenate([np.arange(i * N, (i + 1) * N) for i in perm])
        np.testing.assert_array_equal(M[np.ix_(idx, idx)], M)


# -- super-symmetric matrices ------------------------------------------------

def test_block_routing():
    assert supersymmetric_block(1, 1) == 1
    assert supersymmetric_block(2, 1) == supersymmetric_block(1, 2) == 2
    assert supersymmetric_block(3, 4) == 2 and supersymmetric_block(2, 4) == 3


@pytest.mark.parametrize("p", [1, 2, 3])
def test_assembly_matches_recursive_definition_and_permutations(p):
    rng = np.random.default_rng(p)
    k = 3
    blocks = [(lambda A: A + A.T)(rng.standard_normal((k, k))) for _ in range(2**p)]
    M = assemble_supersymmetric(blocks)
    np.testing.assert_array_equal(M, oracles.assemble(blocks))
    assert is_supersymmetric(M, k)
    perms = supersymmetric_permutations(p)
    assert len(perms) == 2**p and len({tuple(q) for q in perms}) == 2**p
    for perm in perms:
        idx = np.concatenate([np.arange(i * k, (i + 1) * k) for i in perm])
        np.testing.assert_array_equal(M[np.ix_(idx, idx)], M)
    M2 = M.copy()
    M2[0, -1] += 1.0
    M2[-1, 0] += 1.0
    assert not is_supersymmetric(M2, k)


def _combo_sets(combos):
    return {frozenset(c.terms) for c in combos}


def test_psd_reduction_examples():
    assert _combo_sets(psd_reduction(0, [DIAG])) == {frozenset({(DIAG, 1.0)})}
    assert _combo_sets(psd_reduction(1, [DIAG, 2])) == {
        frozenset({(DIAG, 1.0)}), frozenset({(DIAG, 1.0), (2, 1.0)}), frozenset({(DIAG, 1.0), (2, -1.0)})}
    A, B, C, D = DIAG, 2, 3, 4
    expected = [
        {A: 1}, {A: 1, B: 1}, {A: 1, B: -1},
        {A: 1, C: 1}, {A: 1, C: 1, B: 1, D: 1}, {A: 1, C: 1, B: -1, D: -1},
        {A: 1, C: -1}, {A: 1, C: -1, B: 1, D: -1}, {A: 1, C: -1, B: -1, D: 1},
    ]
    assert _combo_sets(psd_reduction(2, [A, B, C, D])) == {
        frozenset((k, float(v)) for k, v in e.items()) for e in expected}
    with pytest.raises(SpecError):
        psd_reduction(1, [DIAG, 2, 3])
    with pytest.raises(SpecError):
        psd_reduction(1, [2, DIAG])


def test_psd_combination_validation():
    with pytest.raises(ValueError):
        PsdCombination(((2, 1.0),))
    with pytest.raises(ValueError):
        PsdCombination(((DIAG, 1.0), (2, 2.0)))
    assert str(PsdCombination(((DIAG, 1.0), (2, -1.0)))) == "G-G12 >= 0"


@given(st.integers(1, 3), st.integers(1, 6), st.integers(0, 2**31 - 1), st.integers(0, 2))
@settings(max_examples=80, deadline=None)
def test_psd_reduction_matches_eigenvalues(p, k, seed, mode):
    rng = np.random.default_rng(seed)
    R = 2**p
    if mode == 0:                                   # random symmetric blocks
        blocks = [(lambda A: (A + A.T) / 2)(rng.standard_normal((k, k))) for _ in range(R)]
    else:                                           # rank-deficient PSD assemblies, or one flipped piece
        from scipy.linalg import hadamard
        pieces = []
        for _ in range(R):
            Z = rng.standard_normal((k, int(rng.integers(0, k + 1))))
            pieces.append(Z @ Z.T)
        if mode == 2:
            u = rng.standard_normal(k)
            u /= np.linalg.norm(u)
            c = int(rng.integers(R))
            pieces[c] = pieces[c] - (u @ pieces[c] @ u + 0.2) * np.outer(u, u)
        H = hadamard(R)
        blocks = [sum(H[j, c] * pieces[c] for c in range(R)) / R for j in range(R)]
    ids = [DIAG] + list(range(2, R + 1))
    by_id = dict(zip(ids, blocks))
    combos = psd_reduction(p, ids)
    assert len(combos) == 3**p
    verdict = all(oracles.min_eig(c.assemble(by_id)) >= -1e-8 for c in combos)
    truth = oracles.min_eig(oracles.assemble(blocks)) >= -1e-8
    assert verdict == truth
    if mode == 1:
        assert truth
