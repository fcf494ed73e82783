import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stochpep.gram import (DIAG, STAR, AffineGramExpr, Symbol, cross, f_vector, inner,
                           make_layout, point_vector, state_expression, sum_exprs)
from stochpep.model import SpecError, Method, constant_step_sgd, sgd_method


def e(dim, *idx):
    v = np.zeros(dim)
    for i in idx:
        v[i] += 1.0
    return v


def test_layout_dimensions():
    assert make_layout(1).dim == 4
    assert make_layout(1, track_sigma=True).dim == 6
    assert make_layout(3, track_sigma=True).dim == 3 * 3 + 3
    lay = make_layout(3)
    # 1-based positions 1, 4, 7 for x_0, g_2, eps_1
    assert (lay.index("x", 0), lay.index("g", 2), lay.index("eps", 1)) == (0, 3, 6)
    assert lay.f_dim == 4


@pytest.mark.parametrize("N,sigma", [(1, False), (1, True), (4, False), (4, True)])
def test_layout_round_trip(N, sigma):
    lay = make_layout(N, sigma)
    syms = lay.symbols()
    assert len(set(syms)) == lay.dim
    for c, s in enumerate(syms):
        assert lay.index(s.kind, s.index) == c
    with pytest.raises(IndexError):
        lay.symbol(lay.dim)


def test_layout_rejects_bad_index():
    lay = make_layout(2)
    for kind, k in [("x", 1), ("g", 3), ("eps", 2), ("sig", 0), ("y", 0)]:
        with pytest.raises(SpecError):
            lay.index(kind, k)
    with pytest.raises(SpecError):
        make_layout(0)


def test_point_vectors():
    lay = make_layout(1)
    a = 0.3
    m = sgd_method(1, [a])
    assert not point_vector(lay, m, "x", STAR).any()
    assert not point_vector(lay, m, "g", STAR).any()
    np.testing.assert_array_equal(point_vector(lay, m, "x", 1), e(4, 0) - a * e(4, 1, 3))
    np.testing.assert_array_equal(point_vector(make_layout(3), None, "g", 2), e(8, 3))
    with pytest.raises(SpecError):
        point_vector(lay, None, "x", 1)
    with pytest.raises(SpecError):
        point_vector(lay, m, "eps", STAR)
    assert f_vector(lay, STAR).tolist() == [0.0, 0.0]
    assert f_vector(lay, 1).tolist() == [0.0, 1.0]


def test_inner_examples():
    lay = make_layout(1)
    rng = np.random.default_rng(0)
    P = rng.standard_normal((lay.dim, 3))
    G, G12 = P @ P.T, P @ rng.standard_normal((3, lay.dim))
    eps = lay.basis("eps", 0)
    assert inner(lay, point_vector(lay, None, "x", STAR), eps).is_zero()
    assert inner(lay, eps, eps).evaluate(np.zeros(2), {DIAG: G}) == pytest.approx(P[3] @ P[3])
    val = inner(lay, eps, eps, cross(2)).evaluate(np.zeros(2), {cross(2): G12})
    assert val == pytest.approx(G12[3, 3])
    with pytest.raises(ValueError):
        cross(1)


vec4 = arrays(np.float64, 4, elements=st.floats(-3, 3))


@given(vec4, vec4, vec4, st.floats(-2, 2))
def test_inner_bilinear(a, b, c, s):
    lay = make_layout(1)
    lhs = inner(lay, a + s * b, c)
    rhs = inner(lay, a, c) + s * inner(lay, b, c)
    for key in lhs.quad:
        np.testing.assert_allclose(lhs.quad[key], rhs.quad[key], atol=1e-9)
    np.testing.assert_allclose(inner(lay, a, b).quad[DIAG], inner(lay, b, a).quad[DIAG])


@given(st.integers(1, 4), st.integers(1, 8), st.booleans(), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_evaluation_matches_direct_inner_products(N, d, sigma, seed):
    rng = np.random.default_rng(seed)
    lay = make_layout(N, sigma)
    alpha = np.tril(rng.standard_normal((N, N)))
    m = Method(alpha)
    P = rng.standard_normal((lay.dim, d))          # each coordinate realised as a d-vector
    F = rng.standard_normal(N + 1)
    blocks = {DIAG: P @ P.T}

    x = [P[0]]
    for k in range(1, N + 1):
        x.append(P[0] + sum(alpha[k - 1, j] * (P[1 + j] + P[N + 2 + j]) for j in range(k)))
    vecs = {("x", k): x[k] for k in range(N + 1)}
    vecs.update({("g", k): P[1 + k] for k in range(N + 1)})
    vecs.update({("eps", k): P[N + 2 + k] for k in range(N)})
    if sigma:
        vecs.update({("sig", k): P[2 * N + 2 + k] for k in range(N + 1)})
    keys = list(vecs)
    for _ in range(10):
        (ka, ia), (kb, ib) = (keys[i] for i in rng.integers(len(keys), size=2))
        expr = inner(lay, point_vector(lay, m, ka, ia), point_vector(lay, m, kb, ib))
        assert expr.evaluate(F, blocks) == pytest.approx(vecs[(ka, ia)] @ vecs[(kb, ib)], abs=1e-9, rel=1e-9)
    k = int(rng.integers(N + 1))
    assert state_expression(lay, m, k, "fgap").evaluate(F, blocks) == F[k]
    assert state_expression(lay, m, k, "dist").evaluate(F, blocks) == pytest.approx(x[k] @ x[k], rel=1e-9, abs=1e-9)


def test_expression_arithmetic():
    lay = make_layout(1)
    a = inner(lay, lay.basis("g", 0), lay.basis("g", 0)) + 2.0
    b = 3.0 - a
    assert b.constant == 1.0
    assert (a - a).is_zero()
    assert (-a).constant == -2.0
    total = sum_exprs(lay.f_dim, [a, a, a])
    assert total.constant == 6.0
    assert a.named("foo").label == "foo" and a.label == ""
    with pytest.raises(ValueError):
        AffineGramExpr(2, fcoeffs=np.zeros(3))


def test_dist_sigma_needs_tracked_layout():
    m = constant_step_sgd(1, 1.0)
    expr = state_expression(make_layout(1, True), m, 1, "dist_sigma", 2.0)
    assert expr.blocks() == {DIAG}
    assert Symbol("g", 1).__str__() == "g_1"
