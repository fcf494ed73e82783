import math

import pytest
from hypothesis import given, strategies as st

from stochpep import analytic
from stochpep.analytic import (DomainError, RateInputs, bound_A1D1, bound_additive_sc, bound_cortild,
                               bound_gorbunov_additive, bound_gorbunov_saga, bound_rcd_cvx,
                               bound_rcd_sc, bound_taylor_bach, limit_additive_sc)


def test_additive_sc_examples():
    assert bound_additive_sc(0.1, 0.5, 0.01, 1, 1.0) == pytest.approx(0.905)
    assert bound_additive_sc(0.1, 0.5, 0.0, 4, 1.0) == pytest.approx(0.95**8)
    assert bound_additive_sc(0.1, 0.5, 0.01, 5000, 1.0) == pytest.approx(0.0025 / 0.0975, rel=1e-9)
    assert limit_additive_sc(0.1, 0.5, 0.01) == pytest.approx(0.025641, abs=1e-6)


def test_additive_sc_domain():
    with pytest.raises(DomainError):
        bound_additive_sc(0.1, 2.0, 0.01, 1, L=1.0)
    with pytest.raises(DomainError):
        bound_additive_sc(0.0, 0.5, 0.01, 1)
    assert bound_additive_sc(0.1, 2 / 1.1, 0.0, 1, L=1.0) == pytest.approx((1 - 0.2 / 1.1) ** 2)


def test_A1D1_examples():
    assert bound_A1D1(0.1, 4.0, 0.01, 0.5, 1, 1.0) == pytest.approx(0.9525)
    assert bound_A1D1(0.1, 4.0, 0.0, 0.5, 3, 1.0) == pytest.approx(0.95**3)
    assert bound_A1D1(0.1, 4.0, 0.01, 0.5, 10**5, 1.0) == pytest.approx(0.5 * 0.01 / 0.1)
    with pytest.raises(DomainError):
        bound_A1D1(0.1, 4.0, 0.01, 0.6, 1)


def test_gorbunov_additive_examples():
    assert bound_gorbunov_additive(0.1, 0.5, 0.01, 1) == pytest.approx(1.0)
    assert bound_gorbunov_additive(0.1, 0.5, 0.0, 3) == pytest.approx(0.95**3)


@given(st.floats(0.01, 0.5), st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.integers(1, 50))
def test_A1D1_below_gorbunov(mu, alpha, sigma2, N):
    a = bound_A1D1(mu, 0.0, sigma2, alpha, N)
    b = bound_gorbunov_additive(mu, alpha, sigma2, N)
    assert a <= b + 1e-12
    if sigma2 > 1e-6 and mu * alpha < 1:
        assert a < b


def test_taylor_bach_examples():
    assert bound_taylor_bach(1.0, 5, 0.01) == pytest.approx(0.12)
    assert bound_taylor_bach(2.0, 4, 0.0, 3.0) == pytest.approx(2.0 * 3.0 / 8)
    assert bound_taylor_bach(1.0, 1, 0.0) == 0.5
    with pytest.raises(DomainError):
        bound_taylor_bach(1.0, 0, 0.0)


def test_cortild_examples():
    assert bound_cortild(0.1, 1.0, 0.5, 0.0, 3) == pytest.approx(0.95**6)
    assert bound_cortild(0.1, 1.0, 0.5, 0.01, 1) == pytest.approx(0.9025 + 0.00125 * (1 + 0.45 / 1.45))
    assert bound_cortild(0.1, 1.0, 0.5, 0.0, 2) == pytest.approx(bound_additive_sc(0.1, 0.5, 0.0, 2))
    with pytest.raises(DomainError):
        bound_cortild(0.1, 1.0, 2 / 1.1, 0.01, 1)


def test_rcd_examples():
    assert bound_rcd_sc(0.1, 1.0, 10, 1) == pytest.approx(0.981)
    assert bound_rcd_sc(0.1, 1.0, 1, 3) == pytest.approx(0.9**6)
    assert bound_rcd_cvx(1.0, 10, 5) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        bound_rcd_sc(0.1, 1.0, 0, 1)


def test_saga_comparator():
    alpha = 1 / 6
    assert bound_gorbunov_saga(0.1, 1.0, alpha, 10, 1) == pytest.approx(1 - alpha * 0.1)
    assert bound_gorbunov_saga(0.1, 1.0, alpha, 100, 2) == pytest.approx((1 + 2 / 400 - 0.01) ** 2)
    with pytest.raises(DomainError):
        bound_gorbunov_saga(0.1, 1.0, 0.2, 10, 1)


@pytest.mark.parametrize("name", sorted(analytic.BOUNDS))
def test_nonincreasing_without_noise(name):
    inputs = dict(mu=0.1, L=1.0, alpha=0.5, sigma2=0.0, D1=0.0, A1=1.0, d=10, n=10)
    if name == "gorbunov_saga":
        inputs["alpha"] = 1 / 6
    values = [analytic.evaluate(name, RateInputs(N=N, **inputs)) for N in range(1, 8)]
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def test_series_fallback_near_one():
    # phi^2 within 1e-12 of 1 uses the series form and stays finite and accurate
    mu, alpha = 1e-7, 1e-7
    v = bound_additive_sc(mu, alpha, 1.0, 100, 0.0)
    assert math.isfinite(v) and v == pytest.approx(100 * alpha**2, rel=1e-6)


def test_evaluate_unknown():
    with pytest.raises(analytic.SpecError):
        analytic.evaluate("nesterov", RateInputs())
