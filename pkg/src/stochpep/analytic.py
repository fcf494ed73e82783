"""Closed-form rates used as cross-checks and comparators.

All functions return a bound on the expected performance measure after N
steps given the initial distance ``dist0 = ||x_0 - x*||^2`` (or a Lyapunov
value for the variance-reduced case) and reject stepsizes outside the
domain where the formula holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .model import SpecError


class DomainError(SpecError):
    """Parameters outside the range where a closed form holds."""


def _geometric(r: float, N: int) -> float:
    """``sum_{i<N} r^i`` with a series fallback near ``r = 1``."""
    if abs(1.0 - r) < 1e-12:
        return N - N * (N - 1) / 2 * (1.0 - r)
    return (1.0 - r**N) / (1.0 - r)


def _check_common(N: int, dist0: float):
    if N < 0:
        raise DomainError(f"N must be nonnegative, got {N}")
    if dist0 < 0:
        raise DomainError(f"dist0 must be nonnegative, got {dist0}")


def bound_additive_sc(mu: float, alpha: float, sigma2: float, N: int, dist0: float = 1.0,
                      L: float | None = None) -> float:
    """``phi^{2N} dist0 + (1 - phi^{2N}) / (1 - phi^2) alpha^2 sigma2`` with ``phi = 1 - mu alpha``.

    Holds for constant-step SGD on mu-strongly convex L-smooth functions with
    additive bounded noise and ``alpha <= 2 / (L + mu)`` (checked when L is given).
    """
    _check_common(N, dist0)
    if not mu > 0 or not alpha > 0:
        raise DomainError("need mu > 0 and alpha > 0")
    if L is not None and (not mu < L or alpha > 2.0 / (L + mu) * (1 + 1e-12)):
        raise DomainError(f"need mu < L and alpha <= 2/(L + mu), got alpha={alpha}")
    phi2 = (1.0 - mu * alpha) ** 2
    return phi2**N * dist0 + _geometric(phi2, N) * alpha**2 * sigma2


def bound_A1D1(mu: float, A1: float, D1: float, alpha: float, N: int, dist0: float = 1.0) -> float:
    """``phi^N dist0 + (1 - phi^N) / (1 - phi) alpha^2 D1`` with ``phi = 1 - mu alpha``, for ``alpha <= 2 / A1``."""
    _check_common(N, dist0)
    if not alpha > 0 or mu < 0:
        raise DomainError("need alpha > 0 and mu >= 0")
    if A1 > 0 and alpha > 2.0 / A1 * (1 + 1e-12):
        raise DomainError(f"need alpha <= 2/A1 = {2.0 / A1}, got {alpha}")
    phi = 1.0 - mu * alpha
    return phi**N * dist0 + _geometric(phi, N) * alpha**2 * D1


def bound_gorbunov_additive(mu: float, alpha: float, sigma2: float, N: int, dist0: float = 1.0) -> float:
    """``phi^N dist0 + alpha sigma2 / mu``: the one-step contraction unrolled, neighbourhood kept whole."""
    _check_common(N, dist0)
    if not mu > 0 or not alpha > 0:
        raise DomainError("need mu > 0 and alpha > 0")
    return (1.0 - mu * alpha) ** N * dist0 + alpha * sigma2 / mu


def bound_taylor_bach(L: float, N: int, sigma2: float, dist0: float = 1.0) -> float:
    """Function-value bound for SGD with step 1/L on convex L-smooth functions."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if not L > 0:
        raise DomainError("need L > 0")
    return L / (2 * N) * dist0 + (N + 3) / (4 * L) * sigma2


def bound_cortild(mu: float, L: float, alpha: float, D1: float, N: int, dist0: float = 1.0) -> float:
    """Finite-sum rate with ``phi = (1 - mu alpha)^2``, valid for ``alpha < 2 / (L + mu)``."""
    _check_common(N, dist0)
    if not (0 <= mu < L) or not alpha > 0 or not alpha < 2.0 / (L + mu):
        raise DomainError(f"need 0 <= mu < L and 0 < alpha < 2/(L + mu), got alpha={alpha}")
    phi = (1.0 - mu * alpha) ** 2
    noise = alpha**2 * D1 / 2 * (1 + alpha * (L - mu) / (2 - (L + mu) * alpha))
    return phi**N * dist0 + _geometric(phi, N) * noise


def bound_rcd_sc(mu: float, L: float, d: int, N: int, dist0: float = 1.0) -> float:
    """Randomized coordinate descent with step 1/L per coordinate, strongly convex case."""
    _check_common(N, dist0)
    if d < 1 or not (0 <= mu < L):
        raise DomainError("need d >= 1 and 0 <= mu < L")
    return (((1 - mu / L) ** 2 + d - 1) / d) ** N * dist0


def bound_rcd_cvx(L: float, d: int, N: int, dist0: float = 1.0) -> float:
    """Randomized coordinate descent, convex case, function-value gap."""
    if N < 1 or d < 1 or not L > 0:
        raise DomainError("need N >= 1, d >= 1 and L > 0")
    return d / (2 * N * L) * dist0


def bound_gorbunov_saga(mu: float, L: float, alpha: float, n: int, N: int, V0: float = 1.0) -> float:
    """Unified variance-reduced rate for SAGA on ``V = ||x - x*||^2 + 4 n alpha^2 sigma^2``.

    With ``E1 = 2``, ``rho = 1/n`` and the weight ``M = 4n`` the contraction
    factor is ``max(1 - alpha mu, 1 + E1/M - rho)``; the stepsize must satisfy
    ``alpha <= 1 / (6L)``.
    """
    _check_common(N, V0)
    if n < 1 or not (0 < mu < L) or not alpha > 0:
        raise DomainError("need n >= 1, 0 < mu < L and alpha > 0")
    if alpha > 1.0 / (6 * L) * (1 + 1e-12):
        raise DomainError(f"need alpha <= 1/(6L), got {alpha}")
    rho, E1, M = 1.0 / n, 2.0, 4.0 * n
    return max(1 - alpha * mu, 1 + E1 / M - rho) ** N * V0


@dataclass
class RateInputs:
    """Union of the parameters the closed forms draw from."""

    mu: float = 0.0
    L: float = 1.0
    alpha: float = 1.0
    N: int = 1
    sigma2: float = 0.0
    D1: float = 0.0
    A1: float = 0.0
    dist0: float = 1.0
    d: int = 1
    n: int = 1


BOUNDS = {
    "additive_sc": lambda r: bound_additive_sc(r.mu, r.alpha, r.sigma2, r.N, r.dist0, r.L),
    "A1D1": lambda r: bound_A1D1(r.mu, r.A1, r.D1, r.alpha, r.N, r.dist0),
    "gorbunov_additive": lambda r: bound_gorbunov_additive(r.mu, r.alpha, r.sigma2, r.N, r.dist0),
    "taylor_bach": lambda r: bound_taylor_bach(r.L, r.N, r.sigma2, r.dist0),
    "cortild": lambda r: bound_cortild(r.mu, r.L, r.alpha, r.D1, r.N, r.dist0),
    "rcd_sc": lambda r: bound_rcd_sc(r.mu, r.L, r.d, r.N, r.dist0),
    "rcd_cvx": lambda r: bound_rcd_cvx(r.L, r.d, r.N, r.dist0),
    "gorbunov_saga": lambda r: bound_gorbunov_saga(r.mu, r.L, r.alpha, r.n, r.N, r.dist0),
}

RATE_FIELDS = tuple(f.name for f in fields(RateInputs))


def evaluate(name: str, inputs: RateInputs) -> float:
    if name not in BOUNDS:
        raise SpecError(f"unknown analytic bound {name!r}; choose from {', '.join(BOUNDS)}")
    return BOUNDS[name](inputs)


def limit_additive_sc(mu: float, alpha: float, sigma2: float) -> float:
    """``N -> inf`` value of :func:`bound_additive_sc`."""
    phi2 = (1.0 - mu * alpha) ** 2
    return alpha**2 * sigma2 / (1.0 - phi2) if phi2 < 1 else math.inf
