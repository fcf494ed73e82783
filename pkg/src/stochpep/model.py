"""Problem vocabulary: function classes, noise models, methods, measures.

Everything here is an immutable value object. Methods are stored in the
unrolled form ``x_{k+1} = x_0 + sum_{j<=k} alpha[k, j] (g_j + eps_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np


class SpecError(ValueError):
    """Raised for invalid or inconsistent problem specifications."""


@dataclass(frozen=True)
class FunctionClass:
    """mu-strongly convex, L-smooth functions; ``L = inf`` drops smoothness."""

    mu: float = 0.0
    L: float = 1.0

    def __post_init__(self):
        if self.mu < 0:
            raise SpecError(f"mu must be nonnegative, got {self.mu}")
        if not self.L > 0:
            raise SpecError(f"L must be positive, got {self.L}")
        if not self.mu < self.L:
            raise SpecError(f"need mu < L, got mu={self.mu}, L={self.L}")

    @property
    def smooth(self) -> bool:
        return math.isfinite(self.L)


@dataclass(frozen=True)
class NoiseModel:
    """Parameters of the conditional variance bound and the sigma recursion.

    ``E||eps_k||^2 <= A1 (f_k - f*) + B1 ||g_k||^2 + C1 ||x_k - x*||^2 + D1 + E1 sigma_k^2``
    ``sigma_{k+1}^2 <= A2 (f_k - f*) + B2 ||g_k||^2 + C2 ||x_k - x*||^2 + D2 + (1 - rho) sigma_k^2``
    """

    A1: float = 0.0
    B1: float = 0.0
    C1: float = 0.0
    D1: float = 0.0
    E1: float = 0.0
    A2: float = 0.0
    B2: float = 0.0
    C2: float = 0.0
    D2: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.rho > 1:
            raise SpecError(f"rho must be <= 1, got {self.rho}")

    @property
    def uses_sigma(self) -> bool:
        return any(v != 0 for v in (self.E1, self.A2, self.B2, self.C2, self.D2))

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


NOISE_PARAMETERS = tuple(f.name for f in fields(NoiseModel))


@dataclass(frozen=True, eq=False)
class Method:
    """Fixed-step linear first-order method in unrolled coefficient form."""

    alpha: np.ndarray
    name: str = "fslfom"

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        if alpha.ndim != 2 or alpha.shape[0] != alpha.shape[1] or alpha.shape[0] < 1:
            raise SpecError(f"alpha must be a nonempty square array, got shape {alpha.shape}")
        if not np.all(np.isfinite(alpha)):
            raise SpecError("alpha must be finite")
        if np.any(np.triu(alpha, 1) != 0):
            raise SpecError("alpha must be lower triangular (alpha[k, j] = 0 for j > k)")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def N(self) -> int:
        return self.alpha.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Method):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.alpha, other.alpha)

    def __hash__(self):
        return hash((self.name, self.alpha.tobytes()))


def sgd_method(N: int, steps: Sequence[float]) -> Method:
    """SGD ``x_{k+1} = x_k - steps[k] (g_k + eps_k)`` in unrolled form."""
    steps = [float(s) for s in steps]
    if N < 1:
        raise SpecError(f"N must be >= 1, got {N}")
    if len(steps) != N:
        raise SpecError(f"expected {N} steps, got {len(steps)}")
    alpha = np.tril(np.tile(-np.asarray(steps), (N, 1)))
    return Method(alpha, name="sgd")


def constant_step_sgd(N: int, step: float) -> Method:
    return sgd_method(N, [step] * N)


def silver_schedule(k: int, variant: str = "printed") -> list[float]:
    """Recursive long-step schedule of length ``2**k - 1`` (unit smoothness).

    ``variant="printed"`` uses the middle step ``1 + (1 + sqrt2)**(j - 1)``;
    ``variant="shifted"`` uses the exponent ``j`` instead.
    """
    if k < 1:
        raise SpecError(f"silver schedule needs k >= 1, got {k}")
    if variant not in ("printed", "shifted"):
        raise SpecError(f"unknown silver variant {variant!r}")
    rho = 1.0 + math.sqrt(2.0)
    schedule = [math.sqrt(2.0)]
    for j in range(1, k):
        exponent = j - 1 if variant == "printed" else j
        schedule = schedule + [1.0 + rho**exponent] + schedule
    return schedule


_PRESET_REQUIREMENTS = {
    "additive-bounded": ("sigma2",),
    "relative": ("sigma2",),
    "finite-sum-general": ("L", "sigma_star"),
    "finite-sum-interpolated": ("L",),
    "strong-growth": ("d",),
    "rcd": ("d",),
    "saga": ("L", "n"),
}

NOISE_PRESETS = tuple(_PRESET_REQUIREMENTS)


def noise_preset(name: str, params: Mapping[str, float] | None = None) -> NoiseModel:
    """Noise models used in the applications; unlisted parameters are zero."""
    params = dict(params or {})
    if name not in _PRESET_REQUIREMENTS:
        raise SpecError(f"unknown noise preset {name!r}; choose from {', '.join(NOISE_PRESETS)}")
    missing = [p for p in _PRESET_REQUIREMENTS[name] if p not in params]
    if missing:
        raise SpecError(f"noise preset {name!r} is missing parameter(s): {', '.join(missing)}")
    p = {k: float(v) for k, v in params.items()}
    if name == "additive-bounded":
        return NoiseModel(D1=p["sigma2"])
    if name == "relative":
        return NoiseModel(B1=p["sigma2"])
    if name == "finite-sum-general":
        return NoiseModel(A1=4 * p["L"], D1=2 * p["sigma_star"])
    if name == "finite-sum-interpolated":
        return NoiseModel(A1=2 * p["L"])
    if name in ("strong-growth", "rcd"):
        return NoiseModel(B1=p["d"] - 1)
    # saga
    L, n = p["L"], p["n"]
    if n < 1:
        raise SpecError(f"saga needs n >= 1, got {n}")
    return NoiseModel(A1=4 * L, B1=-1.0, E1=2.0, rho=1.0 / n, A2=2 * L / n)


# Measures and initial conditions are Gram-representable expressions built
# against a concrete layout; they are stored as (kind, weight) recipes.
MEASURE_KINDS = ("fgap", "dist", "grad", "dist_sigma")


def _check_kind(kind: str, weight: float):
    if kind not in MEASURE_KINDS:
        raise SpecError(f"unknown measure kind {kind!r}; choose from {', '.join(MEASURE_KINDS)}")
    if kind != "dist_sigma" and weight != 0:
        raise SpecError(f"weight only applies to 'dist_sigma', got weight={weight} for {kind!r}")


@dataclass(frozen=True)
class PerformanceMeasure:
    """Quantity at the last iterate whose expectation is bounded.

    ``fgap``: f_N - f*; ``dist``: ||x_N - x*||^2; ``grad``: ||g_N||^2;
    ``dist_sigma``: ||x_N - x*||^2 + weight * sigma_N^2.
    """

    kind: str = "fgap"
    weight: float = 0.0

    def __post_init__(self):
        _check_kind(self.kind, self.weight)

    @property
    def uses_sigma(self) -> bool:
        return self.kind == "dist_sigma"

    def expression(self, layout, method):
        from .gram import state_expression

        return state_expression(layout, method, layout.N, self.kind, self.weight)


@dataclass(frozen=True)
class InitialCondition:
    """Constraint ``expression(x_0) <= bound`` on the deterministic start."""

    kind: str = "dist"
    bound: float = 1.0
    weight: float = 0.0

    def __post_init__(self):
        _check_kind(self.kind, self.weight)

    @property
    def uses_sigma(self) -> bool:
        return self.kind == "dist_sigma"

    def expression(self, layout, method):
        from .gram import state_expression

        return state_expression(layout, method, 0, self.kind, self.weight)


@dataclass(frozen=True)
class ProblemSpec:
    method: Method
    fclass: FunctionClass = field(default_factory=FunctionClass)
    noise: NoiseModel = field(default_factory=NoiseModel)
    init: InitialCondition = field(default_factory=InitialCondition)
    perf: PerformanceMeasure = field(default_factory=PerformanceMeasure)

    def __post_init__(self):
        if self.method.N < 1:
            raise SpecError("N must be >= 1")

    @property
    def N(self) -> int:
        return self.method.N

    @property
    def track_sigma(self) -> bool:
        return self.noise.uses_sigma or self.init.uses_sigma or self.perf.uses_sigma

    def with_method(self, method: Method) -> "ProblemSpec":
        return ProblemSpec(method, self.fclass, self.noise, self.init, self.perf)

    def with_noise(self, noise: NoiseModel) -> "ProblemSpec":
        return ProblemSpec(self.method, self.fclass, noise, self.init, self.perf)
