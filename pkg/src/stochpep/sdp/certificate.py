"""Explicit worst-case instance from a symmetric or exact solve.

The assembled super-symmetric matrix is factored into per-copy vectors.
Copy ``c`` carries the sign pattern ``diag(Sigma^{1c})``; copies whose
patterns agree on the first ``k`` signs must share their history up to
step ``k``, and the step-``k`` noise of two such copies is equal or opposite
depending on the next sign. Every copy is equally likely, so the average of
the per-copy performance equals the SDP value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..constraints import assemble_supersymmetric, exact_covariance
from ..gram import point_vector
from ..model import FunctionClass, SpecError
from .problem import SdpProblem


@dataclass
class Realization:
    signs: tuple[float, ...]
    x: np.ndarray          # (N + 1, d)
    g: np.ndarray          # (N + 1, d)
    eps: np.ndarray        # (N, d)
    f: np.ndarray          # (N + 1,)
    sigma: np.ndarray | None = None
    performance: float = math.nan


@dataclass
class WorstCaseCertificate:
    value: float
    objective_average: float
    copies: list[Realization] = field(default_factory=list)
    interpolation_violation: float = 0.0
    history_mismatch: float = 0.0      # max squared distance between shared-history points
    noise_mismatch: float = 0.0        # max squared distance from the +-noise pairing
    variance_violation: float = 0.0

    @property
    def max_violation(self) -> float:
        return max(self.interpolation_violation, self.history_mismatch, self.noise_mismatch,
                   self.variance_violation, abs(self.objective_average - self.value))


def interpolation_violation(fclass: FunctionClass, x: np.ndarray, g: np.ndarray, f: np.ndarray) -> float:
    """Largest violation of the F_{mu,L} interpolation inequalities over all ordered point pairs."""
    mu, L = fclass.mu, fclass.L
    worst = -math.inf
    n = len(f)
    for i in range(n):
        dx = x - x[i]                  # x_j - x_i
        dg = g[i] - g                  # g_i - g_j
        val = f[i] - f + dx @ g[i]
        if math.isfinite(L):
            val = (val + np.sum(dg * dg, axis=1) / (2 * (L - mu))
                   + L * mu / (2 * (L - mu)) * np.sum(dx * dx, axis=1)
                   - mu / (L - mu) * np.sum(dg * dx, axis=1))
        else:
            val = val + mu / 2 * np.sum(dx * dx, axis=1)
        val[i] = -math.inf
        worst = max(worst, float(np.max(val)))
    return max(worst, 0.0)


def _factor(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((M + M.T) / 2)
    return V * np.sqrt(np.clip(w, 0.0, None))


def extract_certificate(problem: SdpProblem, report) -> WorstCaseCertificate:
    """Per-copy realizations and consistency checks for a solved symmetric problem."""
    if problem.spec is None or problem.layout is None or problem.copies < 2:
        raise SpecError("certificate extraction needs a symmetric or exact problem")
    if not report.ok or report.blocks is None:
        raise SpecError(f"cannot extract a certificate from a {report.status} solve")
    spec, layout, R = problem.spec, problem.layout, problem.copies
    dim, N = layout.dim, layout.N
    blocks = [report.blocks[j] for j in range(1, R + 1)]
    Y = _factor(assemble_supersymmetric(blocks))
    F = np.asarray(report.F, dtype=float)          # f_0..f_N

    covariance = exact_covariance(N) if R == 2**N else None
    copies = []
    method = spec.method
    for c in range(1, R + 1):
        rows = Y[(c - 1) * dim:c * dim]            # coordinate -> vector
        x = np.array([point_vector(layout, method, "x", k) @ rows for k in range(N + 1)])
        g = np.array([point_vector(layout, method, "g", k) @ rows for k in range(N + 1)])
        eps = np.array([layout.basis("eps", k) @ rows for k in range(N)])
        sig = (np.array([layout.basis("sig", k) @ rows for k in range(N + 1)])
               if layout.tracks_sigma else None)
        if covariance is not None:
            signs = tuple(covariance.diagonal(c))
        else:
            signs = (1.0,) * N if c == 1 else tuple(-1.0 for _ in range(N))
        copies.append(Realization(signs, x, g, eps, F.copy(), sig))

    # interpolation over the union of all copies and the optimum
    X = np.vstack([r.x for r in copies] + [np.zeros((1, Y.shape[1]))])
    G = np.vstack([r.g for r in copies] + [np.zeros((1, Y.shape[1]))])
    Fs = np.concatenate([r.f for r in copies] + [np.zeros(1)])
    interp = interpolation_violation(spec.fclass, X, G, Fs)

    history = noise = 0.0
    if covariance is not None:
        for a in copies:
            for b in copies:
                for k in range(N):
                    if a.signs[:k] != b.signs[:k]:
                        continue
                    history = max(history, float(np.max(np.sum((a.x[:k + 1] - b.x[:k + 1]) ** 2, axis=1))),
                                  float(np.max(np.sum((a.g[:k + 1] - b.g[:k + 1]) ** 2, axis=1))))
                    s = a.signs[k] * b.signs[k]
                    noise = max(noise, float(np.sum((a.eps[k] - s * b.eps[k]) ** 2)))

    noise_model = spec.noise
    var = 0.0
    perf_kind, w = spec.perf.kind, spec.perf.weight
    for r in copies:
        for k in range(N):
            rhs = (noise_model.A1 * r.f[k] + noise_model.B1 * r.g[k] @ r.g[k]
                   + noise_model.C1 * r.x[k] @ r.x[k] + noise_model.D1)
            if noise_model.E1:
                rhs += noise_model.E1 * r.sigma[k] @ r.sigma[k]
            var = max(var, float(r.eps[k] @ r.eps[k] - rhs))
        xN, gN = r.x[N], r.g[N]
        r.performance = {
            "fgap": r.f[N],
            "dist": xN @ xN,
            "grad": gN @ gN,
            "dist_sigma": xN @ xN + (w * r.sigma[N] @ r.sigma[N] if r.sigma is not None else 0.0),
        }[perf_kind]
    avg = float(np.mean([r.performance for r in copies]))
    return WorstCaseCertificate(report.value, avg, copies, interp, history, noise, max(var, 0.0))
