"""Load a :class:`ProblemSpec` from a TOML file.

Example::

    [method]
    kind = "sgd"          # sgd | silver | alpha
    N = 3
    step = 1.0            # or steps = [...]; silver takes k; alpha takes alpha = [[...], ...]

    [fclass]
    mu = 0.0
    L = 1.0               # or "inf"

    [noise]
    preset = "additive-bounded"
    sigma2 = 0.01         # or raw parameters A1 = ..., D1 = ..., ...

    [init]
    kind = "dist"
    bound = 1.0

    [perf]
    kind = "fgap"
"""

from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (NOISE_PARAMETERS, FunctionClass, InitialCondition, Method, NoiseModel,
                    PerformanceMeasure, ProblemSpec, SpecError, constant_step_sgd, noise_preset,
                    sgd_method, silver_schedule)

_SECTIONS = {"method", "fclass", "noise", "init", "perf"}
_METHOD_KEYS = {"kind", "N", "steps", "step", "k", "alpha", "variant", "scale"}
_PRESET_KEYS = {"preset", "sigma2", "L", "sigma_star", "d", "n"}


def _reject_unknown(section: str, data: Mapping, allowed: set):
    unknown = set(data) - allowed
    if unknown:
        raise SpecError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _real(value, what: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise SpecError(f"{what} must be a number or 'inf', got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{what} must be a number, got {value!r}")
    return float(value)


def _method(data: Mapping[str, Any]) -> Method:
    _reject_unknown("method", data, _METHOD_KEYS)
    kind = data.get("kind", "sgd")
    scale = _real(data.get("scale", 1.0), "method.scale")
    if kind == "sgd":
        if "N" not in data:
            raise SpecError("[method] needs N")
        N = int(data["N"])
        if "steps" in data:
            return sgd_method(N, [scale * _real(s, "step") for s in data["steps"]])
        if "step" in data:
            return constant_step_sgd(N, scale * _real(data["step"], "method.step"))
        raise SpecError("[method] kind 'sgd' needs 'steps' or 'step'")
    if kind == "silver":
        k = int(data.get("k", 0))
        steps = [scale * s for s in silver_schedule(k, data.get("variant", "printed"))]
        if "N" in data and int(data["N"]) != len(steps):
            raise SpecError(f"silver schedule with k={k} has N={len(steps)}, not {data['N']}")
        m = sgd_method(len(steps), steps)
        return Method(m.alpha, name="silver")
    if kind == "alpha":
        if "alpha" not in data:
            raise SpecError("[method] kind 'alpha' needs an 'alpha' table")
        alpha = np.array([[_real(v, "alpha entry") for v in row] for row in data["alpha"]])
        m = Method(scale * alpha)
        if "N" in data and int(data["N"]) != m.N:
            raise SpecError(f"alpha has N={m.N}, not {data['N']}")
        return m
    raise SpecError(f"unknown method kind {kind!r}; choose from sgd, silver, alpha")


def _noise(data: Mapping[str, Any], fclass: FunctionClass) -> NoiseModel:
    if "preset" in data:
        _reject_unknown("noise", data, _PRESET_KEYS)
        params = {k: _real(v, f"noise.{k}") for k, v in data.items() if k != "preset"}
        params.setdefault("L", fclass.L)
        return noise_preset(data["preset"], params)
    _reject_unknown("noise", data, set(NOISE_PARAMETERS))
    return NoiseModel(**{k: _real(v, f"noise.{k}") for k, v in data.items()})


def spec_from_dict(data: Mapping[str, Any]) -> ProblemSpec:
    _reject_unknown("top level", data, _SECTIONS)
    if "method" not in data:
        raise SpecError("missing [method] section")
    method = _method(data["method"])
    fdata = data.get("fclass", {})
    _reject_unknown("fclass", fdata, {"mu", "L"})
    fclass = FunctionClass(_real(fdata.get("mu", 0.0), "fclass.mu"), _real(fdata.get("L", 1.0), "fclass.L"))
    noise = _noise(data.get("noise", {}), fclass)
    idata = data.get("init", {})
    _reject_unknown("init", idata, {"kind", "bound", "weight"})
    init = InitialCondition(idata.get("kind", "dist"), _real(idata.get("bound", 1.0), "init.bound"),
                            _real(idata.get("weight", 0.0), "init.weight"))
    pdata = data.get("perf", {})
    _reject_unknown("perf", pdata, {"kind", "weight"})
    perf = PerformanceMeasure(pdata.get("kind", "fgap"), _real(pdata.get("weight", 0.0), "perf.weight"))
    return ProblemSpec(method, fclass, noise, init, perf)


def loads_spec(text: str) -> ProblemSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"invalid spec file: {exc}") from None
    return spec_from_dict(data)


def load_spec(path: str | Path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from None
    return loads_spec(text)
