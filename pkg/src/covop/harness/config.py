"""Experiment configuration: TOML or JSON files mapped onto a dataclass."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..exceptions import ConfigError
from ..kernels import BaseKernelSpec, KernelSpec, WeightSpec

ESTIMATORS = (
    "sample",
    "universal_theory",
    "universal_grid",
    "adaptive_sample",
    "adaptive_wick",
    "adaptive_sample_grid",
    "adaptive_wick_grid",
)
GRID_ESTIMATORS = ("universal_grid", "adaptive_sample_grid", "adaptive_wick_grid")
THEORY_ESTIMATORS = ("universal_theory", "adaptive_sample", "adaptive_wick")
TRANSFORMS = ("Gaussian", "AbsCentered", "AbsSinProduct")
# universal theory radius: rho_hat times sup sigma ("sd") or sup sigma^2 ("variance")
UNIVERSAL_SCALES = ("sd", "variance")


@dataclass(frozen=True)
class KernelTemplate:
    """Kernel family without a lengthscale or weight; the run supplies both."""

    family: str = "SE"
    nu: float = 2.5
    eta: float = 0.2
    permutation_seed: int | None = None

    @property
    def label(self) -> str:
        return self.family + ("-shuffled" if self.permutation_seed is not None else "")

    @property
    def shape_parameter(self) -> float | None:
        return {"Matern": self.nu, "Periodic": self.eta}.get(self.family)

    def build(self, length_scale: float, alpha: float) -> KernelSpec:
        base = BaseKernelSpec(self.family, length_scale, self.nu, self.eta)
        weight = WeightSpec("ExpAlpha", alpha) if alpha > 0 else WeightSpec("Unit")
        return KernelSpec(base, weight, self.permutation_seed)


@dataclass(frozen=True)
class LambdaGrid:
    min_exponent: float = -2.5
    max_exponent: float = -0.1
    count: int = 30

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([10.0**self.min_exponent])
        return 10.0 ** np.linspace(self.min_exponent, self.max_exponent, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    kernels: tuple[KernelTemplate, ...] = (KernelTemplate(),)
    d: int = 1
    m: int = 500
    lambda_grid: LambdaGrid = LambdaGrid()
    alphas: tuple[float, ...] = (0.1,)
    trials: int = 20
    c0: float = 5.0
    radius_grid_count: int = 10
    estimators: tuple[str, ...] = ("sample", "universal_theory", "adaptive_sample", "adaptive_wick")
    transform: str = "Gaussian"
    master_seed: int = 0
    output_dir: str = "results"
    figure: str = "fig.svg"
    universal_scale: str = "sd"
    theory: dict = field(default_factory=dict)

    def __post_init__(self):
        _check(self.d in (1, 2, 3), "d", f"must be 1, 2 or 3, got {self.d}")
        _check(self.m >= 2, "m", f"must be at least 2, got {self.m}")
        _check(self.trials >= 1, "trials", f"must be at least 1, got {self.trials}")
        _check(self.c0 > 0, "c0", f"must be positive, got {self.c0}")
        _check(self.lambda_grid.count >= 1, "lambda_grid.count", "must be at least 1")
        _check(self.lambda_grid.max_exponent < 0, "lambda_grid.max_exponent", "lengthscales must be below 1")
        _check(len(self.kernels) >= 1, "kernels", "at least one kernel is required")
        _check(len(self.alphas) >= 1, "alphas", "at least one alpha is required")
        for a in self.alphas:
            _check(a == 0 or 0 < a < 0.5, "alphas", f"{a} is neither 0 (unweighted) nor in (0, 1/2)")
        _check(len(self.estimators) >= 1, "estimators", "at least one estimator is required")
        for e in self.estimators:
            _check(e in ESTIMATORS, "estimators", f"unknown estimator {e!r}; expected one of {ESTIMATORS}")
        _check(self.transform in TRANSFORMS, "transform", f"expected one of {TRANSFORMS}")
        _check(self.universal_scale in UNIVERSAL_SCALES, "universal_scale", f"expected one of {UNIVERSAL_SCALES}")
        if any(e in GRID_ESTIMATORS for e in self.estimators):
            _check(self.radius_grid_count >= 2, "radius_grid_count", "must be at least 2 for grid estimators")
        if self.transform != "Gaussian":
            bad = [e for e in self.estimators if e in THEORY_ESTIMATORS]
            _check(not bad, "estimators", f"{bad} need Gaussian data; use the *_grid variants")

    def lambdas(self) -> np.ndarray:
        return self.lambda_grid.values()

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> "ExperimentConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["master_seed"] = seed
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kernels"] = [asdict(k) for k in self.kernels]
        out["alphas"] = list(self.alphas)
        out["estimators"] = list(self.estimators)
        return out


def _check(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"config field '{key}': {msg}")


_TOP_KEYS = {f for f in ExperimentConfig.__dataclass_fields__} | {"kernel"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    data = dict(raw)
    kernels = data.pop("kernels", None)
    if "kernel" in data:
        _check(kernels is None, "kernel", "give either 'kernel' or 'kernels', not both")
        kernels = [data.pop("kernel")]
    try:
        if kernels is not None:
            data["kernels"] = tuple(_kernel(k, i) for i, k in enumerate(kernels))
        if "lambda_grid" in data:
            data["lambda_grid"] = LambdaGrid(**data["lambda_grid"])
        for key in ("alphas", "estimators"):
            if key in data:
                data[key] = tuple(data[key])
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"config field error: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _kernel(raw: dict, idx: int) -> KernelTemplate:
    allowed = {"family", "nu", "eta", "permutation_seed", "shuffle"}
    unknown = set(raw) - allowed
    _check(not unknown, f"kernels[{idx}]", f"unknown key(s) {sorted(unknown)}")
    raw = dict(raw)
    if raw.pop("shuffle", False) and raw.get("permutation_seed") is None:
        raw["permutation_seed"] = 0
    tmpl = KernelTemplate(**raw)
    try:
        BaseKernelSpec(tmpl.family, 0.5, tmpl.nu, tmpl.eta)
    except ValueError as exc:
        raise ConfigError(f"config field 'kernels[{idx}]': {exc}") from exc
    return tmpl


def load_config(path) -> ExperimentConfig:
    """Parse a TOML (or ``.json``) experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return config_from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
