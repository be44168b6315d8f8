"""Run configuration: JSON in, validated and defaulted :class:`RunConfig` out."""

from __future__ import annotations

import hashlib
import json

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dirac_solver import MinMaxConfig
from .limit_harness import HarnessTolerances
from .nls import NlsConfig
from .spectral import GridSpec, PhysParams

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Malformed, unknown or out-of-window configuration entry."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSection(_Strict):
    n: int = Field(48, description="points per axis (even, >= 8)")
    half_width: float = Field(12.0, gt=0, description="box is [-L, L)^3")

    @field_validator("n")
    @classmethod
    def _even(cls, v):
        if v < 8 or v % 2:
            raise ValueError(f"n must be even and >= 8, got {v}")
        return v


class ParamsSection(_Strict):
    m: float = Field(1.0, gt=0)
    c: float = Field(8.0, gt=0, description="light speed for single solves")
    c_list: list[float] = Field(default_factory=lambda: [4.0, 8.0, 16.0], description="ascending sweep ladder")
    kappa: float = 2.0
    s: float = 2.5
    a: float = Field(1.0, gt=0, description="K(x) = exp(-a|x|)")
    mu: float = 1.0
    tau: float = 0.5

    @model_validator(mode="after")
    def _windows(self):
        windows = {
            "kappa": (self.kappa, 2.0, 7 / 3, True, False, "[2, 7/3)"),
            "s": (self.s, 2.0, 8 / 3, False, True, "(2, 8/3]"),
        }
        for key, (v, lo, hi, lc, hc, text) in windows.items():
            if not ((v >= lo if lc else v > lo) and (v <= hi if hc else v < hi)):
                raise ValueError(f"params.{key}={v} outside admissible window {text}")
        mu_hi = (10 - 3 * self.s) / 2
        if not 0 < self.mu < mu_hi:
            raise ValueError(f"params.mu={self.mu} outside admissible window (0, (10-3s)/2) = (0, {mu_hi:g})")
        tau_hi = 7 - 3 * self.kappa
        if not 0 < self.tau < tau_hi:
            raise ValueError(f"params.tau={self.tau} outside admissible window (0, 7-3kappa) = (0, {tau_hi:g})")
        cl = self.c_list
        if any(c <= 0 for c in cl) or any(b <= a for a, b in zip(cl, cl[1:])):
            raise ValueError(f"params.c_list must be positive and strictly ascending, got {cl}")
        return self


class SolverSection(_Strict):
    inner_tol: float = Field(1e-8, gt=0)
    outer_tol: float = Field(1e-7, gt=0)
    inner_max_iter: int = Field(2000, ge=1)
    outer_max_iter: int = Field(500, ge=1)
    step0: float = Field(1.0, gt=0)
    minus_norm_cap: float = Field(0.9, gt=0, lt=1)
    precond_shift: float = Field(0.25, gt=0)
    guess_width: float = Field(1.5, gt=0)
    warm_start: bool = True
    nls_tol: float = Field(1e-9, gt=0)
    nls_max_iter: int = Field(3000, ge=1)


class HarnessSection(_Strict):
    decay_window: tuple[float, float] | None = Field(None, description="null means [L/4, L/2]")
    gap_ratio_max: float = 4.0
    g_slope_range: tuple[float, float] = (-1.3, -0.7)
    f_dist_max: float = 0.05
    energy_gap_max: float = 0.02
    decay_factor: float = 0.8
    r2_min: float = 0.99
    b_rel_tol: float = 0.05


class InequalitySection(_Strict):
    n: int = Field(16, description="grid points per axis for the Monte-Carlo fields")
    n_samples: int = Field(500, ge=1, description="N; each check draws 2N samples")
    growth_max: float = Field(1.10, gt=1)
    homogeneity_tol: float = Field(1e-10, gt=0)
    cutoff_fraction: float = Field(2 / 3, gt=0, le=2 / 3, description="band limit of the random fields")


class RunConfig(_Strict):
    grid: GridSection = GridSection()
    params: ParamsSection = ParamsSection()
    solver: SolverSection = SolverSection()
    harness: HarnessSection = HarnessSection()
    inequalities: InequalitySection = InequalitySection()
    seed: int = Field(0, ge=0, lt=2**64)
    output_dir: str = "out"

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid.n, self.grid.half_width)

    def phys(self, c: float | None = None) -> PhysParams:
        q = self.params
        return PhysParams(q.m, q.c if c is None else c, q.kappa, q.s, q.a, q.mu, q.tau)

    def minmax(self, trace_path: str | None = None) -> MinMaxConfig:
        s = self.solver
        return MinMaxConfig(
            inner_tol=s.inner_tol,
            outer_tol=s.outer_tol,
            inner_max_iter=s.inner_max_iter,
            outer_max_iter=s.outer_max_iter,
            step0=s.step0,
            minus_norm_cap=s.minus_norm_cap,
            precond_shift=s.precond_shift,
            guess_width=s.guess_width,
            warm_start=s.warm_start,
            trace_path=trace_path,
        )

    def nls(self) -> NlsConfig:
        return NlsConfig(tol=self.solver.nls_tol, max_iter=self.solver.nls_max_iter)

    def tolerances(self) -> HarnessTolerances:
        return HarnessTolerances(**self.harness.model_dump())

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, ignoring where outputs go."""
        data = self.model_dump(mode="json", exclude={"output_dir"})
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        if e["type"] == "extra_forbidden":
            msg = "unknown key"
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def parse_config(text: str) -> RunConfig:
    """Validate JSON text; raises :class:`ConfigError` naming the offending key."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
