"""JSON run configuration."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .model import ModelParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsConfig(_Strict):
    N_a: int = Field(ge=1)
    N_b: int = Field(ge=1)
    Omega_a: float = Field(gt=0)
    Omega_b: float = Field(gt=0)
    kappa_a: float = Field(ge=0)
    kappa_b: float = Field(ge=0)
    kappa: float

    def to_model(self, **overrides) -> ModelParams:
        return ModelParams(**{**self.model_dump(), **overrides})


class VacuumInitial(_Strict):
    kind: Literal["vacuum"] = "vacuum"


class ThermalInitial(_Strict):
    kind: Literal["thermal"] = "thermal"
    nbar_a: float = Field(ge=0)
    nbar_b: float = Field(ge=0)


class OutputConfig(_Strict):
    path: Optional[str] = None
    format: Literal["csv", "json"] = "csv"


class RunConfig(_Strict):
    params: ParamsConfig
    initial: Union[VacuumInitial, ThermalInitial] = Field(default_factory=VacuumInitial, discriminator="kind")
    t_max: float = Field(default=1.0, ge=0)
    dt: Optional[float] = Field(default=None, gt=0)
    backend: Literal["hpt", "exact", "both"] = "hpt"
    exact_method: Literal["auto", "dense", "krylov"] = "auto"
    output: OutputConfig = Field(default_factory=OutputConfig)
    kappa_grid: Optional[list[float]] = None
    sweep_window: Literal["grid", "long_time"] = "grid"
    jobs: int = Field(default=1, ge=1)

    @field_validator("kappa_grid")
    @classmethod
    def _nonempty(cls, v):
        if v is not None and not v:
            raise ValueError("kappa_grid must not be empty")
        return v

    @model_validator(mode="after")
    def _exact_needs_pure_state(self):
        if self.backend != "hpt" and self.initial.kind != "vacuum":
            raise ValueError("the exact backend only evolves the pure initial state (initial.kind = 'vacuum')")
        return self

    def model_params(self, **overrides) -> ModelParams:
        return self.params.to_model(**overrides)


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate_json(text)
    except Exception as exc:  # pydantic.ValidationError or JSON decode errors
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def emit_config(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=False)
