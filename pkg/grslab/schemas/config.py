"""
Run configuration schemas: model spec grammar, grid resolutions, tolerances.
"""
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator

from grslab.config import settings
from grslab.core.exceptions import ConfigParseError, UnknownModelError
from grslab.schemas.common import ModelKind

# accepted keys and defaults per model family
_SPEC_DEFAULTS: dict[str, dict[str, float]] = {
    "sphere": {"n": 2, "r": 1.0},
    "product": {"n1": 2, "r1": 1.0, "n2": 2, "r2": 1.0},
    "ellipsoid": {"a": 1.0, "b": 1.0, "c": 1.2, "f": 0.3, "tau": 0.5},
    "round": {"n": 2, "r": 1.0},
}
_INTEGER_KEYS = {"n", "n1", "n2"}


class ModelSpec(BaseModel):
    """Parsed model string, e.g. `sphere:n=2,r=1` or `generic:ellipsoid,c=1.2`."""

    kind: ModelKind
    family: str = Field(..., description="sphere, product, ellipsoid or round")
    params: dict[str, float] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_params(self):
        allowed = _SPEC_DEFAULTS[self.family]
        unknown = sorted(set(self.params) - set(allowed))
        if unknown:
            raise ValueError(f"unknown parameters {unknown} for {self.family}")
        for key, value in self.params.items():
            if key in _INTEGER_KEYS and value != int(value):
                raise ValueError(f"{key} must be an integer")
            if key.startswith(("r", "a", "b", "c", "tau")) and not value > 0:
                raise ValueError(f"{key} must be positive")
        return self

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        text = text.strip()
        head, _, tail = text.partition(":")
        items = [item.strip() for item in tail.split(",") if item.strip()] if tail else []
        if head == "generic":
            if not items or "=" in items[0]:
                raise UnknownModelError(text)
            family, items = items[0], items[1:]
        else:
            family = head
        if family not in _SPEC_DEFAULTS or (head == "generic") != (family in ("ellipsoid", "round")):
            raise UnknownModelError(text)

        params: dict[str, float] = {}
        for item in items:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigParseError(f"Malformed model parameter '{item}'", {"spec": text})
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ConfigParseError(f"Non-numeric value in '{item}'", {"spec": text})
        try:
            return cls(kind=ModelKind(head), family=family, params=_SPEC_DEFAULTS[family] | params)
        except ValueError as exc:
            raise ConfigParseError(f"Invalid model spec '{text}'", {"reason": str(exc)}) from exc

    def integer(self, key: str) -> int:
        return int(self.params[key])

    def text(self) -> str:
        body = ",".join(f"{k}={_number(v)}" for k, v in self.params.items())
        prefix = f"generic:{self.family}" if self.kind == ModelKind.GENERIC else self.family
        return f"{prefix},{body}" if self.kind == ModelKind.GENERIC else f"{prefix}:{body}"


def _number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


class GridResolution(BaseModel):
    """Nodes per polar (or interval) axis and per periodic axis, written `RxS`."""

    polar: int = Field(..., ge=1)
    periodic: int = Field(..., ge=1)

    model_config = ConfigDict(frozen=True)

    @classmethod
    def parse(cls, text: str) -> "GridResolution":
        first, sep, second = text.strip().lower().partition("x")
        try:
            polar = int(first)
            periodic = int(second) if sep else 2 * polar
        except ValueError:
            raise ConfigParseError(f"Malformed resolution '{text}'", {"expected": "RxS"})
        try:
            return cls(polar=polar, periodic=periodic)
        except ValueError as exc:
            raise ConfigParseError(f"Invalid resolution '{text}'", {"reason": str(exc)}) from exc

    def refined(self, factor: int = 2) -> "GridResolution":
        return GridResolution(polar=self.polar * factor, periodic=self.periodic * factor)

    def text(self) -> str:
        return f"{self.polar}x{self.periodic}"


class ToleranceTable(BaseModel):
    """Every tolerance the checks compare against; defaults come from settings."""

    closed_form: PositiveFloat = settings.TOL_CLOSED_FORM
    finite_difference: PositiveFloat = settings.TOL_FINITE_DIFFERENCE
    soliton_exact: PositiveFloat = settings.TOL_SOLITON_EXACT
    mass: PositiveFloat = settings.TOL_MASS
    gram_drop: PositiveFloat = settings.TOL_GRAM_DROP
    orthonormal: PositiveFloat = settings.TOL_ORTHONORMAL
    symmetry: PositiveFloat = settings.TOL_SYMMETRY
    cluster: PositiveFloat = settings.TOL_CLUSTER
    spectrum: PositiveFloat = settings.TOL_SPECTRUM
    upsilon: PositiveFloat = settings.TOL_UPSILON
    kernel: PositiveFloat = settings.TOL_KERNEL
    second_variation: PositiveFloat = settings.TOL_SECOND_VARIATION
    relation: PositiveFloat = settings.TOL_RELATION
    fd_min_order: PositiveFloat = settings.FD_MIN_ORDER

    model_config = ConfigDict(frozen=True, extra="forbid")

    @classmethod
    def from_settings(cls, overrides: dict[str, Any] | None = None) -> "ToleranceTable":
        return cls(**(settings.tolerance_table() | (overrides or {})))

    def identity(self, finite_difference: bool) -> float:
        """Identity-residual tolerance for a derivative backend."""
        return self.finite_difference if finite_difference else self.closed_form


class RunConfig(BaseModel):
    """One CLI run after merging the config file with command-line flags."""

    model: ModelSpec
    resolutions: list[GridResolution] = Field(default_factory=list)
    degree: int | None = Field(default=None, ge=0, description="Galerkin truncation degree L")
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0, lt=2**64)
    tolerances: ToleranceTable = Field(default_factory=ToleranceTable.from_settings)
    out_json: Path | None = None
    out_csv: Path | None = None

    @field_validator("resolutions")
    @classmethod
    def validate_resolutions(cls, v):
        """Duplicate resolutions would repeat a convergence row."""
        if len({r.text() for r in v}) != len(v):
            raise ValueError("resolutions must be distinct")
        return v

    def echo(self) -> dict[str, Any]:
        return {
            "model": self.model.text(),
            "resolutions": [r.text() for r in self.resolutions],
            "degree": self.degree,
            "seed": self.seed,
            "tolerances": self.tolerances.model_dump(),
        }
