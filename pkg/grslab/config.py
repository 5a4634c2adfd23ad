"""
Tool settings, read from the environment (and an optional .env file).

Every numerical tolerance default is declared here as a TOL_* field; a run
config can override single entries through its tol.* keys.
"""
from pydantic import Field, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# accepted spellings per setting, normalized to the stored case
CHOICES: dict[str, tuple[str, ...]] = {
    "LOG_LEVEL": ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"),
    "LOG_FORMAT": ("json", "console"),
    "ENVIRONMENT": ("development", "ci", "production"),
}


class Settings(BaseSettings):
    """Tool settings loaded from environment variables."""

    # Environment
    ENVIRONMENT: str = Field(default="development", description="Environment name")
    DEBUG: bool = Field(default=False, description="Debug mode")

    # Tool identity
    PROJECT_NAME: str = Field(default="grslab", description="Tool name")
    TOOL_VERSION: str = Field(default="1.0.0", description="Tool version written into reports")

    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    LOG_FORMAT: str = Field(default="console", description="Log format: json or console")

    # Evaluation
    DEFAULT_SEED: int = Field(default=20240611, description="Seed for generated test fields")
    EVAL_CHUNK_SIZE: int = Field(default=512, description="Quadrature nodes per compiled evaluation batch")
    FLOAT_SIGNIFICANT_DIGITS: int = Field(default=12, description="Significant digits of floats in reports")
    GENERATED_FIELD_COUNT: int = Field(default=20, description="Random test fields per identity suite")
    CHECK_NODE_LIMIT: int = Field(default=128, description="Interior nodes sampled by pointwise identity checks")
    MIN_AXIS_NODES: int = Field(default=8, description="Smallest accepted quadrature nodes per axis")

    # Charts
    DEFAULT_COLLAR: float = Field(default=0.02, description="Interior collar of closed-form charts (axis fraction)")
    FD_COLLAR: float = Field(default=0.3, description="Interior collar of finite-difference charts (axis fraction)")
    FD_BUILD_RESOLUTION: int = Field(default=64, description="Polar nodes used when a generic model is built")

    # Tolerance table
    TOL_CLOSED_FORM: float = Field(default=1e-8, description="Identity residuals, closed-form backends")
    TOL_FINITE_DIFFERENCE: float = Field(default=1e-4, description="Identity residuals, finite-difference backend")
    TOL_SOLITON_EXACT: float = Field(default=1e-10, description="Soliton residual bound of the exact flag")
    TOL_MASS: float = Field(default=1e-9, description="Allowed |integral of dm - 1| before renormalization")
    TOL_GRAM_DROP: float = Field(default=1e-10, description="Squared relative residual that drops a generator")
    TOL_ORTHONORMAL: float = Field(default=1e-10, description="G-orthonormality of filtered bases")
    TOL_SYMMETRY: float = Field(default=1e-8, description="Relative symmetry defect of assembled matrices")
    TOL_CLUSTER: float = Field(default=1e-6, description="Relative eigenvalue clustering tolerance")
    TOL_SPECTRUM: float = Field(default=1e-6, description="Eigenvalue thresholds and gap comparisons")
    TOL_UPSILON: float = Field(default=1e-6, description="Relative residual of the upsilon equation")
    TOL_KERNEL: float = Field(default=1e-6, description="Stability operator on the image of the adjoint divergence")
    TOL_SECOND_VARIATION: float = Field(default=1e-6, description="Second variation comparisons")
    TOL_RELATION: float = Field(default=1e-5, description="Eigentensor relation residuals")
    FD_MIN_ORDER: float = Field(default=1.8, description="Minimum observed finite-difference order")

    @field_validator("LOG_LEVEL", "LOG_FORMAT", "ENVIRONMENT")
    @classmethod
    def normalize_choice(cls, v: str, info: ValidationInfo) -> str:
        allowed = CHOICES[info.field_name]
        for choice in allowed:
            if v.strip().lower() == choice.lower():
                return choice
        raise ValueError(f"{info.field_name}={v!r} is not one of {', '.join(allowed)}")

    @field_validator("DEFAULT_COLLAR", "FD_COLLAR")
    @classmethod
    def validate_collar(cls, v: float) -> float:
        if not 0.0 <= v < 0.5:
            raise ValueError("collar must satisfy 0 <= collar < 0.5")
        return v

    def tolerance_table(self) -> dict[str, float]:
        """All TOL_* entries keyed by their lower-case suffix."""
        return {
            name[len("TOL_"):].lower(): getattr(self, name)
            for name in type(self).model_fields
            if name.startswith("TOL_")
        } | {"fd_min_order": self.FD_MIN_ORDER}

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


settings = Settings()
