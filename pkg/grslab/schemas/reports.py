"""
Report schemas. Field order here is the key order of the JSON reports.
"""
from typing import Any

from pydantic import BaseModel, Field

from grslab.schemas.common import CheckStatus, IdentityName, JointClass, Operator, Verdict


class IdentityResidual(BaseModel):
    """One identity check: residual norms and the tolerance they were tested against."""
    name: IdentityName
    sup_norm: float | None = None
    l2_norm: float | None = None
    tolerance: float | None = None
    status: CheckStatus
    reason: str | None = None
    details: dict[str, Any] = Field(default_factory=dict)


class IdentityResidualSet(BaseModel):
    """Named residuals of one suite, in registry order."""
    suite: str
    entries: list[IdentityResidual] = Field(default_factory=list)

    def __getitem__(self, name: IdentityName) -> IdentityResidual:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def __contains__(self, name: IdentityName) -> bool:
        return any(entry.name == name for entry in self.entries)

    @property
    def passed(self) -> bool:
        return all(entry.status != CheckStatus.FAILED for entry in self.entries)

    def failures(self) -> list[IdentityName]:
        return [entry.name for entry in self.entries if entry.status == CheckStatus.FAILED]


class ConvergenceRow(BaseModel):
    resolution: str
    error: float
    order: float | None = None


class ConvergenceStudy(BaseModel):
    """Errors across refinements and the observed orders between them."""
    quantity: str
    rows: list[ConvergenceRow]
    min_order: float | None
    required_order: float
    status: CheckStatus


class SpectrumSummary(BaseModel):
    """Eigenvalues (descending) of one assembled operator."""
    operator: Operator
    degree: int
    basis_size: int
    eigenvalues: list[float]
    residuals: list[float]
    tags: list[list[str]]
    symmetry_defect: float
    orthonormality_defect: float
    condition_number: float
    ric_deflated: list[bool] = Field(default_factory=list)


class GapCheck(BaseModel):
    degree: int
    lambda_1: float
    bound: float
    tolerance: float
    status: CheckStatus


class CommutationRow(BaseModel):
    degree: int
    residual: float


class CommutationTrend(BaseModel):
    rows: list[CommutationRow]
    monotone: bool
    status: CheckStatus


class ScannedDirection(BaseModel):
    """A Lichnerowicz eigentensor above -1/(2 tau) and its second variation.

    `agreement` is the relative gap between the direct and the closed-form
    second variation. For eigenvalues away from zero the double divergence,
    upsilon and the pairing with Ric must vanish as well.
    """
    eigenvalue: float
    second_variation: float
    second_variation_closed_form: float
    agreement: float
    double_divergence_norm: float
    upsilon_norm: float
    ricci_pairing: float
    coefficients: list[float]
    tags: list[str]
    tolerance: float
    kernel_tolerance: float
    pairing_tolerance: float
    unstable: bool
    status: CheckStatus


class JointMember(BaseModel):
    """Transversal members are checked on their divergence, gauge members on |N h|."""
    lichnerowicz: float
    gauged: float
    joint_class: JointClass
    divergence_norm: float
    stability_image_norm: float | None = None
    ric_deflated: bool = False
    tolerance: float
    status: CheckStatus


class SufficientCheck(BaseModel):
    degree: int
    members: list[JointMember]
    commutation_residual: float
    offending: list[float]
    gauge_kernel_max: float
    kernel_tolerance: float
    bound: float
    tolerance: float
    verdict: Verdict
    status: CheckStatus


class RelationRow(BaseModel):
    eigenvalue: float
    relation_residual: float
    divergence_residual: float
    tolerance: float
    status: CheckStatus


class StabilityReport(BaseModel):
    """Everything the stability criteria concluded at truncation degree L."""
    model: str
    degree: int
    tau: float
    gap: GapCheck
    lichnerowicz_spectrum: SpectrumSummary
    necessary: list[ScannedDirection]
    sufficient: SufficientCheck
    relation: list[RelationRow]
    kernel: IdentityResidualSet
    witness: ScannedDirection | None = None
    verdict: Verdict
    verdict_label: str


class RunReport(BaseModel):
    """Top-level JSON document written by every subcommand."""
    tool_version: str
    config_echo: dict[str, Any]
    model: dict[str, Any]
    grid: list[dict[str, Any]]
    results: list[dict[str, Any]]
    verdict: str | None = None
