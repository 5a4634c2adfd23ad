"""
Custom exception classes for grslab.
Every error carries a stable error code and the process exit code it maps to.
"""
from typing import Any

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BUILD = 3


class GrslabError(Exception):
    """
    Base exception class for all grslab errors.
    Provides structured error payloads with error codes.
    """

    def __init__(
        self,
        exit_code: int,
        error_code: str,
        message: str,
        details: dict[str, Any] | None = None,
    ):
        self.exit_code = exit_code
        self.error_code = error_code
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def to_payload(self) -> dict[str, Any]:
        return {
            "error": {
                "code": self.error_code,
                "message": self.message,
                "details": self.details,
            }
        }


# ============================================================================
# CONFIGURATION ERRORS (CONFIG_***)
# ============================================================================


class ConfigParseError(GrslabError):
    """Config file or flag value could not be parsed."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(
            exit_code=EXIT_CONFIG,
            error_code="CONFIG_PARSE_ERROR",
            message=message,
            details=details,
        )


class ConfigValueError(GrslabError):
    """Parsed value violates a constraint."""

    def __init__(self, field: str, reason: str):
        super().__init__(
            exit_code=EXIT_CONFIG,
            error_code="CONFIG_INVALID_VALUE",
            message=f"Invalid value for '{field}': {reason}",
            details={"field": field, "reason": reason},
        )


class UnknownModelError(GrslabError):
    """Model spec names an unknown model family."""

    def __init__(self, spec: str):
        super().__init__(
            exit_code=EXIT_CONFIG,
            error_code="CONFIG_UNKNOWN_MODEL",
            message=f"Unknown model spec '{spec}'",
            details={"spec": spec},
        )


class AliasingError(GrslabError):
    """Quadrature resolution too small for the requested basis degree."""

    def __init__(self, nodes: int, degree: int):
        super().__init__(
            exit_code=EXIT_CONFIG,
            error_code="CONFIG_ALIASING",
            message=f"{nodes} nodes per axis cannot resolve basis degree {degree}",
            details={"nodes": nodes, "degree": degree, "required": 2 * degree + 2},
        )


class FiniteDifferenceStepError(GrslabError):
    """Finite-difference step underflows the chart box."""

    def __init__(self, axis: int, step: float, length: float):
        super().__init__(
            exit_code=EXIT_CONFIG,
            error_code="CONFIG_FD_STEP",
            message=f"Step {step:g} on axis {axis} is too small for axis length {length:g}",
            details={"axis": axis, "step": step, "length": length},
        )


# ============================================================================
# MODEL BUILD ERRORS (BUILD_***)
# ============================================================================


class ChartError(GrslabError):
    """Chart violates its invariants."""

    def __init__(self, reason: str):
        super().__init__(
            exit_code=EXIT_BUILD,
            error_code="BUILD_INVALID_CHART",
            message=f"Invalid chart: {reason}",
            details={"reason": reason},
        )


class SingularMetricError(GrslabError):
    """Metric is not invertible at an evaluation point."""

    def __init__(self, point: list[float]):
        super().__init__(
            exit_code=EXIT_BUILD,
            error_code="BUILD_SINGULAR_METRIC",
            message="Metric is singular at the evaluation point",
            details={"point": point},
        )


class MetricNotPositiveDefiniteError(GrslabError):
    """Metric fails symmetric positive-definiteness on sampled nodes."""

    def __init__(self, failed_nodes: int, min_eigenvalue: float):
        super().__init__(
            exit_code=EXIT_BUILD,
            error_code="BUILD_METRIC_NOT_SPD",
            message=f"Metric is not symmetric positive-definite at {failed_nodes} nodes",
            details={"failed_nodes": failed_nodes, "min_eigenvalue": min_eigenvalue},
        )


class UnsupportedDimensionError(GrslabError):
    """Model family does not support the requested dimension."""

    def __init__(self, family: str, n: int, supported: list[int]):
        super().__init__(
            exit_code=EXIT_BUILD,
            error_code="BUILD_UNSUPPORTED_DIMENSION",
            message=f"{family} does not support n={n}",
            details={"family": family, "n": n, "supported": supported},
        )


class EinsteinConstantMismatchError(GrslabError):
    """Product factors have different Einstein constants."""

    def __init__(self, kappa_a: float, kappa_b: float):
        super().__init__(
            exit_code=EXIT_BUILD,
            error_code="BUILD_EINSTEIN_MISMATCH",
            message=f"Einstein constants differ ({kappa_a:g} vs {kappa_b:g}); the product is not a soliton",
            details={"kappa_a": kappa_a, "kappa_b": kappa_b},
        )


# ============================================================================
# ANALYSIS ERRORS (ANALYSIS_***)
# ============================================================================


class GridModelMismatchError(GrslabError):
    """Quadrature grid was built for another model."""

    def __init__(self, grid_model: str, model: str):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_GRID_MISMATCH",
            message=f"Grid built for '{grid_model}' used with '{model}'",
            details={"grid_model": grid_model, "model": model},
        )


class ValenceError(GrslabError):
    """Operator applied to a field of unsupported valence."""

    def __init__(self, operator: str, valence: int, supported: list[int]):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_VALENCE",
            message=f"{operator} does not accept valence {valence}",
            details={"operator": operator, "valence": valence, "supported": supported},
        )


class ApproximateSolitonError(GrslabError):
    """Soliton-only operation requested on an approximate soliton."""

    def __init__(self, operation: str, residual: float):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_APPROXIMATE_SOLITON",
            message=f"{operation} requires an exact soliton (soliton residual {residual:.3e})",
            details={"operation": operation, "soliton_residual": residual},
        )


class ScalarCurvatureIntegralError(GrslabError):
    """Integral of scalar curvature is not positive."""

    def __init__(self, value: float):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_SCALAR_CURVATURE_INTEGRAL",
            message=f"Integral of R dm is {value:.6e}; a shrinking soliton needs a positive value",
            details={"integral": value},
        )


class GramNotPositiveDefiniteError(GrslabError):
    """Gram matrix handed to an eigensolve is not SPD."""

    def __init__(self, min_eigenvalue: float):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_GRAM_NOT_SPD",
            message="Gram matrix is not symmetric positive-definite",
            details={"min_eigenvalue": min_eigenvalue},
        )


class EmptyBasisError(GrslabError):
    """No generator survived rank filtering."""

    def __init__(self, valence: int, degree: int):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_EMPTY_BASIS",
            message=f"Basis of valence {valence} and degree {degree} is empty after filtering",
            details={"valence": valence, "degree": degree},
        )


class QuadratureUnderResolvedError(GrslabError):
    """Assembled operator matrix is not symmetric to tolerance."""

    def __init__(self, operator: str, defect: float, tolerance: float):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_UNDER_RESOLVED",
            message=f"{operator} matrix symmetry defect {defect:.3e} exceeds {tolerance:.1e}",
            details={"operator": operator, "defect": defect, "tolerance": tolerance},
        )


class SpectralGapViolationError(GrslabError):
    """Shifted drift Laplacian is singular on mean-zero functions."""

    def __init__(self, smallest_magnitude: float, condition: float):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_SPECTRAL_GAP",
            message="Upsilon operator is nearly singular on the mean-zero space",
            details={"smallest_magnitude": smallest_magnitude, "condition": condition},
        )


class JointDiagonalizationError(GrslabError):
    """Clustered simultaneous diagonalization failed."""

    def __init__(self, commutation_residual: float, cluster: int):
        super().__init__(
            exit_code=EXIT_FAILURE,
            error_code="ANALYSIS_JOINT_DIAGONALIZATION",
            message="Joint eigenbasis could not be formed",
            details={"commutation_residual": commutation_residual, "cluster": cluster},
        )
