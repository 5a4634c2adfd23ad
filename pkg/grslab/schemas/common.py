"""
Common enumerations shared by models, services and reports.
"""
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of :class:`enum.StrEnum` (Python 3.11+)."""

        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(str(self), format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()


class CurvatureSource(StrEnum):
    """Where curvature tensors come from."""
    CLOSED_FORM = "closed_form"
    FINITE_DIFFERENCE = "finite_difference"


class SolitonKind(StrEnum):
    """Soliton flag of a model."""
    EXACT = "exact"
    APPROXIMATE = "approximate"


class AxisKind(StrEnum):
    """Chart axis type; decides quadrature and collar handling."""
    POLAR = "polar"
    PERIODIC = "periodic"
    INTERVAL = "interval"


class Symmetry(StrEnum):
    """Declared index symmetry of a tensor field."""
    NONE = "none"
    SYMMETRIC_PAIR = "symmetric_pair"
    RIEMANN = "riemann"


class ModelKind(StrEnum):
    """Model families understood by the builder."""
    SPHERE = "sphere"
    PRODUCT = "product"
    GENERIC = "generic"
    FLAT = "flat"


class Operator(StrEnum):
    """Operators that can be assembled on a Galerkin basis."""
    LAPLACE_F = "laplace_f"
    LICHNEROWICZ_F = "lichnerowicz_f"
    LICHNEROWICZ_GAUGED = "lichnerowicz_f_plus_div_dagger_div"
    STABILITY = "stability_operator"


class Provenance(StrEnum):
    """Generator family of a Galerkin basis member."""
    SCALAR_MONOMIAL = "monomial"
    HESSIAN = "hessian"
    LIE_DERIVATIVE = "lie_derivative"
    CONFORMAL = "scalar_times_metric"
    SYMMETRIC_PRODUCT = "symmetric_product"


class CheckStatus(StrEnum):
    """Outcome of a single residual check."""
    PASSED = "passed"
    FAILED = "failed"
    SKIPPED = "skipped"
    INFO = "info"


class Verdict(StrEnum):
    """Stability verdict at a given truncation."""
    UNSTABLE = "unstable"
    STABLE_SUFFICIENT = "stable (sufficient)"
    INCONCLUSIVE_GAP = "inconclusive (gap)"
    INCONCLUSIVE_TRUNCATION = "inconclusive (truncation)"


class JointClass(StrEnum):
    """Classification of a joint eigentensor."""
    TRANSVERSAL = "transversal"
    GAUGE = "gauge"


class IdentityName(StrEnum):
    """Registry of every identity residual the tool reports."""

    # soliton fixture
    SOLITON_EQUATION = "soliton_equation"
    ENTROPY_MINIMIZER_POINTWISE = "entropy_minimizer_pointwise"
    ENTROPY_MINIMIZER_INTEGRAL = "entropy_minimizer_integral"
    FIRST_VARIATION = "first_variation"

    # curvature conventions
    CHRISTOFFEL_SYMMETRY = "christoffel_symmetry"
    RIEMANN_ANTISYMMETRY = "riemann_antisymmetry"
    RIEMANN_PAIR_SYMMETRY = "riemann_pair_symmetry"
    FIRST_BIANCHI = "first_bianchi"
    METRIC_COMPATIBILITY = "metric_compatibility"
    RICCI_TRACE_LOCK = "ricci_trace_lock"
    RICCI_IDENTITY_ONE_FORM = "ricci_identity_one_form"
    RICCI_IDENTITY_TWO_TENSOR = "ricci_identity_two_tensor"

    # soliton curvature identities
    DIVERGENCE_RICCI = "divergence_ricci"
    DIVERGENCE_RIEMANN = "divergence_riemann"
    LICHNEROWICZ_RICCI = "lichnerowicz_ricci"
    DRIFT_LAPLACIAN_SCALAR_CURVATURE = "drift_laplacian_scalar_curvature"
    DRIFT_LAPLACIAN_POTENTIAL = "drift_laplacian_potential"
    SCALAR_CURVATURE_INTEGRAL = "scalar_curvature_integral"

    # commutators
    DRIFT_LAPLACIAN_EXTERIOR_DERIVATIVE = "drift_laplacian_exterior_derivative"
    DIVERGENCE_DRIFT_LAPLACIAN = "divergence_drift_laplacian"
    LIE_DERIVATIVE_LICHNEROWICZ = "lie_derivative_lichnerowicz"
    ADJOINT_DIVERGENCE_LICHNEROWICZ = "adjoint_divergence_lichnerowicz"
    DIVERGENCE_LICHNEROWICZ = "divergence_lichnerowicz"
    DOUBLE_DIVERGENCE_LICHNEROWICZ = "double_divergence_lichnerowicz"
    GAUGE_LICHNEROWICZ = "gauge_lichnerowicz"
    LIE_DIVERGENCE = "lie_divergence"
    GENERAL_EXTERIOR_DERIVATIVE = "general_exterior_derivative"
    GENERAL_LIE_DIVERGENCE = "general_lie_divergence"

    # image of the adjoint divergence
    DIVERGENCE_OF_ADJOINT = "divergence_of_adjoint"
    GAUGE_OF_ADJOINT = "gauge_of_adjoint"
    DOUBLE_DIVERGENCE_OF_ADJOINT = "double_divergence_of_adjoint"
    UPSILON_OF_ADJOINT = "upsilon_of_adjoint"
    STABILITY_KERNEL = "stability_kernel"

    # weighted L2 structure
    ADJOINT_EXTERIOR_DERIVATIVE = "adjoint_exterior_derivative"
    ADJOINT_DIVERGENCE = "adjoint_divergence"
    DRIFT_LAPLACIAN_SELF_ADJOINT = "drift_laplacian_self_adjoint"
    DIVERGENCE_THEOREM_ONE_FORM = "divergence_theorem_one_form"
    DIVERGENCE_THEOREM_LAPLACIAN = "divergence_theorem_laplacian"
    LICHNEROWICZ_FORMS_AGREE = "lichnerowicz_forms_agree"
    LICHNEROWICZ_TRACE_DEFECT = "lichnerowicz_trace_defect"


SOLITON_ONLY_IDENTITIES = frozenset({
    IdentityName.DRIFT_LAPLACIAN_EXTERIOR_DERIVATIVE,
    IdentityName.DIVERGENCE_DRIFT_LAPLACIAN,
    IdentityName.LIE_DERIVATIVE_LICHNEROWICZ,
    IdentityName.ADJOINT_DIVERGENCE_LICHNEROWICZ,
    IdentityName.DIVERGENCE_LICHNEROWICZ,
    IdentityName.DOUBLE_DIVERGENCE_LICHNEROWICZ,
    IdentityName.GAUGE_LICHNEROWICZ,
    IdentityName.LIE_DIVERGENCE,
})
