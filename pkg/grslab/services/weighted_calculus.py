"""
Weighted Calculus Service - drift operators, the dm-measure and identity residuals.

Operators take and return TensorFields; everything that integrates takes a
QuadratureGrid built for the same model.
"""
import weakref

import jax
import jax.numpy as jnp
import numpy as np

from grslab.config import settings
from grslab.core.exceptions import ApproximateSolitonError, GridModelMismatchError, ValenceError
from grslab.core.logging_config import get_logger
from grslab.models.fields import TensorField, pointwise_inner, pointwise_norm
from grslab.models.manifold import ManifoldModel, SolitonStatus
from grslab.models.quadrature import QuadratureGrid
from grslab.schemas.common import (
    SOLITON_ONLY_IDENTITIES,
    CheckStatus,
    CurvatureSource,
    IdentityName,
    SolitonKind,
    Symmetry,
)
from grslab.schemas.config import ToleranceTable
from grslab.schemas.reports import IdentityResidual, IdentityResidualSet
from grslab.services.geometry_core import GeometryService, get_geometry_service

logger = get_logger(__name__)

_SLOTS = "abcdefgh"


class WeightedCalculusService:
    """Drift operators of (g, f, tau) and their weighted L2 structure."""

    def __init__(self, model: ManifoldModel, tolerances: ToleranceTable | None = None):
        self.model = model
        self.geometry: GeometryService = get_geometry_service(model)
        self.tolerances = tolerances or ToleranceTable.from_settings()
        self._grad_f = self.geometry.diff.jacobian(model.potential)
        self._hess_f = self.geometry.hessian(self.potential_field()).fn
        self._inverse_metric_nodes = weakref.WeakKeyDictionary()

    @property
    def tau(self) -> float:
        return self.model.tau

    @property
    def finite_difference(self) -> bool:
        return self.model.curvature_source == CurvatureSource.FINITE_DIFFERENCE

    @property
    def identity_tolerance(self) -> float:
        return self.tolerances.identity(self.finite_difference)

    @property
    def check_limit(self) -> int:
        return max(settings.CHECK_NODE_LIMIT // 2 ** max(self.model.dimension - 2, 0), 16)

    # ------------------------------------------------------------------
    # pointwise pieces
    # ------------------------------------------------------------------

    def potential_field(self) -> TensorField:
        return TensorField(self.model.potential, 0, label="f")

    def soliton_tensor(self, x: jax.Array) -> jax.Array:
        """S = Ric + hess f."""
        return self.geometry.ricci_tensor(x) + self._hess_f(x)

    def soliton_residual_field(self) -> TensorField:
        tau, metric = self.tau, self.model.metric
        return TensorField(lambda x: self.soliton_tensor(x) - metric(x) / (2 * tau), 2,
                           Symmetry.SYMMETRIC_PAIR, "soliton_residual")

    def ricci_norm_squared(self, x: jax.Array) -> jax.Array:
        ginv, ric = self.geometry.inverse_metric(x), self.geometry.ricci_tensor(x)
        return jnp.einsum("ia,jb,ij,ab->", ginv, ginv, ric, ric)

    def gradient_norm_squared(self, x: jax.Array) -> jax.Array:
        df = self._grad_f(x)
        return jnp.einsum("ij,i,j->", self.geometry.inverse_metric(x), df, df)

    # ------------------------------------------------------------------
    # operators
    # ------------------------------------------------------------------

    def exterior_derivative(self, scalar: TensorField) -> TensorField:
        if scalar.valence != 0:
            raise ValenceError("exterior_derivative", scalar.valence, [0])
        return self.geometry.covariant_derivative(scalar).with_label(f"d({scalar.label})")

    def div_f(self, field: TensorField) -> TensorField:
        """div_f T = div T - T(grad f, -) on 1-forms and symmetric 2-tensors."""
        if field.valence not in (1, 2):
            raise ValenceError("div_f", field.valence, [1, 2])
        return self.weighted_divergence(field)

    def weighted_divergence(self, field: TensorField) -> TensorField:
        """Contract the first slot; also used for div_f Rm."""
        p = field.valence
        if p < 1:
            raise ValenceError("weighted_divergence", p, [1, 2, 3, 4])
        rest = _SLOTS[:p - 1]
        pair = self.geometry.covariant_pair(field)

        def fn(x):
            value, nabla = pair(x)
            ginv, df = self.geometry.inverse_metric(x), self._grad_f(x)
            return (jnp.einsum(f"pi,...pi{rest}->...{rest}", ginv, nabla)
                    - jnp.einsum(f"pi,p,...i{rest}->...{rest}", ginv, df, value))

        return TensorField(fn, p - 1, label=f"div_f({field.label})")

    def div_f_dagger(self, one_form: TensorField) -> TensorField:
        """Formal dm-adjoint of div_f on 1-forms: -1/2 L_{#w} g."""
        if one_form.valence != 1:
            raise ValenceError("div_f_dagger", one_form.valence, [1])
        lie = self.geometry.lie_derivative_of_metric(one_form).fn
        return TensorField(lambda x: -0.5 * lie(x), 2, Symmetry.SYMMETRIC_PAIR, f"div_f_dag({one_form.label})")

    def laplace_f(self, field: TensorField) -> TensorField:
        if field.valence > 2:
            raise ValenceError("laplace_f", field.valence, [0, 1, 2])
        return self.drift_laplacian(field)

    def drift_laplacian(self, field: TensorField) -> TensorField:
        """g^ij nabla_i nabla_j T - nabla_{grad f} T for any valence."""
        s = _SLOTS[:field.valence]
        pair = self.geometry.covariant_pair(self.geometry.covariant_derivative(field))

        def fn(x):
            nabla, nabla2 = pair(x)
            ginv, df = self.geometry.inverse_metric(x), self._grad_f(x)
            return (jnp.einsum(f"ij,...ij{s}->...{s}", ginv, nabla2)
                    - jnp.einsum(f"ij,i,...j{s}->...{s}", ginv, df, nabla))

        return TensorField(fn, field.valence, field.symmetry, f"lap_f({field.label})")

    def laplacian(self, scalar: TensorField) -> TensorField:
        """Unweighted Laplace-Beltrami operator on functions."""
        hess = self.geometry.hessian(scalar).fn
        return TensorField(lambda x: jnp.einsum("ij,...ij->...", self.geometry.inverse_metric(x), hess(x)), 0,
                           label=f"lap({scalar.label})")

    def rm_action(self, h: TensorField) -> TensorField:
        """Rm(h, -)_ij = R_piqj h^pq."""
        if h.valence != 2:
            raise ValenceError("rm_action", h.valence, [2])
        return TensorField(lambda x: self._rm_action(x, h.fn(x)), 2, Symmetry.SYMMETRIC_PAIR, f"Rm({h.label})")

    def _rm_action(self, x: jax.Array, h: jax.Array) -> jax.Array:
        ginv = self.geometry.inverse_metric(x)
        return jnp.einsum("piqj,pa,qb,...ab->...ij", self.geometry.riemann_tensor(x), ginv, ginv, h)

    def lichnerowicz_f(self, h: TensorField, soliton_form: bool = False) -> TensorField:
        """
        Weighted Lichnerowicz Laplacian.

        General form: lap_f h + 2 Rm(h) - S.h - h.S with S = Ric + hess f.
        Soliton form: lap_f h + 2 Rm(h) - h / tau.
        """
        if h.valence != 2:
            raise ValenceError("lichnerowicz_f", h.valence, [2])
        lap = self.drift_laplacian(h).fn
        tau = self.tau

        def fn(x):
            value = h.fn(x)
            out = lap(x) + 2.0 * self._rm_action(x, value)
            if soliton_form:
                return out - value / tau
            s, ginv = self.soliton_tensor(x), self.geometry.inverse_metric(x)
            return (out - jnp.einsum("ia,ab,...bj->...ij", s, ginv, value)
                    - jnp.einsum("...ia,ab,bj->...ij", value, ginv, s))

        form = "soliton" if soliton_form else "general"
        return TensorField(fn, 2, Symmetry.SYMMETRIC_PAIR, f"lich_f[{form}]({h.label})")

    def soliton_contraction(self, one_form: TensorField) -> TensorField:
        """S(#w, -)_j = g^ab w_a S_bj."""
        w = one_form.fn
        return TensorField(
            lambda x: jnp.einsum("ab,...a,bj->...j", self.geometry.inverse_metric(x), w(x), self.soliton_tensor(x)),
            1, label=f"S({one_form.label})")

    # ------------------------------------------------------------------
    # dm-measure
    # ------------------------------------------------------------------

    def _check_grid(self, grid: QuadratureGrid):
        if grid.model_name != self.model.name:
            raise GridModelMismatchError(grid.model_name, self.model.name)

    def inverse_metric_nodes(self, grid: QuadratureGrid) -> np.ndarray:
        self._check_grid(grid)
        if grid not in self._inverse_metric_nodes:
            self._inverse_metric_nodes[grid] = self.geometry.inverse_metric_field().evaluate(grid.nodes)
        return self._inverse_metric_nodes[grid]

    def integrate_dm(self, scalar: TensorField, grid: QuadratureGrid) -> float | np.ndarray:
        self._check_grid(grid)
        if scalar.valence != 0:
            raise ValenceError("integrate_dm", scalar.valence, [0])
        return _as_float(grid.integrate(scalar.evaluate(grid.nodes)))

    def inner_dm(self, left: TensorField, right: TensorField, grid: QuadratureGrid) -> float | np.ndarray:
        """Weighted L2 pairing with full metric contraction; batches broadcast."""
        if left.valence != right.valence:
            raise ValenceError("inner_dm", right.valence, [left.valence])
        ginv = self.inverse_metric_nodes(grid)
        lvalues, rvalues = _align_batches(left.evaluate(grid.nodes), right.evaluate(grid.nodes))
        values = pointwise_inner(lvalues, rvalues, ginv, left.valence)
        return _as_float(grid.integrate(values))

    def norm_dm(self, field: TensorField, grid: QuadratureGrid) -> float | np.ndarray:
        return np.sqrt(np.maximum(self.inner_dm(field, field, grid), 0.0))

    # ------------------------------------------------------------------
    # residual measurement
    # ------------------------------------------------------------------

    def residual_norms(self, field: TensorField, grid: QuadratureGrid) -> tuple[float, float]:
        """(sup-norm, dm-weighted RMS) of |field|_g over the sampled interior nodes; worst batch member."""
        idx = grid.check_indices(self.check_limit)
        values = field.evaluate(grid.nodes[idx])
        ginv = self.inverse_metric_nodes(grid)[idx]
        norms = pointwise_norm(values, ginv, field.valence)
        weights = grid.weights[idx] / grid.weights[idx].sum()
        rms = np.sqrt(np.tensordot(weights, norms ** 2, axes=1))
        return float(np.max(norms)), float(np.max(rms))

    def check(self, name: IdentityName, field: TensorField, grid: QuadratureGrid,
              tolerance: float | None = None, **details) -> IdentityResidual:
        tolerance = self.identity_tolerance if tolerance is None else tolerance
        sup, l2 = self.residual_norms(field, grid)
        status = CheckStatus.PASSED if sup <= tolerance else CheckStatus.FAILED
        return IdentityResidual(name=name, sup_norm=sup, l2_norm=l2, tolerance=tolerance, status=status,
                                details=details)

    def skipped(self, name: IdentityName) -> IdentityResidual:
        return IdentityResidual(name=name, status=CheckStatus.SKIPPED,
                                reason=f"approximate soliton (residual {self.model.soliton.residual:.3e})")

    def _require_exact(self, operation: str):
        if not self.model.is_exact_soliton:
            raise ApproximateSolitonError(operation, self.model.soliton.residual)

    # ------------------------------------------------------------------
    # soliton fixture
    # ------------------------------------------------------------------

    def soliton_residual(self, grid: QuadratureGrid) -> tuple[TensorField, float]:
        field = self.soliton_residual_field()
        sup, _ = self.residual_norms(field, grid)
        return field, sup

    def soliton_status(self, grid: QuadratureGrid) -> SolitonStatus:
        """Exact only for closed-form curvature with a residual below the exact bound."""
        _, sup = self.soliton_residual(grid)
        exact = not self.finite_difference and sup <= self.tolerances.soliton_exact
        if not exact and not self.finite_difference:
            logger.warning("soliton_residual_exceeds_bound", model=self.model.name, residual=sup)
        return SolitonStatus(SolitonKind.EXACT if exact else SolitonKind.APPROXIMATE, sup)

    def entropy_report(self, grid: QuadratureGrid) -> tuple[float, IdentityResidualSet]:
        """W-entropy at the stored (f, tau) and both minimizer residuals with nu := W."""
        self._check_grid(grid)
        tau, n = self.tau, float(self.model.dimension)
        f = self.model.potential
        scalar = self.geometry.scalar_curvature

        def integrand(x):
            return tau * (scalar(x) + self.gradient_norm_squared(x)) + f(x) - n

        w_value = float(self.integrate_dm(TensorField(integrand, 0), grid))
        lap_f = self.laplacian(self.potential_field()).fn

        def pointwise(x):
            return tau * (-2.0 * lap_f(x) + self.gradient_norm_squared(x) - scalar(x)) - f(x) + n + w_value

        integral = abs(float(self.integrate_dm(self.potential_field(), grid)) - n / 2 - w_value)
        exact = self.model.is_exact_soliton
        if not exact:
            logger.warning("entropy_label_only", model=self.model.name, w_entropy=w_value)
        tolerance = self.identity_tolerance
        first = self.check(IdentityName.ENTROPY_MINIMIZER_POINTWISE, TensorField(pointwise, 0), grid,
                           w_entropy=w_value)
        second = IdentityResidual(
            name=IdentityName.ENTROPY_MINIMIZER_INTEGRAL, sup_norm=integral, tolerance=tolerance,
            status=CheckStatus.PASSED if integral <= tolerance else CheckStatus.FAILED,
            details={"w_entropy": w_value},
        )
        if not exact:
            first = first.model_copy(update={"status": CheckStatus.INFO, "reason": "W is only a label off-soliton"})
            second = second.model_copy(update={"status": CheckStatus.INFO, "reason": "W is only a label off-soliton"})
        return w_value, IdentityResidualSet(suite="entropy", entries=[first, second])

    def first_variation(self, h: TensorField, grid: QuadratureGrid) -> float | np.ndarray:
        """nu'(h) = -tau * int <h, Ric + hess f - g/(2 tau)> dm."""
        return -self.tau * self.inner_dm(h, self.soliton_residual_field(), grid)

    # ------------------------------------------------------------------
    # identity suites
    # ------------------------------------------------------------------

    def useful_identity_residuals(self, grid: QuadratureGrid) -> IdentityResidualSet:
        """The six curvature identities every shrinker satisfies."""
        self._require_exact("useful_identity_residuals")
        g = self.geometry
        tau = self.tau
        ricci = g.ricci_field()
        scalar = g.scalar_curvature_field()
        potential = self.potential_field()

        lap_r = self.drift_laplacian(scalar).fn
        scalar_identity = TensorField(
            lambda x: lap_r(x) - g.scalar_curvature(x) / tau + 2.0 * self.ricci_norm_squared(x), 0)

        lap_pot = self.drift_laplacian(potential).fn
        shifted = TensorField(lambda x: lap_pot(x) + self.model.potential(x) / tau, 0)
        constant = float(self.integrate_dm(shifted, grid))
        potential_identity = TensorField(lambda x: shifted.fn(x) - constant, 0)

        integral_r = float(self.integrate_dm(scalar, grid))
        integral_ric = float(self.integrate_dm(TensorField(self.ricci_norm_squared, 0), grid))
        gap = abs(integral_r - 2 * tau * integral_ric)
        tolerance = self.identity_tolerance

        entries = [
            self.check(IdentityName.DIVERGENCE_RICCI, self.weighted_divergence(ricci), grid),
            self.check(IdentityName.DIVERGENCE_RIEMANN, self.weighted_divergence(g.riemann_field()), grid),
            self.check(IdentityName.LICHNEROWICZ_RICCI, self.lichnerowicz_f(ricci), grid),
            self.check(IdentityName.DRIFT_LAPLACIAN_SCALAR_CURVATURE, scalar_identity, grid),
            self.check(IdentityName.DRIFT_LAPLACIAN_POTENTIAL, potential_identity, grid, constant=constant),
            IdentityResidual(
                name=IdentityName.SCALAR_CURVATURE_INTEGRAL, sup_norm=gap, tolerance=tolerance,
                status=CheckStatus.PASSED if gap <= tolerance else CheckStatus.FAILED,
                details={"integral_scalar_curvature": integral_r, "integral_ricci_squared": integral_ric},
            ),
        ]
        result = IdentityResidualSet(suite="useful_identities", entries=entries)
        logger.info("identity_suite_completed", suite=result.suite, model=self.model.name, passed=result.passed)
        return result

    def commutator_fields(self, a: TensorField, w: TensorField, h: TensorField) -> dict[IdentityName, TensorField]:
        """Residual fields of the commutator identities (soliton ones and the two general ones)."""
        inv = 1.0 / (2 * self.tau)
        lap, div, dag, lich = self.drift_laplacian, self.weighted_divergence, self.div_f_dagger, self.lichnerowicz_f
        d = self.exterior_derivative
        lie = self.geometry.lie_derivative_of_metric

        da = d(a)
        div_w = div(w)
        lie_w = lie(w)
        div_h = div(h)
        lich_h = lich(h)
        dag_w = dag(w)
        divergence_of_lie = div(lie_w) - lap(w) - d(div_w)

        return {
            IdentityName.DRIFT_LAPLACIAN_EXTERIOR_DERIVATIVE: lap(da) - d(lap(a)) - da.scaled(inv),
            IdentityName.DIVERGENCE_DRIFT_LAPLACIAN: div(lap(w)) - lap(div_w) - div_w.scaled(inv),
            IdentityName.LIE_DERIVATIVE_LICHNEROWICZ: lich(lie_w) + lie_w.scaled(inv) - lie(lap(w)),
            IdentityName.ADJOINT_DIVERGENCE_LICHNEROWICZ: dag(lap(w)) - lich(dag_w) - dag_w.scaled(inv),
            IdentityName.DIVERGENCE_LICHNEROWICZ: lap(div_h) - div(lich_h) - div_h.scaled(inv),
            IdentityName.DOUBLE_DIVERGENCE_LICHNEROWICZ: lap(div(div_h)) - div(div(lich_h)),
            IdentityName.GAUGE_LICHNEROWICZ: dag(div(lich_h)) - lich(dag(div_h)),
            IdentityName.LIE_DIVERGENCE: divergence_of_lie - w.scaled(inv),
            IdentityName.GENERAL_EXTERIOR_DERIVATIVE: lap(da) - d(lap(a)) - self.soliton_contraction(da),
            IdentityName.GENERAL_LIE_DIVERGENCE: divergence_of_lie - self.soliton_contraction(w),
        }

    def commutator_residuals(self, grid: QuadratureGrid, a: TensorField, w: TensorField,
                             h: TensorField) -> IdentityResidualSet:
        exact = self.model.is_exact_soliton
        entries = []
        for name, field in self.commutator_fields(a, w, h).items():
            if name in SOLITON_ONLY_IDENTITIES and not exact:
                entries.append(self.skipped(name))
            else:
                entries.append(self.check(name, field, grid))
        result = IdentityResidualSet(suite="commutators", entries=entries)
        logger.info("identity_suite_completed", suite=result.suite, model=self.model.name, passed=result.passed,
                    skipped=sum(e.status == CheckStatus.SKIPPED for e in entries))
        return result

    def adjointness_residuals(self, grid: QuadratureGrid, a: TensorField, w: TensorField,
                              h: TensorField, k: TensorField) -> IdentityResidualSet:
        """
        Discrete pairing defects, each relative to max(1, product of the dm-norms).

        On the finite-difference backend the integrals include nodes outside the
        collar, so these entries are informational there.
        """
        div_w = self.div_f(w)
        da = self.exterior_derivative(a)
        pairs = {
            IdentityName.ADJOINT_EXTERIOR_DERIVATIVE: (
                self.inner_dm(div_w, a, grid) + self.inner_dm(w, da, grid),
                self.norm_dm(w, grid) * self.norm_dm(a, grid)),
            IdentityName.ADJOINT_DIVERGENCE: (
                self.inner_dm(self.div_f(h), w, grid) - self.inner_dm(h, self.div_f_dagger(w), grid),
                self.norm_dm(h, grid) * self.norm_dm(w, grid)),
            IdentityName.DRIFT_LAPLACIAN_SELF_ADJOINT: (
                self.inner_dm(self.laplace_f(h), k, grid) - self.inner_dm(h, self.laplace_f(k), grid),
                self.norm_dm(h, grid) * self.norm_dm(k, grid)),
            IdentityName.DIVERGENCE_THEOREM_ONE_FORM: (self.integrate_dm(div_w, grid), self.norm_dm(w, grid)),
            IdentityName.DIVERGENCE_THEOREM_LAPLACIAN: (
                self.integrate_dm(self.laplace_f(a), grid), self.norm_dm(a, grid)),
        }
        tolerance = self.identity_tolerance
        entries = []
        for name, (defect, scale) in pairs.items():
            value = float(np.max(np.abs(defect) / np.maximum(1.0, scale)))
            if self.finite_difference:
                status = CheckStatus.INFO
            else:
                status = CheckStatus.PASSED if value <= tolerance else CheckStatus.FAILED
            entries.append(IdentityResidual(name=name, sup_norm=value, tolerance=tolerance, status=status))

        forms = self.lichnerowicz_f(h) - self.lichnerowicz_f(h, soliton_form=True)
        if self.model.is_exact_soliton:
            entries.append(self.check(IdentityName.LICHNEROWICZ_FORMS_AGREE, forms, grid))
        else:
            entries.append(self.skipped(IdentityName.LICHNEROWICZ_FORMS_AGREE))
        return IdentityResidualSet(suite="weighted_structure", entries=entries)

    def lichnerowicz_trace_defect(self, grid: QuadratureGrid, h: TensorField) -> IdentityResidual:
        """tr lich_f h - lap_f tr h; recorded, never asserted."""
        lich = self.lichnerowicz_f(h).fn
        ginv = self.geometry.inverse_metric
        trace = TensorField(lambda x: jnp.einsum("ij,...ij->...", ginv(x), h.fn(x)), 0, label=f"tr({h.label})")
        lap_trace = self.drift_laplacian(trace).fn
        defect = TensorField(lambda x: jnp.einsum("ij,...ij->...", ginv(x), lich(x)) - lap_trace(x), 0)
        sup, l2 = self.residual_norms(defect, grid)
        return IdentityResidual(name=IdentityName.LICHNEROWICZ_TRACE_DEFECT, sup_norm=sup, l2_norm=l2,
                                status=CheckStatus.INFO, reason="informational; no expected value")

    def convention_residuals(self, grid: QuadratureGrid, w: TensorField, h: TensorField) -> IdentityResidualSet:
        """Curvature sign and symmetry conventions plus both Ricci identities."""
        nodes = grid.nodes[grid.check_indices(self.check_limit)]
        tolerance = self.identity_tolerance
        residuals = self.geometry.curvature_symmetry_residuals(nodes)
        r1, r2 = self.geometry.ricci_identity_residual(w, h, nodes)
        residuals[IdentityName.RICCI_IDENTITY_ONE_FORM] = r1
        residuals[IdentityName.RICCI_IDENTITY_TWO_TENSOR] = r2
        entries = [
            IdentityResidual(name=name, sup_norm=value, tolerance=tolerance,
                             status=CheckStatus.PASSED if value <= tolerance else CheckStatus.FAILED)
            for name, value in residuals.items()
        ]
        return IdentityResidualSet(suite="conventions", entries=entries)


def _as_float(value: np.ndarray) -> float | np.ndarray:
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def _align_batches(left: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Insert singleton batch axes after the node axis of the lower-rank operand."""
    if left.ndim > right.ndim:
        right = right.reshape(right.shape[:1] + (1,) * (left.ndim - right.ndim) + right.shape[1:])
    elif right.ndim > left.ndim:
        left = left.reshape(left.shape[:1] + (1,) * (right.ndim - left.ndim) + left.shape[1:])
    return left, right


def get_weighted_calculus_service(model: ManifoldModel,
                                  tolerances: ToleranceTable | None = None) -> WeightedCalculusService:
    """Provider for WeightedCalculusService; one instance per run."""
    return WeightedCalculusService(model, tolerances)
