"""
Stability Service - second variation of the nu-entropy and the stability criteria.

N(h) = 1/2 lich_f h + h/(2 tau) + div_f^dag div_f h + 1/2 hess(upsilon_h)
       - Ric * <Ric, h>_dm / int R dm
where upsilon_h solves lap_f u + u/(2 tau) = div_f div_f h with dm-mean zero.
"""
import jax.numpy as jnp
import numpy as np

from grslab.core.exceptions import ApproximateSolitonError
from grslab.core.logging_config import get_logger
from grslab.models.fields import TensorField, weighted_gram
from grslab.models.galerkin import GalerkinBasis
from grslab.models.manifold import ManifoldModel
from grslab.models.quadrature import QuadratureGrid
from grslab.schemas.common import CheckStatus, IdentityName, JointClass, Operator, Verdict
from grslab.schemas.config import ToleranceTable
from grslab.schemas.reports import (
    IdentityResidualSet,
    JointMember,
    RelationRow,
    ScannedDirection,
    SpectrumSummary,
    StabilityReport,
    SufficientCheck,
)
from grslab.services.spectral_galerkin import GalerkinService

logger = get_logger(__name__)

_TINY = np.finfo(float).tiny


def verdict_label(verdict: Verdict, degree: int) -> str:
    if verdict == Verdict.STABLE_SUFFICIENT:
        return f"stable (sufficient, L={degree})"
    if verdict == Verdict.INCONCLUSIVE_TRUNCATION:
        return f"inconclusive (truncation, L={degree})"
    return verdict.value


class StabilityService:
    """Stability operator and criteria at truncation degree L."""

    def __init__(self, model: ManifoldModel, grid: QuadratureGrid, degree: int,
                 tolerances: ToleranceTable | None = None, galerkin: GalerkinService | None = None):
        self.model = model
        self.grid = grid
        self.degree = degree
        self.galerkin = galerkin or GalerkinService(model, grid, tolerances)
        self.tolerances = self.galerkin.tolerances
        self.calculus = self.galerkin.calculus
        self.geometry = self.calculus.geometry

    @property
    def tau(self) -> float:
        return self.model.tau

    @property
    def upsilon_degree(self) -> int:
        return max(self.degree, 1) + 2

    def _require_exact(self, operation: str):
        if not self.model.is_exact_soliton:
            raise ApproximateSolitonError(operation, self.model.soliton.residual)

    # ------------------------------------------------------------------
    # upsilon and N
    # ------------------------------------------------------------------

    def solve_upsilon(self, h: TensorField) -> tuple[TensorField, float]:
        """Galerkin solution on the mean-zero scalar space and its relative L2(dm) equation residual."""
        self._require_exact("solve_upsilon")
        scalar = self.galerkin.scalar_basis(self.upsilon_degree)
        operator = self.galerkin.upsilon_operator(scalar)
        double_divergence = self.calculus.div_f(self.calculus.div_f(h))
        values = double_divergence.evaluate(self.grid.nodes)
        batched = values.ndim > 1
        values = values if batched else values[:, None]
        rhs = weighted_gram(scalar.values[:, 1:], values, self.galerkin.inverse_metric, self.grid.weights, 0)
        solution = np.linalg.solve(operator, rhs)
        coefficients = np.vstack([np.zeros((1, solution.shape[1])), solution]).T
        upsilon = scalar.field.combine(coefficients if batched else coefficients[0], label=f"upsilon({h.label})")

        lap = self.calculus.laplace_f(upsilon)
        residual_field = lap + upsilon.scaled(1.0 / (2 * self.tau)) - double_divergence
        residual = np.atleast_1d(self.calculus.norm_dm(residual_field, self.grid))
        scale = np.maximum(np.atleast_1d(self.calculus.norm_dm(double_divergence, self.grid)), 1e-300)
        relative = float(np.max(residual / scale))
        if relative > self.tolerances.upsilon:
            logger.warning("upsilon_outside_truncation", model=self.model.name, relative_residual=relative)
        return upsilon, relative

    def upsilon_from_potential(self, k: TensorField) -> dict[str, float]:
        """For h = lich_f k + k/(2 tau) the exact solution is div_f div_f k."""
        h = self.calculus.lichnerowicz_f(k) + k.scaled(1.0 / (2 * self.tau))
        expected = self.calculus.div_f(self.calculus.div_f(k))
        solved, equation_residual = self.solve_upsilon(h)
        error = np.atleast_1d(self.calculus.norm_dm(solved - expected, self.grid))
        scale = np.maximum(np.atleast_1d(self.calculus.norm_dm(expected, self.grid)), 1e-300)
        return {"relative_error": float(np.max(error / scale)), "equation_residual": equation_residual}

    def apply_N(self, h: TensorField, upsilon: TensorField | None = None) -> TensorField:
        self._require_exact("apply_N")
        if upsilon is None:
            upsilon, _ = self.solve_upsilon(h)
        calculus, tau = self.calculus, self.tau
        lich = calculus.lichnerowicz_f(h).fn
        gauge = calculus.div_f_dagger(calculus.div_f(h)).fn
        hess = self.geometry.hessian(upsilon).fn
        ricci = self.geometry.ricci_tensor
        pairing = calculus.inner_dm(h, self.geometry.ricci_field(), self.grid)
        coefficient = jnp.asarray(np.asarray(pairing) / self.galerkin.integral_scalar_curvature())
        value = h.fn

        def fn(x):
            return (0.5 * lich(x) + value(x) / (2 * tau) + gauge(x) + 0.5 * hess(x)
                    - coefficient[..., None, None] * ricci(x))

        return TensorField(fn, 2, h.symmetry, f"N({h.label})")

    def second_variation(self, h: TensorField, upsilon: TensorField | None = None) -> float | np.ndarray:
        """nu''(h) = int <N h, h> dm."""
        return self.calculus.inner_dm(self.apply_N(h, upsilon), h, self.grid)

    # ------------------------------------------------------------------
    # image of the adjoint divergence
    # ------------------------------------------------------------------

    def image_kernel_fields(self, w: TensorField) -> dict[IdentityName, TensorField]:
        """Residual fields on h = div_f^dag w; N is applied with the Galerkin upsilon, which must equal -div_f w."""
        calculus = self.calculus
        inv = 1.0 / (2 * self.tau)
        lap, div, dag, d = calculus.laplace_f, calculus.div_f, calculus.div_f_dagger, calculus.exterior_derivative
        div_w = div(w)
        dag_w = dag(w)
        combined = lap(w) + d(div_w) + w.scaled(inv)
        upsilon, _ = self.solve_upsilon(dag_w)
        return {
            IdentityName.LIE_DIVERGENCE: div(self.geometry.lie_derivative_of_metric(w)) - combined,
            IdentityName.DIVERGENCE_OF_ADJOINT: div(dag_w) + combined.scaled(0.5),
            IdentityName.GAUGE_OF_ADJOINT: (dag(div(dag_w)) + calculus.lichnerowicz_f(dag_w).scaled(0.5)
                                            + dag_w.scaled(inv) - self.geometry.hessian(div_w).scaled(0.5)),
            IdentityName.DOUBLE_DIVERGENCE_OF_ADJOINT: div(div(dag_w)) + lap(div_w) + div_w.scaled(inv),
            IdentityName.UPSILON_OF_ADJOINT: upsilon + div_w,
            IdentityName.STABILITY_KERNEL: self.apply_N(dag_w, upsilon=upsilon),
        }

    def image_kernel_residuals(self, w: TensorField) -> IdentityResidualSet:
        if not self.model.is_exact_soliton:
            names = [IdentityName.LIE_DIVERGENCE, IdentityName.DIVERGENCE_OF_ADJOINT, IdentityName.GAUGE_OF_ADJOINT,
                     IdentityName.DOUBLE_DIVERGENCE_OF_ADJOINT, IdentityName.UPSILON_OF_ADJOINT,
                     IdentityName.STABILITY_KERNEL]
            return IdentityResidualSet(suite="image_kernel", entries=[self.calculus.skipped(n) for n in names])
        tolerances = {IdentityName.UPSILON_OF_ADJOINT: self.tolerances.upsilon,
                      IdentityName.STABILITY_KERNEL: self.tolerances.kernel}
        entries = [
            self.calculus.check(name, field, self.grid, tolerances.get(name, self.calculus.identity_tolerance))
            for name, field in self.image_kernel_fields(w).items()
        ]
        result = IdentityResidualSet(suite="image_kernel", entries=entries)
        logger.info("identity_suite_completed", suite=result.suite, model=self.model.name, passed=result.passed)
        return result

    # ------------------------------------------------------------------
    # criteria
    # ------------------------------------------------------------------

    def _lichnerowicz_spectrum(self, basis: GalerkinBasis):
        assembled, result = self.galerkin.spectrum(basis, Operator.LICHNEROWICZ_F)
        ricci = self.galerkin.ricci_coefficients(basis)
        blocks = self.galerkin.deflated_blocks(result, basis.gram, ricci)
        deflated = [False] * result.size
        for indices, direction, _ in blocks:
            if direction is not None:
                deflated[indices[0]] = True
        return assembled, result, blocks, deflated

    def necessary_condition_scan(self) -> tuple[SpectrumSummary, list[ScannedDirection]]:
        """Lichnerowicz eigentensors above -1/(2 tau), Ric deflated, with nu'' computed two ways."""
        self._require_exact("necessary_condition_scan")
        basis = self.galerkin.tensor_basis(self.degree)
        assembled, result, blocks, deflated = self._lichnerowicz_spectrum(basis)
        summary = self.galerkin.summarize(basis, assembled, result, deflated)
        threshold = -1.0 / (2 * self.tau) + self.tolerances.spectrum
        a = assembled.matrix
        vectors = [v for _, _, block in blocks for v in block.T
                   if float(v @ a @ v / (v @ basis.gram @ v)) > threshold]
        if not vectors:
            logger.info("necessary_scan_completed", model=self.model.name, degree=self.degree, candidates=0)
            return summary, []

        scale = np.sqrt(self.model.dimension)
        coefficients = np.array(vectors)
        eigenvalues = np.array([v @ a @ v / (v @ basis.gram @ v) for v in coefficients])
        h = basis.direction(coefficients, scale=scale, label="lichnerowicz_eigentensor")
        calculus, grid = self.calculus, self.grid
        upsilon, _ = self.solve_upsilon(h)
        double_divergence = calculus.div_f(calculus.div_f(h))

        norm_squared = np.atleast_1d(calculus.inner_dm(h, h, grid))
        divergence_squared = np.atleast_1d(calculus.inner_dm(calculus.div_f(h), calculus.div_f(h), grid))
        upsilon_pairing = np.atleast_1d(calculus.inner_dm(upsilon, double_divergence, grid))
        ricci_pairing = np.atleast_1d(calculus.inner_dm(h, self.geometry.ricci_field(), grid))
        integral_r = self.galerkin.integral_scalar_curvature()
        direct = np.atleast_1d(self.second_variation(h, upsilon))
        closed = ((eigenvalues / 2 + 1 / (2 * self.tau)) * norm_squared + divergence_squared
                  + 0.5 * upsilon_pairing - ricci_pairing ** 2 / integral_r)
        dd_norm = np.atleast_1d(calculus.norm_dm(double_divergence, grid))
        upsilon_norm = np.atleast_1d(calculus.norm_dm(upsilon, grid))

        tolerance = self.tolerances.second_variation
        kernel_tolerance = self.tolerances.kernel
        pairing_tolerance = calculus.identity_tolerance
        zero = self.tolerances.spectrum
        directions = []
        for k in range(len(coefficients)):
            agreement = relative_agreement(direct[k], closed[k])
            consistent = agreement <= tolerance and abs(ricci_pairing[k]) <= pairing_tolerance
            if abs(eigenvalues[k]) > zero:
                consistent = consistent and dd_norm[k] <= kernel_tolerance and upsilon_norm[k] <= kernel_tolerance
            directions.append(ScannedDirection(
                eigenvalue=float(eigenvalues[k]),
                second_variation=float(direct[k]),
                second_variation_closed_form=float(closed[k]),
                agreement=agreement,
                double_divergence_norm=float(dd_norm[k]),
                upsilon_norm=float(upsilon_norm[k]),
                ricci_pairing=float(ricci_pairing[k]),
                coefficients=(scale * coefficients[k]).tolist(),
                tags=basis.dominant_tags(coefficients[k]),
                tolerance=tolerance,
                kernel_tolerance=kernel_tolerance,
                pairing_tolerance=pairing_tolerance,
                unstable=bool(direct[k] > tolerance),
                status=CheckStatus.PASSED if consistent else CheckStatus.FAILED,
            ))
        logger.info("necessary_scan_completed", model=self.model.name, degree=self.degree,
                    candidates=len(directions), unstable=sum(d.unstable for d in directions))
        return summary, directions

    def sufficient_condition_check(self) -> SufficientCheck:
        """Joint eigenbasis of lich_f and lich_f + div^dag div; transversal members must sit at or below -1/tau."""
        self._require_exact("sufficient_condition_check")
        galerkin = self.galerkin
        basis = galerkin.tensor_basis(self.degree)
        a = galerkin.assemble(basis, Operator.LICHNEROWICZ_F).matrix
        b = galerkin.assemble(basis, Operator.LICHNEROWICZ_GAUGED).matrix
        joint = galerkin.joint_eigenbasis(a, b, basis.gram, galerkin.ricci_coefficients(basis))
        divergence = galerkin.divergence_gram(basis)

        gauge = [k for k, c in enumerate(joint.classes) if c == JointClass.GAUGE]
        image_norms: dict[int, float] = {}
        if gauge:
            h = basis.direction(joint.vectors[:, gauge].T, label="gauge_members")
            norms = np.atleast_1d(self.calculus.norm_dm(self.apply_N(h), self.grid))
            image_norms = dict(zip(gauge, norms.tolist()))

        kernel_tolerance = self.tolerances.kernel
        members = []
        for k, v in enumerate(joint.vectors.T):
            divergence_norm = float(np.sqrt(max(v @ divergence @ v, 0.0)))
            if joint.classes[k] == JointClass.GAUGE:
                member_tolerance, residual = kernel_tolerance, image_norms[k]
            else:
                # |div_f h|^2 = mu - lambda; transversal members sit far below the classification threshold
                member_tolerance = self.calculus.identity_tolerance * max(1.0, abs(float(joint.lichnerowicz[k])))
                residual = divergence_norm ** 2
            members.append(JointMember(
                lichnerowicz=float(joint.lichnerowicz[k]),
                gauged=float(joint.gauged[k]),
                joint_class=joint.classes[k],
                divergence_norm=divergence_norm,
                stability_image_norm=image_norms.get(k),
                ric_deflated=joint.deflated[k],
                tolerance=member_tolerance,
                status=CheckStatus.PASSED if residual <= member_tolerance else CheckStatus.FAILED,
            ))
        bound = -1.0 / self.tau
        tolerance = self.tolerances.spectrum
        offending = [m.lichnerowicz for m in members
                     if m.joint_class == JointClass.TRANSVERSAL and not m.ric_deflated
                     and m.lichnerowicz > bound + tolerance]
        if not any(not m.ric_deflated for m in members):
            verdict = Verdict.INCONCLUSIVE_TRUNCATION
        elif not offending:
            verdict = Verdict.STABLE_SUFFICIENT
        elif any(value < -1.0 / (2 * self.tau) - tolerance for value in offending):
            verdict = Verdict.INCONCLUSIVE_GAP
        else:
            verdict = Verdict.INCONCLUSIVE_TRUNCATION
        gauge_kernel_max = max(image_norms.values(), default=0.0)
        classified = gauge_kernel_max <= kernel_tolerance and all(m.status == CheckStatus.PASSED for m in members)
        if not classified:
            logger.warning("joint_classification_inconsistent", model=self.model.name, degree=self.degree,
                           gauge_kernel_max=gauge_kernel_max)
        return SufficientCheck(
            degree=self.degree,
            members=members,
            commutation_residual=joint.commutation_residual,
            offending=offending,
            gauge_kernel_max=gauge_kernel_max,
            kernel_tolerance=kernel_tolerance,
            bound=bound,
            tolerance=tolerance,
            verdict=verdict,
            status=CheckStatus.PASSED if classified else CheckStatus.FAILED,
        )

    def n_eigentensor_relation(self) -> list[RelationRow]:
        """Nonzero N-eigentensors are lich_f-eigentensors with eigenvalue 2(lambda - 1/(2 tau))."""
        self._require_exact("n_eigentensor_relation")
        basis = self.galerkin.tensor_basis(self.degree)
        _, result = self.galerkin.spectrum(basis, Operator.STABILITY)
        selected = np.flatnonzero(np.abs(result.eigenvalues) > self.tolerances.spectrum)
        if not selected.size:
            return []
        eigenvalues = result.eigenvalues[selected]
        vectors = result.vectors[:, selected]
        h = basis.direction(vectors.T, label="stability_eigentensor")
        factors = jnp.asarray(2 * (eigenvalues - 1 / (2 * self.tau)))
        lich = self.calculus.lichnerowicz_f(h).fn
        value = h.fn
        defect = TensorField(lambda x: lich(x) - factors[:, None, None] * value(x), 2, label="relation")
        residual = np.atleast_1d(self.calculus.norm_dm(defect, self.grid))
        norms = np.maximum(np.atleast_1d(self.calculus.norm_dm(h, self.grid)), 1e-300)
        divergence = self.galerkin.divergence_gram(basis)
        tolerance = self.tolerances.relation
        rows = []
        for k, v in enumerate(vectors.T):
            relation = float(residual[k] / norms[k])
            div_residual = float(abs(eigenvalues[k]) * np.sqrt(max(v @ divergence @ v, 0.0)))
            status = CheckStatus.PASSED if relation <= tolerance and div_residual <= tolerance else CheckStatus.FAILED
            rows.append(RelationRow(eigenvalue=float(eigenvalues[k]), relation_residual=relation,
                                    divergence_residual=div_residual, tolerance=tolerance, status=status))
        return rows

    # ------------------------------------------------------------------
    # report
    # ------------------------------------------------------------------

    def build_stability_report(self) -> StabilityReport:
        self._require_exact("build_stability_report")
        gap = self.galerkin.spectral_gap_check(max(self.degree, 1))
        summary, scanned = self.necessary_condition_scan()
        sufficient = self.sufficient_condition_check()
        relation = self.n_eigentensor_relation()
        forms, _ = self.galerkin.monomial_one_forms(max(self.degree - 1, 1))
        kernel = self.image_kernel_residuals(forms)

        witness = None
        unstable = [d for d in scanned if d.unstable]
        if unstable:
            best = max(unstable, key=lambda d: d.second_variation)
            basis = self.galerkin.tensor_basis(self.degree)
            recomputed = float(self.second_variation(basis.direction(np.array(best.coefficients), label="witness")))
            witness = best.model_copy(update={"second_variation": recomputed,
                                              "unstable": recomputed > best.tolerance})
        verdict = Verdict.UNSTABLE if witness is not None and witness.unstable else sufficient.verdict
        report = StabilityReport(
            model=self.model.name,
            degree=self.degree,
            tau=self.tau,
            gap=gap,
            lichnerowicz_spectrum=summary,
            necessary=scanned,
            sufficient=sufficient,
            relation=relation,
            kernel=kernel,
            witness=witness,
            verdict=verdict,
            verdict_label=verdict_label(verdict, self.degree),
        )
        logger.info("verdict_reached", model=self.model.name, degree=self.degree, verdict=report.verdict_label)
        return report


def relative_agreement(direct: float, closed_form: float) -> float:
    """|direct - closed_form| relative to |direct|; small second variations are not measured absolutely."""
    return float(abs(direct - closed_form) / max(abs(direct), _TINY))


def get_stability_service(model: ManifoldModel, grid: QuadratureGrid, degree: int,
                          tolerances: ToleranceTable | None = None) -> StabilityService:
    """Provider for StabilityService; one instance per (model, grid, L) run."""
    return StabilityService(model, grid, degree, tolerances)
