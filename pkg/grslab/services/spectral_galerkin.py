"""
Galerkin Service - truncated bases, operator matrices and generalized eigensolves.

Tensor generators come in four families, in this order:
  1. Hessians of ambient monomials of degree 1..L
  2. L_{#w} g for w = m dy_k with deg m <= L-1
  3. m * g_A for every product factor A, deg m <= L
  4. m * (dy_j . dy_k) with deg m <= L-2
Families 1 and 2 lie in the image of the adjoint divergence; Gram-Schmidt runs
in this order so the leading basis members inherit that membership.
"""
import weakref
from itertools import combinations_with_replacement

import jax.numpy as jnp
import numpy as np
import scipy.linalg

from grslab.core.exceptions import (
    AliasingError,
    ApproximateSolitonError,
    ConfigValueError,
    EmptyBasisError,
    GramNotPositiveDefiniteError,
    JointDiagonalizationError,
    QuadratureUnderResolvedError,
    ScalarCurvatureIntegralError,
    SpectralGapViolationError,
    ValenceError,
)
from grslab.core.logging_config import get_logger
from grslab.models.fields import TensorField, concatenate_fields, weighted_gram
from grslab.models.galerkin import AssembledOperator, GalerkinBasis, JointEigenbasis, SpectralResult
from grslab.models.manifold import ManifoldModel
from grslab.models.quadrature import QuadratureGrid
from grslab.schemas.common import CheckStatus, JointClass, Operator, Provenance, Symmetry
from grslab.schemas.config import ToleranceTable
from grslab.schemas.reports import CommutationRow, CommutationTrend, GapCheck, SpectrumSummary
from grslab.services.polynomial_fields import ambient_differentials, monomial_exponents, monomial_field, monomial_label
from grslab.services.weighted_calculus import WeightedCalculusService

logger = get_logger(__name__)

_NODE_BLOCK = 4096
_SINGULAR_CONDITION = 1e12


def commutation_residual(a: np.ndarray, b: np.ndarray, gram: np.ndarray) -> float:
    """||G^-1 A G^-1 B - G^-1 B G^-1 A|| / (||G^-1 A|| ||G^-1 B||), Frobenius norms."""
    ga = np.linalg.solve(gram, a)
    gb = np.linalg.solve(gram, b)
    scale = np.linalg.norm(ga) * np.linalg.norm(gb)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(ga @ gb - gb @ ga) / scale)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive."""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _rayleigh(matrix: np.ndarray, gram: np.ndarray, vector: np.ndarray) -> float:
    return float(vector @ matrix @ vector / (vector @ gram @ vector))


class GalerkinService:
    """Galerkin truncation of the weighted operators of one model on one grid."""

    def __init__(self, model: ManifoldModel, grid: QuadratureGrid, tolerances: ToleranceTable | None = None):
        self.model = model
        self.grid = grid
        self.tolerances = tolerances or ToleranceTable.from_settings()
        self.calculus = WeightedCalculusService(model, self.tolerances)
        self.inverse_metric = self.calculus.inverse_metric_nodes(grid)
        self._bases: dict[tuple[int, int], GalerkinBasis] = {}
        self._matrices = weakref.WeakKeyDictionary()

    @property
    def symmetry_tolerance(self) -> float:
        return self.tolerances.finite_difference if self.calculus.finite_difference else self.tolerances.symmetry

    # ------------------------------------------------------------------
    # generators
    # ------------------------------------------------------------------

    def _check_aliasing(self, degree: int):
        for count in self.grid.resolution:
            if count < 2 * degree + 2:
                raise AliasingError(nodes=count, degree=degree)

    def _monomials(self, degree: int, min_degree: int = 0) -> tuple[np.ndarray, TensorField]:
        exponents = monomial_exponents(self.model.ambient_dimension, degree, min_degree)
        return exponents, monomial_field(self.model, exponents, label=f"monomials[{min_degree}..{degree}]")

    def monomial_one_forms(self, degree: int) -> tuple[TensorField, list[str]]:
        """Batched 1-forms m dy_k, monomial-major."""
        exponents, monomials = self._monomials(degree)
        differentials = ambient_differentials(self.model).fn
        count, dim = len(exponents), self.model.ambient_dimension
        fn = monomials.fn

        def forms(x):
            return jnp.einsum("c,kj->ckj", fn(x), differentials(x)).reshape(count * dim, -1)

        labels = [f"{monomial_label(e)}*dy{k}" for e in exponents for k in range(dim)]
        return TensorField(forms, 1, label="m*dy"), labels

    def _symmetric_products(self, degree: int) -> tuple[TensorField, list[str]]:
        exponents, monomials = self._monomials(degree)
        dim = self.model.ambient_dimension
        pairs = np.array(list(combinations_with_replacement(range(dim), 2)))
        left, right = jnp.asarray(pairs[:, 0]), jnp.asarray(pairs[:, 1])
        differentials = ambient_differentials(self.model).fn
        fn = monomials.fn

        def products(x):
            dy = differentials(x)
            outer = jnp.einsum("pi,pj->pij", dy[left], dy[right])
            sym = 0.5 * (outer + jnp.swapaxes(outer, -1, -2))
            return jnp.einsum("c,pij->cpij", fn(x), sym).reshape((-1,) + sym.shape[1:])

        labels = [f"{monomial_label(e)}*dy{j}.dy{k}" for e in exponents for j, k in pairs]
        return TensorField(products, 2, Symmetry.SYMMETRIC_PAIR, "m*dy.dy"), labels

    def scalar_generators(self, degree: int) -> tuple[TensorField, list[Provenance], list[str], int]:
        exponents, monomials = self._monomials(degree)
        return monomials, [Provenance.SCALAR_MONOMIAL] * len(exponents), [monomial_label(e) for e in exponents], 0

    def tensor_generators(self, degree: int) -> tuple[TensorField, list[Provenance], list[str], int]:
        """Raw generator families, image-of-adjoint families first."""
        geometry = self.calculus.geometry
        fields: list[TensorField] = []
        provenance: list[Provenance] = []
        labels: list[str] = []

        exponents, monomials = self._monomials(degree, min_degree=1)
        if len(exponents):
            fields.append(geometry.hessian(monomials))
            provenance += [Provenance.HESSIAN] * len(exponents)
            labels += [f"hess({monomial_label(e)})" for e in exponents]
        if degree >= 1:
            forms, form_labels = self.monomial_one_forms(degree - 1)
            fields.append(geometry.lie_derivative_of_metric(forms))
            provenance += [Provenance.LIE_DERIVATIVE] * len(form_labels)
            labels += [f"lie_g({label})" for label in form_labels]
        image_raw = len(provenance)

        exponents, monomials = self._monomials(degree)
        for index in range(len(self.model.factors)):
            factor_metric = TensorField(self.model.factor_metric(index), 2, Symmetry.SYMMETRIC_PAIR, f"g{index}")
            fields.append(factor_metric.times(monomials))
            provenance += [Provenance.CONFORMAL] * len(exponents)
            labels += [f"{monomial_label(e)}*g{index}" for e in exponents]
        if degree >= 2:
            products, product_labels = self._symmetric_products(degree - 2)
            fields.append(products)
            provenance += [Provenance.SYMMETRIC_PRODUCT] * len(product_labels)
            labels += product_labels

        return concatenate_fields(fields, label=f"tensor_generators[{degree}]"), provenance, labels, image_raw

    # ------------------------------------------------------------------
    # bases
    # ------------------------------------------------------------------

    def _raw_gram(self, raw: TensorField) -> np.ndarray:
        """Gram matrix of the raw generators, accumulated over node blocks in node order."""
        nodes, weights = self.grid.nodes, self.grid.weights
        total = None
        for start in range(0, nodes.shape[0], _NODE_BLOCK):
            block = slice(start, start + _NODE_BLOCK)
            values = raw.evaluate(nodes[block])
            part = weighted_gram(values, values, self.inverse_metric[block], weights[block], raw.valence)
            total = part if total is None else total + part
        return 0.5 * (total + total.T)

    def _orthonormalize(self, gram: np.ndarray, image_raw: int) -> tuple[np.ndarray, list[int], int]:
        """Modified Gram-Schmidt in the Gram form, two passes per generator."""
        diagonal = np.diag(gram)
        reference = float(np.max(diagonal)) if diagonal.size else 0.0
        rows: list[np.ndarray] = []
        projected: list[np.ndarray] = []
        kept: list[int] = []
        image_count = 0
        for j in range(gram.shape[0]):
            if not diagonal[j] > self.tolerances.gram_drop * reference:
                continue
            v = np.zeros(gram.shape[0])
            v[j] = 1.0 / np.sqrt(diagonal[j])
            for _ in range(2):
                for q, gq in zip(rows, projected):
                    v = v - (gq @ v) * q
            norm_squared = float(v @ gram @ v)
            if norm_squared < self.tolerances.gram_drop:
                continue
            q = v / np.sqrt(norm_squared)
            rows.append(q)
            projected.append(gram @ q)
            kept.append(j)
            image_count += j < image_raw
        coefficients = np.array(rows).reshape(len(rows), gram.shape[0])
        return coefficients, kept, image_count

    def _build_basis(self, degree: int, raw: TensorField, provenance: list[Provenance], labels: list[str],
                     image_raw: int) -> GalerkinBasis:
        gram_raw = self._raw_gram(raw)
        coefficients, kept, image_count = self._orthonormalize(gram_raw, image_raw)
        if not kept:
            raise EmptyBasisError(valence=raw.valence, degree=degree)

        scale = 1.0 / np.sqrt(np.diag(gram_raw)[kept])
        condition = float(np.linalg.cond(gram_raw[np.ix_(kept, kept)] * np.outer(scale, scale)))
        field = raw.combine(coefficients, label=f"basis[{raw.valence},{degree}]")
        values = field.evaluate(self.grid.nodes)
        gram = weighted_gram(values, values, self.inverse_metric, self.grid.weights, raw.valence)
        defect = float(np.max(np.abs(gram - np.eye(len(kept)))))
        if defect > self.tolerances.orthonormal:
            logger.warning("basis_not_orthonormal", model=self.model.name, degree=degree, defect=defect)
        basis = GalerkinBasis(
            field=field, raw=raw, coefficients=coefficients, values=values, gram=0.5 * (gram + gram.T),
            provenance=tuple(provenance), labels=tuple(labels), kept=tuple(kept), image_count=image_count,
            degree=degree, condition_number=condition, orthonormality_defect=defect,
        )
        logger.info("basis_filtered", model=self.model.name, valence=raw.valence, degree=degree,
                    generators=len(provenance), kept=basis.size, image_count=image_count)
        return basis

    def scalar_basis(self, degree: int) -> GalerkinBasis:
        """Orthonormalized ambient monomials of degree <= L; member 0 is the constant 1."""
        if degree < 1:
            raise ConfigValueError("basis.L", "scalar bases need degree >= 1")
        key = (0, degree)
        if key not in self._bases:
            self._check_aliasing(degree)
            raw, provenance, labels, image_raw = self.scalar_generators(degree)
            self._bases[key] = self._build_basis(degree, raw, provenance, labels, image_raw)
        return self._bases[key]

    def tensor_basis(self, degree: int) -> GalerkinBasis:
        if degree < 0:
            raise ConfigValueError("basis.L", "degree must be non-negative")
        key = (2, degree)
        if key not in self._bases:
            self._check_aliasing(degree)
            raw, provenance, labels, image_raw = self.tensor_generators(degree)
            self._bases[key] = self._build_basis(degree, raw, provenance, labels, image_raw)
        return self._bases[key]

    # ------------------------------------------------------------------
    # operator images and matrices
    # ------------------------------------------------------------------

    def _cached(self, basis: GalerkinBasis, key, compute):
        store = self._matrices.setdefault(basis, {})
        if key not in store:
            store[key] = compute()
        return store[key]

    def _pairing(self, left: np.ndarray, right: np.ndarray, valence: int) -> np.ndarray:
        return weighted_gram(left, right, self.inverse_metric, self.grid.weights, valence)

    def image_values(self, basis: GalerkinBasis, operator: Operator) -> np.ndarray:
        """Nodal values of op(b_k) for every member; Laplace and Lichnerowicz only."""
        calculus = self.calculus
        if operator == Operator.LAPLACE_F:
            field = calculus.laplace_f(basis.field)
        elif operator == Operator.LICHNEROWICZ_F:
            if basis.valence != 2:
                raise ValenceError(operator.value, basis.valence, [2])
            field = calculus.lichnerowicz_f(basis.field)
        else:
            raise ValenceError(operator.value, basis.valence, [])
        return self._cached(basis, ("images", operator), lambda: field.evaluate(self.grid.nodes))

    def divergence_gram(self, basis: GalerkinBasis) -> np.ndarray:
        """<div_f b_i, div_f b_j>_dm, i.e. the matrix of div_f^dag div_f."""
        def compute():
            values = self.calculus.div_f(basis.field).evaluate(self.grid.nodes)
            matrix = self._pairing(values, values, 1)
            return 0.5 * (matrix + matrix.T)

        return self._cached(basis, "divergence_gram", compute)

    def ricci_coefficients(self, basis: GalerkinBasis) -> np.ndarray:
        """r_i = <Ric, b_i>_dm."""
        def compute():
            ricci = self.calculus.geometry.ricci_field().evaluate(self.grid.nodes)
            return self._pairing(basis.values, ricci[:, None], 2)[:, 0]

        return self._cached(basis, "ricci", compute)

    def upsilon_operator(self, scalar: GalerkinBasis) -> np.ndarray:
        """Matrix of lap_f + 1/(2 tau) on the mean-zero members of a scalar basis."""
        def compute():
            images = self.image_values(scalar, Operator.LAPLACE_F)[:, 1:]
            values = scalar.values[:, 1:]
            matrix = self._pairing(values, images + values / (2 * self.model.tau), 0)
            eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
            smallest = float(np.min(np.abs(eigenvalues))) if eigenvalues.size else 0.0
            condition = float(np.max(np.abs(eigenvalues)) / smallest) if smallest > 0 else float("inf")
            if smallest < self.tolerances.spectrum or condition > _SINGULAR_CONDITION:
                raise SpectralGapViolationError(smallest_magnitude=smallest, condition=condition)
            return matrix

        return self._cached(scalar, "upsilon_operator", compute)

    def double_divergence_matrix(self, basis: GalerkinBasis, scalar: GalerkinBasis) -> np.ndarray:
        """D[k, j] = <div_f div_f b_j, s_k>_dm over the mean-zero scalar members."""
        def compute():
            calculus = self.calculus
            values = calculus.div_f(calculus.div_f(basis.field)).evaluate(self.grid.nodes)
            return self._pairing(scalar.values[:, 1:], values, 0)

        return self._cached(basis, ("double_divergence", scalar.degree), compute)

    def hessian_matrix(self, basis: GalerkinBasis, scalar: GalerkinBasis) -> np.ndarray:
        """H[i, l] = <b_i, hess s_l>_dm over the mean-zero scalar members."""
        def compute():
            values = self.calculus.geometry.hessian(scalar.field).evaluate(self.grid.nodes)[:, 1:]
            return self._pairing(basis.values, values, 2)

        return self._cached(basis, ("hessian", scalar.degree), compute)

    def integral_scalar_curvature(self) -> float:
        value = float(self.calculus.integrate_dm(self.calculus.geometry.scalar_curvature_field(), self.grid))
        if not value > 0:
            raise ScalarCurvatureIntegralError(value)
        return value

    def upsilon_degree(self, basis: GalerkinBasis) -> int:
        return max(basis.degree, 1) + 2

    def _stability_matrix(self, basis: GalerkinBasis) -> np.ndarray:
        """<N b_j, b_i> with N = 1/2 lich + 1/(2 tau) + div^dag div + 1/2 hess(upsilon) - Ric <Ric, .>/int R."""
        if not self.model.is_exact_soliton:
            raise ApproximateSolitonError("stability_operator", self.model.soliton.residual)
        tau = self.model.tau
        lich = self._pairing(basis.values, self.image_values(basis, Operator.LICHNEROWICZ_F), 2)
        scalar = self.scalar_basis(self.upsilon_degree(basis))
        upsilon = np.linalg.solve(self.upsilon_operator(scalar), self.double_divergence_matrix(basis, scalar))
        ricci = self.ricci_coefficients(basis)
        return (0.5 * lich + basis.gram / (2 * tau) + self.divergence_gram(basis)
                + 0.5 * self.hessian_matrix(basis, scalar) @ upsilon
                - np.outer(ricci, ricci) / self.integral_scalar_curvature())

    def assemble(self, basis: GalerkinBasis, operator: Operator) -> AssembledOperator:
        """A_ij = <op(b_j), b_i>_dm; refuses when the symmetry defect exposes under-resolved quadrature."""
        def compute():
            if operator == Operator.STABILITY:
                matrix = self._stability_matrix(basis)
            elif operator == Operator.LICHNEROWICZ_GAUGED:
                matrix = self.assemble(basis, Operator.LICHNEROWICZ_F).matrix + self.divergence_gram(basis)
            else:
                matrix = self._pairing(basis.values, self.image_values(basis, operator), basis.valence)
            norm = float(np.linalg.norm(matrix))
            defect = float(np.linalg.norm(matrix - matrix.T) / norm) if norm > 0 else 0.0
            if defect > self.symmetry_tolerance:
                raise QuadratureUnderResolvedError(operator.value, defect, self.symmetry_tolerance)
            logger.info("operator_assembled", model=self.model.name, operator=operator.value,
                        degree=basis.degree, size=basis.size, symmetry_defect=defect)
            return AssembledOperator(operator=operator, matrix=0.5 * (matrix + matrix.T),
                                     symmetry_defect=defect, degree=basis.degree)

        return self._cached(basis, ("assembled", operator), compute)

    # ------------------------------------------------------------------
    # spectra
    # ------------------------------------------------------------------

    def eigensolve(self, matrix: np.ndarray, gram: np.ndarray) -> SpectralResult:
        """Symmetric generalized eigenproblem A v = lambda G v, eigenvalues descending."""
        try:
            scipy.linalg.cholesky(gram, lower=True)
        except np.linalg.LinAlgError:
            raise GramNotPositiveDefiniteError(float(np.min(np.linalg.eigvalsh(gram))))
        values, vectors = scipy.linalg.eigh(matrix, gram)
        order = np.argsort(-values, kind="stable")
        values, vectors = values[order], _fix_signs(vectors[:, order])
        residuals = (np.linalg.norm(matrix @ vectors - gram @ vectors * values, axis=0)
                     / np.linalg.norm(vectors, axis=0))
        defect = float(np.max(np.abs(vectors.T @ gram @ vectors - np.eye(len(values))))) if len(values) else 0.0
        logger.debug("eigensolve_completed", size=len(values), max_residual=float(np.max(residuals, initial=0.0)),
                     orthonormality_defect=defect)
        return SpectralResult(eigenvalues=values, vectors=vectors, residuals=residuals, orthonormality_defect=defect)

    def spectrum(self, basis: GalerkinBasis, operator: Operator) -> tuple[AssembledOperator, SpectralResult]:
        assembled = self.assemble(basis, operator)
        return assembled, self.eigensolve(assembled.matrix, basis.gram)

    def summarize(self, basis: GalerkinBasis, assembled: AssembledOperator, result: SpectralResult,
                  deflated: list[bool] | None = None) -> SpectrumSummary:
        return SpectrumSummary(
            operator=assembled.operator,
            degree=basis.degree,
            basis_size=basis.size,
            eigenvalues=result.eigenvalues.tolist(),
            residuals=result.residuals.tolist(),
            tags=[basis.dominant_tags(result.vectors[:, k]) for k in range(result.size)],
            symmetry_defect=assembled.symmetry_defect,
            orthonormality_defect=result.orthonormality_defect,
            condition_number=basis.condition_number,
            ric_deflated=deflated or [],
        )

    def spectral_gap_check(self, degree: int) -> GapCheck:
        """Largest drift-Laplacian eigenvalue on dm-mean-zero functions against -1/(2 tau)."""
        if not self.model.is_exact_soliton:
            logger.warning("spectral_gap_on_approximate_soliton", model=self.model.name,
                           residual=self.model.soliton.residual)
        basis = self.scalar_basis(degree)
        matrix = self.assemble(basis, Operator.LAPLACE_F).matrix
        lambda_1 = float(scipy.linalg.eigh(matrix[1:, 1:], basis.gram[1:, 1:], eigvals_only=True)[-1])
        bound = -1.0 / (2 * self.model.tau)
        tolerance = self.tolerances.spectrum
        status = CheckStatus.PASSED if lambda_1 < bound + tolerance else CheckStatus.FAILED
        logger.info("spectral_gap_checked", model=self.model.name, lambda_1=lambda_1, bound=bound,
                    status=status.value)
        return GapCheck(degree=degree, lambda_1=lambda_1, bound=bound, tolerance=tolerance, status=status)

    def commutation_trend(self, degrees: list[int]) -> CommutationTrend:
        """Commutation residual of lich_f and lich_f + div^dag div across truncation degrees."""
        rows = []
        for degree in degrees:
            basis = self.tensor_basis(degree)
            a = self.assemble(basis, Operator.LICHNEROWICZ_F).matrix
            b = self.assemble(basis, Operator.LICHNEROWICZ_GAUGED).matrix
            rows.append(CommutationRow(degree=degree, residual=commutation_residual(a, b, basis.gram)))
        slack = self.tolerances.closed_form
        monotone = all(rows[k + 1].residual <= rows[k].residual + slack for k in range(len(rows) - 1))
        return CommutationTrend(rows=rows, monotone=monotone,
                                status=CheckStatus.PASSED if monotone else CheckStatus.FAILED)

    # ------------------------------------------------------------------
    # clustering, deflation and joint diagonalization
    # ------------------------------------------------------------------

    def clusters(self, eigenvalues: np.ndarray) -> list[list[int]]:
        """Runs of descending eigenvalues closer than TOL_CLUSTER times the spectral radius."""
        if not len(eigenvalues):
            return []
        tolerance = self.tolerances.cluster * max(1.0, float(np.max(np.abs(eigenvalues))))
        groups = [[0]]
        for k in range(1, len(eigenvalues)):
            if eigenvalues[k - 1] - eigenvalues[k] > tolerance:
                groups.append([])
            groups[-1].append(k)
        return groups

    def deflated_blocks(self, result: SpectralResult, gram: np.ndarray,
                        direction: np.ndarray | None) -> list[tuple[list[int], np.ndarray | None, np.ndarray]]:
        """
        Per eigenvalue cluster: (indices, deflated vector or None, remaining vectors).

        A cluster whose eigenspace contains `direction` is rotated so that the
        direction is split off; the remaining vectors span its G-orthogonal
        complement inside the eigenspace.
        """
        unit = None
        if direction is not None and float(direction @ gram @ direction) > 0:
            unit = direction / np.sqrt(float(direction @ gram @ direction))
        blocks = []
        for indices in self.clusters(result.eigenvalues):
            vectors = result.vectors[:, indices]
            deflated = None
            if unit is not None:
                projection = vectors.T @ gram @ unit
                if float(projection @ projection) > 1.0 - self.tolerances.spectrum:
                    deflated = vectors @ projection / np.linalg.norm(projection)
                    vectors = vectors @ scipy.linalg.null_space(projection[None, :])
            blocks.append((indices, deflated, vectors))
        return blocks

    def joint_eigenbasis(self, a: np.ndarray, b: np.ndarray, gram: np.ndarray,
                         direction: np.ndarray | None = None) -> JointEigenbasis:
        """Eigenvectors of A, rotated inside each A-cluster to diagonalize B."""
        result = self.eigensolve(a, gram)
        residual = commutation_residual(a, b, gram)
        columns, deflated_flags, clusters = [], [], []
        for indices, deflated, vectors in self.deflated_blocks(result, gram, direction):
            clusters.append(tuple(indices))
            if deflated is not None:
                columns.append(deflated)
                deflated_flags.append(True)
            if vectors.shape[1]:
                block = vectors.T @ b @ vectors
                try:
                    values, rotation = scipy.linalg.eigh(0.5 * (block + block.T))
                except np.linalg.LinAlgError as exc:
                    raise JointDiagonalizationError(residual, list(indices)) from exc
                rotated = _fix_signs(vectors @ rotation[:, ::-1])
                columns.extend(rotated.T)
                deflated_flags.extend([False] * rotated.shape[1])
        vectors = np.array(columns).T.reshape(a.shape[0], len(columns))
        lambdas = np.array([_rayleigh(a, gram, v) for v in vectors.T])
        mus = np.array([_rayleigh(b, gram, v) for v in vectors.T])
        classes = tuple(
            JointClass.GAUGE if mu - lam > self.tolerances.spectrum * max(1.0, abs(lam)) else JointClass.TRANSVERSAL
            for lam, mu in zip(lambdas, mus)
        )
        scale = max(float(np.linalg.norm(b)), 1.0)
        joint = max((float(np.linalg.norm(b @ v - mu * (gram @ v))) / scale for v, mu in zip(vectors.T, mus)),
                    default=0.0)
        return JointEigenbasis(lichnerowicz=lambdas, gauged=mus, vectors=vectors, classes=classes,
                               deflated=tuple(deflated_flags), clusters=tuple(clusters),
                               commutation_residual=residual, joint_residual=joint)

    def divergence_split(self, basis: GalerkinBasis, coefficients: np.ndarray) -> dict[str, float]:
        """Split a basis combination into its image-of-adjoint part and the G-orthogonal remainder."""
        coefficients = np.asarray(coefficients, dtype=float)
        image = np.zeros_like(coefficients)
        image[:basis.image_count] = coefficients[:basis.image_count]
        remainder = coefficients - image
        divergence = self.divergence_gram(basis)
        return {
            "image_norm": float(np.sqrt(image @ basis.gram @ image)),
            "remainder_norm": float(np.sqrt(remainder @ basis.gram @ remainder)),
            "remainder_divergence_norm": float(np.sqrt(max(remainder @ divergence @ remainder, 0.0))),
        }


def get_galerkin_service(model: ManifoldModel, grid: QuadratureGrid,
                         tolerances: ToleranceTable | None = None) -> GalerkinService:
    """Provider for GalerkinService; one instance per (model, grid) run."""
    return GalerkinService(model, grid, tolerances)
