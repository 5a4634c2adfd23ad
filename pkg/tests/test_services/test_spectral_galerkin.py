import numpy as np
import pytest

from grslab.core.exceptions import (
    AliasingError,
    ApproximateSolitonError,
    ConfigValueError,
    GramNotPositiveDefiniteError,
    ValenceError,
)
from grslab.schemas.common import CheckStatus, JointClass, Operator, Provenance
from grslab.schemas.config import GridResolution
from grslab.services.spectral_galerkin import GalerkinService, commutation_residual


@pytest.fixture(scope="module")
def sphere2_galerkin(sphere2, sphere2_grid):
    return GalerkinService(sphere2, sphere2_grid)


@pytest.fixture(scope="module")
def sphere3_galerkin(sphere3, sphere3_grid):
    return GalerkinService(sphere3, sphere3_grid)


@pytest.fixture(scope="module")
def product_galerkin(product, product_grid):
    return GalerkinService(product, product_grid)


class TestScalarBasis:
    def test_sizes_drop_the_sphere_relation(self, sphere2_galerkin):
        assert sphere2_galerkin.scalar_basis(1).size == 4
        # 10 monomials of degree <= 2 in three variables, minus |y|^2 = 1
        assert sphere2_galerkin.scalar_basis(2).size == 9

    def test_first_member_is_the_constant(self, sphere2_galerkin):
        basis = sphere2_galerkin.scalar_basis(2)
        np.testing.assert_allclose(basis.values[:, 0], 1.0, atol=1e-12)
        assert basis.orthonormality_defect < 1e-10
        assert set(basis.provenance) == {Provenance.SCALAR_MONOMIAL}

    def test_drift_laplacian_spectrum(self, sphere2_galerkin):
        basis = sphere2_galerkin.scalar_basis(2)
        _, result = sphere2_galerkin.spectrum(basis, Operator.LAPLACE_F)
        np.testing.assert_allclose(result.eigenvalues, [0.0] + [-2.0] * 3 + [-6.0] * 5, atol=1e-9)
        assert np.max(result.residuals) < 1e-9

    def test_degree_zero_is_rejected(self, sphere2_galerkin):
        with pytest.raises(ConfigValueError):
            sphere2_galerkin.scalar_basis(0)

    def test_aliasing(self, model_service, sphere2):
        grid = model_service.quadrature_grid(sphere2, GridResolution(polar=8, periodic=16))
        with pytest.raises(AliasingError) as excinfo:
            GalerkinService(sphere2, grid).scalar_basis(4)
        assert excinfo.value.details["required"] == 10


@pytest.mark.parametrize(
    "fixture, lambda_1, bound",
    [("sphere2_galerkin", -2.0, -1.0), ("sphere3_galerkin", -3.0, -2.0), ("product_galerkin", -2.0, -1.0)],
)
def test_spectral_gap(request, fixture, lambda_1, bound):
    gap = request.getfixturevalue(fixture).spectral_gap_check(1)
    assert gap.lambda_1 == pytest.approx(lambda_1, abs=1e-9)
    assert gap.bound == pytest.approx(bound)
    assert gap.status == CheckStatus.PASSED


class TestTensorBasis:
    def test_product_lichnerowicz_spectrum(self, product_galerkin):
        basis = product_galerkin.tensor_basis(1)
        assert basis.size == 14
        assembled, result = product_galerkin.spectrum(basis, Operator.LICHNEROWICZ_F)
        np.testing.assert_allclose(result.eigenvalues, [0.0] * 2 + [-2.0] * 12, atol=1e-8)
        assert assembled.symmetry_defect < 1e-8

    def test_image_families_lead(self, sphere2_galerkin):
        basis = sphere2_galerkin.tensor_basis(1)
        assert 0 < basis.image_count < basis.size
        assert basis.provenance[0] == Provenance.HESSIAN
        split = sphere2_galerkin.divergence_split(basis, np.eye(basis.size)[0])
        assert split["image_norm"] == pytest.approx(1.0, abs=1e-10)
        assert split["remainder_norm"] == pytest.approx(0.0, abs=1e-10)

    def test_degree_zero_basis_is_the_metric(self, sphere2_galerkin):
        basis = sphere2_galerkin.tensor_basis(0)
        assert basis.size == 1
        assert basis.image_count == 0
        _, result = sphere2_galerkin.spectrum(basis, Operator.LICHNEROWICZ_F)
        assert result.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)

    def test_lichnerowicz_needs_two_tensors(self, sphere2_galerkin):
        with pytest.raises(ValenceError):
            sphere2_galerkin.image_values(sphere2_galerkin.scalar_basis(1), Operator.LICHNEROWICZ_F)

    def test_ricci_coefficients_reproduce_the_ricci_norm(self, sphere2_galerkin):
        basis = sphere2_galerkin.tensor_basis(1)
        ricci = sphere2_galerkin.ricci_coefficients(basis)
        # Ric = g lies in the span, so Parseval gives int |Ric|^2 dm = 2
        assert float(ricci @ ricci) == pytest.approx(2.0, rel=1e-10)
        assert sphere2_galerkin.integral_scalar_curvature() == pytest.approx(2.0, rel=1e-10)


def test_commutation_trend_on_the_round_sphere(sphere2_galerkin):
    trend = sphere2_galerkin.commutation_trend([0, 1, 2])
    assert [row.degree for row in trend.rows] == [0, 1, 2]
    assert trend.monotone
    assert trend.status == CheckStatus.PASSED


def test_commutation_residual_of_commuting_matrices():
    a = np.diag([1.0, 2.0, 3.0])
    assert commutation_residual(a, a ** 2, np.eye(3)) == 0.0
    b = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert commutation_residual(a, b, np.eye(3)) > 0.1


def test_clusters(sphere2_galerkin):
    groups = sphere2_galerkin.clusters(np.array([0.0, -2.0, -2.0 - 1e-9, -6.0]))
    assert groups == [[0], [1, 2], [3]]


def test_eigensolve_rejects_indefinite_gram(sphere2_galerkin):
    with pytest.raises(GramNotPositiveDefiniteError):
        sphere2_galerkin.eigensolve(np.eye(2), np.diag([1.0, -1.0]))


def test_ricci_is_deflated_from_its_eigenspace(sphere2_galerkin):
    basis = sphere2_galerkin.tensor_basis(2)
    _, result = sphere2_galerkin.spectrum(basis, Operator.LICHNEROWICZ_F)
    blocks = sphere2_galerkin.deflated_blocks(result, basis.gram, sphere2_galerkin.ricci_coefficients(basis))
    deflated = [(indices, vector) for indices, vector, _ in blocks if vector is not None]
    assert len(deflated) == 1
    indices, vector = deflated[0]
    assert result.eigenvalues[indices[0]] == pytest.approx(0.0, abs=1e-8)
    assert float(vector @ basis.gram @ vector) == pytest.approx(1.0, abs=1e-10)
    assert sum(len(indices) for indices, _, _ in blocks) == basis.size


def test_joint_eigenbasis_classifies_gauge_members(sphere2_galerkin):
    basis = sphere2_galerkin.tensor_basis(1)
    a = sphere2_galerkin.assemble(basis, Operator.LICHNEROWICZ_F).matrix
    b = sphere2_galerkin.assemble(basis, Operator.LICHNEROWICZ_GAUGED).matrix
    joint = sphere2_galerkin.joint_eigenbasis(a, b, basis.gram, sphere2_galerkin.ricci_coefficients(basis))
    assert joint.vectors.shape == (basis.size, basis.size)
    assert sum(joint.deflated) == 1
    assert joint.commutation_residual < 1e-8
    assert np.all(joint.gauged >= joint.lichnerowicz - 1e-10)
    for lam, mu, joint_class in zip(joint.lichnerowicz, joint.gauged, joint.classes):
        assert (joint_class == JointClass.GAUGE) == (mu - lam > 1e-6 * max(1.0, abs(lam)))
    assert JointClass.GAUGE in joint.classes


def test_stability_matrix_needs_an_exact_soliton(model_service, round_generic):
    grid = model_service.quadrature_grid(round_generic, GridResolution(polar=16, periodic=32))
    galerkin = GalerkinService(round_generic, grid)
    with pytest.raises(ApproximateSolitonError):
        galerkin.assemble(galerkin.tensor_basis(0), Operator.STABILITY)
