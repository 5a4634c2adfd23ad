import numpy as np
import pytest

from grslab.commands.base import has_failures
from grslab.core.exceptions import ApproximateSolitonError
from grslab.schemas.common import CheckStatus, IdentityName, Verdict
from grslab.services.polynomial_fields import PolynomialFieldFactory
from grslab.services.stability_analysis import StabilityService, relative_agreement, verdict_label


@pytest.fixture(scope="module")
def sphere2_stability(sphere2, sphere2_grid):
    return StabilityService(sphere2, sphere2_grid, degree=1)


@pytest.fixture(scope="module")
def sphere3_report(sphere3, sphere3_grid):
    return StabilityService(sphere3, sphere3_grid, degree=1).build_stability_report()


@pytest.fixture(scope="module")
def product_report(product, product_grid):
    return StabilityService(product, product_grid, degree=1).build_stability_report()


def test_verdict_labels():
    assert verdict_label(Verdict.STABLE_SUFFICIENT, 2) == "stable (sufficient, L=2)"
    assert verdict_label(Verdict.INCONCLUSIVE_TRUNCATION, 0) == "inconclusive (truncation, L=0)"
    assert verdict_label(Verdict.UNSTABLE, 3) == "unstable"
    assert verdict_label(Verdict.INCONCLUSIVE_GAP, 1) == "inconclusive (gap)"


class TestOperator:
    @pytest.mark.parametrize("fixture", ["sphere2", pytest.param("sphere3", marks=pytest.mark.slow),
                                         pytest.param("product", marks=pytest.mark.slow)])
    def test_ricci_is_in_the_kernel(self, request, fixture):
        model, grid = request.getfixturevalue(fixture), request.getfixturevalue(f"{fixture}_grid")
        service = StabilityService(model, grid, degree=1)
        image = service.apply_N(service.geometry.ricci_field())
        assert service.calculus.norm_dm(image, grid) < 1e-9

    def test_metric_conformal_direction(self, sphere2_stability):
        # N(g) = g/(2 tau) - Ric * int R / int R = g - g on the unit sphere
        metric = sphere2_stability.geometry.metric_field()
        assert abs(sphere2_stability.second_variation(metric)) < 1e-9

    def test_upsilon_from_potential(self, sphere2, sphere2_stability):
        k = PolynomialFieldFactory(sphere2, seed=9).two_tensors(2, 1)
        result = sphere2_stability.upsilon_from_potential(k)
        assert result["relative_error"] < 1e-8
        assert result["equation_residual"] < 1e-8

    def test_upsilon_is_mean_zero(self, sphere2, sphere2_grid, sphere2_stability):
        h = PolynomialFieldFactory(sphere2, seed=9).two_tensors(3, 1)
        upsilon, residual = sphere2_stability.solve_upsilon(h)
        means = sphere2_stability.calculus.integrate_dm(upsilon, sphere2_grid)
        assert np.max(np.abs(means)) < 1e-10
        assert residual < 1e-6

    def test_image_of_the_adjoint_divergence_is_in_the_kernel(self, sphere2_stability):
        forms, _ = sphere2_stability.galerkin.monomial_one_forms(1)
        suite = sphere2_stability.image_kernel_residuals(forms)
        assert suite.passed, suite.failures()
        assert suite[IdentityName.STABILITY_KERNEL].tolerance == 1e-6
        # N is applied with the solved upsilon, which has to reproduce -div_f w
        assert suite[IdentityName.UPSILON_OF_ADJOINT].status == CheckStatus.PASSED
        assert suite[IdentityName.UPSILON_OF_ADJOINT].tolerance == 1e-6

    def test_approximate_models_are_refused(self, ellipsoid, ellipsoid_grid):
        service = StabilityService(ellipsoid, ellipsoid_grid, degree=1)
        metric = service.geometry.metric_field()
        with pytest.raises(ApproximateSolitonError) as excinfo:
            service.apply_N(metric)
        assert excinfo.value.details["operation"] == "apply_N"
        with pytest.raises(ApproximateSolitonError):
            service.build_stability_report()

    def test_kernel_suite_is_skipped_off_soliton(self, ellipsoid, ellipsoid_grid):
        service = StabilityService(ellipsoid, ellipsoid_grid, degree=1)
        forms, _ = service.galerkin.monomial_one_forms(1)
        suite = service.image_kernel_residuals(forms)
        assert {entry.status for entry in suite.entries} == {CheckStatus.SKIPPED}
        assert len(suite.entries) == 6


def test_round_sphere_at_degree_zero_is_inconclusive(sphere2, sphere2_grid):
    report = StabilityService(sphere2, sphere2_grid, degree=0).build_stability_report()
    assert report.verdict == Verdict.INCONCLUSIVE_TRUNCATION
    assert report.verdict_label == "inconclusive (truncation, L=0)"
    assert report.necessary == []
    assert report.witness is None
    assert [m.ric_deflated for m in report.sufficient.members] == [True]
    assert report.sufficient.status == CheckStatus.PASSED
    assert report.sufficient.members[0].status == CheckStatus.PASSED


@pytest.mark.slow
class TestRoundThreeSphere:
    def test_verdict(self, sphere3_report):
        assert sphere3_report.verdict == Verdict.STABLE_SUFFICIENT
        assert sphere3_report.verdict_label == "stable (sufficient, L=1)"
        assert sphere3_report.witness is None
        assert sphere3_report.gap.status == CheckStatus.PASSED

    def test_supporting_checks(self, sphere3_report):
        assert sphere3_report.kernel.passed, sphere3_report.kernel.failures()
        assert all(row.status == CheckStatus.PASSED for row in sphere3_report.relation)
        assert sphere3_report.sufficient.offending == []
        assert sphere3_report.sufficient.gauge_kernel_max < 1e-6
        assert sphere3_report.sufficient.commutation_residual < 1e-8
        assert sphere3_report.sufficient.status == CheckStatus.PASSED
        assert all(m.status == CheckStatus.PASSED for m in sphere3_report.sufficient.members)

    def test_scanned_directions_are_not_unstable(self, sphere3_report):
        for direction in sphere3_report.necessary:
            assert not direction.unstable
            assert direction.agreement < 1e-6
            assert direction.status == CheckStatus.PASSED


@pytest.mark.slow
class TestProductOfSpheres:
    def test_verdict_and_witness(self, product_report):
        assert product_report.verdict == Verdict.UNSTABLE
        assert product_report.verdict_label == "unstable"
        witness = product_report.witness
        assert witness is not None
        # h = g1 - g2 with int |h|^2 dm = 4: every term of N but h/(2 tau) vanishes
        assert witness.second_variation == pytest.approx(4.0, abs=1e-6)
        assert witness.eigenvalue == pytest.approx(0.0, abs=1e-8)
        assert abs(witness.ricci_pairing) < 1e-8
        assert witness.agreement < 1e-6
        assert witness.status == CheckStatus.PASSED

    def test_spectrum_and_scan(self, product_report):
        eigenvalues = product_report.lichnerowicz_spectrum.eigenvalues
        np.testing.assert_allclose(eigenvalues, [0.0] * 2 + [-2.0] * 12, atol=1e-8)
        assert sum(product_report.lichnerowicz_spectrum.ric_deflated) == 1
        assert len(product_report.necessary) == 1

    def test_supporting_checks(self, product_report):
        assert product_report.gap.status == CheckStatus.PASSED
        assert product_report.kernel.passed, product_report.kernel.failures()
        assert all(row.status == CheckStatus.PASSED for row in product_report.relation)


def test_agreement_is_relative_to_the_direct_value():
    assert relative_agreement(1e-3, 1e-3 + 1e-8) == pytest.approx(1e-5)
    assert relative_agreement(4.0, 4.0) == 0.0
    assert relative_agreement(0.0, 0.0) == 0.0
    assert relative_agreement(0.0, 1e-12) > 1.0


def test_failed_member_check_fails_the_run(sphere2, sphere2_grid):
    report = StabilityService(sphere2, sphere2_grid, degree=0).build_stability_report()
    assert not has_failures([report.model_dump(mode="json")])
    member = report.sufficient.members[0].model_copy(update={"status": CheckStatus.FAILED})
    sufficient = report.sufficient.model_copy(update={"members": [member]})
    broken = report.model_copy(update={"sufficient": sufficient})
    assert has_failures([broken.model_dump(mode="json")])
