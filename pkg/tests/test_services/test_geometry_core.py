import numpy as np
import pytest

from grslab.core.exceptions import ChartError
from grslab.schemas.common import CheckStatus, IdentityName
from grslab.services.geometry_core import (
    GeometryService,
    constant_curvature_riemann,
    convergence_study,
    curvature_convergence,
    observed_orders,
)
from grslab.schemas.config import GridResolution
from grslab.services.polynomial_fields import PolynomialFieldFactory

POINT = np.array([1.1, 0.4])


class TestRoundSphere:
    def test_christoffel_symbols(self, sphere2):
        gamma = GeometryService(sphere2).christoffel(POINT)
        theta = POINT[0]
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -np.sin(theta) * np.cos(theta)
        expected[1, 0, 1] = expected[1, 1, 0] = np.cos(theta) / np.sin(theta)
        np.testing.assert_allclose(gamma, expected, atol=1e-14)

    @pytest.mark.parametrize("radius", [1.0, 2.0])
    def test_curvature_sign_conventions(self, model_service, radius):
        sphere = model_service.build_round_sphere(2, radius)
        rm, ric, scalar = GeometryService(sphere).curvature(POINT)
        metric = np.asarray(sphere.metric(POINT))
        # sectional curvature R(e1, e2, e2, e1) = R_1212 / det g > 0 with R_ijkl = k(g_ik g_jl - g_il g_jk)
        np.testing.assert_allclose(rm, constant_curvature_riemann(metric, 1 / radius ** 2), atol=1e-13)
        assert rm[0, 1, 0, 1] / np.linalg.det(metric) == pytest.approx(1 / radius ** 2)
        np.testing.assert_allclose(ric, metric / radius ** 2, atol=1e-13)
        assert scalar == pytest.approx(2 / radius ** 2)

    def test_closed_form_and_christoffel_riemann_agree(self, sphere3, sphere3_grid):
        geometry = GeometryService(sphere3)
        nodes = sphere3_grid.nodes[sphere3_grid.check_indices(32)]
        residuals = geometry.curvature_symmetry_residuals(nodes)
        assert set(residuals) == {
            IdentityName.CHRISTOFFEL_SYMMETRY, IdentityName.RIEMANN_ANTISYMMETRY,
            IdentityName.RIEMANN_PAIR_SYMMETRY, IdentityName.FIRST_BIANCHI,
            IdentityName.METRIC_COMPATIBILITY, IdentityName.RICCI_TRACE_LOCK,
        }
        assert max(residuals.values()) < 1e-10

    def test_points_outside_the_chart_are_rejected(self, sphere2):
        with pytest.raises(ChartError):
            GeometryService(sphere2).curvature(np.array([4.0, 0.0]))
        with pytest.raises(ChartError):
            GeometryService(sphere2).curvature(np.array([1.0, 0.0, 0.0]))


def test_product_curvature_is_block_diagonal(product):
    rm, ric, scalar = GeometryService(product).curvature(np.array([1.0, 0.3, 2.0, 5.0]))
    assert scalar == pytest.approx(4.0)
    assert np.max(np.abs(rm[:2, 2:])) < 1e-13
    np.testing.assert_allclose(ric, np.asarray(product.metric(np.array([1.0, 0.3, 2.0, 5.0]))), atol=1e-13)


def test_flat_torus_has_zero_curvature(flat_torus, flat_torus_grid):
    geometry = GeometryService(flat_torus)
    nodes = flat_torus_grid.nodes[:64]
    assert np.max(np.abs(geometry.ricci_field().evaluate(nodes))) < 1e-14
    assert max(geometry.curvature_symmetry_residuals(nodes).values()) < 1e-14


def test_ricci_identities_on_generated_fields(sphere2, sphere2_grid):
    factory = PolynomialFieldFactory(sphere2, seed=11)
    geometry = GeometryService(sphere2)
    nodes = sphere2_grid.nodes[sphere2_grid.check_indices(64)]
    one_form, two_tensor = geometry.ricci_identity_residual(factory.one_forms(4, 2), factory.two_tensors(4, 2), nodes)
    assert one_form < 1e-10
    assert two_tensor < 1e-10


def test_finite_difference_curvature_matches_closed_form(round_generic, sphere2, round_generic_grid):
    nodes = round_generic_grid.nodes[round_generic_grid.check_indices(16)]
    fd = GeometryService(round_generic).riemann_field().evaluate(nodes)
    exact = GeometryService(sphere2).riemann_field().evaluate(nodes)
    assert np.max(np.abs(fd - exact)) < 1e-3


def test_finite_difference_curvature_refuses_the_collar(round_generic):
    with pytest.raises(ChartError):
        GeometryService(round_generic).curvature(np.array([0.1, 1.0]))


def test_observed_orders():
    orders = observed_orders([16, 32, 64], [1e-2, 2.5e-3, 0.0])
    assert orders[0] is None
    assert orders[1] == pytest.approx(2.0)
    assert orders[2] is None


def test_convergence_study_status():
    passed = convergence_study("riemann", [16, 32, 64], [1.6e-3, 1e-4, 6.25e-6], required_order=1.8)
    assert passed.status == CheckStatus.PASSED
    assert passed.min_order == pytest.approx(4.0)
    failed = convergence_study("riemann", [16, 32], [1e-3, 8e-4], required_order=1.8)
    assert failed.status == CheckStatus.FAILED
    assert [row.resolution for row in failed.rows] == ["16", "32"]


@pytest.mark.slow
def test_ellipsoid_curvature_converges_at_the_stencil_order(model_service, ellipsoid_grid):
    def build(count):
        return model_service.build_ellipsoid(a=1.0, b=1.0, c=1.2, amplitude=0.3, tau=0.5,
                                             resolution=GridResolution(polar=count, periodic=2 * count))

    nodes = ellipsoid_grid.nodes[ellipsoid_grid.check_indices(16)]
    study = curvature_convergence(build, build(128), [32, 64], nodes, required_order=1.8)
    assert study.status == CheckStatus.PASSED
    assert study.min_order >= 1.8
    assert study.rows[-1].error < study.rows[0].error
