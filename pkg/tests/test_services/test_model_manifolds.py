import numpy as np
import pytest

from grslab.core.exceptions import (
    AliasingError,
    ConfigValueError,
    EinsteinConstantMismatchError,
    UnsupportedDimensionError,
)
from grslab.models.chart import Axis
from grslab.models.fields import TensorField
from grslab.schemas.common import CurvatureSource, ModelKind, SolitonKind
from grslab.schemas.config import GridResolution, ModelSpec
from grslab.services.model_manifolds import axis_rule, sphere_volume


@pytest.mark.parametrize(
    "fixture, tau, potential, scalar_curvature",
    [
        ("sphere2", 0.5, np.log(2.0), 2.0),
        ("sphere3", 0.25, np.log(2.0 * np.sqrt(np.pi)), 6.0),
        ("product", 0.5, np.log(4.0), 4.0),
        ("sphere2_radius2", 2.0, np.log(2.0), 0.5),
    ],
)
def test_soliton_fixtures(request, calculus, fixture, tau, potential, scalar_curvature):
    model = request.getfixturevalue(fixture)
    grid = request.getfixturevalue(f"{fixture}_grid")
    assert model.tau == pytest.approx(tau, abs=1e-14)
    assert model.is_exact_soliton
    assert model.soliton.residual < 1e-10
    nodes = grid.nodes[grid.check_indices(16)]
    np.testing.assert_allclose(TensorField(model.potential, 0).evaluate(nodes), potential, atol=1e-12)
    scalar = calculus(model).geometry.scalar_curvature_field().evaluate(nodes)
    np.testing.assert_allclose(scalar, scalar_curvature, atol=1e-10)


@pytest.mark.parametrize("fixture", ["sphere2", "sphere3", "product", "sphere2_radius2"])
def test_measure_has_unit_mass(request, fixture):
    grid = request.getfixturevalue(f"{fixture}_grid")
    assert grid.mass_defect < 1e-9
    assert grid.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(grid.weights > 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_volume_weights_integrate_sphere_volume(model_service, n):
    sphere = model_service.build_round_sphere(n)
    grid = model_service.quadrature_grid(sphere)
    assert grid.volume_weights.sum() == pytest.approx(sphere_volume(n, 1.0), rel=1e-12)


def test_sphere_volume_values():
    assert sphere_volume(2, 1.0) == pytest.approx(4 * np.pi)
    assert sphere_volume(3, 1.0) == pytest.approx(2 * np.pi ** 2)
    assert sphere_volume(2, 2.0) == pytest.approx(16 * np.pi)


@pytest.mark.parametrize("exponent", [1, 2, 3])
def test_polar_rule_integrates_density_exactly(exponent):
    nodes, weights = axis_rule(Axis.polar(density_exponent=exponent), 10)
    assert np.all(np.diff(nodes) > 0)
    # weights integrate g(t) sin^e(t) dt; with g = cos^2 the exact value is a Beta integral
    expected = {1: 2.0 / 3.0, 2: np.pi / 8.0, 3: 4.0 / 15.0}[exponent]
    assert np.sum(weights * np.cos(nodes) ** 2) == pytest.approx(expected, rel=1e-12)


def test_periodic_rule_is_uniform():
    nodes, weights = axis_rule(Axis.periodic(), 8)
    np.testing.assert_allclose(np.diff(nodes), np.pi / 4)
    assert weights.sum() == pytest.approx(2 * np.pi)


def test_unsupported_sphere_dimension(model_service):
    with pytest.raises(UnsupportedDimensionError):
        model_service.build_round_sphere(5)


def test_product_requires_matching_einstein_constants(model_service, sphere2):
    with pytest.raises(EinsteinConstantMismatchError):
        model_service.build_product(sphere2, model_service.build_round_sphere(2, radius=2.0))


def test_product_factors(product):
    assert product.dimension == 4
    assert product.ambient_dimension == 6
    assert [(f[0].start, f[0].stop) for f in product.factors] == [(0, 2), (2, 4)]
    assert product.einstein_constant == pytest.approx(1.0)


def test_ellipsoid_is_an_approximate_finite_difference_model(ellipsoid, ellipsoid_grid):
    assert ellipsoid.kind == ModelKind.GENERIC
    assert ellipsoid.curvature_source == CurvatureSource.FINITE_DIFFERENCE
    assert ellipsoid.soliton.kind == SolitonKind.APPROXIMATE
    assert ellipsoid.soliton.residual > 1e-3
    assert ellipsoid_grid.weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_round_generic_is_flagged_approximate_by_construction(round_generic):
    # finite-difference models are never exact, whatever the measured residual
    assert not round_generic.is_exact_soliton
    assert round_generic.soliton.residual < 1e-3


def test_flat_torus(flat_torus, calculus, flat_torus_grid):
    assert flat_torus.kind == ModelKind.FLAT
    assert not flat_torus.is_exact_soliton
    _, residual = calculus(flat_torus).soliton_residual(flat_torus_grid)
    assert residual == pytest.approx(np.sqrt(2) / 2.0, rel=1e-12)


def test_rescale_keeps_measure(model_service, sphere2, sphere2_grid):
    scaled = model_service.rescale(sphere2, 4.0)
    assert scaled.tau == pytest.approx(2.0)
    assert scaled.einstein_constant == pytest.approx(0.25)
    grid = model_service.quadrature_grid(scaled)
    np.testing.assert_allclose(grid.weights, sphere2_grid.weights, atol=1e-14)


def test_build_from_spec(model_service):
    model = model_service.build_from_spec(ModelSpec.parse("sphere:n=3,r=1"))
    assert model.dimension == 3
    assert model.name == "sphere:n=3,r=1"
    product = model_service.build_from_spec(ModelSpec.parse("product:n1=2,r1=1,n2=2,r2=1"))
    assert product.kind == ModelKind.PRODUCT


def test_coarse_grids_are_rejected(model_service, sphere2):
    with pytest.raises(AliasingError):
        model_service.quadrature_grid(sphere2, GridResolution(polar=8, periodic=16), degree=4)
    with pytest.raises(ConfigValueError):
        model_service.quadrature_grid(sphere2, GridResolution(polar=4, periodic=8))


def test_default_resolution_and_degree(model_service, sphere2, sphere3, product):
    assert model_service.default_resolution(sphere2).text() == "32x64"
    assert model_service.default_degree(sphere2) == 2
    assert model_service.default_degree(sphere3) == 1
    assert model_service.default_degree(product) == 1
