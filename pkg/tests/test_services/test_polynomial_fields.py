import numpy as np
import pytest

from grslab.config import settings
from grslab.services.polynomial_fields import (
    PolynomialFieldFactory,
    ambient_differentials,
    monomial_exponents,
    monomial_field,
    monomial_label,
)


@pytest.mark.parametrize("dimension, degree, count", [(3, 0, 1), (3, 1, 4), (3, 2, 10), (5, 2, 21), (6, 1, 7)])
def test_monomial_counts(dimension, degree, count):
    exponents = monomial_exponents(dimension, degree)
    assert exponents.shape == (count, dimension)
    assert list(exponents.sum(axis=1)) == sorted(exponents.sum(axis=1))


def test_minimum_degree_drops_low_monomials():
    exponents = monomial_exponents(3, 2, min_degree=1)
    assert len(exponents) == 9
    assert exponents.sum(axis=1).min() == 1
    assert monomial_exponents(3, 0, min_degree=1).shape == (0, 3)


def test_monomial_labels():
    assert monomial_label(np.array([0, 0, 0])) == "1"
    assert monomial_label(np.array([2, 0, 1])) == "y0^2*y2"


def test_monomials_on_the_sphere_satisfy_the_ambient_relation(sphere2, sphere2_grid):
    values = monomial_field(sphere2, monomial_exponents(3, 2, min_degree=2)).evaluate(sphere2_grid.nodes[:50])
    # y0^2, y1^2 and y2^2 sit at positions 0, 3 and 5 of the graded order
    np.testing.assert_allclose(values[:, 0] + values[:, 3] + values[:, 5], 1.0, atol=1e-14)


def test_ambient_differentials_shape(product, product_grid):
    values = ambient_differentials(product).evaluate(product_grid.nodes[:10])
    assert values.shape == (10, 6, 4)


class TestFactory:
    def test_same_seed_same_fields(self, sphere2, sphere2_grid):
        nodes = sphere2_grid.nodes[:40]
        first = PolynomialFieldFactory(sphere2, seed=4).two_tensors(3, 2).evaluate(nodes)
        second = PolynomialFieldFactory(sphere2, seed=4).two_tensors(3, 2).evaluate(nodes)
        other = PolynomialFieldFactory(sphere2, seed=5).two_tensors(3, 2).evaluate(nodes)
        np.testing.assert_array_equal(first, second)
        assert not np.allclose(first, other)

    def test_default_seed(self, sphere2):
        assert PolynomialFieldFactory(sphere2).seed == settings.DEFAULT_SEED

    def test_shapes_and_symmetry(self, sphere3, sphere3_grid):
        factory = PolynomialFieldFactory(sphere3, seed=1)
        nodes = sphere3_grid.nodes[:8]
        assert factory.scalars(5, 2).evaluate(nodes).shape == (8, 5)
        assert factory.one_forms(5, 2).evaluate(nodes).shape == (8, 5, 3)
        values = factory.two_tensors(5, 2).evaluate(nodes)
        assert values.shape == (8, 5, 3, 3)
        np.testing.assert_allclose(values, np.swapaxes(values, -1, -2), atol=1e-15)
