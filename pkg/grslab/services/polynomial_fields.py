"""
Polynomial fields built from a model's ambient coordinates.

Restricted to round spheres (and their products) ambient monomials of total
degree <= L span exactly the harmonics of degree <= L, which is what makes the
Galerkin bases band-limited and the quadrature exact.
"""
from itertools import combinations_with_replacement

import jax
import jax.numpy as jnp
import numpy as np

from grslab.config import settings
from grslab.models.fields import TensorField
from grslab.models.manifold import ManifoldModel
from grslab.schemas.common import Symmetry


def monomial_exponents(ambient_dimension: int, degree: int, min_degree: int = 0) -> np.ndarray:
    """Exponent rows of every monomial with min_degree <= total degree <= degree, graded order."""
    rows = []
    for total in range(max(min_degree, 0), degree + 1):
        for combo in combinations_with_replacement(range(ambient_dimension), total):
            row = np.zeros(ambient_dimension, dtype=int)
            for index in combo:
                row[index] += 1
            rows.append(row)
    return np.array(rows, dtype=int).reshape(-1, ambient_dimension)


def monomial_label(exponents: np.ndarray) -> str:
    factors = [f"y{i}" if e == 1 else f"y{i}^{e}" for i, e in enumerate(exponents) if e]
    return "*".join(factors) or "1"


def _monomial(y: jax.Array, exponents: tuple[int, ...]) -> jax.Array:
    value = jnp.ones_like(y[0])
    for index, power in enumerate(exponents):
        if power:
            value = value * jax.lax.integer_pow(y[index], power)
    return value


def monomial_field(model: ManifoldModel, exponents: np.ndarray, label: str = "monomials") -> TensorField:
    """Batched scalar field, one member per exponent row."""
    ambient = model.ambient
    rows = [tuple(int(e) for e in row) for row in np.asarray(exponents)]

    def fn(x):
        y = ambient(x)
        return jnp.stack([_monomial(y, row) for row in rows])

    return TensorField(fn, 0, label=label)


def ambient_differentials(model: ManifoldModel) -> TensorField:
    """The 1-forms dy_k, batched over k; always exact since the embedding is analytic."""
    jacobian = jax.jacfwd(model.ambient)
    return TensorField(jacobian, 1, label="dy")


class PolynomialFieldFactory:
    """Seeded random scalar, 1-form and symmetric 2-tensor families."""

    def __init__(self, model: ManifoldModel, seed: int | None = None):
        self.model = model
        self.seed = settings.DEFAULT_SEED if seed is None else seed

    def _rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def scalars(self, count: int, degree: int) -> TensorField:
        exponents = monomial_exponents(self.model.ambient_dimension, degree)
        coefficients = self._rng(0).standard_normal((count, len(exponents))) / np.sqrt(len(exponents))
        return monomial_field(self.model, exponents).combine(coefficients, label=f"a[{count}]")

    def one_forms(self, count: int, degree: int) -> TensorField:
        """w_b = sum_k P_bk(y) dy_k."""
        exponents = monomial_exponents(self.model.ambient_dimension, degree)
        dim = self.model.ambient_dimension
        coefficients = jnp.asarray(
            self._rng(1).standard_normal((count, dim, len(exponents))) / np.sqrt(dim * len(exponents))
        )
        monomials = monomial_field(self.model, exponents).fn
        differentials = ambient_differentials(self.model).fn

        def fn(x):
            return jnp.einsum("bkc,c,kj->bj", coefficients, monomials(x), differentials(x))

        return TensorField(fn, 1, label=f"w[{count}]")

    def two_tensors(self, count: int, degree: int) -> TensorField:
        """h_b = sum_jk Q_bjk(y) dy_j (.) dy_k + P_b(y) g."""
        exponents = monomial_exponents(self.model.ambient_dimension, degree)
        dim = self.model.ambient_dimension
        rng = self._rng(2)
        products = jnp.asarray(rng.standard_normal((count, dim, dim, len(exponents))) / (dim * np.sqrt(len(exponents))))
        conformal = jnp.asarray(rng.standard_normal((count, len(exponents))) / np.sqrt(len(exponents)))
        monomials = monomial_field(self.model, exponents).fn
        differentials = ambient_differentials(self.model).fn
        metric = self.model.metric

        def fn(x):
            m, dy = monomials(x), differentials(x)
            h = jnp.einsum("bjkc,c,ja,kd->bad", products, m, dy, dy)
            return 0.5 * (h + jnp.swapaxes(h, -1, -2)) + jnp.einsum("bc,c->b", conformal, m)[:, None, None] * metric(x)

        return TensorField(fn, 2, Symmetry.SYMMETRIC_PAIR, f"h[{count}]")
