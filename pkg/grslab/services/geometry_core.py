"""
Geometry Service - chart-based Riemannian tensor calculus.

Conventions:
  Gamma[k, i, j] = Gamma^k_ij
  Rup[l, i, j, k] = R^l_ijk = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
  R[i, j, k, l] = g_km R^m_ijl = <R(d_i, d_j) d_l, d_k>
  Ric_ij = g^pq R_piqj, so a round sphere of curvature k has R_ijkl = k (g_ik g_jl - g_il g_jk).
Covariant derivatives put the new index first.
"""
from functools import lru_cache
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from grslab.core.exceptions import ChartError, SingularMetricError
from grslab.core.logging_config import get_logger
from grslab.models.fields import TensorField
from grslab.models.manifold import ManifoldModel
from grslab.schemas.common import CheckStatus, CurvatureSource, IdentityName, Symmetry
from grslab.schemas.reports import ConvergenceRow, ConvergenceStudy

logger = get_logger(__name__)

_SLOTS = "abcdefgh"
_SINGULAR_CONDITION = 1e14


def riemann_from_christoffel(gamma: jax.Array, d_gamma: jax.Array, metric: jax.Array) -> jax.Array:
    """Lower-index Riemann tensor from Gamma and its partials d_gamma[l, j, k, i] = d_i Gamma^l_jk."""
    rup = (
        jnp.einsum("ljki->lijk", d_gamma)
        - jnp.einsum("likj->lijk", d_gamma)
        + jnp.einsum("lim,mjk->lijk", gamma, gamma)
        - jnp.einsum("ljm,mik->lijk", gamma, gamma)
    )
    return jnp.einsum("km,mijl->ijkl", metric, rup)


def constant_curvature_riemann(metric: jax.Array, kappa: float) -> jax.Array:
    return kappa * (jnp.einsum("ik,jl->ijkl", metric, metric) - jnp.einsum("il,jk->ijkl", metric, metric))


class GeometryService:
    """Christoffel symbols, curvature and covariant derivatives of one model."""

    def __init__(self, model: ManifoldModel):
        self.model = model
        self.diff = model.differentiator
        self._metric_pair = self.diff.value_and_jacobian(model.metric)
        self._gamma_pair = self.diff.value_and_jacobian(self.christoffel_symbols)

    # ------------------------------------------------------------------
    # pointwise, traceable
    # ------------------------------------------------------------------

    def metric(self, x: jax.Array) -> jax.Array:
        return self.model.metric(x)

    def inverse_metric(self, x: jax.Array) -> jax.Array:
        return jnp.linalg.inv(self.model.metric(x))

    def christoffel_symbols(self, x: jax.Array) -> jax.Array:
        g, dg = self._metric_pair(x)
        d = jnp.einsum("jli->ijl", dg)
        lower = 0.5 * (d + jnp.einsum("jil->ijl", d) - jnp.einsum("lij->ijl", d))
        return jnp.einsum("kl,ijl->kij", jnp.linalg.inv(g), lower)

    def riemann_tensor(self, x: jax.Array) -> jax.Array:
        if self.model.riemann is not None:
            return self.model.riemann(x)
        gamma, d_gamma = self._gamma_pair(x)
        return riemann_from_christoffel(gamma, d_gamma, self.model.metric(x))

    def ricci_tensor(self, x: jax.Array) -> jax.Array:
        return jnp.einsum("pq,piqj->ij", self.inverse_metric(x), self.riemann_tensor(x))

    def scalar_curvature(self, x: jax.Array) -> jax.Array:
        return jnp.einsum("ij,ij->", self.inverse_metric(x), self.ricci_tensor(x))

    def ricci_from_christoffel(self, x: jax.Array) -> jax.Array:
        """Ric_jk = d_i G^i_jk - d_j G^i_ik + G^i_ip G^p_jk - G^i_jp G^p_ik, independent of Rm."""
        gamma, d_gamma = self._gamma_pair(x)
        return (
            jnp.einsum("ijki->jk", d_gamma)
            - jnp.einsum("iikj->jk", d_gamma)
            + jnp.einsum("iip,pjk->jk", gamma, gamma)
            - jnp.einsum("ijp,pik->jk", gamma, gamma)
        )

    # ------------------------------------------------------------------
    # fields
    # ------------------------------------------------------------------

    def metric_field(self) -> TensorField:
        return TensorField(self.metric, 2, Symmetry.SYMMETRIC_PAIR, "g")

    def inverse_metric_field(self) -> TensorField:
        return TensorField(self.inverse_metric, 2, Symmetry.SYMMETRIC_PAIR, "g_inv")

    def riemann_field(self) -> TensorField:
        return TensorField(self.riemann_tensor, 4, Symmetry.RIEMANN, "Rm")

    def ricci_field(self) -> TensorField:
        return TensorField(self.ricci_tensor, 2, Symmetry.SYMMETRIC_PAIR, "Ric")

    def scalar_curvature_field(self) -> TensorField:
        return TensorField(self.scalar_curvature, 0, label="R")

    # ------------------------------------------------------------------
    # covariant differentiation
    # ------------------------------------------------------------------

    def connection_terms(self, x: jax.Array, value: jax.Array, jacobian: jax.Array, valence: int) -> jax.Array:
        """Turn partials (derivative axis last) into nabla T with the new index first."""
        out = jnp.moveaxis(jacobian, -1, -(valence + 1))
        if valence == 0:
            return out
        gamma = self.christoffel_symbols(x)
        slots = _SLOTS[:valence]
        for s in range(valence):
            source = slots[:s] + "y" + slots[s + 1:]
            out = out - jnp.einsum(f"yz{slots[s]},...{source}->...z{slots}", gamma, value)
        return out

    def covariant_pair(self, field: TensorField) -> Callable[[jax.Array], tuple[jax.Array, jax.Array]]:
        """x -> (T(x), nabla T(x)) sharing one differentiation pass."""
        pair = self.diff.value_and_jacobian(field.fn)
        valence = field.valence

        def fn(x):
            value, jacobian = pair(x)
            return value, self.connection_terms(x, value, jacobian, valence)

        return fn

    def covariant_derivative(self, field: TensorField) -> TensorField:
        pair = self.covariant_pair(field)
        return TensorField(lambda x: pair(x)[1], field.valence + 1, label=f"nabla({field.label})")

    def hessian(self, scalar: TensorField) -> TensorField:
        second = self.covariant_derivative(self.covariant_derivative(scalar))
        return TensorField(second.fn, 2, Symmetry.SYMMETRIC_PAIR, f"hess({scalar.label})")

    def lie_derivative_of_metric(self, one_form: TensorField) -> TensorField:
        """(L_{#w} g)_ij = nabla_i w_j + nabla_j w_i."""
        nabla = self.covariant_derivative(one_form).fn
        return TensorField(lambda x: _symmetrize(nabla(x)), 2, Symmetry.SYMMETRIC_PAIR,
                           f"lie_g({one_form.label})")

    # ------------------------------------------------------------------
    # eager evaluation at a single point
    # ------------------------------------------------------------------

    def _validated_point(self, x) -> jax.Array:
        point = np.asarray(x, dtype=float)
        chart = self.model.chart
        if point.shape != (chart.dimension,) or not chart.contains(point):
            raise ChartError(f"point {point.tolist()} outside the chart box")
        metric = np.asarray(self.model.metric(jnp.asarray(point)))
        if not np.all(np.isfinite(metric)) or np.linalg.cond(metric) > _SINGULAR_CONDITION:
            raise SingularMetricError(point.tolist())
        return jnp.asarray(point)

    def christoffel(self, x) -> np.ndarray:
        return np.asarray(self.christoffel_symbols(self._validated_point(x)))

    def curvature(self, x) -> tuple[np.ndarray, np.ndarray, float]:
        point = self._validated_point(x)
        if (self.model.curvature_source == CurvatureSource.FINITE_DIFFERENCE
                and not self.model.chart.interior_mask(np.asarray(point)[None, :])[0]):
            raise ChartError("finite-difference curvature requested outside the interior collar")
        rm = np.asarray(self.riemann_tensor(point))
        ginv = np.asarray(self.inverse_metric(point))
        ric = np.einsum("pq,piqj->ij", ginv, rm)
        return rm, ric, float(np.einsum("ij,ij->", ginv, ric))

    # ------------------------------------------------------------------
    # convention checks
    # ------------------------------------------------------------------

    def ricci_identity_fields(self, one_form: TensorField, two_tensor: TensorField) -> tuple[TensorField, TensorField]:
        """Residual fields of both Ricci commutation identities."""
        nabla2_w = self.covariant_derivative(self.covariant_derivative(one_form)).fn
        nabla2_t = self.covariant_derivative(self.covariant_derivative(two_tensor)).fn
        w, t = one_form.fn, two_tensor.fn

        def residual_one_form(x):
            rm, ginv = self.riemann_tensor(x), self.inverse_metric(x)
            d2 = nabla2_w(x)
            curvature = jnp.einsum("pq,ijkq,...p->...ijk", ginv, rm, w(x))
            return d2 - jnp.swapaxes(d2, -3, -2) - curvature

        def residual_two_tensor(x):
            rm, ginv = self.riemann_tensor(x), self.inverse_metric(x)
            d2, value = nabla2_t(x), t(x)
            curvature = (jnp.einsum("pq,ijkq,...pl->...ijkl", ginv, rm, value)
                         + jnp.einsum("pq,ijlq,...kp->...ijkl", ginv, rm, value))
            return d2 - jnp.swapaxes(d2, -4, -3) - curvature

        return (TensorField(residual_one_form, 3, label="ricci_identity_1"),
                TensorField(residual_two_tensor, 4, label="ricci_identity_2"))

    def ricci_identity_residual(self, one_form: TensorField, two_tensor: TensorField,
                                nodes: np.ndarray) -> tuple[float, float]:
        """Componentwise sup-norms of both Ricci identities over the given nodes."""
        first, second = self.ricci_identity_fields(one_form, two_tensor)
        return (float(np.max(np.abs(first.evaluate(nodes)))),
                float(np.max(np.abs(second.evaluate(nodes)))))

    def curvature_symmetry_residuals(self, nodes: np.ndarray) -> dict[IdentityName, float]:
        """Componentwise sup-norms of the curvature convention checks at the nodes."""
        gamma_d, rm_d, lock_d = self._convention_defects()
        gamma = gamma_d.evaluate(nodes)
        parts = rm_d.evaluate(nodes)
        lock = lock_d.evaluate(nodes)
        nabla_g = self.covariant_derivative(self.metric_field()).evaluate(nodes)
        residuals = {
            IdentityName.CHRISTOFFEL_SYMMETRY: float(np.max(np.abs(gamma))),
            IdentityName.RIEMANN_ANTISYMMETRY: float(np.max(np.abs(parts[:, :2]))),
            IdentityName.RIEMANN_PAIR_SYMMETRY: float(np.max(np.abs(parts[:, 2]))),
            IdentityName.FIRST_BIANCHI: float(np.max(np.abs(parts[:, 3]))),
            IdentityName.METRIC_COMPATIBILITY: float(np.max(np.abs(nabla_g))),
            IdentityName.RICCI_TRACE_LOCK: float(np.max(np.abs(lock))),
        }
        logger.debug("curvature_conventions_checked", model=self.model.name, nodes=len(nodes),
                     worst=max(residuals.values()))
        return residuals

    def _convention_defects(self) -> tuple[TensorField, TensorField, TensorField]:
        def gamma_defect(x):
            gamma = self.christoffel_symbols(x)
            return gamma - jnp.swapaxes(gamma, 1, 2)

        def riemann_defects(x):
            r = self.riemann_tensor(x)
            return jnp.stack([
                r + jnp.einsum("jikl->ijkl", r),
                r + jnp.einsum("ijlk->ijkl", r),
                r - jnp.einsum("klij->ijkl", r),
                r + jnp.einsum("jkil->ijkl", r) + jnp.einsum("kijl->ijkl", r),
            ])

        def trace_lock(x):
            return self.ricci_tensor(x) - self.ricci_from_christoffel(x)

        return (TensorField(gamma_defect, 3), TensorField(riemann_defects, 4), TensorField(trace_lock, 2))


def _symmetrize(tensor: jax.Array) -> jax.Array:
    return tensor + jnp.swapaxes(tensor, -1, -2)


def observed_orders(resolutions: list[int], errors: list[float]) -> list[float | None]:
    """log(e_k / e_{k+1}) / log(N_{k+1} / N_k); None where an error is not positive."""
    orders: list[float | None] = [None]
    for k in range(1, len(errors)):
        if errors[k] > 0 and errors[k - 1] > 0:
            orders.append(float(np.log(errors[k - 1] / errors[k]) / np.log(resolutions[k] / resolutions[k - 1])))
        else:
            orders.append(None)
    return orders


def convergence_study(quantity: str, resolutions: list[int], errors: list[float],
                      required_order: float) -> ConvergenceStudy:
    orders = observed_orders(resolutions, errors)
    known = [o for o in orders if o is not None]
    min_order = min(known) if known else None
    status = CheckStatus.PASSED if min_order is not None and min_order >= required_order else CheckStatus.FAILED
    rows = [ConvergenceRow(resolution=str(r), error=e, order=o) for r, e, o in zip(resolutions, errors, orders)]
    return ConvergenceStudy(quantity=quantity, rows=rows, min_order=min_order,
                            required_order=required_order, status=status)


def curvature_convergence(factory: Callable[[int], ManifoldModel], reference: ManifoldModel,
                          resolutions: list[int], points: np.ndarray, required_order: float) -> ConvergenceStudy:
    """Finite-difference Riemann error against a reference model across resolutions."""
    exact = GeometryService(reference).riemann_field().evaluate(points)
    errors = []
    for resolution in resolutions:
        approx = GeometryService(factory(resolution)).riemann_field().evaluate(points)
        errors.append(float(np.max(np.abs(approx - exact))))
    study = convergence_study("riemann", resolutions, errors, required_order)
    logger.info("curvature_convergence_measured", errors=errors, min_order=study.min_order)
    return study


@lru_cache(maxsize=32)
def get_geometry_service(model: ManifoldModel) -> GeometryService:
    """Provider for GeometryService (one per model)."""
    return GeometryService(model)
