"""
Model Service - closed model geometries and their dm-quadrature grids.

Round spheres use the hyperspherical chart (chi_1, ..., chi_{n-1}, phi) with
metric r^2 (dchi_1^2 + sin^2 chi_1 dchi_2^2 + ...). Products concatenate the
charts of their factors. Generic models carry an arbitrary chart metric and are
differentiated by finite differences.
"""

import jax
import jax.numpy as jnp
import jax.scipy.linalg as jsl
import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre

from grslab.config import settings
from grslab.core.differentiation import AutodiffDifferentiator, CentralDifference, FieldFn
from grslab.core.exceptions import (
    AliasingError,
    ConfigValueError,
    EinsteinConstantMismatchError,
    MetricNotPositiveDefiniteError,
    UnsupportedDimensionError,
)
from grslab.core.logging_config import get_logger
from grslab.models.chart import Axis, CoordinateChart
from grslab.models.fields import TensorField
from grslab.models.manifold import ManifoldModel, SolitonStatus
from grslab.models.quadrature import QuadratureGrid
from grslab.schemas.common import AxisKind, CurvatureSource, ModelKind, SolitonKind
from grslab.schemas.config import GridResolution, ModelSpec, ToleranceTable
from grslab.services.geometry_core import constant_curvature_riemann
from grslab.services.weighted_calculus import WeightedCalculusService

logger = get_logger(__name__)

SUPPORTED_SPHERE_DIMENSIONS = [2, 3, 4]

_DEFAULT_RESOLUTIONS = {
    (ModelKind.SPHERE, 2): GridResolution(polar=32, periodic=64),
    (ModelKind.SPHERE, 3): GridResolution(polar=12, periodic=24),
    (ModelKind.SPHERE, 4): GridResolution(polar=10, periodic=20),
}


# ----------------------------------------------------------------------
# chart functions
# ----------------------------------------------------------------------


def sphere_ambient(x):
    """Unit-sphere embedding of hyperspherical coordinates, y_0 = cos chi_1."""
    sines = jnp.concatenate([jnp.ones(1), jnp.cumprod(jnp.sin(x))])
    cosines = jnp.concatenate([jnp.cos(x), jnp.ones(1)])
    return sines * cosines


def sphere_metric(radius: float) -> FieldFn:
    def fn(x):
        scale = jnp.concatenate([jnp.ones(1), jnp.cumprod(jnp.sin(x[:-1]) ** 2)])
        return radius ** 2 * jnp.diag(scale)

    return fn


def sphere_chart(n: int, collar: float) -> CoordinateChart:
    polar = tuple(Axis.polar(density_exponent=n - 1 - k, collar=collar) for k in range(n - 1))
    return CoordinateChart(polar + (Axis.periodic(),))


def sphere_volume(n: int, radius: float) -> float:
    return float(np.exp(np.log(2.0) + (n + 1) / 2 * np.log(np.pi) + n * np.log(radius) - gammaln((n + 1) / 2)))


def _constant(value: float) -> FieldFn:
    return lambda x: value + 0.0 * x[0]


# ----------------------------------------------------------------------
# quadrature rules
# ----------------------------------------------------------------------


def axis_rule(axis: Axis, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of one axis, ascending.

    Polar weights integrate against sin^e (Gauss-Jacobi in cos of the angle);
    periodic and interval weights against the plain coordinate measure.
    """
    if axis.kind == AxisKind.PERIODIC:
        nodes = axis.lower + axis.length * np.arange(count) / count
        return nodes, np.full(count, axis.length / count)
    if axis.kind == AxisKind.INTERVAL:
        u, w = roots_legendre(count)
        return axis.lower + (u + 1.0) * axis.length / 2, w * axis.length / 2
    alpha = (axis.density_exponent - 1) / 2
    u, w = roots_legendre(count) if axis.density_exponent == 1 else roots_jacobi(count, alpha, alpha)
    return np.arccos(u)[::-1], w[::-1]


def _axis_counts(chart: CoordinateChart, resolution: GridResolution) -> list[int]:
    return [resolution.periodic if periodic else resolution.polar for periodic in chart.periodic]


def _tensor_rule(chart: CoordinateChart, counts: list[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tensor-product nodes, rule weights and the polar densities prod sin^e at the nodes."""
    rules = [axis_rule(axis, count) for axis, count in zip(chart.axes, counts)]
    nodes = np.stack([m.ravel() for m in np.meshgrid(*[r[0] for r in rules], indexing="ij")], axis=-1)
    weights = np.prod([m.ravel() for m in np.meshgrid(*[r[1] for r in rules], indexing="ij")], axis=0)
    density = np.ones(nodes.shape[0])
    for index, axis in enumerate(chart.axes):
        if axis.kind == AxisKind.POLAR:
            density *= np.sin(nodes[:, index]) ** axis.density_exponent
    return nodes, weights, density


def _volume_weights(metric: np.ndarray, weights: np.ndarray, density: np.ndarray) -> np.ndarray:
    return weights * np.sqrt(np.abs(np.linalg.det(metric))) / density


def _measure_weights(model: ManifoldModel, nodes: np.ndarray, volume: np.ndarray) -> np.ndarray:
    potential = TensorField(model.potential, 0).evaluate(nodes)
    return volume * (4 * np.pi * model.tau) ** (-model.dimension / 2) * np.exp(-potential)


def _check_positive_definite(metric: np.ndarray):
    eigenvalues = np.linalg.eigvalsh(0.5 * (metric + np.swapaxes(metric, -1, -2)))
    smallest = eigenvalues[:, 0]
    failed = int(np.count_nonzero(~(smallest > 0)) + np.count_nonzero(~np.isfinite(metric).all(axis=(1, 2))))
    if failed:
        raise MetricNotPositiveDefiniteError(failed_nodes=failed, min_eigenvalue=float(np.nanmin(smallest)))


class ModelService:
    """Builders for the model geometries and their quadrature grids."""

    def __init__(self, tolerances: ToleranceTable | None = None):
        self.tolerances = tolerances or ToleranceTable.from_settings()

    # ------------------------------------------------------------------
    # builders
    # ------------------------------------------------------------------

    def build_round_sphere(self, n: int, radius: float = 1.0) -> ManifoldModel:
        """S^n(r): Ric = (n-1)/r^2 g, tau = r^2/(2(n-1)), constant f normalizing dm."""
        if n not in SUPPORTED_SPHERE_DIMENSIONS:
            raise UnsupportedDimensionError("sphere", n, SUPPORTED_SPHERE_DIMENSIONS)
        if not radius > 0:
            raise ConfigValueError("r", "radius must be positive")
        tau = radius ** 2 / (2 * (n - 1))
        f = np.log(sphere_volume(n, radius)) - n / 2 * np.log(4 * np.pi * tau)
        metric = sphere_metric(radius)
        kappa = 1.0 / radius ** 2
        model = ManifoldModel(
            name=f"sphere:n={n},r={radius:g}",
            kind=ModelKind.SPHERE,
            chart=sphere_chart(n, settings.DEFAULT_COLLAR),
            metric=metric,
            potential=_constant(float(f)),
            tau=tau,
            curvature_source=CurvatureSource.CLOSED_FORM,
            differentiator=AutodiffDifferentiator(),
            soliton=SolitonStatus(SolitonKind.EXACT, 0.0),
            ambient=sphere_ambient,
            factors=((range(0, n), range(0, n + 1)),),
            riemann=lambda x: constant_curvature_riemann(metric(x), kappa),
            einstein_constant=(n - 1) * kappa,
            parameters={"n": n, "r": radius},
        )
        return self._with_measured_status(model, self.default_resolution(model))

    def build_product(self, first: ManifoldModel, second: ManifoldModel) -> ManifoldModel:
        """Riemannian product of two Einstein factors sharing the Einstein constant."""
        kappa_a, kappa_b = first.einstein_constant, second.einstein_constant
        if kappa_a is None or kappa_b is None or abs(kappa_a - kappa_b) > 1e-10:
            raise EinsteinConstantMismatchError(float(kappa_a or np.nan), float(kappa_b or np.nan))
        na, n = first.dimension, first.dimension + second.dimension
        ma = first.ambient_dimension
        metric_a, metric_b = first.metric, second.metric
        riemann_a, riemann_b = first.riemann, second.riemann

        def metric(x):
            return jsl.block_diag(metric_a(x[:na]), metric_b(x[na:]))

        def riemann(x):
            out = jnp.zeros((n, n, n, n))
            out = out.at[:na, :na, :na, :na].set(riemann_a(x[:na]))
            return out.at[na:, na:, na:, na:].set(riemann_b(x[na:]))

        model = ManifoldModel(
            name=f"product({first.name} x {second.name})",
            kind=ModelKind.PRODUCT,
            chart=first.chart.concat(second.chart),
            metric=metric,
            potential=lambda x: first.potential(x[:na]) + second.potential(x[na:]),
            tau=first.tau,
            curvature_source=CurvatureSource.CLOSED_FORM,
            differentiator=AutodiffDifferentiator(),
            soliton=SolitonStatus(SolitonKind.EXACT, 0.0),
            ambient=lambda x: jnp.concatenate([first.ambient(x[:na]), second.ambient(x[na:])]),
            factors=((range(0, na), range(0, ma)),
                     (range(na, n), range(ma, ma + second.ambient_dimension))),
            riemann=riemann if riemann_a is not None and riemann_b is not None else None,
            einstein_constant=kappa_a,
            parameters={"factors": [first.name, second.name]},
        )
        return self._with_measured_status(model, self.default_resolution(model))

    def build_generic(self, name: str, metric: FieldFn, potential: FieldFn, tau: float,
                      chart: CoordinateChart, ambient: FieldFn, parameters: dict | None = None,
                      resolution: GridResolution | None = None) -> ManifoldModel:
        """Chart metric on the finite-difference backend; f is shifted so that dm has unit mass."""
        if not tau > 0:
            raise ConfigValueError("tau", "must be positive")
        resolution = resolution or GridResolution(polar=settings.FD_BUILD_RESOLUTION,
                                                  periodic=2 * settings.FD_BUILD_RESOLUTION)
        chart = chart.with_collar(settings.FD_COLLAR)
        counts = _axis_counts(chart, resolution)
        nodes, weights, density = _tensor_rule(chart, counts)
        metric_nodes = TensorField(metric, 2).evaluate(nodes)
        _check_positive_definite(metric_nodes)

        model = ManifoldModel(
            name=name,
            kind=ModelKind.GENERIC,
            chart=chart,
            metric=metric,
            potential=potential,
            tau=tau,
            curvature_source=CurvatureSource.FINITE_DIFFERENCE,
            differentiator=CentralDifference.for_axes(chart.lengths, counts),
            soliton=SolitonStatus(SolitonKind.APPROXIMATE, float("nan")),
            ambient=ambient,
            factors=((range(0, chart.dimension), range(0, int(np.asarray(ambient(jnp.asarray(nodes[0]))).size))),),
            parameters=dict(parameters or {}),
        )
        mass = float(np.sum(_measure_weights(model, nodes, _volume_weights(metric_nodes, weights, density))))
        shift = float(np.log(mass))
        model = model.with_updates(potential=lambda x: potential(x) + shift)
        return self._with_measured_status(model, resolution)

    def build_ellipsoid(self, a: float = 1.0, b: float = 1.0, c: float = 1.2, amplitude: float = 0.3,
                        tau: float = 0.5, resolution: GridResolution | None = None) -> ManifoldModel:
        """Induced metric of (a sin t cos p, b sin t sin p, c cos t) with f = amplitude * cos t."""
        def embedding(x):
            theta, phi = x[0], x[1]
            return jnp.stack([a * jnp.sin(theta) * jnp.cos(phi), b * jnp.sin(theta) * jnp.sin(phi),
                              c * jnp.cos(theta)])

        jacobian = jax.jacfwd(embedding)

        def metric(x):
            j = jacobian(x)
            return j.T @ j

        return self.build_generic(
            name=f"generic:ellipsoid,a={a:g},b={b:g},c={c:g},f={amplitude:g},tau={tau:g}",
            metric=metric,
            potential=lambda x: amplitude * jnp.cos(x[0]),
            tau=tau,
            chart=sphere_chart(2, settings.FD_COLLAR),
            ambient=sphere_ambient,
            parameters={"a": a, "b": b, "c": c, "f": amplitude, "tau": tau},
            resolution=resolution,
        )

    def build_round_generic(self, n: int = 2, radius: float = 1.0,
                            resolution: GridResolution | None = None) -> ManifoldModel:
        """The round sphere metric fed through the finite-difference backend."""
        if n != 2:
            raise UnsupportedDimensionError("generic:round", n, [2])
        return self.build_generic(
            name=f"generic:round,n={n},r={radius:g}",
            metric=sphere_metric(radius),
            potential=_constant(0.0),
            tau=radius ** 2 / (2 * (n - 1)),
            chart=sphere_chart(n, settings.FD_COLLAR),
            ambient=sphere_ambient,
            parameters={"n": n, "r": radius},
            resolution=resolution,
        )

    def build_flat_torus(self, n: int = 2, tau: float = 1.0) -> ManifoldModel:
        """Flat (R/2piZ)^n; never a soliton, used to pin curvature conventions at zero."""
        volume = (2 * np.pi) ** n
        f = np.log(volume) - n / 2 * np.log(4 * np.pi * tau)
        return ManifoldModel(
            name=f"flat:n={n}",
            kind=ModelKind.FLAT,
            chart=CoordinateChart(tuple(Axis.periodic() for _ in range(n))),
            metric=lambda x: jnp.eye(n) + 0.0 * x[0],
            potential=_constant(float(f)),
            tau=tau,
            curvature_source=CurvatureSource.CLOSED_FORM,
            differentiator=AutodiffDifferentiator(),
            soliton=SolitonStatus(SolitonKind.APPROXIMATE, float(np.sqrt(n) / (2 * tau))),
            ambient=lambda x: jnp.concatenate([jnp.cos(x), jnp.sin(x)]),
            factors=((range(0, n), range(0, 2 * n)),),
            riemann=lambda x: jnp.zeros((n, n, n, n)) + 0.0 * x[0],
            parameters={"n": n, "tau": tau},
        )

    def rescale(self, model: ManifoldModel, factor: float) -> ManifoldModel:
        """(c g, f, c tau); dm and the W-entropy are unchanged."""
        if not factor > 0:
            raise ConfigValueError("scale", "must be positive")
        metric, riemann = model.metric, model.riemann
        return model.with_updates(
            name=f"{model.name}*{factor:g}",
            metric=lambda x: factor * metric(x),
            tau=factor * model.tau,
            riemann=(lambda x: factor * riemann(x)) if riemann is not None else None,
            einstein_constant=model.einstein_constant / factor if model.einstein_constant is not None else None,
            parameters=model.parameters | {"scale": factor},
        )

    def build_from_spec(self, spec: ModelSpec, resolution: GridResolution | None = None) -> ManifoldModel:
        """`resolution` only affects finite-difference models (their stencil steps)."""
        p = spec.params
        if spec.kind == ModelKind.SPHERE:
            model = self.build_round_sphere(spec.integer("n"), p["r"])
        elif spec.kind == ModelKind.PRODUCT:
            model = self.build_product(self.build_round_sphere(spec.integer("n1"), p["r1"]),
                                       self.build_round_sphere(spec.integer("n2"), p["r2"]))
        elif spec.family == "ellipsoid":
            model = self.build_ellipsoid(p["a"], p["b"], p["c"], p["f"], p["tau"], resolution=resolution)
        else:
            model = self.build_round_generic(spec.integer("n"), p["r"], resolution=resolution)
        logger.info("model_built", model=model.name, dimension=model.dimension, tau=model.tau,
                    soliton=model.soliton.kind.value, residual=model.soliton.residual)
        return model

    # ------------------------------------------------------------------
    # grids
    # ------------------------------------------------------------------

    @staticmethod
    def default_resolution(model: ManifoldModel) -> GridResolution:
        if model.kind == ModelKind.SPHERE:
            return _DEFAULT_RESOLUTIONS[(ModelKind.SPHERE, model.dimension)]
        if model.kind == ModelKind.PRODUCT:
            return GridResolution(polar=8, periodic=16)
        if model.kind == ModelKind.FLAT:
            return GridResolution(polar=16, periodic=32)
        return GridResolution(polar=settings.FD_BUILD_RESOLUTION, periodic=2 * settings.FD_BUILD_RESOLUTION)

    @staticmethod
    def default_degree(model: ManifoldModel) -> int:
        return 2 if model.kind == ModelKind.SPHERE and model.dimension == 2 else 1

    def quadrature_grid(self, model: ManifoldModel, resolution: GridResolution | None = None,
                        degree: int | None = None) -> QuadratureGrid:
        """Tensor-product grid whose weights integrate against the normalized measure dm."""
        resolution = resolution or self.default_resolution(model)
        counts = _axis_counts(model.chart, resolution)
        for count in counts:
            if degree is not None and count < 2 * degree + 2:
                raise AliasingError(nodes=count, degree=degree)
        for count in counts:
            if count < settings.MIN_AXIS_NODES:
                raise ConfigValueError("grid.res", f"{count} nodes per axis; at least {settings.MIN_AXIS_NODES} required")

        nodes, weights, density = _tensor_rule(model.chart, counts)
        volume = _volume_weights(TensorField(model.metric, 2).evaluate(nodes), weights, density)
        raw = _measure_weights(model, nodes, volume)
        mass = float(np.sum(raw))
        defect = abs(mass - 1.0)
        if defect > self.tolerances.mass and model.curvature_source == CurvatureSource.CLOSED_FORM:
            logger.warning("mass_defect_exceeds_tolerance", model=model.name, defect=defect,
                           tolerance=self.tolerances.mass)
        grid = QuadratureGrid(
            model_name=model.name,
            nodes=nodes,
            volume_weights=volume,
            weights=raw / mass,
            interior=model.chart.interior_mask(nodes),
            resolution=tuple(counts),
            mass_defect=defect,
        )
        logger.debug("grid_built", model=model.name, nodes=grid.size, mass_defect=defect)
        return grid

    def _with_measured_status(self, model: ManifoldModel, resolution: GridResolution) -> ManifoldModel:
        """Replace the declared soliton flag by the measured one."""
        grid = self.quadrature_grid(model, resolution)
        status = WeightedCalculusService(model, self.tolerances).soliton_status(grid)
        if model.is_exact_soliton and not status.exact:
            logger.warning("soliton_flag_downgraded", model=model.name, residual=status.residual)
        return model.with_updates(soliton=status)


def get_model_service(tolerances: ToleranceTable | None = None) -> ModelService:
    """Provider for ModelService; the default tolerance table unless one is given."""
    return ModelService(tolerances)
