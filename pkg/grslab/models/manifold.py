"""The soliton tuple (M, g, f, tau) on a single chart."""
from dataclasses import dataclass, field, replace
from typing import Any

import jax.numpy as jnp

from grslab.core.differentiation import Differentiator, FieldFn
from grslab.models.chart import CoordinateChart
from grslab.schemas.common import CurvatureSource, ModelKind, SolitonKind


@dataclass(frozen=True)
class SolitonStatus:
    kind: SolitonKind
    residual: float

    @property
    def exact(self) -> bool:
        return self.kind == SolitonKind.EXACT


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """
    Metric, potential and tau of a closed model, plus how to differentiate it.

    `ambient` maps chart points to the coordinates of an embedding; polynomial
    Galerkin bases and generated test fields are built from it. `factors` lists
    the chart-axis ranges and ambient-coordinate ranges of each product factor
    (a single entry for non-products).
    """

    name: str
    kind: ModelKind
    chart: CoordinateChart
    metric: FieldFn
    potential: FieldFn
    tau: float
    curvature_source: CurvatureSource
    differentiator: Differentiator
    soliton: SolitonStatus
    ambient: FieldFn
    factors: tuple[tuple[range, range], ...]
    riemann: FieldFn | None = None
    einstein_constant: float | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.chart.dimension

    @property
    def is_exact_soliton(self) -> bool:
        return self.soliton.exact

    @property
    def ambient_dimension(self) -> int:
        return self.factors[-1][1].stop

    def factor_metric(self, index: int) -> FieldFn:
        """The metric of one product factor, zero on the other block."""
        axes = self.factors[index][0]
        mask = jnp.zeros(self.dimension).at[axes.start:axes.stop].set(1.0)
        metric = self.metric

        def fn(x):
            return metric(x) * mask[:, None] * mask[None, :]

        return fn

    def with_updates(self, **changes) -> "ManifoldModel":
        return replace(self, **changes)

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "dimension": self.dimension,
            "tau": self.tau,
            "curvature_source": self.curvature_source.value,
            "soliton": {"kind": self.soliton.kind.value, "residual": self.soliton.residual},
            "einstein_constant": self.einstein_constant,
            "differentiator": self.differentiator.describe(),
            "parameters": dict(self.parameters),
            "chart": self.chart.describe(),
        }
