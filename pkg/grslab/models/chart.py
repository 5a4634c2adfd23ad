"""Coordinate charts: axis boxes, periodicity and interior collars."""
from dataclasses import dataclass

import numpy as np

from grslab.core.exceptions import ChartError
from grslab.schemas.common import AxisKind


@dataclass(frozen=True)
class Axis:
    """One chart axis.

    Polar axes carry the exponent e of their sin^e volume density; their
    quadrature nodes are placed in cos of the angle.
    """

    kind: AxisKind
    lower: float
    upper: float
    density_exponent: int = 0
    collar: float = 0.0

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @classmethod
    def polar(cls, density_exponent: int = 1, collar: float = 0.0) -> "Axis":
        return cls(AxisKind.POLAR, 0.0, float(np.pi), density_exponent, collar)

    @classmethod
    def periodic(cls) -> "Axis":
        return cls(AxisKind.PERIODIC, 0.0, float(2 * np.pi))


@dataclass(frozen=True)
class CoordinateChart:
    """Product box of axes; pointwise checks stay inside the collar."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        if len(self.axes) < 2:
            raise ChartError(f"dimension {len(self.axes)} < 2")
        for index, axis in enumerate(self.axes):
            if not axis.length > 0:
                raise ChartError(f"axis {index} has non-positive length")
            if not 0.0 <= axis.collar < 0.5:
                raise ChartError(f"axis {index} collar {axis.collar} outside [0, 0.5)")

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([axis.length for axis in self.axes])

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(axis.kind == AxisKind.PERIODIC for axis in self.axes)

    def contains(self, point: np.ndarray) -> bool:
        point = np.asarray(point, dtype=float)
        return bool(all(
            axis.kind == AxisKind.PERIODIC or axis.lower <= x <= axis.upper
            for axis, x in zip(self.axes, point)
        ))

    def interior_mask(self, nodes: np.ndarray) -> np.ndarray:
        """Nodes at least `collar * length` away from every non-periodic boundary."""
        nodes = np.asarray(nodes, dtype=float)
        mask = np.ones(nodes.shape[0], dtype=bool)
        for index, axis in enumerate(self.axes):
            if axis.kind == AxisKind.PERIODIC:
                continue
            margin = axis.collar * axis.length
            x = nodes[:, index]
            mask &= (x >= axis.lower + margin) & (x <= axis.upper - margin)
        return mask

    def with_collar(self, collar: float) -> "CoordinateChart":
        return CoordinateChart(tuple(
            Axis(a.kind, a.lower, a.upper, a.density_exponent,
                 a.collar if a.kind == AxisKind.PERIODIC else collar)
            for a in self.axes
        ))

    def concat(self, other: "CoordinateChart") -> "CoordinateChart":
        return CoordinateChart(self.axes + other.axes)

    def describe(self) -> dict:
        return {
            "dimension": self.dimension,
            "axes": [
                {
                    "kind": axis.kind.value,
                    "lower": axis.lower,
                    "upper": axis.upper,
                    "density_exponent": axis.density_exponent,
                    "collar": axis.collar,
                }
                for axis in self.axes
            ],
        }
