"""Quadrature grids realizing the normalized measure dm."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """
    Tensor-product nodes with normalized dm-weights.

    `volume_weights` integrate against the Riemannian volume dv; `weights`
    integrate against dm and sum to one. `mass_defect` is |sum dm - 1| before
    renormalization.
    """

    model_name: str
    nodes: np.ndarray
    volume_weights: np.ndarray
    weights: np.ndarray
    interior: np.ndarray
    resolution: tuple[int, ...]
    mass_defect: float

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def check_indices(self, limit: int) -> np.ndarray:
        """Evenly strided interior node indices, at most `limit` of them."""
        indices = np.flatnonzero(self.interior)
        if indices.size <= limit:
            return indices
        stride = int(np.ceil(indices.size / limit))
        return indices[::stride]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Sum of w_k * values[k] over the node axis, in node order."""
        return np.tensordot(self.weights, values, axes=1)

    def describe(self) -> dict:
        return {
            "model": self.model_name,
            "resolution": list(self.resolution),
            "nodes": self.size,
            "interior_nodes": int(self.interior.sum()),
            "mass_defect": self.mass_defect,
        }
