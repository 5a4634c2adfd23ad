"""Galerkin truncations: orthonormal bases, assembled matrices and spectra."""
from dataclasses import dataclass

import numpy as np

from grslab.models.fields import TensorField
from grslab.schemas.common import JointClass, Operator, Provenance


@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    """
    dm-orthonormal basis built from raw generators.

    Row k of `coefficients` expresses member k in the raw generators, so
    `field == raw.combine(coefficients)`. Members [0, image_count) are spanned
    by Hessian and Lie-derivative generators, i.e. they lie in the image of the
    adjoint divergence.
    """

    field: TensorField
    raw: TensorField
    coefficients: np.ndarray
    values: np.ndarray
    gram: np.ndarray
    provenance: tuple[Provenance, ...]
    labels: tuple[str, ...]
    kept: tuple[int, ...]
    image_count: int
    degree: int
    condition_number: float
    orthonormality_defect: float

    @property
    def size(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def valence(self) -> int:
        return self.field.valence

    def raw_weights(self, vector: np.ndarray) -> np.ndarray:
        """Magnitude of each raw generator in the member combination sum_k v_k b_k."""
        return np.abs(np.asarray(vector) @ self.coefficients)

    def dominant_tags(self, vector: np.ndarray, share: float = 0.5) -> list[str]:
        """Provenance of the raw generators carrying at least `share` of the largest weight."""
        weights = self.raw_weights(vector)
        top = float(np.max(weights)) if weights.size else 0.0
        if top == 0.0:
            return []
        tags: list[str] = []
        for index in np.flatnonzero(weights >= share * top):
            tag = self.provenance[index].value
            if tag not in tags:
                tags.append(tag)
        return tags

    def direction(self, vectors: np.ndarray, scale: float = 1.0, label: str = "direction") -> TensorField:
        """Field of sum_k v_k b_k for one coefficient vector or a stack of them (rows)."""
        return self.raw.combine(scale * np.asarray(vectors) @ self.coefficients, label=label)

    def describe(self) -> dict:
        return {
            "degree": self.degree,
            "size": self.size,
            "generators": len(self.provenance),
            "image_count": self.image_count,
            "condition_number": self.condition_number,
            "orthonormality_defect": self.orthonormality_defect,
        }


@dataclass(frozen=True)
class AssembledOperator:
    """A_ij = <op(b_j), b_i>_dm, symmetrized after the defect is recorded."""

    operator: Operator
    matrix: np.ndarray
    symmetry_defect: float
    degree: int


@dataclass(frozen=True)
class SpectralResult:
    """Generalized eigenpairs, eigenvalues descending; vectors are columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    orthonormality_defect: float

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])


@dataclass(frozen=True)
class JointEigenbasis:
    """Simultaneous eigenvectors of two commuting-up-to-truncation operators."""

    lichnerowicz: np.ndarray
    gauged: np.ndarray
    vectors: np.ndarray
    classes: tuple[JointClass, ...]
    deflated: tuple[bool, ...]
    clusters: tuple[tuple[int, ...], ...]
    commutation_residual: float
    joint_residual: float
