"""
Tensor fields on a chart and the nodal contractions used by quadrature.

A field function maps a chart point x of shape (n,) to an array whose last
`valence` axes are covariant tensor slots. Any leading axes form a batch, so a
single TensorField can carry a whole family (generated test fields, Galerkin
generators) and every operator acts on all members at once.
"""
from dataclasses import dataclass
from functools import cached_property

import jax
import jax.numpy as jnp
import numpy as np

from grslab.config import settings
from grslab.core.differentiation import FieldFn
from grslab.core.exceptions import ValenceError
from grslab.schemas.common import Symmetry

MAX_VALENCE = 5


@dataclass(frozen=True, eq=False)
class TensorField:
    """Covariant tensor field given by a traceable component function."""

    fn: FieldFn
    valence: int
    symmetry: Symmetry = Symmetry.NONE
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.valence <= MAX_VALENCE:
            raise ValenceError("tensor_field", self.valence, list(range(MAX_VALENCE + 1)))

    def __call__(self, x: jax.Array) -> jax.Array:
        return self.fn(x)

    @cached_property
    def _compiled(self):
        return jax.jit(jax.vmap(self.fn))

    def evaluate(self, nodes: np.ndarray, chunk_size: int | None = None) -> np.ndarray:
        """Values at every node, shape (N, *batch, n, ..., n).

        Nodes are processed in fixed-size chunks (the last one padded) so one
        compiled kernel serves every chunk and the node order is preserved.
        """
        nodes = np.asarray(nodes, dtype=float)
        size = min(chunk_size or settings.EVAL_CHUNK_SIZE, nodes.shape[0])
        blocks = []
        for start in range(0, nodes.shape[0], size):
            chunk = nodes[start:start + size]
            pad = size - chunk.shape[0]
            if pad:
                chunk = np.concatenate([chunk, np.repeat(chunk[-1:], pad, axis=0)])
            values = np.asarray(self._compiled(jnp.asarray(chunk)))
            blocks.append(values[: size - pad])
        return np.concatenate(blocks, axis=0)

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------

    def _check_same_valence(self, other: "TensorField", op: str):
        if other.valence != self.valence:
            raise ValenceError(op, other.valence, [self.valence])

    def __add__(self, other: "TensorField") -> "TensorField":
        self._check_same_valence(other, "add")
        f, g = self.fn, other.fn
        return TensorField(lambda x: f(x) + g(x), self.valence, _common(self, other),
                           f"({self.label}+{other.label})")

    def __sub__(self, other: "TensorField") -> "TensorField":
        self._check_same_valence(other, "subtract")
        f, g = self.fn, other.fn
        return TensorField(lambda x: f(x) - g(x), self.valence, _common(self, other),
                           f"({self.label}-{other.label})")

    def __neg__(self) -> "TensorField":
        return self.scaled(-1.0)

    def scaled(self, factor: float) -> "TensorField":
        f = self.fn
        return TensorField(lambda x: factor * f(x), self.valence, self.symmetry, f"{factor:g}*{self.label}")

    def times(self, scalar: "TensorField") -> "TensorField":
        """Pointwise product a * T with a scalar field (batches broadcast)."""
        if scalar.valence != 0:
            raise ValenceError("times", scalar.valence, [0])
        f, a, p = self.fn, scalar.fn, self.valence
        return TensorField(lambda x: a(x)[(...,) + (None,) * p] * f(x), p, self.symmetry,
                           f"{scalar.label}*{self.label}")

    def combine(self, coefficients: np.ndarray, label: str | None = None) -> "TensorField":
        """Contract the leading batch axis with a coefficient vector or matrix."""
        c = jnp.asarray(np.asarray(coefficients, dtype=float))
        f = self.fn
        return TensorField(lambda x: jnp.tensordot(c, f(x), axes=1), self.valence, self.symmetry,
                           label or f"combination({self.label})")

    def with_label(self, label: str) -> "TensorField":
        return TensorField(self.fn, self.valence, self.symmetry, label)


def _common(a: TensorField, b: TensorField) -> Symmetry:
    return a.symmetry if a.symmetry == b.symmetry else Symmetry.NONE


def concatenate_fields(fields: list[TensorField], label: str = "concat") -> TensorField:
    """Join already batched fields along their leading axis."""
    valence = fields[0].valence
    for field in fields:
        if field.valence != valence:
            raise ValenceError("concatenate_fields", field.valence, [valence])
    fns = [field.fn for field in fields]
    return TensorField(lambda x: jnp.concatenate([f(x) for f in fns], axis=0), valence,
                       _symmetry_of(fields), label)


def _symmetry_of(fields: list[TensorField]) -> Symmetry:
    first = fields[0].symmetry
    return first if all(f.symmetry == first for f in fields) else Symmetry.NONE


# ----------------------------------------------------------------------
# nodal contractions (numpy, node axis first)
# ----------------------------------------------------------------------


def raise_indices(values: np.ndarray, inverse_metric: np.ndarray, valence: int) -> np.ndarray:
    """Raise every tensor slot of nodal values with g^{-1} at the same node."""
    out = values
    for slot in range(valence):
        axis = out.ndim - valence + slot
        moved = np.moveaxis(out, axis, -1)
        moved = np.einsum("N...i,Nij->N...j", moved, inverse_metric)
        out = np.moveaxis(moved, -1, axis)
    return out


def pointwise_inner(left: np.ndarray, right: np.ndarray, inverse_metric: np.ndarray, valence: int) -> np.ndarray:
    """<S, T>_g at every node; batch axes broadcast."""
    if valence == 0:
        return left * right
    raised = raise_indices(right, inverse_metric, valence)
    return np.sum(left * raised, axis=tuple(range(-valence, 0)))


def pointwise_norm(values: np.ndarray, inverse_metric: np.ndarray, valence: int) -> np.ndarray:
    return np.sqrt(np.maximum(pointwise_inner(values, values, inverse_metric, valence), 0.0))


def weighted_gram(left: np.ndarray, right: np.ndarray, inverse_metric: np.ndarray,
                  weights: np.ndarray, valence: int) -> np.ndarray:
    """Matrix of sum_k w_k <S_i, T_j>_g(x_k) for batched nodal values (N, m, ...)."""
    count = left.shape[0]
    raised = raise_indices(right, inverse_metric, valence).reshape(count, right.shape[1], -1)
    weighted = (left * weights.reshape((count,) + (1,) * (left.ndim - 1))).reshape(count, left.shape[1], -1)
    return np.tensordot(weighted, raised, axes=([0, 2], [0, 2]))
