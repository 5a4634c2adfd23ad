"""
Derivative strategies for chart fields.

A field function maps one chart point, shape (n,), to an array whose trailing
axes are tensor slots. Both strategies return the value together with the
jacobian, derivative axis appended last (the jax.jacfwd layout).
"""
from abc import ABC, abstractmethod
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from grslab.core.exceptions import FiniteDifferenceStepError

FieldFn = Callable[[jax.Array], jax.Array]
ValueAndJacobian = Callable[[jax.Array], tuple[jax.Array, jax.Array]]

# fourth-order central first derivative
_STENCIL_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_STENCIL_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_MIN_RELATIVE_STEP = 1e-6


class Differentiator(ABC):
    """Strategy turning a field function into its partial derivatives."""

    name: str = "abstract"

    @abstractmethod
    def value_and_jacobian(self, fn: FieldFn) -> ValueAndJacobian:
        """Return x -> (fn(x), d fn(x)) with the derivative axis last."""

    def jacobian(self, fn: FieldFn) -> FieldFn:
        pair = self.value_and_jacobian(fn)
        return lambda x: pair(x)[1]

    def describe(self) -> dict:
        return {"name": self.name}


class AutodiffDifferentiator(Differentiator):
    """Exact derivatives by forward-mode automatic differentiation."""

    name = "autodiff"

    def value_and_jacobian(self, fn: FieldFn) -> ValueAndJacobian:
        def with_value(x):
            y = fn(x)
            return y, y

        jac = jax.jacfwd(with_value, has_aux=True)

        def pair(x):
            jacobian, value = jac(x)
            return value, jacobian

        return pair


class CentralDifference(Differentiator):
    """Fourth-order central differences with a fixed step per chart axis."""

    name = "central_difference_4"

    def __init__(self, steps: np.ndarray):
        self.steps = np.asarray(steps, dtype=float)
        n = self.steps.shape[0]
        shifts = np.zeros((n, _STENCIL_OFFSETS.size, n))
        for axis in range(n):
            shifts[axis, :, axis] = _STENCIL_OFFSETS * self.steps[axis]
        self._shifts = shifts.reshape(n * _STENCIL_OFFSETS.size, n)

    @classmethod
    def for_axes(cls, lengths: np.ndarray, resolution: np.ndarray) -> "CentralDifference":
        """Step per axis = axis length / nodes on that axis."""
        lengths = np.asarray(lengths, dtype=float)
        steps = lengths / np.asarray(resolution, dtype=float)
        for axis, (step, length) in enumerate(zip(steps, lengths)):
            if step < _MIN_RELATIVE_STEP * length:
                raise FiniteDifferenceStepError(axis=axis, step=float(step), length=float(length))
        return cls(steps)

    def value_and_jacobian(self, fn: FieldFn) -> ValueAndJacobian:
        n = self.steps.shape[0]
        shifts = jnp.asarray(self._shifts)
        weights = jnp.asarray(_STENCIL_WEIGHTS)
        steps = jnp.asarray(self.steps)

        def pair(x):
            value = fn(x)
            samples = jax.vmap(fn)(x + shifts)
            samples = samples.reshape((n, _STENCIL_OFFSETS.size) + samples.shape[1:])
            derivative = jnp.tensordot(weights, samples, axes=([0], [1]))
            derivative = derivative / steps.reshape((n,) + (1,) * (derivative.ndim - 1))
            return value, jnp.moveaxis(derivative, 0, -1)

        return pair

    def describe(self) -> dict:
        return {"name": self.name, "steps": [float(s) for s in self.steps]}
