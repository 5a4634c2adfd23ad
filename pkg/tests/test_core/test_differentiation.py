import jax.numpy as jnp
import numpy as np
import pytest

from grslab.core.differentiation import AutodiffDifferentiator, CentralDifference
from grslab.core.exceptions import EXIT_CONFIG, FiniteDifferenceStepError


def field(x):
    """A 2x2 tensor field on a 2d chart."""
    return jnp.array([[jnp.sin(x[0]) * x[1], x[0] ** 3], [jnp.cos(x[1]), jnp.exp(x[0] * x[1])]])


def exact_jacobian(x):
    a, b = x
    return np.array([
        [[np.cos(a) * b, np.sin(a)], [3 * a ** 2, 0.0]],
        [[0.0, -np.sin(b)], [b * np.exp(a * b), a * np.exp(a * b)]],
    ])


POINT = np.array([0.7, -0.3])


def test_autodiff_is_exact_and_appends_derivative_axis():
    value, jacobian = AutodiffDifferentiator().value_and_jacobian(field)(jnp.asarray(POINT))
    assert jacobian.shape == (2, 2, 2)
    np.testing.assert_allclose(value, field(jnp.asarray(POINT)), rtol=0, atol=0)
    np.testing.assert_allclose(jacobian, exact_jacobian(POINT), rtol=0, atol=1e-14)


def test_central_difference_is_fourth_order():
    errors = []
    for count in (50, 100):
        diff = CentralDifference.for_axes(np.array([np.pi, np.pi]), np.array([count, count]))
        jacobian = diff.jacobian(field)(jnp.asarray(POINT))
        errors.append(float(np.max(np.abs(jacobian - exact_jacobian(POINT)))))
    order = np.log2(errors[0] / errors[1])
    assert errors[1] < 1e-6
    assert order > 3.5


def test_nested_central_difference_matches_second_derivative():
    diff = CentralDifference.for_axes(np.array([1.0]), np.array([200]))
    second = diff.jacobian(diff.jacobian(lambda x: jnp.sin(3 * x[0])[None]))
    value = second(jnp.array([0.4]))
    np.testing.assert_allclose(value[0, 0, 0], -9 * np.sin(1.2), atol=1e-6)


def test_step_underflow_is_a_config_error():
    with pytest.raises(FiniteDifferenceStepError) as excinfo:
        CentralDifference.for_axes(np.array([1.0, 1.0]), np.array([10, 10**7]))
    assert excinfo.value.exit_code == EXIT_CONFIG
    assert excinfo.value.details["axis"] == 1


def test_describe_reports_steps():
    diff = CentralDifference.for_axes(np.array([2.0]), np.array([8]))
    assert diff.describe() == {"name": "central_difference_4", "steps": [0.25]}
    assert AutodiffDifferentiator().describe() == {"name": "autodiff"}
