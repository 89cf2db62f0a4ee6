import numpy as np
import pytest

from dockopt.ode import IntegrationError, integrate


def test_exponential_decay_matches_exact():
    f = lambda t, y: -2.0 * y
    res = integrate(f, 0.0, 3.0, np.array([1.5]), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(res.y, 1.5 * np.exp(-6.0), rtol=1e-9)


def test_polynomial_exact_to_order():
    # quintic is above the order; quartic integrates essentially exactly
    f = lambda t, y: np.array([4.0 * t**3])
    res = integrate(f, 0.0, 2.0, np.array([0.0]), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(res.y, [16.0], rtol=1e-12)


def test_zero_span_returns_initial():
    res = integrate(lambda t, y: y, 1.0, 1.0, np.array([3.0]))
    assert res.y[0] == 3.0 and res.nfev == 0


def test_tightening_tolerance_reduces_error():
    f = lambda t, y: np.array([np.cos(t) * y[0]])
    exact = np.exp(np.sin(4.0))
    errors = []
    for rtol in (1e-6, 1e-8, 1e-10):
        res = integrate(f, 0.0, 4.0, np.array([1.0]), rtol=rtol, atol=rtol * 1e-2)
        errors.append(abs(res.y[0] - exact))
    assert errors[0] > errors[1] > errors[2]


def test_dense_output_samples():
    f = lambda t, y: np.array([np.cos(t)])
    res = integrate(f, 0.0, 2 * np.pi, np.array([0.0]), rtol=1e-10, atol=1e-12, dense=True)
    ts = np.linspace(0.0, 2 * np.pi, 101)
    samples = res.sample(ts)[:, 0]
    np.testing.assert_allclose(samples, np.sin(ts), atol=1e-4)


def test_stiff_singularity_raises_with_time_reached():
    f = lambda t, y: np.array([1.0 / (0.5 - t)])
    with pytest.raises(IntegrationError) as err:
        integrate(f, 0.0, 1.0, np.array([0.0]), rtol=1e-10, atol=1e-12)
    assert 0.0 < err.value.t_reached <= 0.5 + 1e-6


def test_backward_rejected():
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, 1.0, 0.0, np.array([1.0]))
