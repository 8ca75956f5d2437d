"""Levenberg-Marquardt engine against closed forms and scipy."""
import numpy as np
import pytest
from scipy.optimize import least_squares

from cavchar.errors import EvaluationError, ValidationError
from cavchar.fitting import FitProblem, numerical_jacobian, solve_least_squares


def test_linear_problem_matches_normal_equations():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 1, 40)
    y = 2.0 - 3.0 * x + 0.01 * rng.standard_normal(40)
    res = solve_least_squares(FitProblem(lambda p: p[0] + p[1] * x - y, [0.0, 0.0],
                                         param_names=("a", "b")))
    A = np.column_stack([np.ones_like(x), x])
    ref, *_ = np.linalg.lstsq(A, y, rcond=None)
    np.testing.assert_allclose(res.parameters, ref, rtol=1e-9)
    dof = x.size - 2
    s2 = np.sum((A @ ref - y) ** 2) / dof
    np.testing.assert_allclose(res.covariance, s2 * np.linalg.inv(A.T @ A), rtol=1e-5)
    assert res.converged and res["a"] == pytest.approx(ref[0], rel=1e-9)


def test_rosenbrock_agrees_with_scipy():
    def r(p):
        return np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])
    res = solve_least_squares(FitProblem(r, [-1.2, 1.0], tolerance=1e-14, max_iterations=500))
    ref = least_squares(r, [-1.2, 1.0], xtol=1e-15, ftol=1e-15)
    np.testing.assert_allclose(res.parameters, ref.x, atol=1e-7)
    assert res.converged


def test_exponential_with_weights_agrees_with_scipy():
    rng = np.random.default_rng(3)
    t = np.linspace(0, 5, 60)
    sigma = 0.02 + 0.01 * t
    y = 3.0 * np.exp(-t / 1.3) + 0.2 + sigma * rng.standard_normal(t.size)

    def r(p):
        return p[0] * np.exp(-t / p[1]) + p[2] - y
    res = solve_least_squares(FitProblem(r, [1.0, 1.0, 0.0], weights=1 / sigma, tolerance=1e-14))
    ref = least_squares(lambda p: r(p) / sigma, [1.0, 1.0, 0.0], xtol=1e-15, ftol=1e-15)
    np.testing.assert_allclose(res.parameters, ref.x, rtol=1e-6)


def test_bounds_are_respected():
    x = np.linspace(0, 1, 20)
    y = -0.5 + x
    res = solve_least_squares(FitProblem(lambda p: p[0] + x - y, [1.0], lower=[0.0], upper=[2.0]))
    assert 0.0 <= res.parameters[0] < 1e-3


def test_history_is_non_increasing():
    t = np.linspace(0, 3, 30)
    y = np.exp(-t / 0.7)
    res = solve_least_squares(FitProblem(lambda p: np.exp(-t / p[0]) - y, [2.0]))
    assert np.all(np.diff(res.history) <= 0)


def test_max_iterations_reports_not_converged():
    def r(p):
        return np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])
    res = solve_least_squares(FitProblem(r, [-1.2, 1.0], max_iterations=2))
    assert not res.converged
    assert res.status == "max iterations reached"


def test_numerical_jacobian_central():
    def f(p):
        return np.array([np.sin(p[0]) * p[1], p[1] ** 3])
    J = numerical_jacobian(f, np.array([0.3, 1.7]))
    ref = np.array([[np.cos(0.3) * 1.7, np.sin(0.3)], [0.0, 3 * 1.7 ** 2]])
    np.testing.assert_allclose(J, ref, rtol=1e-8, atol=1e-10)


def test_validation_errors():
    with pytest.raises(ValidationError):
        FitProblem(lambda p: p, [1.0], lower=[2.0])
    with pytest.raises(ValidationError):
        FitProblem(lambda p: p, [np.nan])
    with pytest.raises(ValidationError):
        FitProblem(lambda p: p, [1.0], weights=[-1.0])
    with pytest.raises(EvaluationError):
        solve_least_squares(FitProblem(lambda p: np.array([np.inf]), [1.0]))
