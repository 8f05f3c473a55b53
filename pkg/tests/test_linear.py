import numpy as np
import pytest

from fracobstacle import core, linear

from conftest import make_spec


def test_drifted_solve_manufactured():
    spec = make_spec(n=257, b=0.5, c=1.0, obstacle="negative")
    u_exact = core.ScalarField.from_function(spec.grid, lambda x: np.exp(-x * x) * np.cos(x))
    f = linear.apply_L(u_exact, spec)
    rep = linear.solve_drifted(f, spec, tol=1e-13)
    assert rep.converged
    assert np.max(np.abs(rep.solution.values - u_exact.values)) < 1e-8


def test_variable_coefficients():
    g = core.GridSpec(8.0, 257)
    coeffs = core.CoefficientSpec(g, 0.4 * np.sin(g.x), 1.0 + 0.5 * np.exp(-g.x**2), 1.0)
    spec = core.ProblemSpec(core.FractionalOrder(0.6), g, coeffs, core.ScalarField.constant(g, 0.0))
    f = core.ScalarField.from_function(g, lambda x: np.exp(-x * x))
    rep = linear.solve_drifted(f, spec, tol=1e-12)
    assert rep.residual_inf < 1e-9
    assert rep.sup_ratio <= 1.0 + 5e-2


def test_convergence_error_raised():
    spec = make_spec(n=129, b=0.3, obstacle="negative")
    f = core.ScalarField.from_function(spec.grid, lambda x: np.exp(-x * x))
    with pytest.raises(linear.ConvergenceError):
        linear.solve_drifted(f, spec, tol=1e-30, max_iter=2)
    rep = linear.solve_drifted(f, spec, tol=1e-30, max_iter=2, raise_on_failure=False)
    assert not rep.converged


def test_comparison_principle():
    spec = make_spec(n=257, b=0.3, obstacle="negative")
    f = core.ScalarField.from_function(spec.grid, lambda x: np.exp(-x * x))
    u = linear.solve_drifted(f, spec, tol=1e-12).solution
    assert linear.comparison_check(u) >= -1e-6
