import numpy as np
import pytest

from fracobstacle import core, operator as op


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
def test_normalization_matches_closed_form(s):
    assert op.normalization_constant(s) == pytest.approx(op.normalization_closed_form(s), rel=1e-6)
    assert op.normalization_constant(s, 2) == pytest.approx(op.normalization_closed_form(s, 2), rel=1e-6)


def test_cauchy_constant():
    # s = 1/2 lies outside the modelled range but the calibration itself is valid there
    assert op.normalization_constant(0.5) == pytest.approx(1 / np.pi, rel=1e-6)


def test_monotone_weights_positive_and_constants_annihilated():
    g = core.GridSpec(8.0, 129)
    t = op.build_kernel_table(core.FractionalOrder(0.75), g)
    assert np.all(t.weights > 0)
    out = op.apply_quadrature(core.ScalarField.constant(g, 3.0), t, far_field=3.0)
    assert np.max(np.abs(out.values)) < 1e-12


def test_quadrature_matrix_matches_apply():
    g = core.GridSpec(8.0, 65)
    t = op.build_kernel_table(core.FractionalOrder(0.6), g)
    u = core.ScalarField.from_function(g, lambda x: np.exp(-x * x))
    assert np.allclose(op.quadrature_matrix(t) @ u.values, op.apply_quadrature(u, t).values, atol=1e-12)


def test_positive_at_strict_max():
    g = core.GridSpec(8.0, 257)
    u = core.ScalarField.from_function(g, lambda x: np.exp(-(x - 0.3) ** 2))
    t = op.build_kernel_table(core.FractionalOrder(0.75), g)
    i = int(np.argmax(u.values))
    assert op.apply_quadrature(u, t).values[i] > 0


def test_scaling_property():
    s = 0.75
    order = core.FractionalOrder(s)
    lam = 2.0
    g1, g2 = core.GridSpec(8.0, 513), core.GridSpec(4.0, 513)
    f = lambda x: np.exp(-x * x)
    out1 = op.apply_spectral(core.ScalarField.from_function(g1, f), order, pad=16, warn=False)
    out2 = op.apply_spectral(core.ScalarField.from_function(g2, lambda x: f(lam * x)), order, pad=16, warn=False)
    assert np.allclose(out2.values, lam ** (2 * s) * out1.values, atol=1e-6 * np.max(np.abs(out1.values)))


def test_spectral_warns_on_boundary_mass():
    g = core.GridSpec(2.0, 65)
    with pytest.warns(RuntimeWarning):
        op.apply_spectral(core.ScalarField.constant(g, 1.0), core.FractionalOrder(0.75))


def test_riesz_potential_narrow_bump_decays():
    g = core.GridSpec(8.0, 257)
    f = core.ScalarField.from_function(g, lambda x: np.exp(-20 * x * x))
    w = op.riesz_potential(f, core.FractionalOrder(0.6)).values
    right = w[g.origin_index: g.origin_index + 64]
    assert np.all(np.diff(right) < 0)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        op.build_kernel_table(core.FractionalOrder(0.75), core.GridSpec(8.0, 65), "trapezoid")
