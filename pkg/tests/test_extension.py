import math

import numpy as np
import pytest

from fracobstacle import core, extension as ext, obstacle as ob

from conftest import make_spec


class Homogeneous:
    def __init__(self, k, a):
        self.k, self.a = k, a

    def __call__(self, X, Y):
        return np.hypot(X, Y) ** self.k + 0.0 * np.asarray(X)


def test_dtn_constant_universal():
    g = core.GridSpec(8.0, 513)
    order = core.FractionalOrder(0.75)
    hg = ext.HalfSpaceGrid.for_order(g, order)
    fields = {
        "gauss": lambda x: np.exp(-x * x),
        "cos": lambda x: np.cos(2 * np.pi * 3 * x / 16) * np.exp(-(x / 3) ** 8),
        "bump": lambda x: np.maximum(1 - (x / 2) ** 2, 0) ** 6,
    }
    kappas = [ext.dtn_check(core.ScalarField.from_function(g, f), order, hg).kappa for f in fields.values()]
    assert max(kappas) / min(kappas) - 1 < 0.01
    assert np.mean(kappas) == pytest.approx(ext.dtn_constant(order.s), rel=0.02)


def test_extension_is_la_harmonic():
    g = core.GridSpec(8.0, 513)
    order = core.FractionalOrder(0.6)
    hg = ext.HalfSpaceGrid.for_order(g, order)
    v = ext.poisson_extend(core.ScalarField.from_function(g, lambda x: np.exp(-x * x)), order, hg)
    # what remains is the truncation error of the graded y-stencil
    assert ext.la_residual(v) < 5e-2
    assert ext.la_residual(v, first_row=3) < ext.la_residual(v)
    assert np.allclose(v.boundary_trace.values, np.exp(-g.x**2), atol=1e-10)


def test_height_function_vanishes_at_base_and_on_contact():
    spec = make_spec(n=513, b=0.3)
    sol = ob.lcp_active_set(spec)
    node = sol.free_boundary_nodes[0]
    v = ext.height_function(sol, spec, node, ext.HalfSpaceGrid.for_order(spec.grid, spec.order))
    assert abs(float(v(np.array(0.0), np.array(0.0)))) < 1e-10
    assert np.all(v.boundary_trace.values >= -1e-9)


def test_frequency_of_homogeneous_fields():
    s = 0.75
    a = 1 - 2 * s
    params = ext.FrequencyParams(s)
    r = ext.geometric_radii(0.5, 0.01)
    assert np.allclose(ext.frequency_curve(Homogeneous(0, a), r, params).Phi, 1 + a, atol=1e-9)
    c = ext.frequency_curve(Homogeneous(1.3, a), r, params)
    assert np.allclose(c.Phi, 1 + a + 2 * 1.3, atol=1e-3)


def test_frequency_params_validation():
    p = ext.FrequencyParams(0.75)
    assert p.gamma > 0
    with pytest.raises(ValueError):
        ext.FrequencyParams(0.75, alpha=0.8)
    with pytest.raises(ValueError):
        ext.FrequencyParams(0.75, p=0.5)


def test_monotonicity_check_finds_needed_constant():
    params = ext.FrequencyParams(0.75)
    r = ext.geometric_radii(0.5, 0.01)
    Phi = 4.0 + r**params.gamma          # increasing in r: C = 0
    assert ext.monotonicity_check(Phi, r, params).C == 0.0
    Phi = 4.0 - 0.5 * r**params.gamma    # decreasing in r: needs C > 0
    rep = ext.monotonicity_check(Phi, r, params)
    assert 0 < rep.C <= 100 and rep.passed


def test_rescale_normalizes():
    a = -0.5
    d, vr = ext.rescale(Homogeneous(1.75, a), 0.2)
    assert d > 0
    # v_r is normalized so that F_{v_r}(1) = 1
    assert ext.frequency_F(vr, [1.0])[0] == pytest.approx(1.0, rel=1e-10)


def test_rellich_decreases_under_refinement():
    order = core.FractionalOrder(0.75)
    res = []
    for n in (257, 513, 1025):
        g = core.GridSpec(8.0, n)
        v = ext.poisson_extend(core.ScalarField.from_function(g, lambda x: np.exp(-x * x)), order,
                               ext.HalfSpaceGrid.for_order(g, order))
        res.append(ext.rellich_residual(v, 0.5).residual)
    assert res[-1] <= 5e-2
    assert res[-1] <= res[0]


def test_growth_fit_synthetic_and_guard():
    r = np.geomspace(1e-3, 1e-1, 12)
    assert ext.synthetic_trace_fit(1.75, r) == pytest.approx(1.75, abs=1e-6)
    assert ext.synthetic_trace_fit(2.0, r) == pytest.approx(2.0, abs=1e-6)


def test_degenerate_base_point():
    params = ext.FrequencyParams(0.75)
    r = ext.geometric_radii(0.5, 0.01)
    curve = ext.frequency_curve(Homogeneous(0, -0.5), r, params)
    lim = ext.frequency_limit(curve, core.FractionalOrder(0.75), params)
    assert lim.branch == "degenerate" and math.isnan(lim.phi0)
