"""Fast consistency examples: exact identities, guards and degenerate
inputs that every module must get right. Run with ``fracobstacle selftest``."""

from __future__ import annotations

import math
import tempfile
import time
from pathlib import Path

import numpy as np

from . import core, extension as ext, linear, obstacle, operator as op, stochastic as st

CASES = []


def case(name):
    def deco(fn):
        CASES.append((name, fn))
        return fn
    return deco


class _Homogeneous:
    """``v(x, y) = |(x, y)|**k`` as a stand-in for an extension field."""

    def __init__(self, k, a, scale=1.0):
        self.k, self.a, self.scale = k, a, scale

    def __call__(self, X, Y):
        return self.scale * np.hypot(X, Y) ** self.k + 0.0 * np.asarray(X)


def _grid(n=129, R=8.0):
    return core.GridSpec(R, n)


def _spec(phi_fn, s=0.75, n=65, R=8.0, b=0.0, c=1.0):
    g = _grid(n, R)
    return core.ProblemSpec(core.FractionalOrder(s), g, core.CoefficientSpec.constant(g, b, c),
                            core.ScalarField.from_function(g, phi_fn))


def _negative(x):
    return -0.5 * np.maximum(1 - (x / 2) ** 2, 0) ** 3 - 5e-4


def _raises(fn, exc=ValueError):
    try:
        fn()
    except exc:
        return True
    return False


# -- core ---------------------------------------------------------------------

@case("gradient of a constant is zero")
def _():
    g = core.GridSpec(1.0, 41)
    return np.all(core.gradient(core.ScalarField.constant(g, 5.0)) == 0.0)


@case("gradient of 3x is 3")
def _():
    g = core.GridSpec(1.0, 41)
    return np.allclose(core.gradient(core.ScalarField.from_function(g, lambda x: 3 * x))[0], 3.0, atol=1e-12)


@case("gradient of x^2 at 0.5 is 1")
def _():
    g = core.GridSpec(2.0, 41)
    d = core.gradient(core.ScalarField.from_function(g, lambda x: x**2))[0]
    return abs(d[g.index_of(0.5)] - 1.0) < 1e-12


@case("surface integral of zero and of r^2 homogeneity")
def _():
    a = -0.5
    zero = core.surface_integral(lambda X, Y: 0 * X, 0.7, a)
    one = core.surface_integral(lambda X, Y: 1 + 0 * X, 0.7, a)
    sq = core.surface_integral(lambda X, Y: X**2 + Y**2, 0.7, a)
    return zero == 0.0 and abs(sq - 0.49 * one) < 1e-12 * one


# -- operator -----------------------------------------------------------------

@case("kernel constant is positive")
def _():
    return all(op.normalization_constant(s) > 0 for s in (0.6, 0.75, 0.9))


@case("quadrature annihilates constants (far field equal)")
def _():
    g = _grid()
    t = op.build_kernel_table(core.FractionalOrder(0.75), g)
    out = op.apply_quadrature(core.ScalarField.constant(g, 2.0), t, far_field=2.0).values
    return np.max(np.abs(out)) < 1e-12


@case("quadrature preserves oddness")
def _():
    g = _grid()
    t = op.build_kernel_table(core.FractionalOrder(0.75), g)
    out = op.apply_quadrature(core.ScalarField.from_function(g, lambda x: x * np.exp(-x * x)), t).values
    return np.max(np.abs(out + out[::-1])) < 1e-12 * np.max(np.abs(out))


@case("spectral route: cosine eigenfunction and zero")
def _():
    g = _grid()
    order = core.FractionalOrder(0.75)
    xi = op.wavenumbers(g)[3]
    u = core.ScalarField.from_function(g, lambda x: np.cos(xi * x))
    out = op.apply_spectral(u, order, warn=False).values
    zero = op.apply_spectral(core.ScalarField.constant(g, 0.0), order).values
    return np.max(np.abs(out - xi**1.5 * u.values)) < 1e-10 and not zero.any()


@case("Riesz potential inverts the spectral operator")
def _():
    g = _grid()
    order = core.FractionalOrder(0.6)
    gg = core.ScalarField.from_function(g, lambda x: np.exp(-x * x) * np.sin(x))
    back = op.riesz_potential(op.apply_spectral(gg, order), order).values
    want = gg.values - gg.values[:-1].mean()
    return np.max(np.abs(back - want)) <= 1e-10 * np.max(np.abs(want))


# -- linear -------------------------------------------------------------------

@case("model solve inverts the symbol on an eigenfunction")
def _():
    g = _grid()
    order = core.FractionalOrder(0.75)
    xi = op.wavenumbers(g)[5]
    f = core.ScalarField.from_function(g, lambda x: (xi**1.5 + 1.0) * np.cos(xi * x))
    u = linear.solve_model(f, 1.0, order)
    zero = linear.solve_model(core.ScalarField.constant(g, 0.0), 1.0, order)
    return np.max(np.abs(u.values - np.cos(xi * g.x))) < 1e-10 and not zero.values.any()


@case("drift-free solve takes one iteration")
def _():
    spec = _spec(lambda x: 0 * x, n=129)
    f = core.ScalarField.from_function(spec.grid, lambda x: np.exp(-x * x))
    rep = linear.solve_drifted(f, spec)
    ref = linear.solve_model(f, 1.0, spec.order)
    return rep.iterations == 1 and np.max(np.abs(rep.solution.values - ref.values)) < 1e-12


@case("comparison check: zero and a positive constant")
def _():
    g = _grid()
    return linear.comparison_check(core.ScalarField.constant(g, 0.0)) == 0.0 and \
        linear.comparison_check(core.ScalarField.constant(g, 1.0)) == 1.0


# -- obstacle -----------------------------------------------------------------

@case("beta_eps of nonpositive arguments is zero")
def _():
    return obstacle.beta_eps(-3.0, 0.1) == 0.0 and obstacle.beta_eps(0.0, 0.1) == 0.0


@case("negative obstacle: u is zero with an empty contact set")
def _():
    spec = _spec(_negative)
    st_ = obstacle.penalized_solve(spec, 0.1)
    sol = obstacle.obstacle_solve(spec)
    orc = obstacle.lcp_oracle(spec)
    return (not st_.u.any() and not sol.u.values.any() and not sol.contact_mask.any()
            and sol.comp_residual == 0.0 and not orc.u.values.any())


@case("degenerate grids are rejected")
def _():
    return _raises(lambda: core.GridSpec(1.0, 1))


# -- stochastic ---------------------------------------------------------------

@case("stable increments have median zero")
def _():
    x = st.sample_stable_increment(core.FractionalOrder(0.75), 1e-3, 100_000, seed=7)
    se = 0.5 / math.sqrt(len(x))
    return abs(np.mean(x > 0) - 0.5) <= 4 * se


@case("s = 1/2 is rejected")
def _():
    return _raises(lambda: core.FractionalOrder(0.5))


@case("discount is k dt and drift paths are exact without jumps")
def _():
    spec = _spec(lambda x: 0 * x, b=0.4)
    cfg = st.PathConfig(dt=1e-2, T=1.0, n_paths=10_000)
    t, x, D = st.simulate_path(0.3, spec, cfg, jumps=False)
    k = np.arange(len(t))
    return np.allclose(D, k * cfg.dt, atol=1e-12) and np.allclose(x, 0.3 - 0.4 * t, atol=1e-12)


@case("stopping deep in the contact set returns phi")
def _():
    spec = _spec(lambda x: np.maximum(1 - (x / 2) ** 2, 0) ** 3, n=129, c=10.0)
    sol = obstacle.obstacle_solve(spec)
    est = st.value_at(0.0, "contact-set", spec, sol, st.PathConfig(n_paths=10_000, T=1.0))
    return sol.contact_mask[spec.grid.origin_index] and est.mean == spec.phi[spec.grid.origin_index] \
        and est.std_error == 0.0


@case("stop at zero returns phi, never stopping returns zero")
def _():
    spec = _spec(lambda x: np.maximum(1 - (x / 2) ** 2, 0) ** 3, n=129, c=10.0)
    sol = obstacle.obstacle_solve(spec)
    cfg = st.PathConfig(n_paths=10_000, T=1.0)
    i = spec.grid.index_of(1.5)
    e0 = st.value_at(1.5, ("fixed-time", 0.0), spec, sol, cfg)
    en = st.value_at(1.5, "never", spec, sol, cfg)
    return e0.mean == spec.phi[i] <= sol.u.values[i] and en.mean == 0.0


# -- extension ----------------------------------------------------------------

@case("zero trace extends to zero")
def _():
    g = _grid()
    order = core.FractionalOrder(0.75)
    v = ext.poisson_extend(core.ScalarField.constant(g, 0.0), order, ext.HalfSpaceGrid.for_order(g, order))
    return not np.asarray(v.values).any()


@case("constant trace: flux identity degenerate")
def _():
    g = _grid()
    order = core.FractionalOrder(0.75)
    rep = ext.dtn_check(core.ScalarField.constant(g, 0.0), order, ext.HalfSpaceGrid.for_order(g, order))
    return math.isnan(rep.kappa)


@case("F(r) of 1, |z| and 0")
def _():
    a = 1 - 2 * 0.75
    radii = np.array([0.1, 0.2, 0.4])
    F1 = ext.frequency_F(_Homogeneous(0, a), radii)
    F2 = ext.frequency_F(_Homogeneous(1, a), radii)
    F0 = ext.frequency_F(_Homogeneous(1, a, 0.0), radii)
    ok1 = np.allclose(F1, core.omega(a) * radii ** (1 + a), rtol=1e-12)
    slope = np.polyfit(np.log(radii), np.log(F2), 1)[0]
    return ok1 and abs(slope - (3 + a)) < 1e-3 and not F0.any()


@case("Phi of homogeneous fields (constant, degree 1, degree 2 truncated)")
def _():
    s = 0.75
    a = 1 - 2 * s
    params = ext.FrequencyParams(s)
    # small radii so that F of the degree-2 field sits below the truncation floor
    radii = ext.geometric_radii(1e-4, 1e-7)
    phi0 = ext.frequency_curve(_Homogeneous(0, a), radii, params).Phi
    phi1 = ext.frequency_curve(_Homogeneous(1, a), radii, params).Phi
    c2 = ext.frequency_curve(_Homogeneous(2, a), radii, params)
    return (np.allclose(phi0, 1 + a, atol=1e-9) and np.allclose(phi1, 3 + a, atol=1e-9)
            and c2.trunc_active.all() and np.allclose(c2.Phi, 1 + a + 2 * (1 + params.p), atol=1e-9))


@case("constant Phi needs C = 0")
def _():
    params = ext.FrequencyParams(0.75)
    radii = ext.geometric_radii(0.5, 0.01)
    return ext.monotonicity_check(np.full(len(radii), 3.0), radii, params).C == 0.0


@case("rescaling a homogeneous field is scale invariant; d_r of 1")
def _():
    a = 1 - 2 * 0.75
    v = _Homogeneous(1.5, a)
    X, Y = np.array([0.3, -0.2]), np.array([0.1, 0.5])
    _, v1 = ext.rescale(v, 0.1)
    _, v2 = ext.rescale(v, 0.3)
    d, _ = ext.rescale(_Homogeneous(0, a), 0.2)
    return np.allclose(v1(X, Y), v2(X, Y), rtol=1e-10) and abs(d - math.sqrt(core.omega(a))) < 1e-12


@case("v = 1 is classified degenerate")
def _():
    s = 0.75
    params = ext.FrequencyParams(s)
    radii = ext.geometric_radii(0.5, 0.01)
    curve = ext.frequency_curve(_Homogeneous(0, 1 - 2 * s), radii, params)
    return ext.frequency_limit(curve, core.FractionalOrder(s), params).branch == "degenerate"


@case("boundary means: homogeneous slope and zero floor")
def _():
    order = core.FractionalOrder(0.75)
    alpha = 0.6
    radii = np.array([0.05, 0.1, 0.2])
    rep = ext.boundary_mean_check(_Homogeneous(2 * order.s + alpha, order.a), radii, order, alpha)
    zero = ext.boundary_mean_check(_Homogeneous(1, order.a, 0.0), radii, order, alpha)
    # the 1e-10 floor inside the log shifts the slope slightly
    return abs(rep.slope - (2 * order.s + alpha)) < 1e-6 and zero.passed and not zero.means.any()


@case("growth exponent of exact power traces")
def _():
    r = np.geomspace(1e-3, 1e-1, 12)
    return abs(ext.synthetic_trace_fit(1.75, r) - 1.75) < 1e-6 and abs(ext.synthetic_trace_fit(2.0, r) - 2.0) < 1e-6


# -- harness ------------------------------------------------------------------

@case("report: missing record is an explicit error")
def _():
    from .report import report
    with tempfile.TemporaryDirectory() as d:
        try:
            report(d, figures=False, echo=lambda *a: None)
        except FileNotFoundError as exc:
            return "no record" in str(exc)
    return False


def run_selftest(echo=print) -> int:
    failed = []
    for name, fn in CASES:
        t0 = time.perf_counter()
        try:
            ok = bool(fn())
            msg = ""
        except Exception as exc:
            ok, msg = False, f" ({type(exc).__name__}: {exc})"
        echo(f"{'PASS' if ok else 'FAIL'}  {name}  [{time.perf_counter() - t0:.2f}s]{msg}")
        if not ok:
            failed.append(name)
    echo(f"{len(CASES) - len(failed)}/{len(CASES)} passed")
    return 0 if not failed else 2
