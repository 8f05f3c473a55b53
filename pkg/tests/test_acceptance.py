"""Acceptance criteria, one test each. Every test prints a single
``[PASS]``/``[FAIL]`` line (collected again in the terminal summary) before
asserting, so a failing criterion still reports its measured value."""

import json
import time

import numpy as np
import pytest

from fracobstacle import core, extension as ext, linear, obstacle as ob, operator as op, stochastic as st
from fracobstacle.pipeline import run_scenario
from fracobstacle.scenario import load_scenario, obstacle_values, parse_scenario

from conftest import make_spec

ORDERS = (0.6, 0.75, 0.9)
CATALOG = ("bump", "shifted-bump", "two-bumps")
FINE_N = 16385


@pytest.fixture(scope="module")
def catalog_solutions():
    """Penalized solutions of the positive catalog at n = 513, s = 0.75,
    b = 0.3, c = 1, with their wall times."""
    out = {}
    for name in CATALOG:
        spec = make_spec(n=513, b=0.3, obstacle=name)
        t0 = time.perf_counter()
        sol = ob.obstacle_solve(spec)
        out[name] = (spec, sol, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def fine_solutions():
    """Exact discrete complementarity solutions on the 16385 grid for the
    positive catalog and all three orders (b = 0.3, c = 1)."""
    return {(name, s): (lambda spec: (spec, ob.lcp_active_set(spec)))(make_spec(s=s, n=FINE_N, b=0.3, obstacle=name))
            for name in CATALOG for s in ORDERS}


def _smooth_bump(x):
    # C^5 polynomial bump on [-2, 2]
    return np.maximum(1 - (x / 2) ** 2, 0) ** 6


def test_c01_operator_cross_validation(acceptance_line):
    g = core.GridSpec(8.0, 513)
    window = np.abs(g.x) <= 4.0
    t0 = time.perf_counter()
    worst, info = 0.0, {}
    for fname, f in (("gaussian", lambda x: np.exp(-x * x)), ("bump", _smooth_bump)):
        u = core.ScalarField.from_function(g, f)
        for s in ORDERS:
            order = core.FractionalOrder(s)
            q = op.apply_quadrature(u, op.build_kernel_table(order, g)).values
            sp = op.apply_spectral(u, order, pad=16, warn=False).values
            err = np.max(np.abs(q - sp)[window]) / np.max(np.abs(sp)[window])
            worst = max(worst, err)
            info[(fname, s)] = err
    # the C^2 catalog obstacle, reported for reference only: both routes are
    # under-resolved for it at n = 513 as s -> 1
    u = core.ScalarField.from_function(g, lambda x: obstacle_values("bump", x))
    ref = {s: np.max(np.abs(op.apply_quadrature(u, op.build_kernel_table(core.FractionalOrder(s), g)).values
                            - op.apply_spectral(u, core.FractionalOrder(s), pad=16, warn=False).values)[window])
           / np.max(np.abs(op.apply_spectral(u, core.FractionalOrder(s), pad=16, warn=False).values)[window])
           for s in ORDERS}
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed <= 10
    acceptance_line(1, ok, f"quadrature vs spectral, max rel err {worst:.2e} (<= 1e-3) over Gaussian and C^5 bump, "
                           f"s in {ORDERS}, n=513, {elapsed:.2f}s; catalog C^2 bump for reference: "
                           + ", ".join(f"s={s}: {e:.1e}" for s, e in ref.items()))
    assert ok


def test_c02_linear_solver(acceptance_line, rng):
    g = core.GridSpec(8.0, 513)
    coeffs = core.CoefficientSpec(g, 0.3 * np.sin(g.x), 1.0 + 0.5 * np.exp(-g.x**2), 1.0)
    worst_mms = 0.0
    for s in ORDERS:
        spec = core.ProblemSpec(core.FractionalOrder(s), g, coeffs, core.ScalarField.constant(g, 0.0))
        u_exact = core.ScalarField.from_function(g, lambda x: np.exp(-x * x) * np.cos(x))
        rep = linear.solve_drifted(linear.apply_L(u_exact, spec), spec, tol=1e-13)
        worst_mms = max(worst_mms, float(np.max(np.abs(rep.solution.values - u_exact.values))))
    spec = core.ProblemSpec(core.FractionalOrder(0.75), g, coeffs, core.ScalarField.constant(g, 0.0))
    ratios = []
    for _ in range(10):
        centres = rng.uniform(-3, 3, 4)
        widths = rng.uniform(0.4, 1.5, 4)
        amps = rng.uniform(-1, 1, 4)
        f = core.ScalarField.from_function(
            g, lambda x: sum(a * np.exp(-((x - c) / w) ** 2) for a, c, w in zip(amps, centres, widths)))
        ratios.append(linear.solve_drifted(f, spec, tol=1e-12).sup_ratio)
    ok = worst_mms <= 1e-6 and max(ratios) <= 1 + 5e-2
    acceptance_line(2, ok, f"manufactured solution err {worst_mms:.1e} (<= 1e-6); "
                           f"max c0 |u| / |f| = {max(ratios):.4f} (<= 1.05) over 10 random f")
    assert ok


def test_c03_penalization_invariants(acceptance_line, catalog_solutions):
    worst = {"increment": 0.0, "low": 0.0, "high": -np.inf, "beta": -np.inf}
    slowest = 0.0
    for spec, sol, wall in catalog_solutions.values():
        slowest = max(slowest, wall)
        for state in sol.states:
            worst["increment"] = min(worst["increment"], state.min_increment)
            worst["low"] = min(worst["low"], state.min_value)
            worst["high"] = max(worst["high"], state.max_value - state.phi_sup)
            worst["beta"] = max(worst["beta"], float(state.beta_term.max()) - state.lphi_pos)
    ok = (worst["increment"] >= -1e-10 and worst["low"] >= -1e-10 and worst["high"] <= 1e-10
          and worst["beta"] <= 1e-6 and slowest <= 60)
    acceptance_line(3, ok, f"min increment {worst['increment']:.1e}, min u {worst['low']:.1e}, "
                           f"max u - |phi| {worst['high']:.1e}, max beta - |(L phi)+| {worst['beta']:.2e}; "
                           f"slowest instance {slowest:.1f}s (<= 60s)")
    assert ok


def test_c04_complementarity(acceptance_line, catalog_solutions):
    rows, ok = [], True
    for name, (spec, sol, _) in catalog_solutions.items():
        bound = max(10 * sol.epsilon * sol.lphi_pos, 1e-4 * np.max(np.abs(spec.phi)))
        ok &= sol.comp_residual <= bound
        rows.append(f"{name} {sol.comp_residual:.2e}/{bound:.2e}")
    acceptance_line(4, ok, "complementarity residual / bound: " + ", ".join(rows))
    assert ok


def test_c05_oracle_equivalence(acceptance_line):
    worst = 0.0
    for name in CATALOG:
        for b in (0.0, 0.3):
            spec = make_spec(n=65, b=b, obstacle=name)
            diff = np.max(np.abs(ob.obstacle_solve(spec).u.values - ob.lcp_oracle(spec).u.values))
            worst = max(worst, diff / np.max(np.abs(spec.phi)))
    ok = worst <= 1e-3
    acceptance_line(5, ok, f"max |u_pen - u_oracle| / |phi| = {worst:.1e} (<= 1e-3), n=65, catalog x b in {{0, 0.3}}")
    assert ok


def test_c06_stochastic_representation(acceptance_line, tmp_path):
    sc = load_scenario("scenarios/bump.json")
    assert (sc.problem.s, sc.mc.n_paths, sc.mc.dt, sc.mc.T) == (0.75, 100_000, 1e-3, 10.0)
    t0 = time.perf_counter()
    _, rec = run_scenario(sc, tmp_path, stages=("solve", "mc"))
    elapsed = time.perf_counter() - t0
    checks = [c for c in rec["checks"] if c["stage"] == "mc"]
    rep = [c for c in checks if c["name"].startswith("representation")]
    dom = [c for c in checks if c["name"].startswith("dominated")]
    ok = len(rep) == 5 and all(c["passed"] for c in checks) and elapsed <= 300
    worst = max(c["value"] for c in rep) if rep else float("nan")
    acceptance_line(6, ok, f"{len(rep)} probes, max |MC - u| = {worst:.1e} (band 4se + 0.02), "
                           f"{sum(c['passed'] for c in dom)}/{len(dom)} alternative rules dominated, "
                           f"1e5 paths, {elapsed:.0f}s (<= 300s)")
    assert ok


def test_c07_stable_sampler(acceptance_line):
    worst = 0.0
    for s in ORDERS:
        order = core.FractionalOrder(s)
        for dt in (1e-3, 1.0):
            x = st.sample_stable_increment(order, dt, 1_000_000, seed=2024)
            for xi in (0.5, 1.0, 2.0):
                re, im = np.cos(xi * x), np.sin(xi * x)
                want = np.exp(-dt * xi ** (2 * s))
                z_re = abs(re.mean() - want) / (re.std(ddof=1) / 1e3)
                z_im = abs(im.mean()) / (im.std(ddof=1) / 1e3)
                worst = max(worst, z_re, z_im)
    ok = worst <= 4
    acceptance_line(7, ok, f"empirical characteristic function, worst deviation {worst:.2f} s.e. (<= 4), "
                           f"1e6 samples, xi in {{0.5, 1, 2}}, dt in {{1e-3, 1}}")
    assert ok


class _Homogeneous:
    def __init__(self, k, a):
        self.k, self.a = k, a

    def __call__(self, X, Y):
        return np.hypot(X, Y) ** self.k + 0.0 * np.asarray(X)


def test_c08_frequency_sanity(acceptance_line):
    worst = 0.0
    for s in ORDERS:
        a = 1 - 2 * s
        params = ext.FrequencyParams(s)
        p = params.p
        for kappa in (1.0, 1 + p - 0.05):
            curve = ext.frequency_curve(_Homogeneous(kappa, a), ext.geometric_radii(0.5, 0.01), params)
            assert not curve.trunc_active.any()
            worst = max(worst, np.max(np.abs(curve.Phi - (1 + a + 2 * kappa))))
        for kappa in (1 + p + 0.25, 2 + p):
            # the truncation floor dominates once omega r^{2(kappa-1-p)} < 1
            curve = ext.frequency_curve(_Homogeneous(kappa, a), ext.geometric_radii(1e-3, 1e-5), params)
            assert curve.trunc_active.all()
            worst = max(worst, np.max(np.abs(curve.Phi - (1 + a + 2 * (1 + p)))))
    ok = worst <= 1e-3
    acceptance_line(8, ok, f"homogeneous fields, max |Phi - expected| = {worst:.1e} (<= 1e-3), both branches")
    assert ok


@pytest.fixture(scope="module")
def frequency_runs():
    """Frequency curves at every free-boundary point of the positive catalog
    for all three orders, on the 2049 grid."""
    out = {}
    for name in CATALOG:
        for s in ORDERS:
            spec = make_spec(s=s, n=2049, b=0.3, obstacle=name)
            sol = ob.lcp_active_set(spec)
            params = ext.FrequencyParams(s)
            hg = ext.HalfSpaceGrid.for_order(spec.grid, spec.order)
            radii = ext.geometric_radii(params.r_max, 8 * spec.grid.h)
            for node in sol.free_boundary_nodes:
                v = ext.height_function(sol, spec, node, hg)
                out[(name, s, node)] = (v, ext.frequency_curve(v, radii, params), params, spec.order, radii)
    return out


def test_c09_monotonicity_formula(acceptance_line, frequency_runs):
    Cs = {k: ext.monotonicity_check(curve.Phi, curve.radii, params) for k, (_, curve, params, _, _) in
          frequency_runs.items()}
    ok = len(Cs) > 0 and all(r.passed for r in Cs.values())
    worst = max(r.C for r in Cs.values())
    acceptance_line(9, ok, f"monotonicity constant C <= {worst:.2f} (<= 100) at all {len(Cs)} free-boundary points, "
                           f"catalog x s in {ORDERS}, p = s, default alpha")
    assert ok


def test_c10_frequency_lower_bound(acceptance_line):
    spec = make_spec(s=0.75, n=FINE_N, b=0.3, obstacle="bump")
    sol = ob.lcp_active_set(spec)
    params = ext.FrequencyParams(0.75)
    hg = ext.HalfSpaceGrid.for_order(spec.grid, spec.order)
    radii = ext.geometric_radii(params.r_max, 8 * spec.grid.h)
    threshold = 1 + spec.order.a + 2 * (1 + spec.order.s)
    vals, raw = [], []
    for node in sol.free_boundary_nodes:
        curve = ext.frequency_curve(ext.height_function(sol, spec, node, hg), radii, params)
        vals.append(ext.frequency_limit(curve, spec.order, params).phi0)
        raw.append(curve.Phi[0])
    ok = len(vals) == 2 and min(vals) >= threshold - 0.1
    acceptance_line(10, ok, f"Phi(0+) = {', '.join(f'{v:.3f}' for v in vals)} (>= {threshold - 0.1:.2f}); "
                            f"Phi at r = {radii[0]:.4f}: {', '.join(f'{v:.3f}' for v in raw)}; n={FINE_N}")
    assert ok


def test_c11_optimal_regularity(acceptance_line, fine_solutions):
    fits, ok = [], True
    for (name, s), (spec, sol) in fine_solutions.items():
        for node in sol.free_boundary_nodes:
            k = ext.growth_exponent_fit(sol, node, max_cells=16).exponent
            ok &= abs(k - (1 + s)) <= 0.15
            fits.append((name, s, k))
    ok &= len(fits) > 0
    summary = "; ".join(f"s={s}: " + ", ".join(f"{k:.3f}" for n, ss, k in fits if ss == s) for s in ORDERS)
    acceptance_line(11, ok, f"growth exponents within 1+s +- 0.15 on the catalog at n={FINE_N}: {summary}")
    assert ok


def test_c12_appendix_identities(acceptance_line, frequency_runs):
    # the extension is exact mode by mode, so the residual only sees the
    # circle/ball/line quadrature; refinement means more quadrature nodes
    levels = ((4, 8), (8, 16), (16, 32), (32, 64))
    seqs, flat = {}, []
    for s in ORDERS:
        order = core.FractionalOrder(s)
        for n in (257, 513, 1025):
            g = core.GridSpec(8.0, n)
            v = ext.poisson_extend(core.ScalarField.from_function(g, lambda x: np.exp(-x * x)), order,
                                   ext.HalfSpaceGrid.for_order(g, order))
            if n == 513:
                seqs[s] = [ext.rellich_residual(v, 0.5, m=m, mx=mx).residual for m, mx in levels]
            if s == 0.75:
                flat.append(ext.rellich_residual(v, 0.5).residual)
    decreasing = all(all(b < a for a, b in zip(r, r[1:])) for r in seqs.values())
    finest = max(r[-1] for r in seqs.values())
    means = [ext.boundary_mean_check(v, radii[: max(3, len(radii) // 2)], o, params.alpha)
             for v, _, params, o, radii in frequency_runs.values()]
    ok = decreasing and finest <= 5e-2 and max(flat) <= 5e-2 and all(m.passed for m in means)
    acceptance_line(12, ok, "Rellich residual under quadrature refinement m=4..32: "
                            + "; ".join(f"s={s}: " + " > ".join(f"{x:.0e}" for x in r) for s, r in seqs.items())
                            + f" (<= 5e-2, strictly decreasing); n=257..1025 at m=32: "
                            + ", ".join(f"{x:.1e}" for x in flat)
                            + f"; boundary means pass at {sum(m.passed for m in means)}/{len(means)} points")
    assert ok


def test_c13_determinism(acceptance_line, tmp_path):
    data = json.loads(load_scenario("scenarios/bump.json").canonical())
    data.update(name="determinism")
    data["problem"]["n"] = 257
    data["mc"].update(nPaths=10_000, probes=[-1.5, 1.25])
    data["frequency"]["fineN"] = 2049
    data["growth"]["fineN"] = 4097
    sc = parse_scenario(data)
    d1, _ = run_scenario(sc, tmp_path / "first")
    d2, _ = run_scenario(sc, tmp_path / "second")
    names = sorted(p.name for p in d1.glob("*.csv"))
    same = [n for n in names if (d1 / n).read_bytes() == (d2 / n).read_bytes()]
    ok = len(names) >= 3 and same == names
    acceptance_line(13, ok, f"{len(same)}/{len(names)} CSV files byte-identical across two runs with seed {sc.seed}")
    assert ok
