"""Scenario orchestration: solve, Monte Carlo validation, frequency
analysis and growth fits, persisted as CSV files plus ``record.json``.

CSV files depend only on the scenario (including its seed); wall-clock
timestamps live in ``record.json`` alone.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import traceback
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import extension as ext
from .obstacle import lcp_active_set, obstacle_solve
from .scenario import Scenario
from .stochastic import PathConfig, default_alt_rules, value_at_many

log = logging.getLogger(__name__)

STAGES = ("solve", "mc", "frequency", "growth")
TRACE_COLUMNS = ("x", "u", "phi", "contact")
MC_COLUMNS = ("x0", "rule", "mean", "stdErr", "nPaths")
FREQ_COLUMNS = ("r", "F", "Phi", "d_r", "truncActive")


@dataclass
class Check:
    name: str
    value: float
    band: str
    passed: bool
    stage: str
    detail: str = ""


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(columns)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(head):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(c) for c in col])
        except ValueError:
            out[name] = np.array(col)
    return out


class _Run:
    def __init__(self, scenario: Scenario, run_dir: Path):
        self.sc = scenario
        self.dir = run_dir
        self.spec = scenario.problem.build()
        self.checks: list[Check] = []
        self.summary: dict = {}
        self._solution = None
        self._fine = {}

    def check(self, stage, name, value, band, passed, detail=""):
        self.checks.append(Check(name, float(value), band, bool(passed), stage, detail))

    @property
    def solution(self):
        if self._solution is None:
            sv = self.sc.solver
            self._solution = obstacle_solve(self.spec, sv.eps_schedule, sv.tol, sv.method)
        return self._solution

    def exact(self, n: int | None):
        """Exact discrete complementarity solution on the scenario grid or a
        refinement of it."""
        key = n or self.spec.grid.n
        if key not in self._fine:
            if key == self.spec.grid.n:
                sol = self.solution
                seed = (sol.u.values - self.spec.phi) <= sol.penetration_tol
                self._fine[key] = (self.spec, lcp_active_set(self.spec, initial_active=seed))
            else:
                spec = self.sc.problem.build(key)
                self._fine[key] = (spec, lcp_active_set(spec))
        return self._fine[key]

    # -- stages --------------------------------------------------------------

    def stage_solve(self):
        spec, sol = self.spec, self.solution
        phi_sup = float(np.max(np.abs(spec.phi)))
        x = spec.grid.x
        write_csv(self.dir / "trace.csv", TRACE_COLUMNS,
                  zip(x, sol.u.values, spec.phi, sol.contact_mask))
        mono = min(st.min_increment for st in sol.states)
        lo = min(st.min_value for st in sol.states)
        hi = max(st.max_value - st.phi_sup for st in sol.states)
        beta = max(float(st.beta_term.max()) - st.lphi_pos for st in sol.states)
        self.check("solve", "penalization.monotone", mono, ">= -1e-10", mono >= -1e-10)
        self.check("solve", "penalization.lower-bound", lo, ">= -1e-10", lo >= -1e-10)
        self.check("solve", "penalization.upper-bound", hi, "<= 1e-10", hi <= 1e-10)
        self.check("solve", "penalization.beta-bound", beta, "<= 1e-6", beta <= 1e-6)
        bound = max(10 * sol.epsilon * sol.lphi_pos, 1e-4 * phi_sup)
        self.check("solve", "complementarity", sol.comp_residual, f"<= {bound:.3g}", sol.comp_residual <= bound)
        hist = sol.comp_history
        ok = all(b <= 1.1 * a for a, b in zip(hist, hist[1:]))
        self.check("solve", "eps-refinement", hist[-1], "non-increasing within 10%", ok)
        self.summary["solution"] = {
            "n": spec.grid.n, "h": spec.grid.h, "epsilon": sol.epsilon,
            "iterations": [st.iterations for st in sol.states],
            "compHistory": hist, "compResidual": sol.comp_residual,
            "lphiPos": sol.lphi_pos, "phiSup": phi_sup,
            "contactIntervals": [[float(x[i0]), float(x[i1])] for i0, i1 in sol.contact_intervals()],
            "freeBoundaryNodes": [float(x[i]) for i in sol.free_boundary_nodes],
            "uSup": float(np.max(sol.u.values)), "uMin": float(np.min(sol.u.values)),
        }

    def _probes(self, sol):
        cfg = self.sc.mc
        x = self.spec.grid.x
        if cfg.probes is not None:
            pts = cfg.probes
        elif sol.contact_mask.any():
            iv = sol.contact_intervals()
            xl, xr = x[iv[0][0]], x[iv[-1][1]]
            pts = [xl - 0.5, xl - 0.2, 0.5 * (xl + xr), xr + 0.2, xr + 0.5]
        else:
            pts = [-1.0, -0.5, 0.0, 0.5, 1.0]
        return [float(x[self.spec.grid.index_of(p)]) for p in pts]

    def stage_mc(self):
        cfg = self.sc.mc
        spec, sol = self.spec, self.solution
        pc = PathConfig(cfg.dt, cfg.T, cfg.n_paths, self.sc.seed, cfg.kill_radius)
        phi_sup = float(np.max(np.abs(spec.phi)))
        trunc = phi_sup * math.exp(-spec.coeffs.c0 * cfg.T)
        allow = cfg.allowance * phi_sup + trunc
        rows, out = [], []
        has_contact = bool(sol.contact_mask.any())
        for x0 in self._probes(sol):
            u0 = float(sol.u.values[spec.grid.index_of(x0)])
            rules = ["contact-set"] if has_contact else []
            if cfg.alt_rules or not has_contact:
                rules += default_alt_rules(x0)
            for est in value_at_many(x0, rules, spec, sol, pc):
                rows.append((x0, est.rule, est.mean, est.std_error, est.n_paths))
                out.append({"x0": x0, "u": u0, "rule": est.rule, "mean": est.mean, "stdErr": est.std_error})
                if est.rule == "contact-set":
                    err = abs(est.mean - u0)
                    self.check("mc", f"representation@{x0:g}", err, f"<= 4se+{allow:.3g}",
                               err <= 4 * est.std_error + allow, f"u={u0:.6g} mc={est.mean:.6g}")
                else:
                    excess = est.mean - u0
                    self.check("mc", f"dominated@{x0:g}:{est.rule}", excess, f"<= 4se+{allow:.3g}",
                               excess <= 4 * est.std_error + allow)
        write_csv(self.dir / "mc.csv", MC_COLUMNS, rows)
        self.summary["mc"] = {"dt": cfg.dt, "T": cfg.T, "nPaths": cfg.n_paths, "seed": self.sc.seed,
                              "truncation": trunc, "estimates": out}

    def stage_frequency(self):
        fc = self.sc.frequency
        spec, sol = self.exact(fc.fine_n)
        g = spec.grid
        order = spec.order
        params = ext.FrequencyParams(order.s, fc.alpha, fc.p, r_max=fc.r_max)
        hg = ext.HalfSpaceGrid.for_order(g, order, m=fc.rows)
        threshold = 1 + order.a + 2 * (1 + order.s)
        results = []
        if not sol.free_boundary_nodes:
            self.check("frequency", "free-boundary", 0, "none present", True, "empty contact set")
        for node in sol.free_boundary_nodes:
            tag = f"x={g.x[node]:g}"
            try:
                results.append(self._frequency_point(spec, sol, node, tag, hg, params, threshold))
            except Exception as exc:
                self.check("frequency", f"frequency.error@{tag}", float("nan"), "no error", False,
                           f"{type(exc).__name__}: {exc}")
        self.summary["frequency"] = {"n": g.n, "alpha": params.alpha, "p": params.p,
                                     "gamma": params.gamma, "threshold": threshold, "points": results}

    def _frequency_point(self, spec, sol, node, tag, hg, params, threshold):
        fc = self.sc.frequency
        g, order = spec.grid, spec.order
        v = ext.height_function(sol, spec, node, hg)
        radii = ext.geometric_radii(fc.r_max, fc.r_min_cells * g.h)
        if len(radii) < fc.n_fit + 2:
            raise ext.UnderResolvedError(f"only {len(radii)} radii in [{fc.r_min_cells} h, rMax]; refine the grid")
        curve = ext.frequency_curve(v, radii, params)
        write_csv(self.dir / f"frequency-{node}.csv", FREQ_COLUMNS,
                  zip(curve.radii, curve.F, curve.Phi, curve.dr, curve.trunc_active))
        mono = ext.monotonicity_check(curve.Phi, curve.radii, params)
        lim = ext.frequency_limit(curve, order, params, n_fit=fc.n_fit)
        # the smaller half of the radii, where the one-sided bound is asymptotic
        mean = ext.boundary_mean_check(v, radii[: max(3, len(radii) // 2)], order, params.alpha)
        self.check("frequency", f"monotonicity@{tag}", mono.C, "C <= 100", mono.passed)
        self.check("frequency", f"lower-bound@{tag}", lim.phi0, f">= {threshold - 0.1:.4g}",
                   lim.phi0 >= threshold - 0.1,
                   f"{lim.branch}; Phi({curve.radii[0]:.3g}) = {curve.Phi[0]:.4g}")
        self.check("frequency", f"boundary-mean@{tag}",
                   mean.slope if np.isfinite(mean.slope) else float(np.max(mean.means)),
                   f"slope >= {mean.target - 0.3:.4g} or mean <= floor", mean.passed)
        return {"node": node, "x": float(g.x[node]), "C": mono.C, "gamma": params.gamma,
                "phi0Plus": lim.phi0, "branch": lim.branch,
                "rMin": float(curve.radii[0]), "phiAtRMin": float(curve.Phi[0]),
                "worstDecrease": mono.worst_decrease,
                "meanSlope": mean.slope, "maxMean": float(np.max(mean.means)),
                "csv": f"frequency-{node}.csv"}

    def stage_growth(self):
        gc = self.sc.growth
        spec, sol = self.exact(gc.fine_n)
        g = spec.grid
        s = spec.order.s
        fits = []
        if not sol.free_boundary_nodes:
            self.check("growth", "free-boundary", 0, "none present", True, "empty contact set")
        for node in sol.free_boundary_nodes:
            fit = ext.growth_exponent_fit(sol, node, max_cells=gc.max_cells)
            self.check("growth", f"exponent@x={g.x[node]:g}", fit.exponent,
                       f"[{1 + s - 0.15:.3g}, {1 + s + 0.15:.3g}]", abs(fit.exponent - (1 + s)) <= 0.15)
            fits.append({"node": node, "x": float(g.x[node]), "kappaHat": fit.exponent,
                         "offset": fit.offset, "radii": fit.radii.tolist(), "sups": fit.sups.tolist()})
        self.summary["growth"] = {"n": g.n, "fits": fits}


def run_scenario(scenario: Scenario, out_root, stages=STAGES) -> tuple[Path, dict]:
    """Run the enabled ``stages`` and persist results in ``out_root/<name>-<hash8>``.

    A failure inside a stage is recorded as a failed check naming the
    stage; later stages still run.
    """
    run_dir = Path(out_root) / scenario.run_name()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "scenario.json").write_text(
        json.dumps(json.loads(scenario.canonical()), indent=2, sort_keys=True) + "\n")
    run = _Run(scenario, run_dir)
    started = datetime.now(timezone.utc).isoformat()
    enabled = {"solve": True, "mc": scenario.mc.enabled, "frequency": scenario.frequency.enabled,
               "growth": scenario.growth.enabled}
    timings = {}
    for stage in STAGES:
        if stage not in stages or not enabled[stage]:
            continue
        t0 = time.perf_counter()
        log.info("%s: stage %s", scenario.name, stage)
        try:
            getattr(run, f"stage_{stage}")()
        except Exception as exc:
            log.debug("stage %s failed\n%s", stage, traceback.format_exc())
            run.check(stage, f"{stage}.error", float("nan"), "no error", False, f"{type(exc).__name__}: {exc}")
        timings[stage] = time.perf_counter() - t0
    record = _merge_record(run_dir, scenario, run, started, timings)
    return run_dir, record


def _merge_record(run_dir, scenario, run, started, timings):
    path = run_dir / "record.json"
    old = {}
    if path.exists():
        try:
            old = json.loads(path.read_text())
        except json.JSONDecodeError:
            old = {}
    ran = set(timings)
    checks = [c for c in old.get("checks", []) if c.get("stage") not in ran]
    checks += [asdict(c) for c in run.checks]
    checks.sort(key=lambda c: STAGES.index(c["stage"]))
    results = {k: v for k, v in old.get("results", {}).items() if k not in ran}
    results.update(run.summary)
    record = {
        "schemaVersion": 1,
        "scenario": json.loads(scenario.canonical()),
        "scenarioHash": scenario.content_hash(),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "timings": {**old.get("timings", {}), **timings},
        "results": results,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True, allow_nan=True) + "\n")
    return record


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_record(run_dir) -> dict:
    path = Path(run_dir) / "record.json"
    if not Path(run_dir).is_dir():
        raise FileNotFoundError(f"{run_dir}: not a directory")
    if not path.exists():
        raise FileNotFoundError(f"{run_dir}: no record (record.json missing)")
    try:
        rec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupt record ({exc})") from exc
    if "checks" not in rec or "scenario" not in rec:
        raise ValueError(f"{path}: corrupt record (missing fields)")
    return rec
