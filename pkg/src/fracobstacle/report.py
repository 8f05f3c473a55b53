"""Human-readable and machine-readable summaries of a run directory."""

from __future__ import annotations

import logging
import math
from pathlib import Path

from .pipeline import load_record, read_csv, write_csv

log = logging.getLogger(__name__)

CHECK_COLUMNS = ("stage", "name", "value", "band", "passed", "detail")


def format_table(checks: list[dict]) -> str:
    rows = [("stage", "check", "value", "band", "verdict")]
    for c in checks:
        v = c["value"]
        val = "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6g}"
        rows.append((c["stage"], c["name"], val, c["band"], "PASS" if c["passed"] else "FAIL"))
    widths = [max(len(r[j]) for r in rows) for j in range(5)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_figures(run_dir: Path, record: dict) -> list[Path]:
    """Write PNG figures for whichever CSV artifacts the run produced."""
    from . import plotting

    fig_dir = run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    out = []
    results = record.get("results", {})
    trace_path = run_dir / "trace.csv"
    trace = read_csv(trace_path) if trace_path.exists() else None
    if trace is not None:
        out.append(plotting.plot_trace(trace, fig_dir / "solution.png", record["scenario"]["name"]))
    mc_path = run_dir / "mc.csv"
    if trace is not None and mc_path.exists() and mc_path.stat().st_size > 0:
        mc = read_csv(mc_path)
        if len(mc.get("x0", [])):
            out.append(plotting.plot_mc(mc, trace, fig_dir / "mc.png"))
    freq = results.get("frequency", {})
    curves = {}
    for p in freq.get("points", []):
        path = run_dir / p["csv"]
        if path.exists():
            curves[f"x={p['x']:.4g}"] = read_csv(path)
    if curves:
        out.append(plotting.plot_frequency(curves, freq["threshold"], fig_dir / "frequency.png"))
    fits = results.get("growth", {}).get("fits", [])
    if fits:
        s = record["scenario"]["problem"]["s"]
        out.append(plotting.plot_growth(fits, s, fig_dir / "growth.png"))
    return out


def report(run_dir, figures: bool = True, echo=print) -> int:
    """Print the checks table, write ``checks.csv`` (and figures).

    Returns the process exit status: 0 if every check passed, 2 otherwise.
    Raises ``FileNotFoundError``/``ValueError`` for a missing or corrupt
    record.
    """
    run_dir = Path(run_dir)
    record = load_record(run_dir)
    checks = record["checks"]
    write_csv(run_dir / "checks.csv", CHECK_COLUMNS,
              ([c[k] for k in CHECK_COLUMNS] for c in checks))
    echo(f"run {run_dir.name}  (scenario hash {record['scenarioHash'][:16]})")
    echo(format_table(checks))
    failed = [c["name"] for c in checks if not c["passed"]]
    if figures:
        try:
            paths = render_figures(run_dir, record)
            echo(f"figures: {', '.join(str(p.relative_to(run_dir)) for p in paths) or 'none'}")
        except Exception as exc:  # figures never decide the verdict
            log.warning("figure rendering failed: %s", exc)
    if failed:
        echo(f"FAILED ({len(failed)}/{len(checks)}): {', '.join(failed)}")
        return 2
    echo(f"all {len(checks)} checks passed")
    return 0
