"""Scenario configuration: a JSON document validated at load time.

Unknown keys are rejected so that typos fail loudly. The content hash of
the canonical form names the output directory.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core import CoefficientSpec, FractionalOrder, GridSpec, ProblemSpec, ScalarField

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)


# -- obstacle catalog ------------------------------------------------------

def _bump(x, center=0.0, width=2.0, amplitude=1.0):
    t = (x - center) / width
    return amplitude * np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 3, 0.0)


def obstacle_values(name: str, x: np.ndarray, amplitude: float = 1.0) -> np.ndarray:
    """Named obstacles, all supported in ``[-2, 2]``.

    ``bump``: ``((1 - (x/2)^2)^+)^3``; ``shifted-bump``: the same profile
    centred at 0.5 with half-width 1.5; ``two-bumps``: bumps of height 1 and
    0.8 centred at -1 and 1 with half-width 0.95; ``negative``: minus half
    the bump, for which the solution vanishes identically.
    """
    if name == "bump":
        return _bump(x, amplitude=amplitude)
    if name == "shifted-bump":
        return _bump(x, 0.5, 1.5, amplitude)
    if name == "two-bumps":
        return _bump(x, -1.0, 0.95, amplitude) + _bump(x, 1.0, 0.95, 0.8 * amplitude)
    if name == "negative":
        return -0.5 * _bump(x, amplitude=amplitude)
    raise ValueError(f"unknown obstacle {name!r}")


class ObstacleConfig(_Strict):
    name: Literal["bump", "shifted-bump", "two-bumps", "negative"] = "bump"
    amplitude: float = Field(1.0, gt=0)


class ConstantProfile(_Strict):
    kind: Literal["constant"] = "constant"
    value: float = 0.0


class SineProfile(_Strict):
    """``offset + amplitude * sin(frequency * x)``."""

    kind: Literal["sine"] = "sine"
    amplitude: float = 0.3
    frequency: float = 1.0
    offset: float = 0.0


Profile = Union[ConstantProfile, SineProfile]


def profile_values(p: Profile, x: np.ndarray) -> np.ndarray:
    if p.kind == "constant":
        return np.full_like(x, p.value)
    return p.offset + p.amplitude * np.sin(p.frequency * x)


class ProblemConfig(_Strict):
    s: float = 0.75
    R: float = Field(8.0, gt=0)
    n: int = 513
    obstacle: ObstacleConfig = ObstacleConfig()
    drift: Profile = Field(default_factory=lambda: ConstantProfile(value=0.3), discriminator="kind")
    reaction: Profile = Field(default_factory=lambda: ConstantProfile(value=1.0), discriminator="kind")
    decay_tol: float = Field(1e-3, alias="decayTol", gt=0)

    @field_validator("s")
    @classmethod
    def _order(cls, v):
        FractionalOrder(v)
        return v

    @field_validator("n")
    @classmethod
    def _nodes(cls, v):
        GridSpec(1.0, v)
        return v

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self, n: int | None = None) -> ProblemSpec:
        grid = GridSpec(self.R, self.n if n is None else n)
        x = grid.x
        b = profile_values(self.drift, x)
        c = profile_values(self.reaction, x)
        coeffs = CoefficientSpec(grid, b, c, float(c.min()))
        phi = ScalarField(grid, obstacle_values(self.obstacle.name, x, self.obstacle.amplitude))
        return ProblemSpec(FractionalOrder(self.s), grid, coeffs, phi, self.decay_tol)


class SolverConfig(_Strict):
    eps_schedule: list[float] = Field([1e-1, 1e-2, 1e-3, 1e-4], alias="epsSchedule")
    tol: float = Field(1e-9, gt=0)
    method: Literal["picard", "newton"] = "picard"

    @field_validator("eps_schedule")
    @classmethod
    def _schedule(cls, v):
        if not v or any(e <= 0 for e in v) or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsSchedule must be positive and strictly decreasing")
        if v[-1] > 1e-4:
            raise ValueError("the last epsilon must be at most 1e-4")
        return v


class MCConfig(_Strict):
    enabled: bool = True
    dt: float = Field(1e-3, gt=0)
    T: float = Field(10.0, gt=0)
    n_paths: int = Field(100_000, alias="nPaths", ge=10_000)
    kill_radius: Optional[float] = Field(None, alias="killRadius")
    probes: Optional[list[float]] = None
    alt_rules: bool = Field(True, alias="altRules")
    allowance: float = Field(0.02, ge=0, description="band in units of sup|phi|")


class FrequencyConfig(_Strict):
    enabled: bool = True
    alpha: Optional[float] = None
    p: Optional[float] = None
    r_max: float = Field(0.5, alias="rMax", gt=0)
    r_min_cells: float = Field(8.0, alias="rMinCells", gt=0)
    rows: int = Field(16, ge=2)
    n_fit: int = Field(5, alias="nFit", ge=2)
    fine_n: Optional[int] = Field(None, alias="fineN")


class GrowthConfig(_Strict):
    enabled: bool = True
    fine_n: Optional[int] = Field(16385, alias="fineN")
    max_cells: int = Field(16, alias="maxCells", ge=6)


class Scenario(_Strict):
    schema_version: Literal[1] = Field(alias="schemaVersion")
    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    seed: int = Field(0, ge=0, lt=2**64)
    problem: ProblemConfig = ProblemConfig()
    solver: SolverConfig = SolverConfig()
    mc: MCConfig = MCConfig()
    frequency: FrequencyConfig = FrequencyConfig()
    growth: GrowthConfig = GrowthConfig()

    @model_validator(mode="after")
    def _fine_grids(self):
        for fine in (self.frequency.fine_n, self.growth.fine_n):
            if fine is not None:
                if (fine - 1) % (self.problem.n - 1) != 0:
                    raise ValueError(f"fine grid n={fine} must refine n={self.problem.n} by an integer factor")
                GridSpec(self.problem.R, fine)
        return self

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True,
                          separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def run_name(self) -> str:
        return f"{self.name}-{self.content_hash()[:8]}"

    def with_seed(self, seed: int | None) -> "Scenario":
        if seed is None:
            return self
        data = json.loads(self.canonical())
        data["seed"] = seed
        return parse_scenario(data)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file; raises ``ValueError`` with
    field-level messages on bad input."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return parse_scenario(data)


def parse_scenario(data: dict) -> Scenario:
    from pydantic import ValidationError

    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        lines = [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise ValueError("invalid scenario:\n  " + "\n  ".join(lines)) from None
