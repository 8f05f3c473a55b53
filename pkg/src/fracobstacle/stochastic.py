"""Monte Carlo check of the optimal-stopping representation

    u(x) = sup_tau E[ exp(-int_0^tau c(X)) phi(X_tau) ],
    dX = -b(X) dt + dZ,   Z symmetric 2s-stable with E exp(i xi Z_t) = exp(-t |xi|^{2s}).

Increments are drawn exactly by the Chambers-Mallows-Stuck transform.
Random numbers come from a counter-based Philox4x64-10 generator keyed
by ``(seed, path index)``, so every path is reproducible on its own and
results do not depend on the thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .core import FractionalOrder, ProblemSpec

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


@njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block for counter ``(c0..c3)`` and key ``(k0, k1)``."""
    x0, x1, x2, x3 = np.uint64(c0), np.uint64(c1), np.uint64(c2), np.uint64(c3)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, x0)
        hi1, lo1 = _mulhilo(_M1, x2)
        x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return x0, x1, x2, x3


@njit(cache=True, inline="always")
def _unit(x):
    # 53-bit uniform in the open interval (0, 1)
    return (np.float64(x >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _cms(u1, u2, alpha):
    # sin(av)/cos(v)^(1/a) * (cos((1-a)v)/w)^((1-a)/a), with the two powers
    # merged through cos(v)^(-1/a) = cos(v)^(-1) * cos(v)^(-(1-a)/a)
    v = math.pi * (u1 - 0.5)
    w = -math.log(u2)
    cv = math.cos(v)
    return math.sin(alpha * v) / cv * (math.cos((1.0 - alpha) * v) / (w * cv)) ** ((1.0 - alpha) / alpha)


@njit(cache=True)
def _increments(seed, stream, n, alpha, sigma):
    out = np.empty(n)
    k0 = np.uint64(seed)
    k1 = np.uint64(stream)
    for j in range((n + 1) // 2):
        r0, r1, r2, r3 = philox_block(np.uint64(j), 0, 0, 0, k0, k1)
        out[2 * j] = sigma * _cms(_unit(r0), _unit(r1), alpha)
        if 2 * j + 1 < n:
            out[2 * j + 1] = sigma * _cms(_unit(r2), _unit(r3), alpha)
    return out


def stable_scale(order: FractionalOrder, dt: float) -> float:
    """Scale of the increment over ``dt``; ``E exp(i xi dZ) = exp(-dt |xi|^{2s})``."""
    return dt ** (1.0 / order.alpha_stable)


def sample_stable_increment(order: FractionalOrder, dt: float, size: int = 1, seed: int = 0,
                            stream: int = 0) -> np.ndarray:
    """Draw ``size`` independent increments of the symmetric ``2s``-stable
    process over a step ``dt``.

    Args:
        order: fractional order; the stability index is ``2s`` in (1, 2).
        dt: time step, positive.
        size: number of draws.
        seed: 64-bit generator key.
        stream: second key word; distinct streams are independent.
    """
    if not isinstance(order, FractionalOrder):
        order = FractionalOrder(order)
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _increments(np.uint64(seed), np.uint64(stream), int(size), order.alpha_stable,
                       stable_scale(order, dt))


@njit(cache=True, inline="always")
def _interp(vals, x, x0, h):
    t = (x - x0) / h
    n = vals.shape[0]
    if t <= 0.0:
        return vals[0]
    if t >= n - 1:
        return vals[n - 1]
    i = int(math.floor(t))
    w = t - i
    return (1.0 - w) * vals[i] + w * vals[i + 1]


RULE_CONTACT, RULE_FIXED, RULE_EXIT = 0, 1, 2


@njit(cache=True)
def _payoff_one(p, x0, seed, nsteps, dt, sigma, alpha, xmin, h, bv, cv, phiv, contact, kill,
                codes, stop_steps, los, his, out):
    """Run path ``p`` once and settle every rule on it; ``out[j, p]`` gets the
    payoff of rule ``j``. All rules share the path, so each estimate equals
    the one obtained from a separate run with the same seed."""
    k0 = np.uint64(seed)
    k1 = np.uint64(p)
    n = contact.shape[0]
    m = codes.shape[0]
    done = np.zeros(m, dtype=np.bool_)
    left = m
    x = x0
    disc = 0.0
    r2 = np.uint64(0)
    r3 = np.uint64(0)
    for k in range(nsteps + 1):
        if abs(x) > kill:
            break
        for j in range(m):
            if done[j]:
                continue
            rule = codes[j]
            if rule == RULE_CONTACT:
                i = int(math.floor((x - xmin) / h + 0.5))
                stop = 0 <= i < n and contact[i]
            elif rule == RULE_FIXED:
                stop = k == stop_steps[j]
            else:
                stop = x <= los[j] or x >= his[j]
            if stop:
                out[j, p] = math.exp(-disc) * _interp(phiv, x, xmin, h)
                done[j] = True
                left -= 1
        if left == 0 or k == nsteps:
            break
        if k % 2 == 0:
            r0, r1, r2, r3 = philox_block(np.uint64(k // 2), 0, 0, 0, k0, k1)
            dz = _cms(_unit(r0), _unit(r1), alpha)
        else:
            dz = _cms(_unit(r2), _unit(r3), alpha)
        disc += _interp(cv, x, xmin, h) * dt
        x = x - _interp(bv, x, xmin, h) * dt + sigma * dz
    for j in range(m):
        if not done[j]:
            out[j, p] = 0.0


@njit(cache=True, parallel=True)
def _payoffs(x0, seed, npaths, nsteps, dt, sigma, alpha, xmin, h, bv, cv, phiv, contact, kill,
             codes, stop_steps, los, his):
    out = np.empty((codes.shape[0], npaths))
    for p in prange(npaths):
        _payoff_one(p, x0, seed, nsteps, dt, sigma, alpha, xmin, h, bv, cv, phiv, contact,
                    kill, codes, stop_steps, los, his, out)
    return out


@njit(cache=True)
def _path(x0, seed, p, nsteps, dt, sigma, alpha, xmin, h, bv, cv, kill, jumps):
    xs = np.empty(nsteps + 1)
    ds = np.empty(nsteps + 1)
    k0 = np.uint64(seed)
    k1 = np.uint64(p)
    x = x0
    disc = 0.0
    r2 = np.uint64(0)
    r3 = np.uint64(0)
    m = nsteps + 1
    for k in range(nsteps + 1):
        xs[k] = x
        ds[k] = disc
        if abs(x) > kill or k == nsteps:
            m = k + 1
            break
        if k % 2 == 0:
            r0, r1, r2, r3 = philox_block(np.uint64(k // 2), 0, 0, 0, k0, k1)
            dz = _cms(_unit(r0), _unit(r1), alpha)
        else:
            dz = _cms(_unit(r2), _unit(r3), alpha)
        disc += _interp(cv, x, xmin, h) * dt
        x = x - _interp(bv, x, xmin, h) * dt
        if jumps:
            x += sigma * dz
    return xs[:m], ds[:m]


@dataclass(frozen=True)
class PathConfig:
    """Time stepping and sampling parameters for the Monte Carlo check.

    ``kill_radius=None`` uses the half-width of the problem box, which
    matches the zero extension used by the PDE solvers.
    """

    dt: float = 1e-3
    T: float = 10.0
    n_paths: int = 100_000
    seed: int = 0
    kill_radius: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.n_paths < 10_000:
            raise ValueError(f"n_paths must be at least 1e4, got {self.n_paths}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.kill_radius is not None and not self.kill_radius > 0:
            raise ValueError("kill_radius must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def check_horizon(self, c0: float):
        if not c0 > 0:
            raise ValueError("the Monte Carlo representation needs c0 > 0")
        if self.T < 10.0 / c0 - 1e-12:
            raise ValueError(f"horizon T={self.T} is shorter than 10/c0={10.0 / c0}")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_paths: int
    rule: str

    def band(self, k: float = 4.0) -> float:
        return k * self.std_error


def _grid_arrays(spec: ProblemSpec):
    if spec.grid.dim != 1:
        raise NotImplementedError("path simulation is one-dimensional")
    return (float(spec.grid.x[0]), spec.grid.h, np.ascontiguousarray(spec.coeffs.b1, dtype=float),
            np.ascontiguousarray(np.broadcast_to(spec.coeffs.c, spec.grid.shape), dtype=float))


def simulate_path(x0: float, spec: ProblemSpec, config: PathConfig, path_index: int = 0,
                  jumps: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Euler scheme for one path. Returns ``(times, states, discount)`` where
    ``discount[k]`` is the left-endpoint sum of ``c(X_j) dt`` over ``j < k``.
    The path ends at ``T`` or on leaving the kill radius. ``jumps=False``
    switches off the stable part (test hook)."""
    xmin, h, bv, cv = _grid_arrays(spec)
    kill = spec.grid.R if config.kill_radius is None else config.kill_radius
    xs, ds = _path(float(x0), np.uint64(config.seed), np.uint64(path_index), config.n_steps, config.dt,
                   stable_scale(spec.order, config.dt), spec.order.alpha_stable, xmin, h, bv, cv,
                   float(kill), jumps)
    return np.arange(len(xs)) * config.dt, xs, ds


def parse_rule(rule) -> tuple[str, int, float, float, float]:
    """Normalize a stopping rule.

    Accepted forms: ``"contact-set"``, ``"never"``, ``("fixed-time", t)`` and
    ``("exit-interval", lo, hi)``. Returns ``(tag, code, t, lo, hi)``.
    """
    if isinstance(rule, str):
        rule = (rule,)
    tag = rule[0]
    if tag == "contact-set":
        return tag, RULE_CONTACT, 0.0, 0.0, 0.0
    if tag == "never":
        return tag, -1, 0.0, 0.0, 0.0
    if tag == "fixed-time":
        return tag, RULE_FIXED, float(rule[1]), 0.0, 0.0
    if tag == "exit-interval":
        return tag, RULE_EXIT, 0.0, float(rule[1]), float(rule[2])
    raise ValueError(f"unknown stopping rule {rule!r}")


def rule_label(rule) -> str:
    tag, _, t, lo, hi = parse_rule(rule)
    if tag == "fixed-time":
        return f"fixed-time:{t:g}"
    if tag == "exit-interval":
        return f"exit-interval:{lo:g}:{hi:g}"
    return tag


def value_at(x0: float, rule, spec: ProblemSpec, solution, config: PathConfig) -> MCEstimate:
    """Monte Carlo estimate of the payoff of ``rule`` started at ``x0``.

    For ``"contact-set"`` a path stops the first time its nearest grid node
    lies in ``solution.contact_mask`` and collects ``exp(-D) phi(X)``. Paths
    that survive to ``T`` or leave the kill radius pay zero.
    """
    return value_at_many(x0, [rule], spec, solution, config)[0]


def value_at_many(x0: float, rules, spec: ProblemSpec, solution, config: PathConfig) -> list[MCEstimate]:
    """:func:`value_at` for several rules, settled on one set of paths."""
    config.check_horizon(spec.coeffs.c0)
    g = spec.grid
    if not np.isclose((x0 - g.x[0]) / g.h, round((x0 - g.x[0]) / g.h), atol=1e-9):
        raise ValueError(f"x0={x0} is not a grid node")
    parsed = [parse_rule(r) for r in rules]
    contact = np.ascontiguousarray(solution.contact_mask, dtype=np.bool_)
    codes, steps, los, his, sim = [], [], [], [], []
    for j, (tag, code, t_stop, lo, hi) in enumerate(parsed):
        if code == -1:
            continue
        if code == RULE_CONTACT and not contact.any():
            raise ValueError("contact set is empty; use fixed-time or exit-interval probes")
        stop_step = int(round(t_stop / config.dt)) if code == RULE_FIXED else -1
        if stop_step > config.n_steps:
            raise ValueError("fixed stopping time exceeds the horizon")
        codes.append(code)
        steps.append(stop_step)
        los.append(lo)
        his.append(hi)
        sim.append(j)
    results = [MCEstimate(0.0, 0.0, config.n_paths, rule_label(r)) for r in rules]
    if not sim:
        return results
    xmin, h, bv, cv = _grid_arrays(spec)
    kill = g.R if config.kill_radius is None else config.kill_radius
    pay = _payoffs(float(x0), np.uint64(config.seed), config.n_paths, config.n_steps, config.dt,
                   stable_scale(spec.order, config.dt), spec.order.alpha_stable, xmin, h, bv, cv,
                   np.ascontiguousarray(spec.phi, dtype=float), contact, float(kill),
                   np.array(codes, dtype=np.int64), np.array(steps, dtype=np.int64),
                   np.array(los, dtype=float), np.array(his, dtype=float))
    for row, j in enumerate(sim):
        col = pay[row]
        mean = float(np.sum(col) / config.n_paths)
        std = float(np.std(col, ddof=1)) if config.n_paths > 1 else 0.0
        results[j] = MCEstimate(mean, std / math.sqrt(config.n_paths), config.n_paths, results[j].rule)
    return results


def default_alt_rules(x0: float, width: float = 0.25) -> list:
    return [("fixed-time", 0.0), ("fixed-time", 0.1), ("fixed-time", 0.5), ("fixed-time", 1.0),
            ("exit-interval", x0 - width, x0 + width), "never"]


def suboptimality_check(x0: float, spec: ProblemSpec, solution, config: PathConfig, alt_rules=None):
    """Payoffs of alternative stopping rules; each should not exceed ``u(x0)``
    beyond Monte Carlo error."""
    rules = default_alt_rules(x0) if alt_rules is None else alt_rules
    return value_at_many(x0, rules, spec, solution, config)


def set_threads(k: int | None):
    if k:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))
