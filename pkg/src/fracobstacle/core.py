"""Problem data, grids, fields and the small amount of calculus shared by
the solvers and the extension diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class FractionalOrder:
    """Order ``s`` of the fractional Laplacian, restricted to the
    subcritical range ``1/2 < s < 1``."""

    s: float

    def __post_init__(self):
        s = float(self.s)
        if not (0.5 < s < 1.0):
            raise ValueError(f"fractional order must satisfy 1/2 < s < 1, got s={s}")
        object.__setattr__(self, "s", s)

    @property
    def a(self) -> float:
        """Weight exponent of the extension problem, ``1 - 2s``."""
        return 1.0 - 2.0 * self.s

    @property
    def alpha_stable(self) -> float:
        return 2.0 * self.s


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[-R, R]**dim`` with ``n`` nodes per axis.

    ``n`` is odd so that the origin is a node.
    """

    R: float
    n: int
    dim: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.R > 0:
            raise ValueError(f"half-width R must be positive, got {self.R}")
        if self.n < 33:
            raise ValueError(f"need at least 33 nodes per axis, got {self.n}")
        if self.n % 2 == 0:
            raise ValueError(f"node count must be odd so the origin is a node, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def origin_index(self) -> int:
        return (self.n - 1) // 2

    def coords(self) -> tuple[np.ndarray, ...]:
        if self.dim == 1:
            return (self.x,)
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    def index_of(self, x: float) -> int:
        """Nearest node index to the coordinate ``x`` (1-D)."""
        i = int(round((x + self.R) / self.h))
        if not 0 <= i < self.n:
            raise ValueError(f"x={x} lies outside the grid [-{self.R}, {self.R}]")
        return i

    def interior_mask(self, margin: int = 4) -> np.ndarray:
        """Nodes at distance >= ``margin * h`` from the box boundary."""
        m = np.zeros(self.shape, dtype=bool)
        sl = tuple(slice(margin, self.n - margin) for _ in range(self.dim))
        m[sl] = True
        return m


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values of a function on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values have shape {v.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "ScalarField":
        return cls(grid, func(*grid.coords()))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass(frozen=True, eq=False)
class CoefficientSpec:
    """Drift ``b`` and zeroth-order coefficient ``c`` sampled on the grid.

    ``b`` has shape ``(dim, *grid.shape)``; ``c0`` is the asserted lower
    bound of ``c``.
    """

    grid: GridSpec
    b: np.ndarray
    c: np.ndarray
    c0: float
    lipschitz_b: float = field(init=False)

    def __post_init__(self):
        g = self.grid
        b = np.asarray(self.b, dtype=float)
        if b.shape == g.shape and g.dim == 1:
            b = b[None, :]
        if b.shape != (g.dim, *g.shape):
            raise ValueError(f"drift has shape {b.shape}, expected {(g.dim, *g.shape)}")
        c = np.broadcast_to(np.asarray(self.c, dtype=float), g.shape).copy()
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("coefficients must be finite")
        if self.c0 < 0:
            raise ValueError(f"c0 must be nonnegative, got {self.c0}")
        if c.min() < self.c0 - 1e-12:
            raise ValueError(f"min(c)={c.min():.6g} is below the asserted floor c0={self.c0}")
        for arr in (b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "c0", float(self.c0))
        lip = 0.0
        for comp in b:
            for ax in range(g.dim):
                if g.n > 1:
                    lip = max(lip, float(np.max(np.abs(np.diff(comp, axis=ax)))) / g.h)
        object.__setattr__(self, "lipschitz_b", lip)

    @classmethod
    def constant(cls, grid: GridSpec, b: float = 0.0, c: float = 1.0) -> "CoefficientSpec":
        return cls(grid, np.full((grid.dim, *grid.shape), float(b)), np.full(grid.shape, float(c)), float(c))

    @property
    def b1(self) -> np.ndarray:
        """The drift of a 1-D problem as a plain array."""
        return self.b[0]

    @property
    def has_drift(self) -> bool:
        return bool(np.any(self.b != 0.0))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of the obstacle problem ``min(Lu, u - phi) = 0``.

    Values outside the box are taken to be zero.
    """

    order: FractionalOrder
    grid: GridSpec
    coeffs: CoefficientSpec
    obstacle: ScalarField
    decay_tol: float = 1e-3

    def __post_init__(self):
        if self.coeffs.grid != self.grid or self.obstacle.grid != self.grid:
            raise ValueError("coefficients and obstacle must live on the problem grid")
        band = ~band_interior(self.grid, 0.9)
        worst = float(np.max(np.abs(self.obstacle.values[band])))
        if worst > self.decay_tol:
            raise ValueError(
                f"obstacle does not decay: max |phi| on the outer 10% band is {worst:.3g} "
                f"> {self.decay_tol:g}")

    @property
    def phi(self) -> np.ndarray:
        return self.obstacle.values

    def with_obstacle(self, phi) -> "ProblemSpec":
        return ProblemSpec(self.order, self.grid, self.coeffs, self.obstacle.with_values(_vals(phi)),
                           self.decay_tol)


def band_interior(grid: GridSpec, frac: float) -> np.ndarray:
    inside = np.ones(grid.shape, dtype=bool)
    for xi in grid.coords():
        inside &= np.abs(xi) <= frac * grid.R + 1e-12
    return inside


def gradient(f: ScalarField) -> np.ndarray:
    """Nodal gradient, shape ``(dim, *grid.shape)``.

    Central differences in the interior and one-sided differences at the
    boundary, so affine fields are differentiated exactly.
    """
    g = f.grid
    if f.values.shape != g.shape:
        raise ValueError("field does not match its grid")
    if g.n < 3:
        raise ValueError("gradient needs at least 3 nodes per axis")
    d = np.gradient(f.values, g.h)
    if g.dim == 1:
        return np.asarray(d)[None, :]
    return np.stack(d)


# -- weighted integrals over half-discs ------------------------------------

@lru_cache(maxsize=64)
def graded_angular_rule(a: float, m: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_0^pi f(theta) |sin theta|**a dtheta``.

    Each quarter ``(0, pi/2]`` is mapped by ``theta = (pi/2) t**q`` with
    ``q = 1/(1+a)``, which turns the endpoint weight into a smooth function
    of ``t``; Gauss-Legendre is then applied in ``t``. ``m`` nodes per quarter.
    """
    if not -1.0 < a < 1.0:
        raise ValueError(f"weight exponent must lie in (-1, 1), got {a}")
    q = 1.0 / (1.0 + a)
    t, w = np.polynomial.legendre.leggauss(m)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    theta = 0.5 * np.pi * t**q
    jac = 0.5 * np.pi * q * t ** (q - 1.0)
    wq = w * jac * np.sin(theta) ** a
    nodes = np.concatenate([theta, np.pi - theta[::-1]])
    weights = np.concatenate([wq, wq[::-1]])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def omega(a: float, m: int = 32) -> float:
    """``int_{dB_1} |y|**a`` in the (x, y) plane, by the graded rule."""
    _, w = graded_angular_rule(a, m)
    return 2.0 * float(np.sum(w))


def surface_integral(func, r: float, a: float, center: float = 0.0, m: int = 32,
                     extent: float | None = None) -> float:
    """``int_{dB_r(center,0)} g |y|**a`` for ``g(x, y)`` even in ``y``.

    ``func`` is evaluated on the upper half circle only; the lower half is
    accounted for by doubling.
    """
    _check_radius(r, extent)
    theta, w = graded_angular_rule(a, m)
    vals = np.asarray(func(center + r * np.cos(theta), r * np.sin(theta)), dtype=float)
    return 2.0 * r ** (1.0 + a) * float(np.dot(w, vals))


def ball_integral(func, r: float, a: float, center: float = 0.0, m: int = 32,
                  mr: int = 32, extent: float | None = None) -> float:
    """``int_{B_r(center,0)} g |y|**a``, integrating surface values over radii.

    Radii are placed by ``rho = r * t**(1/(2+a))`` which absorbs the
    ``rho**(1+a)`` Jacobian.
    """
    _check_radius(r, extent)
    theta, w = graded_angular_rule(a, m)
    t, wt = np.polynomial.legendre.leggauss(mr)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    rho = r * t ** (1.0 / (2.0 + a))
    X = center + rho[:, None] * np.cos(theta)[None, :]
    Y = rho[:, None] * np.sin(theta)[None, :]
    vals = np.asarray(func(X, Y), dtype=float)
    per_radius = vals @ w
    return 2.0 * r ** (2.0 + a) / (2.0 + a) * float(np.dot(wt, per_radius))


def _check_radius(r, extent):
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    if extent is not None and r > 0.9 * extent:
        raise ValueError(f"radius {r:.4g} exceeds 90% of the grid extent {extent:.4g}")
