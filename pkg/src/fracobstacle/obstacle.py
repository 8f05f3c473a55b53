"""Obstacle problem ``min(Lu, u - phi) = 0`` by monotone penalization, and a
projected Gauss-Seidel solver for the discrete complementarity problem
that serves as an independent check on small grids."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import ProblemSpec, ScalarField
from .operator import build_kernel_table, quadrature_matrix

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)


class MonotonicityError(RuntimeError):
    """The penalization sequence decreased; indicates a solver bug."""


class StallError(RuntimeError):
    pass


class DiscreteOperator:
    """``L = (-Delta)^s + b d/dx + c`` on a 1-D grid.

    The fractional part uses the positive-weight quadrature with zero
    extension, a symmetric Toeplitz matrix. The drift uses central
    differences wherever that keeps the off-diagonal entries nonpositive
    and one-sided upwind differences elsewhere, so the assembled matrix is
    always an M-matrix. Products are computed by FFT through a circulant
    embedding; :attr:`matrix` assembles the dense form on demand.
    """

    def __init__(self, spec: ProblemSpec):
        if spec.grid.dim != 1:
            raise NotImplementedError("obstacle solvers are implemented in 1-D")
        self.spec = spec
        g = spec.grid
        n, h = g.n, g.h
        self.n = n
        self.table = build_kernel_table(spec.order, g, "monotone")
        self.column = np.concatenate([[self.table.diagonal], -self.table.cns * self.table.weights[: n - 1]])
        b = spec.coeffs.b1
        near = self.table.cns * self.table.weights[0]
        self.upwind_rows = np.abs(b) / (2 * h) > near
        lower, diag, upper = np.zeros(n), np.zeros(n), np.zeros(n)
        central = ~self.upwind_rows
        lower[central] = -b[central] / (2 * h)
        upper[central] = b[central] / (2 * h)
        fwd = self.upwind_rows & (b > 0)
        bwd = self.upwind_rows & (b < 0)
        diag[fwd] += b[fwd] / h
        lower[fwd] -= b[fwd] / h
        diag[bwd] -= b[bwd] / h
        upper[bwd] += b[bwd] / h
        diag += np.broadcast_to(spec.coeffs.c, (n,))
        lower[0] = 0.0
        upper[-1] = 0.0
        self.lower, self.diag, self.upper = lower, diag, upper
        emb = np.concatenate([self.column, self.column[-2:0:-1]])
        self._m = len(emb)
        self._emb_hat = np.fft.rfft(emb)
        self._matrix = None
        if self.upwind_rows.any():
            log.info("drift upwinded on %d rows to keep the M-matrix property", int(self.upwind_rows.sum()))

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            A = linalg.toeplitz(self.column)
            i = np.arange(self.n)
            A[i, i] += self.diag
            A[i[1:], i[:-1]] += self.lower[1:]
            A[i[:-1], i[1:]] += self.upper[:-1]
            self._matrix = A
        return self._matrix

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(getattr(u, "values", u), dtype=float)
        if self._matrix is not None:
            return self._matrix @ u
        return self.matvec(u)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        z = np.zeros(self._m)
        z[: self.n] = u
        out = np.fft.irfft(self._emb_hat * np.fft.rfft(z), n=self._m)[: self.n]
        out += self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def circulant_solve(self, r: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Approximate inverse used as a preconditioner: the circulant
        embedding of the Toeplitz part plus the mean drift and ``c``."""
        m = self._m
        theta = 2 * np.pi * np.arange(m // 2 + 1) / m
        h = self.spec.grid.h
        bbar = float(np.mean(self.spec.coeffs.b1))
        sym = (self._emb_hat + np.mean(self.diag) + shift
               + 1j * bbar * np.sin(theta) / h)
        z = np.zeros(m)
        z[: self.n] = r
        return np.fft.irfft(np.fft.rfft(z) / sym, n=m)[: self.n]

    @property
    def symmetric(self) -> bool:
        return not np.any(self.lower) and not np.any(self.upper)

    def is_m_matrix(self) -> bool:
        A = self.matrix
        off = A - np.diag(np.diag(A))
        return bool(np.all(off <= 0) and np.all(A.sum(axis=1) >= -1e-12))


def beta_eps(t, epsilon: float):
    """Penalty ``t^+ / epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return np.maximum(t, 0.0) / epsilon


def gamma_eps(v: np.ndarray, phi: np.ndarray, epsilon: float) -> np.ndarray:
    """``beta_eps(phi - v) + v/eps``, i.e. ``max(phi, v)/eps``; non-decreasing in ``v``."""
    return np.where(phi > v, phi, v) / epsilon


@dataclass
class PenalizationState:
    """Outcome of one penalized solve.

    ``iterates`` keeps a thinned record of the trajectory (the first few
    iterates, then every power of two, then the last); the extremal
    statistics are accumulated over every iterate.
    """

    epsilon: float
    u: np.ndarray
    beta_term: np.ndarray
    iterations: int
    iterates: list = field(default_factory=list)
    min_increment: float = np.inf
    min_value: float = np.inf
    max_value: float = -np.inf
    phi_sup: float = 0.0
    lphi_pos: float = 0.0

    @property
    def monotone(self) -> bool:
        return self.min_increment >= -1e-10

    @property
    def bounded(self) -> bool:
        return self.min_value >= -1e-10 and self.max_value <= self.phi_sup + 1e-10


def _keep(k: int) -> bool:
    return k <= 8 or (k & (k - 1)) == 0


def penalized_solve(spec: ProblemSpec, epsilon: float, tol: float = 1e-9, u_init=None,
                    max_iter: int = 2_000_000, operator: DiscreteOperator | None = None,
                    method: str = "picard") -> PenalizationState:
    """Solve ``Lu = beta_eps(phi - u)``.

    ``method="picard"`` is the monotone iteration
    ``(L + 1/eps) u_k = gamma_eps(u_{k-1})`` started from ``u_0 = 0`` (or from
    a subsolution ``u_init``, e.g. the solution for a larger ``eps``). It
    stops once successive iterates differ by at most ``tol``.

    ``method="newton"`` applies semismooth Newton to the same equation.
    Because the penalty is convex, Newton from a subsolution is also
    monotone and stays below the solution; it needs a handful of steps.
    """
    op = operator or DiscreteOperator(spec)
    phi = spec.phi
    n = spec.grid.n
    A = op.matrix
    u = np.zeros(n) if u_init is None else np.array(getattr(u_init, "values", u_init), dtype=float)
    state = PenalizationState(epsilon, u, np.zeros(n), 0, [u.copy()],
                              min_value=float(u.min()), max_value=float(u.max()),
                              phi_sup=float(np.max(np.abs(phi))),
                              lphi_pos=float(np.max(np.maximum(op(phi), 0.0))))
    if method == "picard":
        lu = linalg.lu_factor(A + np.eye(n) / epsilon)
        step = lambda v: linalg.lu_solve(lu, gamma_eps(v, phi, epsilon))
    elif method == "newton":
        def step(v):
            active = phi > v
            J = A.copy()
            J[np.diag_indices(n)] += active / epsilon
            rhs = np.where(active, phi / epsilon, 0.0)
            return linalg.solve(J, rhs)
    else:
        raise ValueError(f"unknown method {method!r}")
    for k in range(1, max_iter + 1):
        new = step(u)
        inc = new - u
        state.min_increment = min(state.min_increment, float(inc.min()))
        state.min_value = min(state.min_value, float(new.min()))
        state.max_value = max(state.max_value, float(new.max()))
        if state.min_increment < -1e-8:
            raise MonotonicityError(
                f"penalization iterate decreased by {-state.min_increment:.3e} at step {k}")
        u = new
        if _keep(k):
            state.iterates.append(u.copy())
        if float(np.max(np.abs(inc))) <= tol:
            break
    else:
        raise StallError(f"penalized solve did not reach tol={tol} in {max_iter} iterations")
    if not _keep(k):
        state.iterates.append(u.copy())
    state.u = u
    state.iterations = k
    state.beta_term = beta_eps(phi - u, epsilon)
    return state


@dataclass
class ObstacleSolution:
    u: ScalarField
    phi: ScalarField
    contact_mask: np.ndarray
    residual_lu: ScalarField
    comp_residual: float
    free_boundary_nodes: list
    contact_tol: float
    penetration_tol: float
    epsilon: float
    lphi_pos: float
    comp_history: list = field(default_factory=list)
    states: list = field(default_factory=list)
    method: str = "penalization"

    @property
    def grid(self):
        return self.u.grid

    def contact_intervals(self) -> list[tuple[int, int]]:
        """Maximal runs of contact nodes as inclusive index pairs."""
        m = self.contact_mask.astype(int)
        d = np.diff(np.concatenate([[0], m, [0]]))
        starts = np.flatnonzero(d == 1)
        ends = np.flatnonzero(d == -1) - 1
        return list(zip(starts.tolist(), ends.tolist()))


def _finish(spec, op, u, contact_tol, penetration_tol, epsilon, lphi_pos, method, comp_history=(), states=()):
    phi = spec.phi
    Lu = op(u)
    interior = spec.grid.interior_mask(4)
    comp = float(np.max(np.abs(np.minimum(Lu, u - phi))[interior]))
    # {u = phi = 0} outside the obstacle's support carries no free boundary
    mask = ((u - phi) <= contact_tol) & (phi > 0)
    fb = [i for i in range(len(mask) - 1) if mask[i] != mask[i + 1]]
    # report the contact-side node of each transition
    fb = sorted({i if mask[i] else i + 1 for i in fb})
    return ObstacleSolution(ScalarField(spec.grid, u), spec.obstacle, mask, ScalarField(spec.grid, Lu),
                            comp, fb, contact_tol, penetration_tol, epsilon, lphi_pos, list(comp_history), list(states),
                            method)


def obstacle_solve(spec: ProblemSpec, eps_schedule=DEFAULT_SCHEDULE, tol: float = 1e-9,
                   method: str = "picard", keep_states: bool = True) -> ObstacleSolution:
    """Penalized solves along a decreasing ``eps`` schedule with warm starts.

    Each solution is a subsolution for the next (smaller) ``eps``, so the
    warm start keeps the iteration monotone.
    """
    eps_schedule = list(eps_schedule)
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be a nonempty list of positive numbers")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    op = DiscreteOperator(spec)
    u = None
    history, states = [], []
    for eps in eps_schedule:
        st = penalized_solve(spec, eps, tol, u_init=u, operator=op, method=method)
        u = st.u
        Lu = op(u)
        interior = spec.grid.interior_mask(4)
        history.append(float(np.max(np.abs(np.minimum(Lu, u - spec.phi))[interior])))
        log.debug("eps=%g: %d iterations, comp residual %.3e", eps, st.iterations, history[-1])
        states.append(st if keep_states else None)
    lphi_pos = states[-1].lphi_pos if keep_states else float(np.max(np.maximum(op(spec.phi), 0)))
    # penalized solutions sit below phi on the contact set by at most eps*||(L phi)^+||
    penetration = eps_schedule[-1] * lphi_pos + 10 * tol
    return _finish(spec, op, u, 10 * tol, penetration, eps_schedule[-1], lphi_pos, "penalization", history, states)


def lcp_oracle(spec: ProblemSpec, tol: float = 1e-10, max_sweeps: int = 200_000) -> ObstacleSolution:
    """Projected Gauss-Seidel on ``min(Au, u - phi) = 0`` with the dense
    discrete operator. Restricted to small grids (``n <= 129``)."""
    g = spec.grid
    if g.n > 129:
        raise ValueError(f"lcp oracle is limited to n <= 129 nodes, got {g.n}")
    op = DiscreteOperator(spec)
    A = op.matrix
    phi = spec.phi
    diag = np.diag(A).copy()
    u = np.maximum(phi, 0.0)
    n = g.n
    for sweep in range(max_sweeps):
        delta = 0.0
        for i in range(n):
            r = A[i] @ u - diag[i] * u[i]
            new = max(phi[i], -r / diag[i])
            delta = max(delta, abs(new - u[i]))
            u[i] = new
        res = np.max(np.abs(np.minimum(A @ u, u - phi)))
        if res <= tol and delta <= tol:
            break
    else:
        raise StallError(f"projected Gauss-Seidel stalled; last residual {res:.3e}")
    lphi_pos = float(np.max(np.maximum(op(phi), 0)))
    return _finish(spec, op, u, 10 * tol, 10 * tol, 0.0, lphi_pos, "lcp")


def _free_solve(op: DiscreteOperator, free: np.ndarray, rhs: np.ndarray, x0=None,
                rtol: float = 1e-13, dense_limit: int = 2049) -> np.ndarray:
    """Solve ``A[free, free] y = rhs``; dense below ``dense_limit`` nodes,
    preconditioned Krylov otherwise."""
    if op.n <= dense_limit:
        A = op.matrix
        return linalg.solve(A[np.ix_(free, free)], rhs)
    from scipy.sparse.linalg import LinearOperator, bicgstab, cg

    nf = int(free.sum())

    def mv(v):
        full = np.zeros(op.n)
        full[free] = v
        return op.matvec(full)[free]

    def pc(v):
        full = np.zeros(op.n)
        full[free] = v
        return op.circulant_solve(full)[free]

    A = LinearOperator((nf, nf), matvec=mv)
    M = LinearOperator((nf, nf), matvec=pc)
    solver = cg if op.symmetric else bicgstab
    y, info = solver(A, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=20 * nf, M=M)
    if info != 0:
        raise StallError(f"Krylov solve on {nf} free nodes did not converge (info={info})")
    return y


def lcp_active_set(spec: ProblemSpec, initial_active: np.ndarray | None = None, max_iter: int = 100,
                   coarse_limit: int = 1025) -> ObstacleSolution:
    """Primal-dual active-set solution of the discrete complementarity
    problem ``min(Au, u - phi) = 0`` with the same discrete operator as the
    penalization.

    Each step fixes ``u = phi`` on the active set and solves ``Au = 0`` on
    the rest. For an M-matrix the active sets settle after finitely many
    steps. Without an initial guess, grids finer than ``coarse_limit`` are
    seeded from the solution on a grid with half the resolution.
    """
    g = spec.grid
    op = DiscreteOperator(spec)
    phi = spec.phi
    if initial_active is None:
        if g.n > coarse_limit and (g.n - 1) % 2 == 0 and (g.n - 1) // 2 + 1 >= 33:
            cg_ = type(g)(g.R, (g.n - 1) // 2 + 1, g.dim)
            coarse = _restrict(spec, cg_)
            csol = lcp_active_set(coarse, coarse_limit=coarse_limit)
            initial_active = np.interp(g.x, cg_.x, csol.contact_mask.astype(float)) > 0.5
        else:
            initial_active = phi > np.maximum(phi.max(), 0) * 0.5
    active = np.asarray(initial_active, dtype=bool) & (phi > 0)
    u = np.maximum(phi, 0.0)
    scale = max(1.0, float(np.max(np.abs(phi))))
    for it in range(max_iter):
        free = ~active
        new = np.where(active, phi, 0.0)
        if free.any():
            rhs = -op(np.where(active, phi, 0.0))[free]
            new[free] = _free_solve(op, free, rhs, x0=u[free])
        lam = op(new)
        nxt = lam + (phi - new) > 1e-12 * scale
        u = new
        if np.array_equal(nxt, active):
            break
        active = nxt
    else:
        raise StallError("active-set iteration did not settle")
    lphi_pos = float(np.max(np.maximum(op(phi), 0)))
    sol = _finish(spec, op, u, 1e-12 * scale, 1e-12 * scale, 0.0, lphi_pos, "active-set")
    sol.comp_history = [it + 1]
    return sol


def _restrict(spec: ProblemSpec, coarse_grid) -> ProblemSpec:
    from .core import CoefficientSpec

    step = (spec.grid.n - 1) // (coarse_grid.n - 1)
    sl = slice(None, None, step)
    cs = spec.coeffs
    b = cs.b[..., sl]
    c = np.broadcast_to(cs.c, spec.grid.shape)[sl]
    coeffs = CoefficientSpec(coarse_grid, b, c, cs.c0)
    return ProblemSpec(spec.order, coarse_grid, coeffs, ScalarField(coarse_grid, spec.phi[sl]),
                       spec.decay_tol)


def polish_active_set(spec: ProblemSpec, solution: ObstacleSolution, max_iter: int = 100) -> ObstacleSolution:
    """Exact discrete complementarity solution seeded with the contact set
    of a penalized ``solution``.

    Penalized solutions undershoot ``phi`` on the contact set by about
    ``eps * ||(L phi)^+||``; the local analysis near the free boundary needs
    the exact discrete contact set.
    """
    op_guess = (solution.u.values - spec.phi) <= 0
    return lcp_active_set(spec, initial_active=op_guess, max_iter=max_iter)
