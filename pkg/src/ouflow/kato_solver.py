"""Mild solutions of the nonlinear problem by Picard iteration on Duhamel's formula.

    u(t) = T(t,0) u0 - int_0^t T(t,s) P((u(s) . grad) u(s)) ds

Iterates live on a time mesh that is graded toward ``t = 0``.  For each mesh
time ``t_k`` the integral is a trapezoid sum over its own graded nodes
``s_j = t_k (1 - (1 - j/n)^gamma)``; the nonlinear term at those nodes is
interpolated in time (cubic spline) from its values on the mesh.  Distances
between iterates are measured in the weighted norm

    |||v||| = max_k max(||v(t_k)||_p, t_k^a ||v(t_k)||_q, t_k^{1/2} ||grad v(t_k)||_p),

with ``a = d/2 (1/p - 1/q)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._parallel import ordered_map
from .errors import DivergenceError, NonContractionError, ValidationError
from .evolution_op import transport
from .field_grid import VectorField, convective, gradient, helmholtz_project, lp_norm, truncation_defect
from .gaussian_kernel import make_params_batch
from .signals import MatrixSignal, VectorSignal

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e6


def graded_mesh(T0: float, n_head: int = 16, n_tail: int = 16, gamma: float = 2.0) -> np.ndarray:
    """Graded head on ``[0, T0/8]`` plus a uniform tail up to ``T0``."""
    if not T0 > 0 or n_head < 1 or n_tail < 1:
        raise ValidationError("mesh needs T0 > 0 and positive point counts")
    head = T0 / 8 * (np.arange(n_head + 1) / n_head) ** gamma
    tail = np.linspace(T0 / 8, T0, n_tail + 1)[1:]
    return np.concatenate([head, tail])


def graded_nodes(t: float, n: int, gamma: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes clustered at ``s = t`` and their trapezoid weights on ``[0, t]``."""
    s = t * (1.0 - (1.0 - np.arange(n + 1) / n) ** gamma)
    s[-1] = t
    h = np.diff(s)
    w = np.zeros(n + 1)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return s, w


@dataclass
class MildSolution:
    times: np.ndarray
    fields: list[VectorField]
    p: float
    q: float
    history: list[float] = field(default_factory=list)

    @property
    def grid(self):
        return self.fields[0].grid

    @property
    def exponent(self) -> float:
        return self.grid.d / 2 * (1 / self.p - 1 / self.q)

    def stacked(self) -> np.ndarray:
        return np.stack([u.data for u in self.fields])

    def at(self, t: float) -> VectorField:
        """Cubic-spline interpolation in time between mesh fields."""
        if not self.times[0] <= t <= self.times[-1]:
            raise ValidationError(f"t={t} outside the mesh [{self.times[0]}, {self.times[-1]}]")
        k = np.searchsorted(self.times, t)
        if k < len(self.times) and self.times[k] == t:
            return self.fields[k]
        data = CubicSpline(self.times, self.stacked(), axis=0)(t)
        return self.fields[0].with_data(data, time=float(t), solenoidal=True)


@dataclass
class IterationReport:
    distances: list[float]
    contraction: list[float]
    residual: float
    times: np.ndarray
    K_q: np.ndarray
    G: np.ndarray
    iterations: int
    truncation: float = 0.0
    mesh_change: float | None = None


# ---------------------------------------------------------------------------
# weighted norms


def _node_norms(u: VectorField, t: float, p: float, q: float, a: float) -> tuple[float, float, float]:
    grid = u.grid
    lp = lp_norm(u, p)
    lq = lp_norm(u, q)
    glp = lp_norm(gradient(u), p, grid)
    return lp, t ** a * lq, math.sqrt(t) * glp


def kato_norm(fields, times, p, q) -> float:
    d = fields[0].grid.d
    a = d / 2 * (1 / p - 1 / q)
    return max(max(_node_norms(u, t, p, q, a)) for u, t in zip(fields, times))


# ---------------------------------------------------------------------------
# Duhamel operator


class DuhamelOperator:
    """Precomputed kernel parameters and linear part for a fixed mesh."""

    def __init__(self, M: MatrixSignal, f: VectorSignal, u0: VectorField, times: np.ndarray,
                 n_quad: int = 16, gamma: float = 2.0, tol: float = 1e-9,
                 nonlinear: bool = True):
        if M.d != u0.grid.d:
            raise ValidationError("signal and field dimensions differ")
        self.M, self.f, self.u0 = M, f, u0
        self.times = np.asarray(times, float)
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValidationError("mesh must start at 0 and increase strictly")
        self.nonlinear = nonlinear
        self.nodes = [graded_nodes(t, n_quad, gamma) for t in self.times[1:]]
        ss, tt = [], []
        for tk, (s, _) in zip(self.times[1:], self.nodes):
            ss.extend(s[:-1])
            tt.extend([tk] * (len(s) - 1))
        ss.extend([0.0] * (len(self.times) - 1))
        tt.extend(self.times[1:])
        params = make_params_batch(M, f, ss, tt, tol)
        self._params = {(a, b): p for a, b, p in zip(ss, tt, params)}
        self.linear = [u0] + ordered_map(
            lambda tk: self._apply(tk, 0.0, u0), list(self.times[1:]))

    def _apply(self, t: float, s: float, phi: VectorField) -> VectorField:
        if t == s:
            return phi
        u = transport(phi, self._params[(s, t)])
        return phi.with_data(u.reshape(phi.data.shape), time=t, solenoidal=True)

    def nonlinear_term(self, u: VectorField) -> VectorField:
        return helmholtz_project(convective(u))

    def __call__(self, prev: list[VectorField]) -> list[VectorField]:
        if not self.nonlinear:
            return list(self.linear)
        grid = self.u0.grid
        F = np.stack([self.nonlinear_term(u).data for u in prev])
        spline = CubicSpline(self.times, F, axis=0)
        out = [self.linear[0]]

        def one(k):
            tk = self.times[k]
            s, w = self.nodes[k - 1]
            Fs = spline(s)
            acc = np.zeros(self.u0.data.shape)
            for j in range(len(s)):
                phi = VectorField(grid, Fs[j], solenoidal=True)
                acc += w[j] * self._apply(tk, s[j], phi).data
            # the projected nonlinearity has algebraic tails that the box cuts off;
            # re-projecting removes the resulting spurious divergence
            acc = helmholtz_project(VectorField(grid, acc)).data
            return self.linear[k].with_data(self.linear[k].data - acc, time=tk, solenoidal=True)

        out.extend(ordered_map(one, range(1, len(self.times))))
        return out


def duhamel_step(M: MatrixSignal, f: VectorSignal, u_prev: MildSolution, u0: VectorField,
                 **kw) -> MildSolution:
    """One Picard step on the mesh of ``u_prev``."""
    op = DuhamelOperator(M, f, u0, u_prev.times, **kw)
    fields = op(u_prev.fields)
    _guard(fields, u0, u_prev.q)
    return MildSolution(u_prev.times, fields, u_prev.p, u_prev.q, list(u_prev.history))


def _guard(fields, u0, q):
    ref = lp_norm(u0, q)
    for u in fields:
        if lp_norm(u, q) > BLOWUP_FACTOR * max(ref, np.finfo(float).tiny):
            raise DivergenceError("Picard iterates exceeded the blow-up guard; the data are "
                                  "too large for the local theory on this horizon")


def _distance(a, b, times, p, q):
    diff = [x - y for x, y in zip(a, b)]
    scale = kato_norm(a, times, p, q)
    num = kato_norm(diff, times, p, q)
    return num / scale if scale > 0 else num


# ---------------------------------------------------------------------------
# driver


def solve_mild(M: MatrixSignal, f: VectorSignal, u0: VectorField, p: float, q: float,
               T0: float, tol: float = 1e-6, max_iter: int = 30, *, n_head: int = 16,
               n_tail: int = 16, n_quad: int = 16, gamma: float = 2.0, flow_tol: float = 1e-9,
               nonlinear: bool = True, refine: bool = False, mesh_tol: float = 1e-4,
               max_refinements: int = 2) -> tuple[MildSolution, IterationReport]:
    """Picard iteration to a mild solution on ``[0, T0]``.

    Requires ``d <= p <= q < inf``.  With ``refine`` the mesh (head, tail and
    quadrature counts) is doubled until the solution changes by less than
    ``mesh_tol`` at the shared nodes.
    """
    d = u0.grid.d
    if not (d <= p <= q < math.inf):
        raise ValidationError(f"need d <= p <= q < inf, got d={d}, p={p}, q={q}")
    sol, rep = _solve_on_mesh(M, f, u0, p, q, T0, tol, max_iter, n_head, n_tail, n_quad,
                              gamma, flow_tol, nonlinear)
    if not refine:
        return sol, rep
    for _ in range(max_refinements):
        n_head, n_tail, n_quad = 2 * n_head, 2 * n_tail, 2 * n_quad
        fine, frep = _solve_on_mesh(M, f, u0, p, q, T0, tol, max_iter, n_head, n_tail, n_quad,
                                    gamma, flow_tol, nonlinear)
        shared = [fine.at(t) for t in sol.times]
        change = _distance(shared, sol.fields, sol.times, p, q)
        frep.mesh_change = change
        log.info("mesh refinement to %d nodes changed the solution by %.3g", len(fine.times), change)
        sol, rep = fine, frep
        if change < mesh_tol:
            break
    return sol, rep


def _solve_on_mesh(M, f, u0, p, q, T0, tol, max_iter, n_head, n_tail, n_quad, gamma,
                   flow_tol, nonlinear):
    if not u0.solenoidal:
        raise ValidationError("initial value must be flagged solenoidal")
    times = graded_mesh(T0, n_head, n_tail, gamma)
    op = DuhamelOperator(M, f, u0, times, n_quad, gamma, flow_tol, nonlinear)
    current = list(op.linear)
    distances: list[float] = []
    contraction: list[float] = []
    bad = 0
    for it in range(1, max_iter + 1):
        new = op(current)
        _guard(new, u0, q)
        dist = _distance(new, current, times, p, q)
        if distances:
            rate = dist / distances[-1] if distances[-1] > 0 else 0.0
            contraction.append(rate)
            bad = bad + 1 if rate >= 1.0 else 0
        distances.append(dist)
        current = new
        log.debug("iteration %d: distance %.3e", it, dist)
        if dist < tol:
            break
        if bad >= 2:
            raise NonContractionError(
                f"Picard iteration is not contracting on [0, {T0}]; try a shorter horizon")
    else:
        raise NonContractionError(
            f"no convergence within {max_iter} iterations on [0, {T0}]; try a shorter horizon")
    residual = _distance(op(current), current, times, p, q)
    sol = MildSolution(times, current, p, q, distances)
    tab = weighted_norm_profile(sol)
    rep = IterationReport(distances, contraction, residual, tab["t"], tab["K_q"], tab["G"],
                          len(distances), max(truncation_defect(u) for u in current))
    return sol, rep


def weighted_norm_profile(sol: MildSolution) -> np.ndarray:
    """Table of ``(t, K_q(t), G(t))`` over the mesh."""
    a = sol.exponent
    rows = []
    for t, u in zip(sol.times, sol.fields):
        _, K, G = _node_norms(u, t, sol.p, sol.q, a)
        rows.append((t, K, G))
    return np.array(rows, dtype=[("t", float), ("K_q", float), ("G", float)])


def locality_probe(M, f, u0, p, q, T0: float, doublings: int = 4, **kw) -> float | None:
    """Double ``T0`` until the iteration fails; return the first failing horizon."""
    T = T0
    for _ in range(doublings + 1):
        try:
            solve_mild(M, f, u0, p, q, T, **kw)
        except (NonContractionError, DivergenceError):
            return T
        T *= 2
    return None
