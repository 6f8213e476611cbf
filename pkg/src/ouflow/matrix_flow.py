"""Matrix evolution system U(t,s), Gram matrix Q_{t,s} and drift offset g(t,s).

``U(t,s)`` solves ``d/dt U(t,s) = -M(t) U(t,s)``, ``U(s,s) = Id``.  For a
fixed source ``s`` the backward propagator ``V(r) = U(s,r)`` obeys
``d/dr V = V M(r)``, so one forward sweep over ``[s, t]`` yields

    U(t,s),  U(s,t) = V(t),  Q_{t,s} = int_s^t V V^T dr,  g(t,s) = int_s^t V f dr

without ever inverting a matrix.  The sweep is classical RK4 on the
augmented system with fixed steps and step-doubling error control; for the
two integral components RK4 reduces to composite Simpson on the shared
stage values.  All sweeps are batched over many ``(s, t)`` pairs at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoefficientError, ConvergenceError, NearSingularGramError, ValidationError
from .signals import MatrixSignal, VectorSignal

DEFAULT_TOL = 1e-10
MAX_STEPS = 2 ** 17
NEAR_COINCIDENT = 1e-8
# keeps the coefficient tables of one batched sweep around 64 MB
_BATCH_BUDGET = 4_000_000


@dataclass(frozen=True)
class Propagator:
    source: float
    target: float
    matrix: np.ndarray
    tol: float


@dataclass(frozen=True)
class GramMatrix:
    matrix: np.ndarray
    cholesky: np.ndarray
    logdet: float
    s: float
    t: float

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def inv_sqrt_norm(self) -> float:
        """Operator norm of ``Q^{-1/2}``."""
        return float(1.0 / math.sqrt(np.linalg.eigvalsh(self.matrix)[0]))


@dataclass(frozen=True)
class BoundConstants:
    value: float
    horizon: float


@dataclass(frozen=True)
class FlowResult:
    """Output of one batched sweep; arrays carry a leading batch axis."""

    U_ts: np.ndarray
    U_st: np.ndarray
    Q: np.ndarray
    g: np.ndarray
    steps: np.ndarray


# ---------------------------------------------------------------------------
# core sweep


def _sweep(M: MatrixSignal, f: VectorSignal | None, s, t, n: int):
    """Fixed-step RK4 over ``[s_b, t_b]`` for every batch entry ``b``."""
    d = M.d
    B = s.size
    h = (t - s) / n
    tau = s[:, None] + h[:, None] * (0.5 * np.arange(2 * n + 1))
    Mv = M(tau)
    if not np.all(np.isfinite(Mv)):
        raise CoefficientError("matrix signal returned non-finite entries")
    if f is not None:
        fv = f(tau)
        if not np.all(np.isfinite(fv)):
            raise CoefficientError("vector signal returned non-finite entries")
    hb = h[:, None, None]
    eye = np.broadcast_to(np.eye(d), (B, d, d))
    U = eye.copy()
    V = eye.copy()
    Q = np.zeros((B, d, d))
    g = np.zeros((B, d))
    for j in range(n):
        M0, Mh, M1 = Mv[:, 2 * j], Mv[:, 2 * j + 1], Mv[:, 2 * j + 2]
        k1 = -M0 @ U
        k2 = -Mh @ (U + 0.5 * hb * k1)
        k3 = -Mh @ (U + 0.5 * hb * k2)
        k4 = -M1 @ (U + hb * k3)
        V1 = V
        l1 = V1 @ M0
        V2 = V + 0.5 * hb * l1
        l2 = V2 @ Mh
        V3 = V + 0.5 * hb * l2
        l3 = V3 @ Mh
        V4 = V + hb * l3
        l4 = V4 @ M1
        Q = Q + hb / 6 * (V1 @ V1.swapaxes(1, 2) + 2 * V2 @ V2.swapaxes(1, 2)
                          + 2 * V3 @ V3.swapaxes(1, 2) + V4 @ V4.swapaxes(1, 2))
        if f is not None:
            f0, fh, f1 = fv[:, 2 * j, :, None], fv[:, 2 * j + 1, :, None], fv[:, 2 * j + 2, :, None]
            g = g + h[:, None] / 6 * (V1 @ f0 + 2 * V2 @ fh + 2 * V3 @ fh + V4 @ f1)[..., 0]
        U = U + hb / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        V = V + hb / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
    return U, V, Q, g


def _rel(a, b, scale):
    diff = np.abs(a - b).reshape(a.shape[0], -1).max(axis=1)
    return np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)


def _maxabs(a):
    return np.abs(a).reshape(a.shape[0], -1).max(axis=1)


def _initial_steps(M: MatrixSignal, s, t) -> np.ndarray:
    ts = np.linspace(0.0, 1.0, 9)
    tau = s[:, None] + (t - s)[:, None] * ts
    rate = np.abs(M(tau)).sum(axis=-1).max(axis=(-1, -2))
    # non-finite coefficients are reported by the sweep itself
    rate = np.where(np.isfinite(rate), rate, 1.0)
    n = np.ceil(4 * np.abs(t - s) * np.maximum(rate, 1.0)).astype(int)
    return np.maximum(8, 2 ** np.ceil(np.log2(np.maximum(n, 1))).astype(int))


def flow(M: MatrixSignal, f: VectorSignal | None, s, t, tol: float = DEFAULT_TOL) -> FlowResult:
    """Batched evaluation of ``U(t,s)``, ``U(s,t)``, ``Q_{t,s}`` and ``g(t,s)``.

    ``s`` and ``t`` broadcast against each other; ``t < s`` is allowed (the
    sweep then runs backwards and ``Q``/``g`` are the signed integrals).
    Each entry is refined by step doubling until the change between ``n``
    and ``2n`` steps is below ``tol`` relative; the finer result is kept.
    """
    if not tol > 0:
        raise ValidationError("tolerance must be positive")
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    shape = s.shape
    s, t = s.ravel().copy(), t.ravel().copy()
    if f is not None and f.d != M.d:
        raise ValidationError(f"signal dimensions differ: M is {M.d}, f is {f.d}")
    if np.any(~np.isfinite(s)) or np.any(~np.isfinite(t)):
        raise ValidationError("times must be finite")
    if np.any(np.minimum(s, t) < 0):
        raise ValidationError("times must be non-negative")
    d, B = M.d, s.size
    U_ts = np.empty((B, d, d))
    U_st = np.empty((B, d, d))
    Q = np.empty((B, d, d))
    g = np.zeros((B, d))
    steps = np.zeros(B, dtype=int)

    t_max = M.t_max if f is None else min(M.t_max, f.t_max)
    gap = t - s
    near = np.abs(gap) < NEAR_COINCIDENT * t_max
    if np.any(near):
        idx = np.flatnonzero(near)
        Ms = M(s[idx])
        eye = np.eye(d)
        U_ts[idx] = eye - Ms * gap[idx, None, None]
        U_st[idx] = eye + Ms * gap[idx, None, None]
        Q[idx] = gap[idx, None, None] * eye
        if f is not None:
            g[idx] = f(s[idx]) * gap[idx, None]

    todo = np.flatnonzero(~near)
    if todo.size:
        n_all = _initial_steps(M, s[todo], t[todo])
        for n0 in np.unique(n_all):
            _refine(M, f, s, t, todo[n_all == n0], int(n0), tol, (U_ts, U_st, Q, g, steps))

    return FlowResult(U_ts.reshape(shape + (d, d)), U_st.reshape(shape + (d, d)),
                      Q.reshape(shape + (d, d)), g.reshape(shape + (d,)), steps.reshape(shape))


def _sweep_chunked(M, f, s, t, n):
    per = max(1, _BATCH_BUDGET // (n * M.d * M.d * 2 + 1))
    parts = [_sweep(M, f, s[a:a + per], t[a:a + per], n) for a in range(0, s.size, per)]
    return tuple(np.concatenate(p) for p in zip(*parts))


def _refine(M, f, s, t, idx, n, tol, out):
    U_ts, U_st, Q, g, steps = out
    coarse = _sweep_chunked(M, f, s[idx], t[idx], n)
    while idx.size:
        if 2 * n > MAX_STEPS:
            raise ConvergenceError(f"step doubling did not reach tol={tol:g} within {MAX_STEPS} steps")
        fine = _sweep_chunked(M, f, s[idx], t[idx], 2 * n)
        Uc, Vc, Qc, gc = coarse
        Uf, Vf, Qf, gf = fine
        err = np.maximum(_rel(Uc, Uf, _maxabs(Uf)), _rel(Vc, Vf, _maxabs(Vf)))
        err = np.maximum(err, _rel(Qc, Qf, _maxabs(Qf)))
        if f is not None:
            fscale = np.abs(t[idx] - s[idx]) * _maxabs(Vf) * np.abs(f(np.stack([s[idx], t[idx]], 1))).max(axis=(1, 2))
            err = np.maximum(err, _rel(gc, gf, np.maximum(np.linalg.norm(gf, axis=1), fscale)))
        done = err <= tol
        ok = idx[done]
        U_ts[ok], U_st[ok], Q[ok], g[ok] = Uf[done], Vf[done], Qf[done], gf[done]
        steps[ok] = 2 * n
        idx = idx[~done]
        coarse = tuple(a[~done] for a in fine)
        n *= 2


# ---------------------------------------------------------------------------
# public operations


def propagate(M: MatrixSignal, s: float, t: float, tol: float = DEFAULT_TOL) -> Propagator:
    """Evaluate ``U(t,s)``; for ``t < s`` the equation is integrated backwards."""
    r = flow(M, None, s, t, tol)
    return Propagator(float(s), float(t), r.U_ts, tol)


def gram(M: MatrixSignal, s: float, t: float, tol: float = DEFAULT_TOL) -> GramMatrix:
    """Gram matrix ``Q_{t,s} = int_s^t U(s,r) U(s,r)^T dr`` for ``t > s``."""
    if not t > s:
        raise ValidationError(f"gram needs t > s, got s={s}, t={t}")
    r = flow(M, None, s, t, tol)
    return gram_from_matrix(r.Q, s, t)


def gram_from_matrix(Q: np.ndarray, s: float, t: float) -> GramMatrix:
    Q = 0.5 * (Q + Q.T)
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        fb = (t - s) * np.eye(Q.shape[0])
        raise NearSingularGramError(
            f"Gram matrix on [{s}, {t}] is not positive definite", fb) from None
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return GramMatrix(Q, L, logdet, float(s), float(t))


def drift_offset(M: MatrixSignal, f: VectorSignal, s: float, t: float,
                 tol: float = DEFAULT_TOL) -> np.ndarray:
    """Offset ``g(t,s) = int_s^t U(s,r) f(r) dr``."""
    if not t >= s:
        raise ValidationError(f"drift_offset needs t >= s, got s={s}, t={t}")
    if t == s:
        return np.zeros(M.d)
    return flow(M, f, s, t, tol).g


def bound_constant(M: MatrixSignal, T0: float, n_samples: int = 9,
                   tol: float = 1e-8) -> BoundConstants:
    """Sampled ``sup ||U(t,s)||`` over ``[0, T0]^2`` (a lower bound of the sup)."""
    if not T0 > 0 or n_samples < 2:
        raise ValidationError("bound_constant needs T0 > 0 and n_samples >= 2")
    ts = np.linspace(0.0, T0, n_samples)
    tt, ss = np.meshgrid(ts, ts, indexing="ij")
    r = flow(M, None, ss, tt, tol)
    norms = np.linalg.norm(r.U_ts, ord=2, axis=(-2, -1))
    return BoundConstants(float(norms.max()), float(T0))


def trace_integral(M: MatrixSignal, s: float, t: float, tol: float = DEFAULT_TOL) -> float:
    """``int_s^t tr M(r) dr`` by composite 4-point Gauss-Legendre with panel doubling."""
    x, w = np.polynomial.legendre.leggauss(4)
    panels = 4
    prev = None
    while panels <= MAX_STEPS:
        edges = np.linspace(s, t, panels + 1)
        half = 0.5 * np.diff(edges)
        nodes = (edges[:-1] + half)[:, None] + half[:, None] * x
        vals = np.trace(M(nodes), axis1=-2, axis2=-1)
        val = float((half[:, None] * w * vals).sum())
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        panels *= 2
    raise ConvergenceError("trace integral did not converge")
