"""Matrix-valued Gaussian kernel of the evolution system and its Fourier symbol.

For ``t > s`` the kernel is

    k(t,s,x) = (4 pi)^{-d/2} (det Q)^{-1/2} exp(-<Q^{-1} x, x> / 4) U(t,s)

with ``Q = Q_{t,s}``; its Fourier transform is ``U(t,s) exp(-<Q xi, xi>)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import matrix_flow
from .errors import NearSingularGramError, ValidationError
from .matrix_flow import GramMatrix
from .signals import MatrixSignal, VectorSignal


@dataclass(frozen=True)
class KernelParams:
    U_ts: np.ndarray
    U_st: np.ndarray
    Q: GramMatrix
    g: np.ndarray
    s: float
    t: float

    @property
    def d(self) -> int:
        return self.U_ts.shape[0]

    def consistency_defect(self) -> float:
        return float(np.abs(self.U_ts @ self.U_st - np.eye(self.d)).max())


def make_params(M: MatrixSignal, f: VectorSignal, s: float, t: float,
                tol: float = matrix_flow.DEFAULT_TOL) -> KernelParams:
    """``(U(t,s), U(s,t), Q_{t,s}, g(t,s))`` from one shared sweep, ``t > s``."""
    return make_params_batch(M, f, [s], [t], tol)[0]


def make_params_batch(M: MatrixSignal, f: VectorSignal, s, t,
                      tol: float = matrix_flow.DEFAULT_TOL) -> list[KernelParams]:
    s = np.atleast_1d(np.asarray(s, float))
    t = np.atleast_1d(np.asarray(t, float))
    if np.any(~(t > s)) or np.any(s < 0):
        raise ValidationError("kernel parameters need t > s >= 0")
    r = matrix_flow.flow(M, None if f.is_zero else f, s, t, tol)
    out = []
    for b in range(s.size):
        Q = matrix_flow.gram_from_matrix(r.Q[b], s[b], t[b])
        out.append(KernelParams(r.U_ts[b], r.U_st[b], Q, r.g[b].copy(), float(s[b]), float(t[b])))
    return out


def kernel_eval(p: KernelParams, x) -> np.ndarray:
    """Kernel value at ``x`` (shape ``(..., d)``), returned as ``(..., d, d)``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("kernel_eval needs finite points")
    flat = x.reshape(-1, p.d)
    y = solve_triangular(p.Q.cholesky, flat.T, lower=True)
    quad = (y ** 2).sum(axis=0)
    logc = -0.5 * p.d * math.log(4 * math.pi) - 0.5 * p.Q.logdet - 0.25 * quad
    return (np.exp(logc)[:, None, None] * p.U_ts).reshape(x.shape[:-1] + (p.d, p.d))


def scalar_factor(p: KernelParams, x) -> np.ndarray:
    """The Gaussian factor of the kernel without the matrix ``U(t,s)``."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, p.d)
    y = solve_triangular(p.Q.cholesky, flat.T, lower=True)
    logc = -0.5 * p.d * math.log(4 * math.pi) - 0.5 * p.Q.logdet - 0.25 * (y ** 2).sum(axis=0)
    return np.exp(logc).reshape(x.shape[:-1])


def peak_value(p: KernelParams) -> float:
    return math.exp(-0.5 * p.d * math.log(4 * math.pi) - 0.5 * p.Q.logdet)


def symbol_decay(Q: np.ndarray, k: list[np.ndarray]) -> np.ndarray:
    """``exp(-<Q k, k>)`` on broadcastable wavenumber arrays."""
    d = len(k)
    quad = sum(Q[i, j] * k[i] * k[j] for i in range(d) for j in range(d))
    return np.exp(-quad)


def fourier_symbol(p: KernelParams, xi) -> np.ndarray:
    """``U(t,s) exp(-<Q xi, xi>)`` at wavevectors ``xi`` of shape ``(..., d)``."""
    xi = np.asarray(xi, dtype=float)
    quad = np.einsum("...i,ij,...j->...", xi, p.Q.matrix, xi)
    return (np.exp(-quad)[..., None, None] * p.U_ts).astype(complex)


def gram_scaling_report(M: MatrixSignal, s: float, taus, tol: float = matrix_flow.DEFAULT_TOL):
    """Rows ``(tau, ||Q^{-1/2}|| tau^{1/2}, (det Q)^{1/2} tau^{-d/2})``.

    Raises :class:`NearSingularGramError` if some ``Q_{s+tau,s}`` is not
    positive definite.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus <= 0):
        raise ValidationError("all gaps must be positive")
    r = matrix_flow.flow(M, None, np.full(taus.shape, float(s)), s + taus, tol)
    rows = []
    for tau, Q in zip(taus, r.Q):
        G = matrix_flow.gram_from_matrix(Q, s, s + tau)
        rows.append((float(tau), G.inv_sqrt_norm() * math.sqrt(tau),
                     math.exp(0.5 * G.logdet - 0.5 * M.d * math.log(tau))))
    return np.array(rows, dtype=[("tau", float), ("inv_sqrt", float), ("sqrt_det", float)])


__all__ = [
    "KernelParams", "make_params", "make_params_batch", "kernel_eval", "scalar_factor",
    "peak_value", "symbol_decay", "fourier_symbol", "gram_scaling_report", "NearSingularGramError",
]
