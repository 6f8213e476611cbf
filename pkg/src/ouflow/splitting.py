"""Strang-split pseudospectral time stepper for the full nonlinear problem.

Independent check on the Duhamel solver: instead of the Gaussian-kernel
representation it integrates

    u_t = Delta u + <M(t) x + f(t), grad u> - M(t) u - P((u . grad) u)

directly.  Heat half-steps are exact in Fourier space; the remaining terms
take one classical RK4 step per time step.  Only the spatial operators of
:mod:`field_grid` are shared with the solver.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .field_grid import VectorField, _fwd, _inv, convective, gradient, helmholtz_project
from .signals import MatrixSignal, VectorSignal


def _rhs(M: MatrixSignal, f: VectorSignal, t: float, u: np.ndarray, grid, nonlinear: bool) -> np.ndarray:
    field = VectorField(grid, u)
    Du = gradient(field)
    Mt = M(t)
    drift = np.tensordot(Mt, grid.coords, axes=1) + np.asarray(f(t)).reshape((grid.d,) + (1,) * grid.d)
    out = np.einsum("ij...,j...->i...", Du, drift) - np.tensordot(Mt, u, axes=1)
    if nonlinear:
        out -= helmholtz_project(convective(field)).data
    return out


def split_step(M, f, t: float, u: np.ndarray, dt: float, grid, nonlinear: bool = True) -> np.ndarray:
    heat = np.exp(-0.5 * dt * grid.ksq())
    u = _inv(grid, _fwd(grid, u) * heat)
    k1 = _rhs(M, f, t, u, grid, nonlinear)
    k2 = _rhs(M, f, t + dt / 2, u + dt / 2 * k1, grid, nonlinear)
    k3 = _rhs(M, f, t + dt / 2, u + dt / 2 * k2, grid, nonlinear)
    k4 = _rhs(M, f, t + dt, u + dt * k3, grid, nonlinear)
    u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return _inv(grid, _fwd(grid, u) * heat)


def split_solve(M: MatrixSignal, f: VectorSignal, u0: VectorField, times, dt: float = 2.5e-3,
                nonlinear: bool = True) -> list[VectorField]:
    """Fields at the increasing output ``times`` (first may be 0)."""
    times = np.asarray(times, float)
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ValidationError("output times must be nonnegative and increasing")
    grid = u0.grid
    u = u0.data.copy()
    t = 0.0
    out = []
    for target in times:
        n = math.ceil((target - t) / dt - 1e-9)
        h = (target - t) / n if n > 0 else 0.0
        for _ in range(n):
            u = split_step(M, f, t, u, h, grid, nonlinear)
            t += h
        t = float(target)
        out.append(VectorField(grid, helmholtz_project(VectorField(grid, u)).data,
                               solenoidal=True, time=t))
    return out
