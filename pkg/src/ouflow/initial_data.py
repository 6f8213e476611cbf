"""Solenoidal test data: Gaussian vortices and enveloped trigonometric fields.

A vortex is the curl of a Gaussian stream function
``psi(x) = A exp(-|x - c|^2 / (2 sigma^2))``: in 2D ``u = (d2 psi, -d1 psi)``,
in 3D ``u = grad psi x a`` for a fixed unit axis ``a``.  Because heat-type
smoothing maps Gaussians to Gaussians, the image of a vortex under the
evolution system is known in closed form (:func:`vortex_image`).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .field_grid import Grid, VectorField, _fwd, _inv


def _curl_of_gradient(grad_psi: np.ndarray, d: int, axis=None) -> np.ndarray:
    """Map ``grad psi`` (shape ``(d, ...)``) to the vortex velocity."""
    if d == 2:
        return np.stack([grad_psi[1], -grad_psi[0]])
    a = np.asarray((0.0, 0.0, 1.0) if axis is None else axis, dtype=float)
    a = a / np.linalg.norm(a)
    return np.cross(grad_psi, a, axisa=0, axisb=0, axisc=0)


def vortex(grid: Grid, sigma: float = 1.0, amplitude: float = 1.0, center=None,
           axis=None) -> VectorField:
    d = grid.d
    c = np.zeros(d) if center is None else np.asarray(center, float)
    x = grid.coords - c.reshape((d,) + (1,) * d)
    psi = amplitude * np.exp(-(x ** 2).sum(axis=0) / (2 * sigma ** 2))
    grad = -x / sigma ** 2 * psi
    return VectorField(grid, _curl_of_gradient(grad, d, axis), solenoidal=True, time=0.0)


def vortices(grid: Grid, specs, axis=None) -> VectorField:
    """Superposition of vortices, ``specs`` = iterable of (sigma, amplitude, center)."""
    total = np.zeros((grid.d,) + grid.shape)
    for sigma, amp, center in specs:
        total += vortex(grid, sigma, amp, center, axis).data
    return VectorField(grid, total, solenoidal=True, time=0.0)


def vortex_image(points, U_ts, U_st, Q, g, sigma: float = 1.0, amplitude: float = 1.0,
                 center=None, axis=None) -> np.ndarray:
    """Exact ``(T(t,s) u)(x)`` for a vortex ``u`` at ``points`` of shape ``(..., d)``.

    Uses ``G_Q * psi`` = Gaussian with covariance ``sigma^2 Id + 2 Q`` and
    evaluates ``U(t,s) curl(G_Q * psi)(U(s,t) x + g)``.
    """
    x = np.asarray(points, dtype=float)
    d = x.shape[-1]
    c = np.zeros(d) if center is None else np.asarray(center, float)
    C = sigma ** 2 * np.eye(d) + 2 * np.asarray(Q)
    Cinv = np.linalg.inv(C)
    z = x @ np.asarray(U_st).T + g - c
    w = Cinv @ z.reshape(-1, d).T
    quad = (z.reshape(-1, d).T * w).sum(axis=0)
    scale = amplitude * sigma ** d / math.sqrt(np.linalg.det(C))
    psi = scale * np.exp(-0.5 * quad)
    grad = -w * psi
    vel = _curl_of_gradient(grad, d, axis)
    out = np.asarray(U_ts) @ vel
    return out.T.reshape(x.shape)


def heat_vortex(grid: Grid, tau: float, sigma: float = 1.0, amplitude: float = 1.0,
                center=None, axis=None) -> VectorField:
    """Closed-form heat evolution ``e^{tau Delta}`` of :func:`vortex`."""
    s2 = sigma ** 2 + 2 * tau
    amp = amplitude * (sigma ** 2 / s2) ** (grid.d / 2)
    u = vortex(grid, math.sqrt(s2), amp, center, axis)
    return u.with_data(u.data, time=tau)


def enveloped_trig(grid: Grid, sigma: float, wavevectors, coefficients, phases=None,
                   axis=None) -> VectorField:
    """Curl of ``exp(-|x|^2/(2 sigma^2)) * sum_j c_j cos(<k_j, x> + phi_j)``.

    The curl is taken spectrally, so the result is exactly divergence free on
    the grid.
    """
    ks = np.atleast_2d(np.asarray(wavevectors, float))
    cs = np.asarray(coefficients, float)
    ph = np.zeros(len(cs)) if phases is None else np.asarray(phases, float)
    if ks.shape != (len(cs), grid.d):
        raise ValidationError("one wavevector of length d per coefficient required")
    x = grid.coords
    env = np.exp(-(x ** 2).sum(axis=0) / (2 * sigma ** 2))
    trig = sum(c * np.cos(np.tensordot(k, x, axes=1) + p) for k, c, p in zip(ks, cs, ph))
    psi = env * trig
    k = grid.wavenumbers(derivative=True)
    ph_hat = _fwd(grid, psi)
    grad = np.stack([_inv(grid, 1j * k[j] * ph_hat) for j in range(grid.d)])
    return VectorField(grid, _curl_of_gradient(grad, grid.d, axis), solenoidal=True, time=0.0)


def random_trig_field(grid: Grid, sigma: float, n_modes: int, kmax: float, seed: int) -> VectorField:
    """Enveloped trigonometric field with seeded random modes."""
    rng = np.random.default_rng(seed)
    ks = rng.uniform(-kmax, kmax, size=(n_modes, grid.d))
    cs = rng.normal(size=n_modes)
    ph = rng.uniform(0, 2 * np.pi, size=n_modes)
    return enveloped_trig(grid, sigma, ks, cs, ph)
