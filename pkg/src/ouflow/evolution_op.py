"""The evolution system T(t,s) acting on grid vector fields.

For ``t > s``

    (T(t,s) phi)(x) = U(t,s) W(U(s,t) x + g(t,s)),   W = G_Q * phi,

where convolution with the Gaussian ``G_Q`` is the Fourier multiplier
``exp(-<Q xi, xi>)``.  ``W`` is band limited on the box, so it can be
evaluated exactly at the off-grid points ``U(s,t) x + g`` by direct
trigonometric summation (the reference path).  The fast path resamples
``W`` on a finer grid and interpolates with local quintic splines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import ndimage

from . import matrix_flow
from .errors import DomainTruncationError, OutOfBoxError, ValidationError
from .field_grid import Grid, VectorField, _fwd, gradient, laplacian, lp_norm, truncation_defect
from .gaussian_kernel import KernelParams, make_params, symbol_decay
from .signals import MatrixSignal, VectorSignal

log = logging.getLogger(__name__)

TRUNCATION_TOL = 1e-10
# complex entries per summation block (~64 MB)
_BLOCK = 4_000_000


# ---------------------------------------------------------------------------
# band-limited evaluation


def _powers(y: np.ndarray, L: float, count: int) -> np.ndarray:
    """``z^m`` for ``m = 0..count-1`` with ``z = exp(i pi (y + L) / L)``."""
    out = np.empty((y.size, count), dtype=complex)
    out[:, 0] = 1.0
    if count > 1:
        out[:, 1:] = np.exp(1j * np.pi * (y + L) / L)[:, None]
        np.cumprod(out[:, 1:], axis=1, out=out[:, 1:])
    return out


def fold_spectrum(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """Real-FFT spectra prepared for :func:`evaluate_bandlimited`.

    Nyquist modes are dropped (so the interpolant is real everywhere) and
    the half-spectrum weights are folded in.
    """
    N, d = grid.N, grid.d
    c = spec[..., : N // 2] / N ** d
    c[..., 1:] *= 2.0
    for a in range(d - 1):
        idx = [slice(None)] * c.ndim
        idx[c.ndim - d + a] = N // 2
        c[tuple(idx)] = 0.0
    return c


def evaluate_bandlimited(grid: Grid, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate trigonometric interpolants at arbitrary points.

    ``coeffs`` has shape ``(nc, N, ..., N, N/2)`` as returned by
    :func:`fold_spectrum`; ``points`` has shape ``(P, d)``.  Returns
    ``(nc, P)``.  Summation is separable, one axis at a time.
    """
    N, d, L = grid.N, grid.d, grid.L
    nc = coeffs.shape[0]
    half = N // 2
    C = np.ascontiguousarray(coeffs.reshape(-1, half).T)  # (N/2, nc * N^(d-1))
    inner = C.shape[1]
    P = points.shape[0]
    out = np.empty((nc, P))
    block = max(64, _BLOCK // max(inner, 1))
    for a in range(0, P, block):
        pts = points[a:a + block]
        A = _powers(pts[:, d - 1], L, half) @ C
        for ax in range(d - 2, -1, -1):
            pw = _powers(pts[:, ax], L, half + 1)
            E = np.concatenate([pw[:, :half], np.conj(pw[:, half:0:-1])], axis=1)
            A = np.matmul(A.reshape(len(pts), -1, N), E[:, :, None])[..., 0]
        out[:, a:a + block] = A.real.T
    return out


# ---------------------------------------------------------------------------
# checks


def _check_domain(phi: VectorField, p: KernelParams, trunc_tol: float) -> None:
    grid = phi.grid
    defect = truncation_defect(phi)
    if defect > trunc_tol:
        raise DomainTruncationError(
            f"field does not decay inside the inner half-box (defect {defect:.3g} > {trunc_tol:g})")
    half = 0.5 * grid.L
    corners = np.array(np.meshgrid(*([[-half, half]] * grid.d), indexing="ij")).reshape(grid.d, -1).T
    image = corners @ p.U_st.T + p.g
    reach = np.abs(image).max()
    if reach > grid.L:
        raise OutOfBoxError(f"pullback maps the inner half-box to |y| = {reach:.3g} > L = {grid.L:g}")


def _params(M, f, s, t, tol, params):
    if params is not None:
        return params
    return make_params(M, f, s, t, tol)


def _validate_times(s, t):
    if not t >= s:
        raise ValidationError(f"evolution needs t >= s, got s={s}, t={t}")


# ---------------------------------------------------------------------------
# public operations


def transport(phi: VectorField, p: KernelParams, *, with_gradient: bool = False,
              points: np.ndarray | None = None, periodic: bool = False):
    """Reference-path evaluation of ``T(t,s) phi`` (and optionally its gradient).

    Returns the values at ``points`` (default: the grid nodes) with shape
    ``(d, P)``; with ``with_gradient`` also ``(d, d, P)`` where entry
    ``[i, k]`` is ``d/dx_k`` of component ``i``.  Unless ``periodic`` is set
    the smoothed field is taken to vanish outside the box, so pullback
    points that leave ``[-L, L]^d`` contribute zero instead of wrapping.
    """
    grid = phi.grid
    d = grid.d
    decay = symbol_decay(p.Q.matrix, grid.wavenumbers())
    spec = _fwd(grid, phi.data) * decay
    chans = [spec]
    if with_gradient:
        k = grid.wavenumbers(derivative=True)
        chans.append(np.stack([1j * k[l] * spec[j] for j in range(d) for l in range(d)]))
    c = fold_spectrum(grid, np.concatenate(chans))
    x = grid.points if points is None else np.asarray(points, float)
    y = x @ p.U_st.T + p.g
    vals = evaluate_bandlimited(grid, c, y)
    if not periodic:
        vals[:, np.any(np.abs(y) > grid.L, axis=1)] = 0.0
    u = p.U_ts @ vals[:d]
    if not with_gradient:
        return u
    Dw = vals[d:].reshape(d, d, -1)  # [j, l] = d w_j / d z_l
    grad = np.einsum("ij,jlp,lk->ikp", p.U_ts, Dw, p.U_st)
    return u, grad


def apply_T(M: MatrixSignal, f: VectorSignal, s: float, t: float, phi: VectorField,
            tol: float = matrix_flow.DEFAULT_TOL, *, path: Literal["reference", "fast"] = "reference",
            periodic: bool = False, trunc_tol: float = TRUNCATION_TOL,
            params: KernelParams | None = None) -> VectorField:
    """``T(t,s) phi`` on the grid of ``phi``.

    ``periodic=True`` declares ``phi`` a genuine trigonometric polynomial on
    the box; the decay and pullback checks are then skipped.
    """
    _validate_times(s, t)
    if t == s:
        return phi.with_data(phi.data, time=t)
    p = _params(M, f, s, t, tol, params)
    if not periodic:
        _check_domain(phi, p, trunc_tol)
    if path == "fast":
        out, err = _fast(phi, p, periodic)
        log.debug("fast path error estimate %.3g", err)
        return phi.with_data(out, time=t, info={"fast_path_error": err})
    if path != "reference":
        raise ValidationError(f"unknown evaluation path {path!r}")
    u = transport(phi, p, periodic=periodic)
    return phi.with_data(u.reshape(phi.data.shape), time=t)


def apply_T_fast(M, f, s, t, phi, tol=matrix_flow.DEFAULT_TOL, **kw) -> tuple[VectorField, float]:
    """Fast path; returns the field and its estimated max-norm relative error."""
    u = apply_T(M, f, s, t, phi, tol, path="fast", **kw)
    return u, u.info.get("fast_path_error", 0.0)


def _fast(phi: VectorField, p: KernelParams, periodic: bool, factor: int = 2, order: int = 5,
          n_check: int = 256) -> tuple[np.ndarray, float]:
    grid = phi.grid
    d, N = grid.d, grid.N
    fine = Grid(d, grid.L, N * factor)
    spec = np.fft.fftn(phi.data, axes=tuple(range(1, d + 1))) * _full_decay(grid, p.Q.matrix)
    big = np.zeros((d,) + fine.shape, dtype=complex)
    sel = np.r_[0:N // 2, N * factor - N // 2:N * factor]
    src = np.r_[0:N // 2, N // 2:N]
    big[np.ix_(range(d), *([sel] * d))] = spec[np.ix_(range(d), *([src] * d))]
    W = np.fft.ifftn(big, axes=tuple(range(1, d + 1))).real * factor ** d
    y = grid.points @ p.U_st.T + p.g
    idx = ((y + grid.L) / fine.h).T
    vals = np.stack([ndimage.map_coordinates(W[j], idx, order=order, mode="grid-wrap")
                     for j in range(d)])
    if not periodic:
        vals[:, np.any(np.abs(y) > grid.L, axis=1)] = 0.0
    u = p.U_ts @ vals
    step = max(1, y.shape[0] // n_check)
    probe = np.arange(0, y.shape[0], step)
    ref = transport(phi, p, points=grid.points[probe], periodic=periodic)
    scale = max(np.abs(ref).max(), np.finfo(float).tiny)
    err = float(np.abs(ref - u[:, probe]).max() / scale)
    return u.reshape(phi.data.shape), err


def _full_decay(grid: Grid, Q: np.ndarray) -> np.ndarray:
    k = np.pi / grid.L * np.fft.fftfreq(grid.N, 1.0 / grid.N)
    ks = np.meshgrid(*([k] * grid.d), indexing="ij")
    return symbol_decay(Q, ks)


def apply_grad_T(M: MatrixSignal, f: VectorSignal, s: float, t: float, phi: VectorField,
                 tol: float = matrix_flow.DEFAULT_TOL, *, periodic: bool = False,
                 trunc_tol: float = TRUNCATION_TOL, params: KernelParams | None = None) -> np.ndarray:
    """Gradient of ``T(t,s) phi``, shape ``(d, d, N, ..., N)``, ``[i, k] = d_k u_i``.

    Computed by the chain rule from spectral derivatives of the smoothed
    field, so it is exact for band-limited data at any pullback.
    """
    if not t > s:
        raise ValidationError(f"apply_grad_T needs t > s, got s={s}, t={t}")
    p = _params(M, f, s, t, tol, params)
    if not periodic:
        _check_domain(phi, p, trunc_tol)
    _, grad = transport(phi, p, with_gradient=True, periodic=periodic)
    d = phi.grid.d
    return grad.reshape((d, d) + phi.grid.shape)


def apply_T_with_grad(M, f, s, t, phi, tol=matrix_flow.DEFAULT_TOL, *, periodic=False,
                      trunc_tol=TRUNCATION_TOL, params=None):
    """``(T(t,s) phi, grad T(t,s) phi)`` from one summation pass."""
    _validate_times(s, t)
    d = phi.grid.d
    if t == s:
        return phi.with_data(phi.data, time=t), gradient(phi)
    p = _params(M, f, s, t, tol, params)
    if not periodic:
        _check_domain(phi, p, trunc_tol)
    u, grad = transport(phi, p, with_gradient=True, periodic=periodic)
    return (phi.with_data(u.reshape(phi.data.shape), time=t),
            grad.reshape((d, d) + phi.grid.shape))


# ---------------------------------------------------------------------------
# plane waves


@dataclass(frozen=True)
class PlaneWave:
    """``a * trig(<xi, x>)`` with ``trig`` in {sin, cos}."""

    amplitude: np.ndarray
    wavevector: np.ndarray
    phase: Literal["sin", "cos"] = "sin"

    def __post_init__(self):
        a = np.asarray(self.amplitude, float)
        xi = np.asarray(self.wavevector, float)
        if a.shape != xi.shape or a.ndim != 1:
            raise ValidationError("amplitude and wavevector must be vectors of equal length")
        if self.phase not in ("sin", "cos"):
            raise ValidationError("phase must be 'sin' or 'cos'")
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "wavevector", xi)

    @classmethod
    def on_grid(cls, grid: Grid, amplitude, modes, phase="sin") -> "PlaneWave":
        """Plane wave with wavevector ``modes * pi / L``; modes must be resolved."""
        m = np.asarray(modes, dtype=int)
        if np.any(np.abs(m) >= grid.N // 2):
            raise ValidationError(f"modes {m.tolist()} are not resolved on N={grid.N}")
        return cls(np.asarray(amplitude, float), m * np.pi / grid.L, phase)

    @property
    def is_solenoidal(self) -> bool:
        return abs(float(self.amplitude @ self.wavevector)) <= 1e-12 * (
            np.linalg.norm(self.amplitude) * max(np.linalg.norm(self.wavevector), 1.0))

    def _trig(self, arg):
        return np.sin(arg) if self.phase == "sin" else np.cos(arg)

    def _dtrig(self, arg):
        return np.cos(arg) if self.phase == "sin" else -np.sin(arg)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self._trig(x @ self.wavevector)[..., None] * self.amplitude

    def sample(self, grid: Grid) -> VectorField:
        vals = self(grid.points).T.reshape((grid.d,) + grid.shape)
        return VectorField(grid, vals, solenoidal=self.is_solenoidal, time=0.0)


def random_plane_wave(grid: Grid, rng: np.random.Generator, max_mode: int = 4) -> PlaneWave:
    """Solenoidal plane wave with a random nonzero resolved mode and ``a _|_ xi``."""
    while True:
        m = rng.integers(-max_mode, max_mode + 1, size=grid.d)
        if np.any(m):
            break
    xi = m / np.linalg.norm(m)
    v = rng.normal(size=grid.d)
    a = v - (v @ xi) * xi
    return PlaneWave.on_grid(grid, a / np.linalg.norm(a), m, str(rng.choice(["sin", "cos"])))


class PlaneWaveImage:
    """Exact image ``x -> U(t,s) a trig(<xi, U(s,t) x + g>) exp(-<Q xi, xi>)``."""

    def __init__(self, wave: PlaneWave, p: KernelParams | None):
        self.wave = wave
        d = wave.amplitude.size
        if p is None:
            self.U_ts = self.U_st = np.eye(d)
            self.g = np.zeros(d)
            damp = 1.0
        else:
            self.U_ts, self.U_st, self.g = p.U_ts, p.U_st, p.g
            xi = wave.wavevector
            damp = float(np.exp(-xi @ p.Q.matrix @ xi))
        self.vector = damp * (self.U_ts @ wave.amplitude)
        self.frequency = self.U_st.T @ wave.wavevector
        self.offset = float(wave.wavevector @ self.g)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self.wave._trig(x @ self.frequency + self.offset)[..., None] * self.vector

    def gradient(self, x) -> np.ndarray:
        """``(..., d, d)`` with ``[..., i, k] = d_k u_i``."""
        x = np.asarray(x, float)
        c = self.wave._dtrig(x @ self.frequency + self.offset)
        return c[..., None, None] * np.outer(self.vector, self.frequency)


def apply_T_planewave(M: MatrixSignal, f: VectorSignal, s: float, t: float, w: PlaneWave,
                      tol: float = matrix_flow.DEFAULT_TOL,
                      params: KernelParams | None = None) -> PlaneWaveImage:
    _validate_times(s, t)
    if t == s:
        return PlaneWaveImage(w, None)
    return PlaneWaveImage(w, _params(M, f, s, t, tol, params))


# ---------------------------------------------------------------------------
# consistency checks


def evolution_law_check(M: MatrixSignal, f: VectorSignal, s: float, r: float, t: float,
                        phi: VectorField, tol: float = matrix_flow.DEFAULT_TOL, **kw) -> float:
    """``||T(t,s) phi - T(t,r) T(r,s) phi||_2 / ||phi||_2``."""
    if not s <= r <= t:
        raise ValidationError(f"need s <= r <= t, got {(s, r, t)}")
    direct = apply_T(M, f, s, t, phi, tol, **kw)
    mid = apply_T(M, f, s, r, phi, tol, **kw)
    two = apply_T(M, f, r, t, mid, tol, **kw)
    return lp_norm(direct - two, 2) / lp_norm(phi, 2)


def generator(M: MatrixSignal, f: VectorSignal, t: float, u: VectorField) -> np.ndarray:
    """``Delta u + <M(t) x + f(t), grad u> - M(t) u`` with box coordinates ``x``."""
    grid = u.grid
    d = grid.d
    Mt = M(np.array(t))
    ft = f(np.array(t))
    x = grid.coords
    drift = np.tensordot(Mt, x, axes=1) + ft.reshape((d,) + (1,) * d)
    grad = gradient(u)
    adv = np.einsum("ij...,j...->i...", grad, drift)
    return laplacian(u) + adv - np.tensordot(Mt, u.data, axes=1)


def pde_residual(M: MatrixSignal, f: VectorSignal, s: float, t: float, phi: VectorField,
                 dt: float, tol: float = 1e-12, **kw) -> float:
    """Max residual of ``d_t u - A(t) u`` on the inner half-box at time ``t``.

    The time derivative is the central difference of ``T(., s) phi`` over
    ``t +- dt``; spatial terms are spectral.
    """
    if not (t - s > dt > 0):
        raise ValidationError("pde_residual needs t - s > dt > 0")
    up = apply_T(M, f, s, t + dt, phi, tol, **kw)
    um = apply_T(M, f, s, t - dt, phi, tol, **kw)
    u0 = apply_T(M, f, s, t, phi, tol, **kw)
    dudt = (up.data - um.data) / (2 * dt)
    res = dudt - generator(M, f, t, u0)
    mask = phi.grid.inner_mask(0.5)
    return float(np.sqrt((res ** 2).sum(axis=0))[mask].max())
