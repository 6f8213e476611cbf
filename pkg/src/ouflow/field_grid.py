"""Vector fields on a uniform periodic box ``[-L, L)^d`` and spectral calculus.

The box stands in for R^d: fields are expected to decay well inside it,
which :func:`truncation_defect` measures.  Derivatives, the Helmholtz
projection and the dealiased convective term are Fourier multipliers on
the real FFT of the data.  Odd-order multipliers drop the Nyquist mode so
that they stay real.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Grid:
    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValidationError(f"dimension must be 2 or 3, got {self.d}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValidationError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValidationError("box half-width L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(d, N, ..., N)``."""
        c = np.stack(np.meshgrid(*([self.axis] * self.d), indexing="ij"))
        c.setflags(write=False)
        return c

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates as a ``(N**d, d)`` array."""
        p = self.coords.reshape(self.d, -1).T.copy()
        p.setflags(write=False)
        return p

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    def wavenumbers(self, derivative: bool = False) -> list[np.ndarray]:
        """Broadcastable wavenumber arrays for the real-FFT layout.

        With ``derivative=True`` the Nyquist entries are zeroed.
        """
        N, d = self.N, self.d
        full = np.pi / self.L * np.fft.fftfreq(N, 1.0 / N)
        half = np.pi / self.L * np.fft.rfftfreq(N, 1.0 / N)
        if derivative:
            full = full.copy()
            full[N // 2] = 0.0
            half = half.copy()
            half[-1] = 0.0
        out = []
        for a in range(d):
            k = half if a == d - 1 else full
            shp = [1] * d
            shp[a] = k.size
            out.append(k.reshape(shp))
        return out

    def ksq(self) -> np.ndarray:
        return sum(k ** 2 for k in self.wavenumbers())

    def inner_mask(self, fraction: float = 0.5) -> np.ndarray:
        """Nodes with ``|x_i| <= fraction * L`` for every axis."""
        return np.all(np.abs(self.coords) <= fraction * self.L + 1e-12, axis=0)

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "N": self.N}


@dataclass(frozen=True, eq=False)
class VectorField:
    """``d`` real components sampled on a :class:`Grid`.

    ``data`` has shape ``(d, N, ..., N)`` and is stored read-only.
    """

    grid: Grid
    data: np.ndarray
    solenoidal: bool = False
    time: float | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = np.array(self.data, dtype=float)
        if a.shape != (self.grid.d,) + self.grid.shape:
            raise ValidationError(f"field data shape {a.shape} does not match grid {self.grid}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("field has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    def with_data(self, data, **kw) -> "VectorField":
        kw.setdefault("solenoidal", self.solenoidal)
        kw.setdefault("time", self.time)
        return VectorField(self.grid, data, **kw)

    def __add__(self, other: "VectorField") -> "VectorField":
        return self.with_data(self.data + other.data, solenoidal=self.solenoidal and other.solenoidal)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self.with_data(self.data - other.data, solenoidal=self.solenoidal and other.solenoidal)

    def __mul__(self, c: float) -> "VectorField":
        return self.with_data(c * self.data)

    __rmul__ = __mul__

    def max_norm(self) -> float:
        return float(np.sqrt((self.data ** 2).sum(axis=0)).max())

    def is_solenoidal(self, rtol: float = 1e-8) -> bool:
        scale = self.max_norm()
        return float(np.abs(divergence(self)).max()) <= rtol * max(scale, np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# transforms


def _fwd(grid: Grid, a: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(a, axes=tuple(range(-grid.d, 0)))


def _inv(grid: Grid, a: np.ndarray) -> np.ndarray:
    return np.fft.irfftn(a, s=grid.shape, axes=tuple(range(-grid.d, 0)))


def spectrum(u: VectorField) -> np.ndarray:
    return _fwd(u.grid, u.data)


def helmholtz_project(u: VectorField) -> VectorField:
    """Apply ``Id - k k^T / |k|^2`` modewise; the zero mode passes through."""
    grid = u.grid
    k = grid.wavenumbers(derivative=True)
    uh = spectrum(u)
    ksq = sum(kk ** 2 for kk in k)
    kdotu = sum(k[j] * uh[j] for j in range(grid.d))
    safe = np.where(ksq > 0, ksq, 1.0)
    coef = np.where(ksq > 0, kdotu / safe, 0.0)
    ph = np.stack([uh[j] - k[j] * coef for j in range(grid.d)])
    return u.with_data(_inv(grid, ph), solenoidal=True)


def divergence(u: VectorField) -> np.ndarray:
    grid = u.grid
    k = grid.wavenumbers(derivative=True)
    uh = spectrum(u)
    return _inv(grid, sum(1j * k[j] * uh[j] for j in range(grid.d)))


def gradient(u: VectorField) -> np.ndarray:
    """``out[i, j] = d u_i / d x_j``, shape ``(d, d, N, ..., N)``."""
    grid = u.grid
    k = grid.wavenumbers(derivative=True)
    uh = spectrum(u)
    return np.stack([_inv(grid, np.stack([1j * k[j] * uh[i] for j in range(grid.d)]))
                     for i in range(grid.d)])


def laplacian(u: VectorField) -> np.ndarray:
    return _inv(u.grid, -u.grid.ksq() * spectrum(u))


def gradient_of_scalar(grid: Grid, q: np.ndarray) -> VectorField:
    k = grid.wavenumbers(derivative=True)
    qh = _fwd(grid, q)
    return VectorField(grid, np.stack([_inv(grid, 1j * k[j] * qh) for j in range(grid.d)]))


def _dealias_mask(grid: Grid) -> np.ndarray:
    N = grid.N
    full = np.abs(np.fft.fftfreq(N, 1.0 / N)) < N / 3
    half = np.fft.rfftfreq(N, 1.0 / N) < N / 3
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for a in range(grid.d):
        m = half if a == grid.d - 1 else full
        shp = [1] * grid.d
        shp[a] = m.size
        mask = mask & m.reshape(shp)
    return mask


def convective(u: VectorField) -> VectorField:
    """``(u . grad) u`` with 2/3-rule dealiasing of factors and product."""
    grid = u.grid
    mask = _dealias_mask(grid)
    k = grid.wavenumbers(derivative=True)
    uh = spectrum(u) * mask
    ud = _inv(grid, uh)
    out = np.empty_like(ud)
    for i in range(grid.d):
        acc = np.zeros(grid.shape)
        for j in range(grid.d):
            acc += ud[j] * _inv(grid, 1j * k[j] * uh[i])
        out[i] = acc
    out = _inv(grid, _fwd(grid, out) * mask)
    return u.with_data(out, solenoidal=False)


# ---------------------------------------------------------------------------
# norms


def _magnitude(values: np.ndarray, d: int) -> np.ndarray:
    comp_axes = tuple(range(values.ndim - d))
    if not comp_axes:
        return np.abs(values)
    return np.sqrt((values ** 2).sum(axis=comp_axes))


def _refine(grid: Grid, values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited resampling onto a grid ``factor`` times finer."""
    lead = values.shape[: values.ndim - grid.d]
    flat = values.reshape((-1,) + grid.shape)
    N, M = grid.N, grid.N * factor
    vh = np.fft.fftn(flat, axes=tuple(range(1, grid.d + 1)))
    big = np.zeros((flat.shape[0],) + (M,) * grid.d, dtype=complex)
    lo = np.r_[0:N // 2, M - N // 2:M]
    src = np.r_[0:N // 2, N // 2:N]
    idx = np.ix_(*([np.arange(flat.shape[0])] + [lo] * grid.d))
    sidx = np.ix_(*([np.arange(flat.shape[0])] + [src] * grid.d))
    big[idx] = vh[sidx]
    out = np.fft.ifftn(big, axes=tuple(range(1, grid.d + 1))).real * factor ** grid.d
    return out.reshape(lead + (M,) * grid.d)


def lp_norm(u, p: float, grid: Grid | None = None, oversample: int = 1) -> float:
    """Discrete ``L^p`` norm with the Euclidean norm over components.

    ``u`` is a :class:`VectorField` or an array whose trailing ``d`` axes
    are the grid (pass ``grid`` then).  ``p = inf`` gives the maximum over
    nodes; ``oversample > 1`` takes that maximum on a band-limited refined
    grid instead.
    """
    if isinstance(u, VectorField):
        grid, values = u.grid, u.data
    else:
        if grid is None:
            raise ValidationError("lp_norm of a bare array needs the grid")
        values = np.asarray(u, dtype=float)
    if not (p > 1 or p == np.inf):
        raise ValidationError(f"exponent must be in (1, inf], got {p}")
    if p == np.inf:
        if oversample > 1:
            values = _refine(grid, values, oversample)
        return float(_magnitude(values, grid.d).max())
    mag = _magnitude(values, grid.d)
    return float((np.sum(mag ** p) * grid.cell_volume) ** (1.0 / p))


def parseval_energy(u: VectorField) -> float:
    """``sum |u|^2 h^d`` computed from the spectrum."""
    grid = u.grid
    uh = np.fft.fftn(u.data, axes=tuple(range(1, grid.d + 1)))
    return float((np.abs(uh) ** 2).sum() / grid.N ** grid.d * grid.cell_volume)


def truncation_defect(u) -> float:
    """Largest magnitude outside the inner half-box relative to the overall max."""
    grid = u.grid
    mag = _magnitude(u.data, grid.d)
    top = mag.max()
    if top == 0:
        return 0.0
    outer = ~grid.inner_mask(0.5)
    return float(mag[outer].max() / top)


def is_truncation_adequate(u, tol: float = 1e-10) -> bool:
    return truncation_defect(u) <= tol


# ---------------------------------------------------------------------------
# serialization

_HEADER = struct.Struct("<qqd")


def write_field(path, u: VectorField) -> None:
    """Flat binary: little-endian int64 d, int64 N, float64 L, then components.

    Components follow one after another, each in C order (first axis slowest)
    as little-endian float64.
    """
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.d, g.N, g.L))
        fh.write(np.ascontiguousarray(u.data, dtype="<f8").tobytes())


def read_field(path, solenoidal: bool = False) -> VectorField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated header")
    d, N, L = _HEADER.unpack_from(raw)
    grid = Grid(int(d), float(L), int(N))
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != d * N ** d:
        raise ValidationError(f"{path}: expected {d * N ** d} values, found {data.size}")
    return VectorField(grid, data.reshape((d,) + grid.shape).astype(float), solenoidal=solenoidal)


def export_csv(path, u: VectorField, max_nodes: int = 70_000) -> None:
    g = u.grid
    if g.N ** g.d > max_nodes:
        raise ValidationError(f"grid too large for CSV export ({g.N ** g.d} nodes)")
    pts = g.points
    vals = u.data.reshape(g.d, -1).T
    names = [f"x{i + 1}" for i in range(g.d)] + [f"u{i + 1}" for i in range(g.d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in np.hstack([pts, vals]):
            w.writerow([repr(float(v)) for v in row])
