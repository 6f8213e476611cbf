"""Time-dependent coefficient signals M(t) (matrix) and f(t) (vector).

Both signal types evaluate vectorized: ``M(times)`` returns an array of
shape ``times.shape + (d, d)`` and ``f(times)`` one of shape
``times.shape + (d,)``.  Every signal can be round-tripped through a plain
dict (the same structure the JSON configuration uses).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, interp1d

from .errors import ValidationError

DEFAULT_T_MAX = 100.0
SKEW_EPS = 1e-12
_SKEW_SAMPLES = 65


# ---------------------------------------------------------------------------
# scalar functions of time


@dataclass(frozen=True)
class ScalarFunction:
    """Scalar function of time built from a small closed vocabulary.

    kinds: ``constant`` (value), ``sinusoid`` (mean + amplitude *
    sin(frequency * t + phase)), ``polynomial`` (coeffs, lowest degree first).
    """

    kind: str
    params: tuple[tuple[str, Any], ...]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = dict(self.params)
        if self.kind == "constant":
            return np.full(t.shape, float(p["value"]))
        if self.kind == "sinusoid":
            return p["mean"] + p["amplitude"] * np.sin(p["frequency"] * t + p["phase"])
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(t, np.asarray(p["coeffs"], float))
        raise ValidationError(f"unknown scalar function kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params}}


def scalar_function(spec) -> ScalarFunction:
    """Build a :class:`ScalarFunction` from a number or a dict spec."""
    if isinstance(spec, ScalarFunction):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ScalarFunction("constant", (("value", float(spec)),))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError(f"scalar function spec must be a number or a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "constant":
        return ScalarFunction(kind, (("value", float(spec["value"])),))
    if kind == "sinusoid":
        return ScalarFunction(kind, (
            ("mean", float(spec.get("mean", 0.0))),
            ("amplitude", float(spec.get("amplitude", 1.0))),
            ("frequency", float(spec.get("frequency", 1.0))),
            ("phase", float(spec.get("phase", 0.0))),
        ))
    if kind == "polynomial":
        coeffs = tuple(float(c) for c in spec["coeffs"])
        if not coeffs:
            raise ValidationError("polynomial needs at least one coefficient")
        return ScalarFunction(kind, (("coeffs", coeffs),))
    raise ValidationError(f"unknown scalar function kind {kind!r}")


def _as_callable(fn) -> Callable:
    if callable(fn):
        return fn
    return scalar_function(fn)


def _spec_of(fn):
    return fn.to_dict() if isinstance(fn, ScalarFunction) else repr(fn)


# ---------------------------------------------------------------------------
# helpers


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrices ``[v]_x`` for ``v`` of shape ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def precessing_axis(tilt: float, rate: float, phase: float = 0.0) -> Callable:
    """Unit axis (sin a cos(rt+p), sin a sin(rt+p), cos a) rotating about e3."""

    def axis(t):
        t = np.asarray(t, dtype=float)
        ang = rate * t + phase
        return np.stack([np.sin(tilt) * np.cos(ang),
                         np.sin(tilt) * np.sin(ang),
                         np.full(t.shape, np.cos(tilt))], axis=-1)

    axis.spec = {"kind": "precessing", "tilt": tilt, "rate": rate, "phase": phase}
    return axis


def _sampled_interpolant(times, values, order):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ValidationError("sampled signal needs a strictly increasing time grid with >= 2 points")
    if values.shape[0] != times.size:
        raise ValidationError("sampled signal: one value per time node required")
    if not np.all(np.isfinite(values)):
        raise ValidationError("sampled signal values must be finite")
    if order == 3:
        if times.size < 3:
            raise ValidationError("cubic interpolation needs >= 3 nodes")
        interp = CubicSpline(times, values, axis=0, bc_type="clamped")
    elif order == 1:
        interp = interp1d(times, values, axis=0, assume_sorted=True)
    else:
        raise ValidationError(f"interpolation order must be 1 or 3, got {order}")
    lo, hi = times[0], times[-1]

    def evaluate(t):
        t = np.clip(np.asarray(t, dtype=float), lo, hi)
        return interp(t)

    return evaluate


# ---------------------------------------------------------------------------
# matrix signal


@dataclass(frozen=True, eq=False)
class MatrixSignal:
    """Continuous matrix-valued coefficient ``t -> M(t)`` in dimension 2 or 3.

    Build instances with the ``constant``, ``rotation2d``, ``rotation3d`` and
    ``sampled`` constructors.  ``is_skew`` records whether ``M(t) + M(t)^T``
    vanished at the sampled times of ``[0, t_max]``.
    """

    kind: str
    d: int
    _eval: Callable = field(repr=False)
    spec: dict = field(repr=False)
    t_max: float = DEFAULT_T_MAX
    is_skew: bool = field(init=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValidationError(f"dimension must be 2 or 3, got {self.d}")
        if not self.t_max > 0:
            raise ValidationError("t_max must be positive")
        ts = np.linspace(0.0, self.t_max, _SKEW_SAMPLES)
        m = self(ts)
        if m.shape != (ts.size, self.d, self.d):
            raise ValidationError(f"signal evaluates to shape {m.shape[1:]}, expected {(self.d, self.d)}")
        sym = np.abs(m + np.swapaxes(m, -1, -2)).max()
        object.__setattr__(self, "is_skew", bool(np.isfinite(sym) and sym < SKEW_EPS))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self._eval(t), dtype=float)

    def to_dict(self) -> dict:
        return dict(self.spec)

    @classmethod
    def constant(cls, matrix, t_max: float = DEFAULT_T_MAX) -> "MatrixSignal":
        a = np.array(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("constant signal needs a square matrix")
        a.setflags(write=False)
        return cls("constant", a.shape[0],
                   lambda t: np.broadcast_to(a, t.shape + a.shape),
                   {"kind": "constant", "matrix": a.tolist()}, t_max)

    @classmethod
    def zero(cls, d: int, t_max: float = DEFAULT_T_MAX) -> "MatrixSignal":
        return cls.constant(np.zeros((d, d)), t_max)

    @classmethod
    def rotation2d(cls, omega, t_max: float = DEFAULT_T_MAX) -> "MatrixSignal":
        """``M(t) = omega(t) * [[0, -1], [1, 0]]``."""
        w = _as_callable(omega)
        return cls("rotation2d", 2, lambda t: w(t)[..., None, None] * _J2,
                   {"kind": "rotation2d", "omega": _spec_of(w)}, t_max)

    @classmethod
    def rotation3d(cls, axis, speed, t_max: float = DEFAULT_T_MAX) -> "MatrixSignal":
        """``M(t) x = speed(t) * axis(t) x x`` with the axis normalized.

        ``axis`` is a callable returning ``(..., 3)`` or a sequence of three
        scalar function specs.
        """
        if callable(axis):
            ax = axis
            ax_spec = getattr(axis, "spec", repr(axis))
        else:
            comps = [scalar_function(c) for c in axis]
            if len(comps) != 3:
                raise ValidationError("rotation3d axis needs three components")
            ax = lambda t: np.stack([c(t) for c in comps], axis=-1)  # noqa: E731
            ax_spec = [c.to_dict() for c in comps]
        sp = _as_callable(speed)

        def evaluate(t):
            a = np.asarray(ax(t), dtype=float)
            n = np.linalg.norm(a, axis=-1, keepdims=True)
            return sp(t)[..., None, None] * skew(a / n)

        return cls("rotation3d", 3, evaluate,
                   {"kind": "rotation3d", "axis": ax_spec, "speed": _spec_of(sp)}, t_max)

    @classmethod
    def sampled(cls, times: Sequence[float], values, order: int = 3) -> "MatrixSignal":
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
            raise ValidationError("sampled matrix signal needs values of shape (n, d, d)")
        ev = _sampled_interpolant(times, vals, order)
        return cls("sampled", vals.shape[1], ev,
                   {"kind": "sampled", "times": list(map(float, times)), "values": vals.tolist(),
                    "order": order}, float(times[-1]))


# ---------------------------------------------------------------------------
# vector signal


@dataclass(frozen=True, eq=False)
class VectorSignal:
    """Continuous vector-valued coefficient ``t -> f(t)``."""

    kind: str
    d: int
    _eval: Callable = field(repr=False)
    spec: dict = field(repr=False)
    t_max: float = DEFAULT_T_MAX

    def __post_init__(self):
        v = self(np.linspace(0.0, self.t_max, 5))
        if v.shape != (5, self.d):
            raise ValidationError(f"signal evaluates to shape {v.shape[1:]}, expected {(self.d,)}")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self._eval(t), dtype=float)

    def to_dict(self) -> dict:
        return dict(self.spec)

    @property
    def is_zero(self) -> bool:
        return self.kind == "constant" and not np.any(self.spec["vector"])

    @classmethod
    def constant(cls, vector, t_max: float = DEFAULT_T_MAX) -> "VectorSignal":
        c = np.array(vector, dtype=float)
        if c.ndim != 1:
            raise ValidationError("constant vector signal needs a 1-d vector")
        c.setflags(write=False)
        return cls("constant", c.size, lambda t: np.broadcast_to(c, t.shape + c.shape),
                   {"kind": "constant", "vector": c.tolist()}, t_max)

    @classmethod
    def zero(cls, d: int, t_max: float = DEFAULT_T_MAX) -> "VectorSignal":
        return cls.constant(np.zeros(d), t_max)

    @classmethod
    def sinusoidal(cls, amplitude, frequency: float, phase: float = 0.0,
                   t_max: float = DEFAULT_T_MAX) -> "VectorSignal":
        """``f(t) = amplitude * sin(frequency * t + phase)``."""
        a = np.array(amplitude, dtype=float)
        a.setflags(write=False)
        w, ph = float(frequency), float(phase)
        return cls("sinusoidal", a.size, lambda t: np.sin(w * t + ph)[..., None] * a,
                   {"kind": "sinusoidal", "amplitude": a.tolist(), "frequency": w, "phase": ph},
                   t_max)

    @classmethod
    def sampled(cls, times: Sequence[float], values, order: int = 3) -> "VectorSignal":
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 2:
            raise ValidationError("sampled vector signal needs values of shape (n, d)")
        ev = _sampled_interpolant(times, vals, order)
        return cls("sampled", vals.shape[1], ev,
                   {"kind": "sampled", "times": list(map(float, times)), "values": vals.tolist(),
                    "order": order}, float(times[-1]))
