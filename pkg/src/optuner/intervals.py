"""Vectorized outward-rounded interval arithmetic on numpy arrays.

:class:`IA` holds elementwise ``[lo, hi]`` bounds of any (broadcastable)
shape.  Every primitive returns an enclosure of the true real image: after a
round-to-nearest computation each bound is pushed one representable step
outward, and transcendental results one further step to absorb host library
error (numpy's binary64 routines measure under one ulp).

Domain violations (log of non-positive values, division by an interval that
contains zero, tan across a pole) produce NaN bounds; NaN propagates through
all later operations and callers treat it as "invalid".
"""

from __future__ import annotations

import numpy as np

_INF = np.inf
_PI = np.pi
_HALF_PI = np.pi / 2
_TWO_PI = 2 * np.pi
# beyond this magnitude the period bookkeeping is not trusted
_BIG = 2.0**50


def _down(x, steps=1):
    for _ in range(steps):
        x = np.nextafter(x, -_INF)
    return x


def _up(x, steps=1):
    for _ in range(steps):
        x = np.nextafter(x, _INF)
    return x


def _may_contain_grid(lo, hi, offset, period):
    """True where ``[lo, hi]`` may contain ``offset + k*period`` for integer k.

    Errs towards True: the scaled endpoints are widened by a relative margin
    well above the rounding error of the scaling.
    """
    with np.errstate(invalid="ignore"):
        tl = (lo - offset) / period
        th = (hi - offset) / period
        tl = tl - (1e-12 + np.abs(tl) * 1e-12)
        th = th + (1e-12 + np.abs(th) * 1e-12)
        return np.floor(th) >= np.ceil(tl)


class IA:
    """Elementwise interval array."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=np.float64)
        self.lo = lo
        self.hi = lo if hi is None else np.asarray(hi, dtype=np.float64)

    @classmethod
    def point(cls, x):
        return cls(x, x)

    @classmethod
    def zeros(cls, shape):
        z = np.zeros(shape)
        return cls(z, z.copy())

    @property
    def shape(self):
        return np.broadcast_shapes(np.shape(self.lo), np.shape(self.hi))

    def __getitem__(self, idx):
        return IA(self.lo[idx], self.hi[idx])

    def __repr__(self):
        return f"IA(lo={self.lo!r}, hi={self.hi!r})"

    @property
    def invalid(self):
        return np.isnan(self.lo) | np.isnan(self.hi)

    def mag(self):
        """Largest absolute value in each interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        """Smallest absolute value in each interval."""
        out = np.minimum(np.abs(self.lo), np.abs(self.hi))
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0, out)

    def contains_zero(self):
        return (self.lo <= 0) & (self.hi >= 0)

    def hull(self, other: IA) -> IA:
        return IA(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other: IA) -> IA:
        """Intersection; falls back to ``self`` where ``other`` is invalid."""
        bad = other.invalid
        lo = np.where(bad, self.lo, np.maximum(self.lo, other.lo))
        hi = np.where(bad, self.hi, np.minimum(self.hi, other.hi))
        return IA(lo, hi)

    # arithmetic -----------------------------------------------------------

    @staticmethod
    def _coerce(x) -> IA:
        return x if isinstance(x, IA) else IA.point(x)

    def __neg__(self):
        return IA(-self.hi, -self.lo)

    def __add__(self, other):
        o = IA._coerce(other)
        with np.errstate(invalid="ignore", over="ignore"):
            return IA(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        o = IA._coerce(other)
        with np.errstate(invalid="ignore", over="ignore"):
            return IA(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other):
        return IA._coerce(other) - self

    def __mul__(self, other):
        o = IA._coerce(other)
        with np.errstate(invalid="ignore", over="ignore"):
            p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi]
            lo = np.minimum(np.minimum(p[0], p[1]), np.minimum(p[2], p[3]))
            hi = np.maximum(np.maximum(p[0], p[1]), np.maximum(p[2], p[3]))
            if np.isnan(lo).any() or np.isnan(hi).any():
                # 0 * inf is 0 for interval bounds; genuine NaN inputs stay NaN
                zero = [(self.lo == 0) | (o.lo == 0), (self.lo == 0) | (o.hi == 0),
                        (self.hi == 0) | (o.lo == 0), (self.hi == 0) | (o.hi == 0)]
                p = [np.where(z, 0.0, q) for q, z in zip(p, zero)]
                lo = np.minimum(np.minimum(p[0], p[1]), np.minimum(p[2], p[3]))
                hi = np.maximum(np.maximum(p[0], p[1]), np.maximum(p[2], p[3]))
                bad = self.invalid | o.invalid
                lo = np.where(bad, np.nan, lo)
                hi = np.where(bad, np.nan, hi)
        return IA(_down(lo), _up(hi))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = IA._coerce(other)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            q = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi]
            lo = np.minimum(np.minimum(q[0], q[1]), np.minimum(q[2], q[3]))
            hi = np.maximum(np.maximum(q[0], q[1]), np.maximum(q[2], q[3]))
            pole = o.contains_zero()
            lo = np.where(pole, np.nan, _down(lo))
            hi = np.where(pole, np.nan, _up(hi))
        return IA(lo, hi)

    def __rtruediv__(self, other):
        return IA._coerce(other) / self

    def sqr(self):
        with np.errstate(over="ignore", invalid="ignore"):
            a, b = self.lo * self.lo, self.hi * self.hi
            lo = np.where(self.lo >= 0, a, np.where(self.hi <= 0, b, 0.0))
            hi = np.maximum(a, b)
        return IA(np.maximum(_down(lo), 0.0), _up(hi))

    def abs(self):
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        return IA(lo, self.mag())

    def sign(self):
        """Enclosure of sign(x); [-1, 1] where the interval straddles zero."""
        lo = np.where(self.lo > 0, 1.0, -1.0)
        hi = np.where(self.hi < 0, -1.0, 1.0)
        bad = self.invalid
        return IA(np.where(bad, np.nan, lo), np.where(bad, np.nan, hi))

    # transcendental functions --------------------------------------------

    def exp(self):
        with np.errstate(over="ignore", invalid="ignore"):
            return IA(np.maximum(_down(np.exp(self.lo), 2), 0.0), _up(np.exp(self.hi), 2))

    def log(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            bad = ~(self.lo > 0)
            lo = np.where(bad, np.nan, _down(np.log(np.where(bad, 1.0, self.lo)), 2))
            hi = np.where(bad, np.nan, _up(np.log(np.where(bad, 1.0, self.hi)), 2))
        return IA(lo, hi)

    def atan(self):
        return IA(_down(np.arctan(self.lo), 2), _up(np.arctan(self.hi), 2))

    def _periodic(self, fn, max_off, min_off):
        with np.errstate(invalid="ignore"):
            a, b = fn(self.lo), fn(self.hi)
            lo = _down(np.minimum(a, b), 2)
            hi = _up(np.maximum(a, b), 2)
            wide = (self.hi - self.lo >= _TWO_PI) | (np.maximum(np.abs(self.lo), np.abs(self.hi)) > _BIG)
            has_max = wide | _may_contain_grid(self.lo, self.hi, max_off, _TWO_PI)
            has_min = wide | _may_contain_grid(self.lo, self.hi, min_off, _TWO_PI)
            hi = np.where(has_max, 1.0, np.minimum(hi, 1.0))
            lo = np.where(has_min, -1.0, np.maximum(lo, -1.0))
            bad = self.invalid | ~np.isfinite(self.lo) | ~np.isfinite(self.hi)
        return IA(np.where(bad, np.nan, lo), np.where(bad, np.nan, hi))

    def sin(self):
        return self._periodic(np.sin, _HALF_PI, -_HALF_PI)

    def cos(self):
        return self._periodic(np.cos, 0.0, _PI)

    def tan(self):
        with np.errstate(invalid="ignore"):
            pole = (self.hi - self.lo >= _PI) | _may_contain_grid(self.lo, self.hi, _HALF_PI, _PI)
            pole |= np.maximum(np.abs(self.lo), np.abs(self.hi)) > _BIG
            lo = _down(np.tan(self.lo), 2)
            hi = _up(np.tan(self.hi), 2)
        return IA(np.where(pole, np.nan, lo), np.where(pole, np.nan, hi))

    def apply(self, op: str) -> IA:
        """Apply a unary operator by name."""
        if op == "neg":
            return -self
        return getattr(self, op)()


def widen_inexact(value: float) -> IA:
    """Enclosure of a real constant whose binary64 rounding is ``value``."""
    return IA(_down(np.float64(value)), _up(np.float64(value)))
