"""Smooth windows: radial W, angular V, curve taper w2 and the low-pass closure.

Every window is built from the same polynomial transition profile

    s(x) = x^4 (35 - 84x + 70x^2 - 20x^3),   0 <= x <= 1,

which satisfies s(x) + s(1 - x) = 1. Squared windows are then of the form
sin^2 / cos^2 of (pi/2) s(.), so the partitions of unity hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def smoothstep(x):
    """C^3 transition profile, clipped to [0, 1] outside the unit interval."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)


def _radial_default(r):
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    rise = (r > 0.5) & (r <= 1.0)
    fall = (r > 1.0) & (r < 2.0)
    out[rise] = np.sin(0.5 * np.pi * smoothstep(2.0 * r[rise] - 1.0))
    out[fall] = np.cos(0.5 * np.pi * smoothstep(r[fall] - 1.0))
    return out


def _angular_default(t):
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = np.cos(0.5 * np.pi * smoothstep(t[inside]))
    return out


def _taper_default(t):
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = 1.0 - smoothstep(t[inside])
    return out


@dataclass(frozen=True)
class RadialWindow:
    """Radial window W supported on [1/2, 2] with sum_j W^2(2^-j r) = 1."""

    func: Callable = _radial_default

    def __call__(self, r):
        return self.func(r)


@dataclass(frozen=True)
class AngularWindow:
    """Angular bump V supported on (-1, 1) with sum_l V^2(t - l) = 1."""

    func: Callable = _angular_default

    def __call__(self, t):
        return self.func(t)


@dataclass(frozen=True)
class CurveTaper:
    """Taper w2 on [-1, 1] whose unit translates sum to one (not squared)."""

    func: Callable = _taper_default

    def __call__(self, t):
        return self.func(t)

    def fourier(self, omega, nodes: int = 4097):
        """Continuum transform  int w2(t) exp(-2 pi i omega t) dt.

        w2 is even, so the transform is real. Evaluated by composite
        Simpson quadrature on [-1, 1]; w2 is a polynomial spline, so the
        result is accurate to ~1e-12 for |omega| up to a few hundred.
        """
        from scipy.integrate import simpson

        omega = np.asarray(omega, dtype=float)
        t = np.linspace(-1.0, 1.0, nodes)
        w = self.func(t)
        flat = omega.reshape(-1)
        out = np.empty(flat.shape)
        chunk = 256
        for start in range(0, flat.size, chunk):
            om = flat[start:start + chunk, None]
            out[start:start + chunk] = simpson(w * np.cos(2.0 * np.pi * om * t), x=t, axis=-1)
        return out.reshape(omega.shape)


@dataclass(frozen=True)
class LowPass:
    """Low-pass closure Phi0 with Phi0^2(r) = sum_{j < j_min} W^2(r / 2^j).

    Equals 1 below 2^(j_min-1) and vanishes from 2^j_min on.
    """

    j_min: int
    radial: RadialWindow = RadialWindow()

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        lo = 2.0 ** (self.j_min - 1)
        out = np.where(r <= lo, 1.0, 0.0)
        band = (r > lo) & (r < 2.0 * lo)
        # falling half of the scale j_min-1 window
        out[band] = self.radial(r[band] / lo)
        return out


def eval_radial(w: RadialWindow, r):
    return w(r)


def eval_angular(v: AngularWindow, t):
    return v(t)


def eval_taper(w2: CurveTaper, t):
    return w2(t)


@dataclass
class PartitionReport:
    """Maximum absolute residuals of the four window identities."""

    samples: int
    radial: float
    angular: float
    taper: float
    lowpass: float

    @property
    def worst(self) -> float:
        return max(self.radial, self.angular, self.taper, self.lowpass)

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "radial": self.radial,
            "angular": self.angular,
            "taper": self.taper,
            "lowpass": self.lowpass,
        }


def verify_partitions(
    grid,
    samples: int = 100_000,
    radial: RadialWindow | None = None,
    angular: AngularWindow | None = None,
    taper: CurveTaper | None = None,
) -> PartitionReport:
    """Evaluate every partition/overlap identity on `samples` uniform points.

    Radial and low-pass sums are checked for r in (0, 2^(j_max+1)], the
    angular sum over one period, the taper overlap on [-1, 1].
    """
    radial = radial or RadialWindow()
    angular = angular or AngularWindow()
    taper = taper or CurveTaper()
    samples = max(int(samples), 1)

    r_top = 2.0 ** (grid.j_max + 1)
    r = np.linspace(r_top / samples, r_top, samples)
    j_lo = int(np.floor(np.log2(r.min()))) - 2
    j_hi = int(np.ceil(np.log2(r_top))) + 2
    total = sum(radial(r / 2.0**j) ** 2 for j in range(j_lo, j_hi + 1))
    res_radial = float(np.max(np.abs(total - 1.0)))

    t = np.linspace(0.0, 1.0, samples)
    total_v = sum(angular(t - l) ** 2 for l in (-1, 0, 1, 2))
    res_angular = float(np.max(np.abs(total_v - 1.0)))

    s = np.linspace(0.0, 1.0, samples)
    res_taper = float(
        max(
            np.max(np.abs(taper(s) + taper(s - 1.0) - 1.0)),
            np.max(np.abs(taper(-s) + taper(-s + 1.0) - 1.0)),
        )
    )

    low = LowPass(grid.j_min, radial)
    j_top = int(np.ceil(np.log2(r_top))) + 2
    total_l = low(r) ** 2 + sum(radial(r / 2.0**j) ** 2 for j in range(grid.j_min, j_top + 1))
    res_low = float(np.max(np.abs(total_l - 1.0)))

    return PartitionReport(samples, res_radial, res_angular, res_taper, res_low)
