"""Torus sample grid, unitary DFT and annulus energy bookkeeping.

Conventions: array axis 0 is x1, axis 1 is x2; sample (i0, i1) sits at
(i0/N, i1/N) on the unit torus. Frequencies are integer cycles per unit
length, stored in numpy FFT order (index xi mod N).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sp_fft


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    size: int
    j_min: int = 2
    j_max: int | None = None

    def __post_init__(self):
        n = self.size
        if n < 64 or n & (n - 1):
            raise GridError(f"grid size must be a power of two >= 64, got {n}")
        if self.j_max is None:
            # largest scale whose annulus fits under Nyquist
            object.__setattr__(self, "j_max", int(np.log2(n)) - 2)
        if self.j_min < 2:
            raise GridError(f"j_min must be >= 2, got {self.j_min}")
        if self.j_min > self.j_max:
            raise GridError(f"j_min={self.j_min} exceeds j_max={self.j_max}")
        if 2 ** (self.j_max + 1) > n // 2:
            raise GridError(f"scale {self.j_max} annulus exceeds Nyquist for N={n}")

    @property
    def scales(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def check_scale(self, j: int) -> None:
        if not self.j_min <= j <= self.j_max:
            raise GridError(f"scale {j} outside [{self.j_min}, {self.j_max}]")

    @cached_property
    def freqs(self) -> np.ndarray:
        """Integer frequencies in FFT order."""
        return np.fft.fftfreq(self.size, d=1.0 / self.size)

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray]:
        f = self.freqs
        return np.meshgrid(f, f, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        x1, x2 = self.xi
        return np.hypot(x1, x2)

    @cached_property
    def angle(self) -> np.ndarray:
        """Frequency angle folded into [0, pi)."""
        x1, x2 = self.xi
        return np.mod(np.arctan2(x2, x1), np.pi)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.arange(self.size) / self.size


@dataclass(frozen=True)
class Field:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.grid.size
        if v.shape != (n, n):
            raise GridError(f"field shape {v.shape} does not match grid {n}x{n}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros((grid.size, grid.size)))


@dataclass(frozen=True)
class Spectrum:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n = self.grid.size
        if v.shape != (n, n):
            raise GridError(f"spectrum shape {v.shape} does not match grid {n}x{n}")
        object.__setattr__(self, "values", v)

    def hermitian_residual(self) -> float:
        """max |s(-xi) - conj(s(xi))| relative to max |s|."""
        v = self.values
        flipped = np.roll(v[::-1, ::-1], 1, axis=(0, 1))
        scale = max(float(np.max(np.abs(v))), 1e-300)
        return float(np.max(np.abs(flipped - np.conj(v)))) / scale

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def fft2(values: np.ndarray) -> np.ndarray:
    return sp_fft.fft2(values, norm="ortho")


def ifft2(values: np.ndarray) -> np.ndarray:
    return sp_fft.ifft2(values, norm="ortho")


def forward_dft(f: Field) -> Spectrum:
    return Spectrum(f.grid, fft2(f.values))


def inverse_dft(s: Spectrum, hermitian_tol: float = 1e-9) -> Field:
    """Inverse of forward_dft. Rejects spectra that cannot come from a real field."""
    if s.hermitian_residual() > hermitian_tol:
        raise GridError("spectrum is not Hermitian-symmetric; no real field corresponds to it")
    return Field(s.grid, ifft2(s.values).real)


def annulus_mask(grid: GridSpec, j: int) -> np.ndarray:
    """Frequencies with 2^(j-1) < |xi| <= 2^(j+1)."""
    r = grid.radius
    return (r > 2.0 ** (j - 1)) & (r <= 2.0 ** (j + 1))


def annulus_energy(s: Spectrum, j: int) -> float:
    s.grid.check_scale(j)
    return float(np.sum(np.abs(s.values[annulus_mask(s.grid, j)]) ** 2))

