"""Bandpass filter bank F_j: f_j has spectrum W(|xi|/2^j) f^(xi).

Reconstruction applies the same multiplier again and sums, which is exact
because the squared windows (plus the low-pass closure) sum to one. The
finest band is widened to cover everything above 2^j_max up to the Nyquist
corners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import radial_multiplier
from .grid import Field, GridSpec, fft2, ifft2


@dataclass
class SubbandStack:
    grid: GridSpec
    pieces: dict[int, Field]
    lowpass: Field
    spectra: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __getitem__(self, j: int) -> Field:
        return self.pieces[j]

    @property
    def scales(self) -> list[int]:
        return sorted(self.pieces)

    def norms(self) -> dict[int, float]:
        return {j: f.norm() for j, f in self.pieces.items()}


def filter_multiplier(grid: GridSpec, j: int) -> np.ndarray:
    """Transfer function of F_j; j = j_min - 1 selects the low-pass closure."""
    return radial_multiplier(grid, j)


def decompose(f: Field) -> SubbandStack:
    grid = f.grid
    spec = fft2(f.values)
    pieces, spectra = {}, {}
    for j in grid.scales:
        s = filter_multiplier(grid, j) * spec
        spectra[j] = s
        pieces[j] = Field(grid, ifft2(s).real)
    low = Field(grid, ifft2(filter_multiplier(grid, grid.j_min - 1) * spec).real)
    return SubbandStack(grid, pieces, low, spectra)


def refilter(f_j: Field, j: int) -> Field:
    """F_j applied once more, as in the reconstruction sum."""
    return Field(f_j.grid, ifft2(filter_multiplier(f_j.grid, j) * fft2(f_j.values)).real)


def reconstruct(stack: SubbandStack, include_lowpass: bool = True) -> Field:
    grid = stack.grid
    acc = np.zeros((grid.size, grid.size), dtype=complex)
    for j in sorted(stack.pieces):
        acc += filter_multiplier(grid, j) * fft2(stack.pieces[j].values)
    if include_lowpass:
        acc += filter_multiplier(grid, grid.j_min - 1) * fft2(stack.lowpass.values)
    return Field(grid, ifft2(acc).real)


def band_support(grid: GridSpec, j: int) -> np.ndarray:
    """Boolean mask of frequencies where F_j is non-zero."""
    return filter_multiplier(grid, j) > 0
