"""Radial-wavelet and curvelet Parseval frames on the torus.

Both frames are banks of real, even frequency multipliers. A band (scale j,
orientation l) takes the windowed spectrum, wraps it onto an M1 x M2 box
and inverse transforms it. Box sides have the form m * 2^p with m in
{1, 3, 5}; the smallest pair on which the band support does not alias onto
itself is used. The coefficient at box index k is the inner product with an
atom centred at (k1/M1, k2/M2). Because the squared multipliers of each
frame sum to one on every frequency, analysis is an exact isometry and
synthesis is its adjoint.

Scale bookkeeping: scale j_min-1 is an isotropic low-pass band shared by
both frames. Scales j_min..j_max carry W(|xi|/2^j). A boundary scale
j_max+1 carries the rising half of W(|xi|/2^(j_max+1)) and stays at one out
to the corners of the Nyquist box, so the partition closes there. Curvelet
scale j is split into L_j = 2^ceil(j/2) two-sided wedges with central
orientations theta_l = pi*l/L_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple

import numpy as np
from scipy import fft as sp_fft

from .grid import Field, GridError, GridSpec
from .windows import AngularWindow, LowPass, RadialWindow

WAVELET = "wavelet"
CURVELET = "curvelet"


class WaveletIndex(NamedTuple):
    j: int
    k1: int
    k2: int


class CurveletIndex(NamedTuple):
    j: int
    l: int
    k1: int
    k2: int


def num_orientations(j: int) -> int:
    return 2 ** int(np.ceil(j / 2))


def orientation(j: int, l: int) -> float:
    return np.pi * l / num_orientations(j)


def p1_distance(a, b):
    """Geodesic distance between orientations taken modulo pi."""
    d = np.mod(np.abs(np.asarray(a) - np.asarray(b)), np.pi)
    return np.minimum(d, np.pi - d)


def radial_multiplier(grid: GridSpec, j: int, radial: RadialWindow | None = None) -> np.ndarray:
    """Subband transfer function W(|xi|/2^j); j_max is widened to the corners."""
    radial = radial or RadialWindow()
    r = grid.radius
    if j == grid.j_min - 1:
        return LowPass(grid.j_min, radial)(r)
    if j == grid.j_max:
        out = radial(r / 2.0**j)
        out[r >= 2.0**j] = 1.0
        return out
    if grid.j_min <= j < grid.j_max:
        return radial(r / 2.0**j)
    raise GridError(f"no subband {j} on {grid}")


def frame_multiplier(grid: GridSpec, j: int, radial: RadialWindow | None = None) -> np.ndarray:
    """Radial factor of the frame atoms at scale j.

    Scales j_min..j_max use the plain window; the boundary scale j_max + 1
    carries everything above 2^j_max that the plain windows leave, so its
    window rises like W(r/2^(j_max+1)) and stays at one out to the corners.
    """
    radial = radial or RadialWindow()
    r = grid.radius
    if j == grid.j_min - 1:
        return LowPass(grid.j_min, radial)(r)
    if j == grid.j_max + 1:
        out = radial(r / 2.0**j)
        out[r >= 2.0**j] = 1.0
        return out
    if grid.j_min <= j <= grid.j_max:
        return radial(r / 2.0**j)
    raise GridError(f"no frame scale {j} on {grid}")


def angular_multiplier(grid: GridSpec, j: int, l: int, angular: AngularWindow | None = None) -> np.ndarray:
    """V((omega - theta_l) L_j / pi) with omega folded mod pi (two-sided wedge)."""
    angular = angular or AngularWindow()
    n_or = num_orientations(j)
    t = grid.angle * n_or / np.pi - l
    t = np.mod(t + n_or / 2.0, n_or) - n_or / 2.0
    return _even(angular(t))


def _even(mult: np.ndarray) -> np.ndarray:
    """Make a multiplier even under xi -> -xi mod N, preserving squared sums.

    Only the Nyquist row/column change: -N/2 is its own negative on the grid
    but the folded angle there is not symmetric.
    """
    flipped = np.roll(mult[::-1, ::-1], 1, axis=(0, 1))
    return np.sqrt(0.5 * (mult**2 + flipped**2))


def box_sides(n: int) -> list[int]:
    """Admissible box sides: m * 2^p <= n with m in {1, 3, 5}.

    A shift of m lattice steps is then a whole number of pixels, so atoms
    keep the circular-shift structure while boxes hug their supports.
    """
    sides = {m * 2**p for m in (1, 3, 5) for p in range(1, int(np.log2(n)) + 1)}
    return sorted(s for s in sides if 4 <= s <= n)


def _injective(xi1: np.ndarray, xi2: np.ndarray, m1: int, m2: int) -> bool:
    key = np.mod(xi1, m1) * m2 + np.mod(xi2, m2)
    return np.bincount(key, minlength=m1 * m2).max() <= 1


def _wrap_box(xi1: np.ndarray, xi2: np.ndarray, n: int, prefer_first: bool) -> tuple[int, int]:
    """Smallest admissible box onto which the support wraps injectively."""
    sides = box_sides(n)
    count = xi1.size
    pairs = [(a * b, 0 if ((a >= b) == prefer_first or a == b) else 1, a, b)
             for a in sides for b in sides if a * b >= count]
    for _, _, m1, m2 in sorted(pairs):
        if _injective(xi1, xi2, m1, m2):
            return m1, m2
    return n, n


@dataclass
class Band:
    """One frequency multiplier of a frame together with its wrapping box."""

    scale: int
    orient: int
    theta: float
    shape: tuple[int, int]
    support: np.ndarray = field(repr=False)  # flat indices into the N x N spectrum
    weights: np.ndarray = field(repr=False)
    wrapped: np.ndarray = field(repr=False)  # flat indices into the box

    @property
    def key(self) -> tuple[int, int]:
        return (self.scale, self.orient)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def analyze(self, spec_flat: np.ndarray) -> np.ndarray:
        box = np.zeros(self.size, dtype=complex)
        box[self.wrapped] = spec_flat[self.support] * self.weights
        return sp_fft.ifft2(box.reshape(self.shape), norm="ortho").real

    def synthesize_into(self, coeffs: np.ndarray, spec_flat: np.ndarray) -> None:
        box = sp_fft.fft2(coeffs, norm="ortho").reshape(-1)
        spec_flat[self.support] += box[self.wrapped] * self.weights

    def centers(self) -> np.ndarray:
        """Torus coordinates of every atom, shape (M1, M2, 2)."""
        m1, m2 = self.shape
        k1, k2 = np.meshgrid(np.arange(m1) / m1, np.arange(m2) / m2, indexing="ij")
        return np.stack([k1, k2], axis=-1)


class CoefficientSet:
    """Frame coefficients stored densely per band; keyed by (scale, orientation)."""

    def __init__(self, frame: "Frame", bands: dict[tuple[int, int], np.ndarray]):
        self.frame = frame
        self.bands = bands

    @property
    def kind(self) -> str:
        return self.frame.kind

    def scales(self) -> list[int]:
        return sorted({k[0] for k in self.bands})

    def __getitem__(self, index) -> float:
        if isinstance(index, CurveletIndex):
            return float(self.bands[(index.j, index.l)][index.k1, index.k2])
        return float(self.bands[(index.j, 0)][index.k1, index.k2])

    def items(self) -> Iterator[tuple[tuple, float]]:
        for key, arr in self.bands.items():
            for k1, k2 in zip(*np.nonzero(arr)):
                yield self.frame.make_index(key, int(k1), int(k2)), float(arr[k1, k2])

    def flat(self) -> np.ndarray:
        if not self.bands:
            return np.zeros(0)
        return np.concatenate([self.bands[k].ravel() for k in sorted(self.bands)])

    def norm(self, p: float = 2) -> float:
        v = self.flat()
        if v.size == 0:
            return 0.0
        return float(np.linalg.norm(v, ord=p))

    def restrict(self, scales: Iterable[int]) -> "CoefficientSet":
        keep = set(scales)
        return CoefficientSet(self.frame, {k: v for k, v in self.bands.items() if k[0] in keep})

    def masked(self, cluster) -> "CoefficientSet":
        """Coefficients on the cluster's index set; zero elsewhere (same bands)."""
        out = {k: np.zeros_like(v) for k, v in self.bands.items()}
        for key, (i1, i2) in cluster.members.items():
            if key in self.bands:
                out[key][i1, i2] = self.bands[key][i1, i2]
        return CoefficientSet(self.frame, out)

    def complement(self, cluster) -> "CoefficientSet":
        inside = self.masked(cluster)
        return CoefficientSet(self.frame, {k: v - inside.bands[k] for k, v in self.bands.items()})

    def inner(self, other: "CoefficientSet") -> float:
        return float(sum(np.vdot(v, other.bands[k]).real for k, v in self.bands.items() if k in other.bands))

    def __add__(self, other):
        keys = set(self.bands) | set(other.bands)
        out = {}
        for k in keys:
            a = self.bands.get(k)
            b = other.bands.get(k)
            out[k] = a + b if a is not None and b is not None else (a if b is None else b).copy()
        return CoefficientSet(self.frame, out)

    def scaled(self, c: float) -> "CoefficientSet":
        return CoefficientSet(self.frame, {k: v * c for k, v in self.bands.items()})


class Frame:
    """A Parseval frame realised as a bank of wrapped frequency multipliers."""

    kind: str

    def __init__(self, grid: GridSpec, bands: list[Band]):
        self.grid = grid
        self.bands: dict[tuple[int, int], Band] = {b.key: b for b in bands}

    @property
    def scales(self) -> list[int]:
        return sorted({k[0] for k in self.bands})

    def check_scale(self, j: int) -> None:
        if j not in self.scales:
            raise GridError(f"{self.kind} frame has no scale {j}; valid {self.scales}")

    def bands_at(self, scales: Iterable[int] | None = None) -> list[Band]:
        if scales is None:
            return [self.bands[k] for k in sorted(self.bands)]
        keep = set(scales)
        return [self.bands[k] for k in sorted(self.bands) if k[0] in keep]

    def neighbour_scales(self, j: int, reach: int = 1) -> list[int]:
        return [s for s in self.scales if abs(s - j) <= reach]

    # analysis / synthesis ---------------------------------------------------

    def analysis_from_spectrum(self, spec: np.ndarray, scales=None) -> CoefficientSet:
        flat = spec.reshape(-1)
        return CoefficientSet(self, {b.key: b.analyze(flat) for b in self.bands_at(scales)})

    def analysis(self, f: Field, scales=None) -> CoefficientSet:
        spec = sp_fft.fft2(f.values, norm="ortho")
        return self.analysis_from_spectrum(spec, scales)

    def synthesis_spectrum(self, coeffs: CoefficientSet) -> np.ndarray:
        n = self.grid.size
        acc = np.zeros(n * n, dtype=complex)
        # ordered accumulation keeps results bit-reproducible
        for key in sorted(coeffs.bands):
            self.bands[key].synthesize_into(coeffs.bands[key], acc)
        return acc.reshape(n, n)

    def synthesis(self, coeffs: CoefficientSet) -> Field:
        if coeffs.frame.kind != self.kind:
            raise GridError(f"cannot synthesise {coeffs.frame.kind} coefficients with {self.kind} frame")
        spec = self.synthesis_spectrum(coeffs)
        return Field(self.grid, sp_fft.ifft2(spec, norm="ortho").real)

    def zeros(self, scales=None) -> CoefficientSet:
        return CoefficientSet(self, {b.key: np.zeros(b.shape) for b in self.bands_at(scales)})

    def delta(self, index) -> CoefficientSet:
        key, k1, k2 = self.split_index(index)
        band = self.bands[key]
        arr = np.zeros(band.shape)
        arr[k1, k2] = 1.0
        return CoefficientSet(self, {key: arr})

    # atoms --------------------------------------------------------------------

    def split_index(self, index):
        raise NotImplementedError

    def make_index(self, key, k1, k2):
        raise NotImplementedError

    def validate(self, index) -> None:
        key, k1, k2 = self.split_index(index)
        band = self.bands.get(key)
        if band is None:
            raise GridError(f"invalid {self.kind} index {index}")
        if not (0 <= k1 < band.shape[0] and 0 <= k2 < band.shape[1]):
            raise GridError(f"lattice position out of range for {index}; band shape {band.shape}")

    def atom_spectrum(self, index) -> np.ndarray:
        """Unitary spectrum of the atom, as an N x N array."""
        self.validate(index)
        return self.synthesis_spectrum(self.delta(index))

    def atom_field(self, index) -> Field:
        return Field(self.grid, sp_fft.ifft2(self.atom_spectrum(index), norm="ortho").real)

    def center(self, index) -> np.ndarray:
        key, k1, k2 = self.split_index(index)
        m1, m2 = self.bands[key].shape
        return np.array([k1 / m1, k2 / m2])

    def enumerate(self, j: int) -> list:
        self.check_scale(j)
        out = []
        for band in self.bands_at([j]):
            m1, m2 = band.shape
            out.extend(self.make_index(band.key, k1, k2) for k1 in range(m1) for k2 in range(m2))
        return out

    def count(self, j: int) -> int:
        self.check_scale(j)
        return sum(b.size for b in self.bands_at([j]))

    def redundancy(self) -> float:
        return sum(b.size for b in self.bands.values()) / self.grid.size**2


class WaveletFrame(Frame):
    kind = WAVELET

    def __init__(self, grid: GridSpec, radial: RadialWindow | None = None):
        radial = radial or RadialWindow()
        n = grid.size
        bands = []
        for j in range(grid.j_min - 1, grid.j_max + 2):
            mult = frame_multiplier(grid, j, radial).reshape(-1)
            m = n if j == grid.j_max + 1 else min(2 ** (j + 2), n)
            support = np.flatnonzero(mult > 0)
            xi1, xi2 = (g.reshape(-1)[support].astype(int) for g in grid.xi)
            wrapped = np.mod(xi1, m) * m + np.mod(xi2, m)
            if np.unique(wrapped).size != support.size:
                raise GridError(f"wavelet scale {j} aliases on a {m}x{m} box")
            bands.append(Band(j, 0, 0.0, (m, m), support, mult[support], wrapped))
        super().__init__(grid, bands)

    def split_index(self, index):
        j, k1, k2 = index
        return (j, 0), k1, k2

    def make_index(self, key, k1, k2):
        return WaveletIndex(key[0], k1, k2)


class CurveletFrame(Frame):
    kind = CURVELET

    def __init__(self, grid: GridSpec, radial: RadialWindow | None = None, angular: AngularWindow | None = None):
        radial = radial or RadialWindow()
        angular = angular or AngularWindow()
        n = grid.size
        xi1_all, xi2_all = (g.reshape(-1).astype(int) for g in grid.xi)
        bands = []
        # isotropic low-pass band, identical to the wavelet one
        low = frame_multiplier(grid, grid.j_min - 1, radial).reshape(-1)
        m = min(2 ** (grid.j_min + 1), n)
        support = np.flatnonzero(low > 0)
        wrapped = np.mod(xi1_all[support], m) * m + np.mod(xi2_all[support], m)
        bands.append(Band(grid.j_min - 1, 0, 0.0, (m, m), support, low[support], wrapped))
        for j in range(grid.j_min, grid.j_max + 2):
            rad = frame_multiplier(grid, j, radial).reshape(-1)
            for l in range(num_orientations(j)):
                theta = orientation(j, l)
                mult = rad * angular_multiplier(grid, j, l, angular).reshape(-1)
                support = np.flatnonzero(mult > 0)
                x1, x2 = xi1_all[support], xi2_all[support]
                m1, m2 = _wrap_box(x1, x2, n, prefer_first=abs(np.cos(theta)) >= abs(np.sin(theta)))
                wrapped = np.mod(x1, m1) * m2 + np.mod(x2, m2)
                bands.append(Band(j, l, theta, (m1, m2), support, mult[support], wrapped))
        super().__init__(grid, bands)

    def split_index(self, index):
        j, l, k1, k2 = index
        return (j, l), k1, k2

    def make_index(self, key, k1, k2):
        return CurveletIndex(key[0], key[1], k1, k2)

    def orientations(self, j: int) -> list[float]:
        self.check_scale(j)
        return [b.theta for b in self.bands_at([j])]


class FramePair:
    """The wavelet frame (Phi_1) and curvelet frame (Phi_2) on one grid."""

    def __init__(self, grid: GridSpec, radial: RadialWindow | None = None, angular: AngularWindow | None = None):
        self.grid = grid
        self.wavelets = WaveletFrame(grid, radial)
        self.curvelets = CurveletFrame(grid, radial, angular)

    def frame(self, kind: str) -> Frame:
        return self.wavelets if kind == WAVELET else self.curvelets

    def other(self, kind: str) -> Frame:
        return self.curvelets if kind == WAVELET else self.wavelets

    def frame_of(self, index) -> Frame:
        return self.curvelets if isinstance(index, CurveletIndex) else self.wavelets

    def cross_gram_column(self, index, scales=None) -> CoefficientSet:
        """Inner products of one atom with every atom of the other frame.

        Only scales within one of the atom's own scale can be non-zero
        (disjoint spectral supports otherwise); the others are returned as
        exact zeros unless `scales` restricts the output.
        """
        own = self.frame_of(index)
        other = self.other(own.kind)
        spec = own.atom_spectrum(index)
        j = index.j
        if scales is None:
            scales = other.scales
        near = [s for s in scales if abs(s - j) <= 1]
        far = [s for s in scales if abs(s - j) > 1]
        out = other.analysis_from_spectrum(spec, near)
        for band in other.bands_at(far):
            out.bands[band.key] = np.zeros(band.shape)
        return out


_PAIR_CACHE: dict[GridSpec, FramePair] = {}


def frame_pair(grid: GridSpec) -> FramePair:
    """Cached default FramePair for a grid (frames are immutable once built)."""
    pair = _PAIR_CACHE.get(grid)
    if pair is None:
        pair = _PAIR_CACHE[grid] = FramePair(grid)
    return pair
