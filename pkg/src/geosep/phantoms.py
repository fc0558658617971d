"""Ground-truth phantoms, synthesised directly in the frequency domain.

Spectra are stored in the unitary-DFT convention used everywhere else:
value(xi) = N * (continuum Fourier coefficient on the torus), so that the
inverse unitary DFT returns point samples of the band-limited phantom.
The DC term of every singular phantom is set to zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import Field, GridError, GridSpec, Spectrum, annulus_energy, fft2, ifft2
from .windows import CurveTaper


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class PointConfig:
    points: tuple[tuple[float, float], ...]
    amplitudes: tuple[float, ...] | None = None

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        if not 1 <= len(pts) <= 64:
            raise PhantomError(f"need 1..64 points, got {len(pts)}")
        for p in pts:
            if len(p) != 2 or not all(0.0 <= c < 1.0 for c in p):
                raise PhantomError(f"point {p} is not in [0,1)^2")
        object.__setattr__(self, "points", pts)
        amps = self.amplitudes
        if amps is None:
            amps = (1.0,) * len(pts)
        if len(amps) != len(pts):
            raise PhantomError("one amplitude per point required")
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in amps))


@dataclass(frozen=True)
class CurveConfig:
    """Quadrature description of a curve: nodes t_m, points tau(t_m), unit normals.

    `weights` are the trapezoidal weights times the optional taper, so the
    curve measure is sum_m weights[m] * delta_{points[m]}.
    """

    t: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    closed: bool = True
    min_radius_of_curvature: float = np.inf
    label: str = "curve"

    @property
    def num_nodes(self) -> int:
        return int(self.t.size)

    def normal_angles(self) -> np.ndarray:
        """Normal orientation in [0, pi)."""
        return np.mod(np.arctan2(self.normals[:, 1], self.normals[:, 0]), np.pi)


@dataclass(frozen=True)
class Phantom:
    spectrum: Spectrum
    field: Field
    kind: str

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    def __add__(self, other: "Phantom") -> "Phantom":
        return Phantom(
            Spectrum(self.grid, self.spectrum.values + other.spectrum.values),
            self.field + other.field,
            "mixture",
        )

    def scaled(self, c: float) -> "Phantom":
        return Phantom(Spectrum(self.grid, self.spectrum.values * c), self.field * c, self.kind)


def _hermitian_part(values: np.ndarray) -> np.ndarray:
    """Projection onto spectra of real fields.

    Sampled transforms are Hermitian except on the Nyquist row and column,
    where -N/2 aliases to itself; those entries are averaged with their
    conjugate partners so that spectrum and field describe the same object.
    """
    flipped = np.roll(values[::-1, ::-1], 1, axis=(0, 1))
    return 0.5 * (values + np.conj(flipped))


def _from_spectrum(grid: GridSpec, values: np.ndarray, kind: str) -> Phantom:
    values = _hermitian_part(np.asarray(values, dtype=complex))
    return Phantom(Spectrum(grid, values), Field(grid, ifft2(values).real), kind)


def point_spectrum(cfg: PointConfig, grid: GridSpec) -> Phantom:
    """sum_i a_i |x - x_i|^{-3/2}, via its transform c |xi|^{-1/2} e^{-2 pi i x_i.xi} (c = 1)."""
    xi1, xi2 = grid.xi
    r = grid.radius
    mag = np.zeros_like(r)
    nz = r > 0
    mag[nz] = r[nz] ** -0.5
    n = grid.size
    # separable phases keep this O(P N^2) without large temporaries
    spec = np.zeros((n, n), dtype=complex)
    f = grid.freqs
    for (p1, p2), a in zip(cfg.points, cfg.amplitudes):
        e1 = np.exp(-2j * np.pi * p1 * f)
        e2 = np.exp(-2j * np.pi * p2 * f)
        spec += a * np.outer(e1, e2)
    return _from_spectrum(grid, n * mag * spec, "point")


def circle_config(
    center=(0.5, 0.5), radius: float = 0.25, nodes: int = 4096
) -> CurveConfig:
    """Closed circle tau(t) = c + r (cos 2 pi t, sin 2 pi t), t in [0, 1)."""
    t = np.arange(nodes) / nodes
    ang = 2.0 * np.pi * t
    normals = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    pts = np.asarray(center, dtype=float) + radius * normals
    weights = np.full(nodes, 1.0 / nodes)
    return CurveConfig(t, np.mod(pts, 1.0), normals, weights, True, float(radius), "circle")


def segment_config(
    rho: float = 0.125, center=(0.0, 0.0), nodes: int = 4096, taper: CurveTaper | None = None
) -> CurveConfig:
    """Vertical segment {c1} x [c2 - rho, c2 + rho] weighted by w2(x2/rho)."""
    if not 0.0 < rho < 0.25:
        raise PhantomError(f"rho must lie in (0, 1/4), got {rho}")
    taper = taper or CurveTaper()
    s = np.linspace(-1.0, 1.0, nodes)
    x2 = center[1] + rho * s
    pts = np.stack([np.full(nodes, center[0]), x2], axis=1)
    trap = np.full(nodes, 2.0 * rho / (nodes - 1))
    trap[[0, -1]] *= 0.5
    weights = trap * taper(s)
    normals = np.tile([1.0, 0.0], (nodes, 1))
    return CurveConfig(s, np.mod(pts, 1.0), normals, weights, False, np.inf, "segment")


def curve_from_csv(path: str | Path, closed: bool | None = None) -> CurveConfig:
    """Load (t, x, y) nodes; normals come from centred differences."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row[:3]])
            except ValueError:
                continue  # header line
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] < 4 or data.shape[1] < 3:
        raise PhantomError(f"{path}: need at least 4 rows of (t, x, y)")
    t, pts = data[:, 0], data[:, 1:3]
    if closed is None:
        closed = bool(np.allclose(pts[0], pts[-1]))
    if closed and np.allclose(pts[0], pts[-1]):
        # drop the repeated endpoint; periodic trapezoid
        period = t[-1] - t[0]
        t, pts = t[:-1], pts[:-1]
        dt = np.diff(np.append(t, t[0] + period))
        weights = 0.5 * (dt + np.roll(dt, 1))
        tang = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    else:
        dt = np.diff(t)
        weights = np.zeros_like(t)
        weights[:-1] += 0.5 * dt
        weights[1:] += 0.5 * dt
        tang = np.gradient(pts, axis=0)
    normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    normals /= np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-300)
    return CurveConfig(t, np.mod(pts, 1.0), normals, weights, closed, _min_radius(pts, closed), Path(path).stem)


def _min_radius(pts: np.ndarray, closed: bool) -> float:
    if closed:
        d1 = (np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)) / 2.0
        d2 = np.roll(pts, -1, axis=0) - 2 * pts + np.roll(pts, 1, axis=0)
    else:
        d1 = np.gradient(pts, axis=0)
        d2 = np.gradient(d1, axis=0)
    cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    speed = np.linalg.norm(d1, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(speed > 0, cross / speed**3, 0.0)
    kmax = float(np.max(kappa)) if kappa.size else 0.0
    return np.inf if kmax == 0 else 1.0 / kmax


def curve_transform(cfg: CurveConfig, xi: np.ndarray) -> np.ndarray:
    """Quadrature of  sum_m w_m exp(-2 pi i tau(t_m).xi)  at arbitrary frequencies (K, 2)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    out = np.empty(xi.shape[0], dtype=complex)
    chunk = 2048
    for s in range(0, xi.shape[0], chunk):
        phase = cfg.points @ xi[s:s + chunk].T
        out[s:s + chunk] = cfg.weights @ np.exp(-2j * np.pi * phase)
    return out


def curve_spectrum(cfg: CurveConfig, grid: GridSpec) -> Phantom:
    """Trapezoidal transform of the curve measure on the integer frequency grid."""
    n = grid.size
    if cfg.num_nodes == 0 or not np.any(cfg.weights):
        return _from_spectrum(grid, np.zeros((n, n)), "curve")
    if cfg.num_nodes < 8 * 2**grid.j_max:
        raise PhantomError(
            f"{cfg.num_nodes} quadrature nodes cannot resolve scale {grid.j_max}; need >= {8 * 2**grid.j_max}"
        )
    f = grid.freqs
    # separable phase: E1^T diag(w) E2 is a single matrix product
    e1 = np.exp(-2j * np.pi * np.outer(cfg.points[:, 0], f))
    e2 = np.exp(-2j * np.pi * np.outer(cfg.points[:, 1], f))
    spec = (e1 * cfg.weights[:, None]).T @ e2
    spec[0, 0] = 0.0
    return _from_spectrum(grid, n * spec, "curve")


def segment_spectrum(rho: float, grid: GridSpec, taper: CurveTaper | None = None) -> Phantom:
    """Closed form rho * w2^(rho xi2): the tapered segment {0} x [-rho, rho]."""
    if not 0.0 < rho < 0.25:
        raise PhantomError(f"rho must lie in (0, 1/4), got {rho}")
    taper = taper or CurveTaper()
    f = grid.freqs
    col = rho * taper.fourier(rho * f)
    spec = np.broadcast_to(col[None, :], (grid.size, grid.size)).astype(complex)
    spec = grid.size * spec
    return _from_spectrum(grid, spec, "segment")


def mid_band(grid: GridSpec) -> list[int]:
    """Scales away from both ends of the range (all scales if the range is short)."""
    inner = list(range(grid.j_min + 1, grid.j_max))
    return inner if inner else list(grid.scales)


def energy_profile(p: Phantom, scales=None) -> dict[int, float]:
    scales = scales if scales is not None else list(p.grid.scales)
    return {j: annulus_energy(p.spectrum, j) for j in scales}


def match_energies(p: Phantom, c: Phantom, scales=None) -> tuple[Phantom, Phantom, float]:
    """Rescale `c` so the geometric mean over mid-band scales of E_P/E_C is one.

    Returns the point phantom, the rescaled curve phantom and the factor.
    """
    scales = scales if scales is not None else mid_band(p.grid)
    ep = np.array([annulus_energy(p.spectrum, j) for j in scales])
    ec = np.array([annulus_energy(c.spectrum, j) for j in scales])
    if np.any(ep <= 0) or np.any(ec <= 0):
        raise PhantomError("cannot match energies: a phantom has zero energy in the mid band")
    factor = float(np.sqrt(np.exp(np.mean(np.log(ep) - np.log(ec)))))
    return p, c.scaled(factor), factor


def noise_field(grid: GridSpec, level: float, reference_norm: float, seed: int) -> Field:
    """White Gaussian field scaled to l2 norm level * reference_norm."""
    if level < 0:
        raise PhantomError("noise level must be non-negative")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((grid.size, grid.size))
    return Field(grid, noise * (level * reference_norm / np.linalg.norm(noise)))


def add_noise(p: Phantom, level: float, seed: int) -> Phantom:
    """Add white Gaussian noise whose l2 norm is exactly level * ||p||_2."""
    if level == 0:
        return p
    noise = noise_field(p.grid, level, p.field.norm(), seed)
    return Phantom(Spectrum(p.grid, p.spectrum.values + fft2(noise.values)), p.field + noise, p.kind)


@dataclass(frozen=True)
class Reference:
    """The reference point + circle configuration used by studies and tests."""

    point: Phantom
    curve: Phantom
    points: PointConfig
    circle: CurveConfig
    factor: float

    @property
    def mixture(self) -> Phantom:
        return self.point + self.curve


def default_points() -> PointConfig:
    # one point on the circle of radius 1/4 about the centre, one inside, one outside
    return PointConfig(((0.75, 0.5), (0.42, 0.45), (0.2, 0.8)))


def reference_phantoms(grid: GridSpec, points: PointConfig | None = None, curve: CurveConfig | None = None) -> Reference:
    points = points or default_points()
    curve = curve or circle_config(nodes=max(4096, 8 * 2**grid.j_max))
    p = point_spectrum(points, grid)
    c = curve_spectrum(curve, grid)
    p, c, factor = match_energies(p, c)
    return Reference(p, c, points, curve, factor)


@dataclass
class NoiseGrowth:
    """Per-scale curvelet l1 norms of a noise field against the 2^(j/2) yardstick."""

    l1: dict[int, float]
    slope: float | None

    @property
    def slower_than_sqrt(self) -> bool | None:
        # growth o(2^(j/2)) shows up as a log2 slope below 1/2
        return None if self.slope is None else self.slope < 0.5

    def as_dict(self) -> dict:
        return {"l1": {str(j): v for j, v in self.l1.items()}, "log2_slope": self.slope,
                "slower_than_sqrt": self.slower_than_sqrt}


def noise_growth(noise: Field, pair, scales=None) -> NoiseGrowth:
    """l1 norm of the curvelet coefficients of `noise` at each scale j."""
    grid = noise.grid
    scales = list(scales) if scales is not None else list(grid.scales)
    coeffs = pair.curvelets.analysis(noise, scales)
    l1 = {j: float(sum(np.abs(v).sum() for k, v in coeffs.bands.items() if k[0] == j)) for j in scales}
    js = np.array(scales, dtype=float)
    vals = np.array([l1[j] for j in scales])
    slope = float(np.polyfit(js, np.log2(vals), 1)[0]) if len(scales) >= 2 and np.all(vals > 0) else None
    return NoiseGrowth(l1, slope)
