"""Per-subband l1 separation over the analysis coefficients of two frames.

For a band-limited f_j we solve

    min_{S1}  ||Phi1^T S1||_1 + ||Phi2^T (f_j - S1)||_1

with S1 (and hence S2 = f_j - S1) constrained to the spectral support of
F_j. Two first-order primal-dual schemes are available, both with one dual
block per analysis operator and soft-thresholding (or its conjugate,
clipping) as the proximal step:

* "admm": over-relaxed ADMM on the splitting z1 = Phi1^T S1,
  z2 = Phi2^T (f - S1). Both frames are Parseval, so the S1-update is the
  closed form (Phi1 (z1 - u1) + f - Phi2 (z2 - u2)) / 2. The penalty is
  adapted by residual balancing during a burn-in phase.
* "pdhg": over-relaxed Chambolle-Pock with duals clipped to [-1, 1].

Feasibility W_j + C_j = f_j holds by construction. The best iterate seen
is returned, so the recorded objective trace is non-increasing.
"""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft

from .frames import Frame, FramePair
from .grid import Field, GridError, GridSpec, fft2, ifft2
from .subband import SubbandStack, decompose, filter_multiplier

log = logging.getLogger(__name__)

METHODS = ("admm", "pdhg")


@dataclass
class SolverConfig:
    max_iterations: int = 5000
    relative_gap_tol: float = 1e-7
    window: int = 25
    feasibility_tol: float = 1e-6
    # ADMM only: when set, also require ||A x - z|| <= residual_tol * ||f||
    # before stopping. Off by default; image-scale solves rarely close the
    # splitting that far within the iteration cap.
    residual_tol: float | None = None
    method: str = "admm"
    # ADMM penalty (dual step); None starts from 20 / max|Phi2^T f|
    penalty: float | None = None
    adapt_until: int = 1000
    # Chambolle-Pock steps; None picks a data-scaled pair with
    # tau * sigma = 1 / (2 * 1.01)
    primal_step: float | None = None
    dual_step: float | None = None
    relaxation: float = 1.6

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.window < 1:
            raise ValueError("window must be positive")
        if not self.relative_gap_tol > 0:
            raise ValueError("relative_gap_tol must be positive")
        if self.residual_tol is not None and not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not 1.0 <= self.relaxation < 2.0:
            raise ValueError("relaxation must lie in [1, 2)")
        if self.penalty is not None and not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if self.primal_step is not None and self.dual_step is not None:
            if self.primal_step * self.dual_step * 2.0 > 1.0 + 1e-12:
                raise ValueError("step sizes violate tau * sigma * ||K||^2 <= 1 with ||K||^2 = 2")


class _RestrictedBand:
    """A frame band acting on spectra supported on a fixed frequency set.

    The wrapped box spectrum is Hermitian, so only its half-plane
    b <= M2/2 is scattered and the real coefficients come from irfft2.
    """

    __slots__ = ("shape", "half", "pos", "weights", "fwd_pos", "fwd_idx", "adj_idx", "adj_conj")

    def __init__(self, band, index_of: np.ndarray):
        loc = index_of[band.support]
        keep = loc >= 0
        m1, m2 = band.shape
        self.shape = band.shape
        self.half = (m1, m2 // 2 + 1)
        self.pos = loc[keep]
        self.weights = band.weights[keep]
        a, b = np.divmod(band.wrapped[keep], m2)
        upper = b <= m2 // 2
        self.fwd_pos = np.flatnonzero(upper)
        self.fwd_idx = a[upper] * self.half[1] + b[upper]
        # lower half-plane values are conjugates of their mirrored partners
        a_m = np.where(upper, a, np.mod(-a, m1))
        b_m = np.where(upper, b, m2 - b)
        self.adj_idx = a_m * self.half[1] + b_m
        self.adj_conj = ~upper

    def forward(self, x: np.ndarray) -> np.ndarray:
        box = np.zeros(self.half[0] * self.half[1], dtype=complex)
        box[self.fwd_idx] = x[self.pos[self.fwd_pos]] * self.weights[self.fwd_pos]
        return sp_fft.irfft2(box.reshape(self.half), s=self.shape, norm="ortho")

    def adjoint_into(self, y: np.ndarray, acc: np.ndarray) -> None:
        vals = sp_fft.rfft2(y, norm="ortho").reshape(-1)[self.adj_idx]
        vals = np.where(self.adj_conj, vals.conj(), vals)
        acc[self.pos] += vals * self.weights


class RestrictedAnalysis:
    """Analysis operator of one frame restricted to spectra on `support`.

    `support` is a flat index set of the N x N spectrum; vectors are the
    spectral values there. Only bands that meet the support are kept.
    """

    def __init__(self, frame: Frame, support: np.ndarray):
        n2 = frame.grid.size ** 2
        index_of = np.full(n2, -1, dtype=np.int64)
        index_of[support] = np.arange(support.size)
        self.support = support
        self.bands = []
        self.keys = []
        for band in frame.bands_at():
            rb = _RestrictedBand(band, index_of)
            if rb.pos.size:
                self.bands.append(rb)
                self.keys.append(band.key)

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        return [b.forward(x) for b in self.bands]

    def adjoint(self, ys: list[np.ndarray]) -> np.ndarray:
        acc = np.zeros(self.support.size, dtype=complex)
        for b, y in zip(self.bands, ys):
            b.adjoint_into(y, acc)
        return acc


def _l1(ys: list[np.ndarray]) -> float:
    return float(sum(np.abs(y).sum() for y in ys))


@dataclass
class SubbandSeparation:
    j: int
    W: Field
    C: Field
    objective_trace: list[float] = field(repr=False)
    iterations: int
    feasibility: float
    converged: bool
    objective: float
    relative_gap: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "j": self.j,
            "iterations": self.iterations,
            "converged": self.converged,
            "objective": self.objective,
            "relative_change": self.relative_gap,
            "feasibility": self.feasibility,
        }


@dataclass
class SolveResult:
    """Outcome of one run of the split solver on coefficient vectors."""

    x: np.ndarray
    trace: list[float]
    iterations: int
    converged: bool
    relative_change: float


def _soft(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _sqnorm(ys) -> float:
    return float(sum(np.vdot(y, y).real for y in ys))


class _Tracker:
    """Best-iterate bookkeeping and the windowed relative-change test."""

    def __init__(self, cfg: SolverConfig, x0: np.ndarray, obj0: float):
        self.cfg = cfg
        self.best_x = x0.copy()
        self.best = obj0
        self.trace = [obj0]
        self.raw = [obj0]
        self.rel = np.inf

    def update(self, x: np.ndarray, obj: float) -> bool:
        if obj < self.best:
            self.best, self.best_x = obj, x.copy()
        self.trace.append(self.best)
        self.raw.append(obj)
        w = self.cfg.window
        if len(self.raw) > w:
            ref = self.raw[-1 - w]
            self.rel = abs(ref - obj) / max(abs(obj), 1e-300)
            return self.rel < self.cfg.relative_gap_tol
        return False


def _admm(A, B, f: np.ndarray, cfg: SolverConfig) -> SolveResult:
    b = B.forward(f)
    scale = max(float(max((np.abs(y).max() for y in b if y.size), default=0.0)), 1e-300)
    rho = cfg.penalty if cfg.penalty is not None else 20.0 / scale
    alpha = cfg.relaxation
    f_norm = float(np.linalg.norm(f))
    x = 0.5 * f
    z1, z2 = A.forward(x), B.forward(f - x)
    u1 = [np.zeros_like(z) for z in z1]
    u2 = [np.zeros_like(z) for z in z2]
    track = _Tracker(cfg, x, _l1(z1) + _l1(z2))
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        x = 0.5 * (A.adjoint([z - u for z, u in zip(z1, u1)]) + f - B.adjoint([z - u for z, u in zip(z2, u2)]))
        v1, v2 = A.forward(x), B.forward(f - x)
        h1 = [alpha * v + (1.0 - alpha) * z for v, z in zip(v1, z1)]
        h2 = [alpha * v + (1.0 - alpha) * z for v, z in zip(v2, z2)]
        z1_old, z2_old = z1, z2
        z1 = [_soft(h + u, 1.0 / rho) for h, u in zip(h1, u1)]
        z2 = [_soft(h + u, 1.0 / rho) for h, u in zip(h2, u2)]
        u1 = [u + h - z for u, h, z in zip(u1, h1, z1)]
        u2 = [u + h - z for u, h, z in zip(u2, h2, z2)]

        if it <= cfg.adapt_until and it % 10 == 0:
            # residual balancing; the scaled duals follow the penalty
            prim = _sqnorm([v - z for v, z in zip(v1, z1)]) + _sqnorm([v - z for v, z in zip(v2, z2)])
            dual = rho**2 * (_sqnorm([a - c for a, c in zip(z1, z1_old)]) + _sqnorm([a - c for a, c in zip(z2, z2_old)]))
            if prim > 100.0 * dual:
                rho *= 2.0
                u1 = [u / 2.0 for u in u1]
                u2 = [u / 2.0 for u in u2]
            elif dual > 100.0 * prim:
                rho /= 2.0
                u1 = [u * 2.0 for u in u1]
                u2 = [u * 2.0 for u in u2]

        flat = track.update(x, _l1(v1) + _l1(v2)) and it > cfg.window
        if flat and cfg.residual_tol is not None:
            # x can stall while z - u drifts in the kernel of the synthesis map,
            # so a flat objective alone does not mean the splitting has closed
            resid = _sqnorm([v - z for v, z in zip(v1, z1)]) + _sqnorm([v - z for v, z in zip(v2, z2)])
            flat = resid <= (cfg.residual_tol * f_norm) ** 2
        if flat:
            converged = True
            break
    return SolveResult(track.best_x, track.trace, it, converged, float(track.rel))


def _pdhg(A, B, f: np.ndarray, cfg: SolverConfig) -> SolveResult:
    b = B.forward(f)
    if cfg.primal_step is not None and cfg.dual_step is not None:
        tau, sigma = cfg.primal_step, cfg.dual_step
    else:
        # balance primal (data units) against dual (unit l_inf ball)
        scale = max(float(max((np.abs(y).max() for y in b if y.size), default=0.0)), 1e-300)
        tau = scale / np.sqrt(2.0 * 1.01)
        sigma = 1.0 / (scale * np.sqrt(2.0 * 1.01))
    rho = cfg.relaxation
    x = 0.5 * f
    y1 = [np.zeros_like(v) for v in A.forward(x)]
    y2 = [np.zeros_like(v) for v in b]
    a_x, b_r = A.forward(x), B.forward(f - x)
    track = _Tracker(cfg, x, _l1(a_x) + _l1(b_r))
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        y1_new = [np.clip(y + sigma * v, -1.0, 1.0) for y, v in zip(y1, a_x)]
        y2_new = [np.clip(y + sigma * v, -1.0, 1.0) for y, v in zip(y2, b_r)]
        d1 = [2 * yn - yo for yn, yo in zip(y1_new, y1)]
        d2 = [2 * yn - yo for yn, yo in zip(y2_new, y2)]
        x_new = x - tau * (A.adjoint(d1) - B.adjoint(d2))
        x = x + rho * (x_new - x)
        y1 = [y + rho * (yn - y) for y, yn in zip(y1, y1_new)]
        y2 = [y + rho * (yn - y) for y, yn in zip(y2, y2_new)]
        a_x, b_r = A.forward(x), B.forward(f - x)
        if track.update(x, _l1(a_x) + _l1(b_r)) and it > cfg.window:
            converged = True
            break
    return SolveResult(track.best_x, track.trace, it, converged, float(track.rel))


def solve_split(A, B, f: np.ndarray, cfg: SolverConfig | None = None) -> SolveResult:
    """min_x ||A x||_1 + ||B (f - x)||_1 for Parseval analysis operators A, B.

    A and B expose forward(x) -> list of coefficient arrays and
    adjoint(list) -> x, with adjoint(forward(x)) = x.
    """
    cfg = cfg or SolverConfig()
    if float(np.linalg.norm(f)) == 0.0:
        return SolveResult(np.zeros_like(f), [0.0], 0, True, 0.0)
    if cfg.method == "admm":
        return _admm(A, B, f, cfg)
    return _pdhg(A, B, f, cfg)


class DenseAnalysis:
    """Analysis operator x -> Phi^T x of an explicit n x m frame matrix."""

    def __init__(self, phi: np.ndarray):
        self.phi = np.asarray(phi, dtype=float)

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        return [self.phi.T @ x]

    def adjoint(self, ys: list[np.ndarray]) -> np.ndarray:
        return self.phi @ ys[0]


def separate_subband(f_j: Field, pair: FramePair, cfg: SolverConfig | None = None, j: int | None = None,
                     swap: bool = False) -> SubbandSeparation:
    """Split a band-limited piece f_j into a wavelet part W_j and curvelet part C_j.

    `j` is inferred from the spectrum when omitted. `swap` exchanges the
    roles of the frames (used to check the symmetry of the objective).
    """
    cfg = cfg or SolverConfig()
    grid = f_j.grid
    spec = fft2(f_j.values)
    if j is None:
        j = dominant_scale(spec, grid)
    support = np.flatnonzero(filter_multiplier(grid, j).reshape(-1) > 0)
    outside = np.linalg.norm(np.delete(spec.reshape(-1), support))
    if outside > 1e-8 * max(np.linalg.norm(spec), 1e-300):
        raise GridError(f"input is not band-limited to subband {j}")
    f = spec.reshape(-1)[support]
    A = _operator(pair, "wavelet", j, support)
    B = _operator(pair, "curvelet", j, support)
    if swap:
        A, B = B, A
    res = solve_split(A, B, f, cfg)
    x, trace, iters, converged, rel = res.x, res.trace, res.iterations, res.converged, res.relative_change
    if swap:
        x = f - x
    n = grid.size
    w_spec = np.zeros(n * n, dtype=complex)
    w_spec[support] = x
    W = Field(grid, ifft2(w_spec.reshape(n, n)).real)
    C = Field(grid, f_j.values - W.values)
    feas = float(np.linalg.norm(W.values + C.values - f_j.values))
    if not converged:
        log.warning("subband %d: no convergence after %d iterations (rel change %.2e)", j, iters, rel)
    return SubbandSeparation(j, W, C, trace, iters, feas, converged, trace[-1] if trace else 0.0, float(rel))


_OP_CACHE: "weakref.WeakKeyDictionary[FramePair, dict]" = weakref.WeakKeyDictionary()


def _operator(pair: FramePair, kind: str, j: int, support: np.ndarray) -> RestrictedAnalysis:
    ops = _OP_CACHE.setdefault(pair, {})
    op = ops.get((kind, j))
    if op is None:
        op = ops[(kind, j)] = RestrictedAnalysis(pair.frame(kind), support)
    return op


def dominant_scale(spec: np.ndarray, grid: GridSpec) -> int:
    best, best_j = -1.0, grid.j_min
    for j in grid.scales:
        e = float(np.sum(np.abs(spec[filter_multiplier(grid, j) > 0]) ** 2))
        inside = float(np.sum(np.abs(spec[filter_multiplier(grid, j) == 0]) ** 2))
        if inside == 0.0 and e > 0:
            return j
        if e > best:
            best, best_j = e, j
    return best_j


@dataclass
class FullSeparation:
    P: Field
    C: Field
    lowpass: Field
    subbands: list[SubbandSeparation]
    lowpass_to_curve: bool = True
    metrics: dict = field(default_factory=dict)

    @property
    def degraded(self) -> list[int]:
        return [s.j for s in self.subbands if not s.converged]

    def reconstruction(self) -> Field:
        return self.P + self.C + (Field.zeros(self.P.grid) if self.lowpass_to_curve else self.lowpass)


def separate_full(f: Field, pair: FramePair, cfg: SolverConfig | None = None, scales=None,
                  lowpass_to_curve: bool = True, stack: SubbandStack | None = None) -> FullSeparation:
    """Decompose, separate every subband and re-filter: P = sum_j F_j * W_j.

    The low-pass piece is not split; it is added to the curve part unless
    `lowpass_to_curve` is False, in which case it is returned separately.
    """
    cfg = cfg or SolverConfig()
    grid = f.grid
    stack = stack or decompose(f)
    scales = list(scales) if scales is not None else list(grid.scales)
    n = grid.size
    p_spec = np.zeros((n, n), dtype=complex)
    c_spec = np.zeros((n, n), dtype=complex)
    results = []
    for j in grid.scales:
        mult = filter_multiplier(grid, j)
        if j in scales:
            sep = separate_subband(stack[j], pair, cfg, j=j)
            results.append(sep)
            p_spec += mult * fft2(sep.W.values)
            c_spec += mult * fft2(sep.C.values)
        else:
            # unseparated subbands are routed with the low-pass content
            c_spec += mult * fft2(stack[j].values)
    low_spec = filter_multiplier(grid, grid.j_min - 1) * fft2(stack.lowpass.values)
    if lowpass_to_curve:
        c_spec += low_spec
    P = Field(grid, ifft2(p_spec).real)
    C = Field(grid, ifft2(c_spec).real)
    return FullSeparation(P, C, Field(grid, ifft2(low_spec).real), results, lowpass_to_curve)


@dataclass
class SeparationMetrics:
    ratios: dict[int, float]
    skipped: list[int]
    slope: float | None

    def as_dict(self) -> dict:
        return {
            "ratios": {str(j): r for j, r in self.ratios.items()},
            "skipped": self.skipped,
            "log2_slope": self.slope,
        }


def log2_slope(js, values) -> float | None:
    js = np.asarray(list(js), dtype=float)
    v = np.asarray(list(values), dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(js[ok], np.log2(v[ok]), 1)[0])


def separation_ratio(W: Field, C: Field, Pj: Field, Cj: Field) -> float | None:
    den = Pj.norm() + Cj.norm()
    if den == 0:
        return None
    return ((W - Pj).norm() + (C - Cj).norm()) / den


def separation_metrics(result: FullSeparation, truth_p: SubbandStack, truth_c: SubbandStack) -> SeparationMetrics:
    ratios, skipped = {}, []
    for sep in result.subbands:
        r = separation_ratio(sep.W, sep.C, truth_p[sep.j], truth_c[sep.j])
        if r is None:
            skipped.append(sep.j)
        else:
            ratios[sep.j] = r
    slope = log2_slope(ratios.keys(), ratios.values())
    metrics = SeparationMetrics(ratios, skipped, slope)
    result.metrics = metrics.as_dict()
    return metrics
