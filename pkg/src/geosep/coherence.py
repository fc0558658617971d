"""Coherence measurements between the wavelet and curvelet frames.

Inner products between a band b of one frame and a band w of the other
depend only on the offset between the two atom centres:

    <gamma_{b,k}, psi_{w,k'}> = c * G(k/M_b - k'/M_w),
    G(d) = sum_xi m_b(xi) m_w(xi) exp(-2 pi i xi.d),   c = 1/sqrt(|M_b| |M_w|).

Offsets run over the lattice of step 1/lcm(M_b, M_w) per axis, so one FFT of
the product multiplier on that lattice gives every cross-Gram entry of the
band pair exactly. Cluster sums are then circular convolutions of a member
indicator with |G|. The direct route (one cross-Gram column per atom) is
kept for verification on small grids.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from math import lcm

import numpy as np
from scipy import fft as sp_fft
from scipy.spatial import cKDTree

from .frames import CURVELET, WAVELET, CoefficientSet, Frame, FramePair, num_orientations, p1_distance
from .grid import Field
from .phantoms import CurveConfig, PointConfig
from .subband import decompose

DEFAULT_EPS = 1.0 / 64.0


class CoherenceError(ValueError):
    pass


@dataclass
class Cluster:
    """A set of frame indices around subband j, stored per band as index arrays."""

    kind: str
    j: int
    members: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)
    recipe: str = "explicit"

    def __len__(self) -> int:
        return int(sum(i1.size for i1, _ in self.members.values()))

    @property
    def size(self) -> int:
        return len(self)

    def mask(self, key, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        if key in self.members:
            i1, i2 = self.members[key]
            out[i1, i2] = True
        return out

    def indices(self, frame: Frame) -> list:
        out = []
        for key in sorted(self.members):
            i1, i2 = self.members[key]
            out.extend(frame.make_index(key, int(a), int(b)) for a, b in zip(i1, i2))
        return out

    def union(self, other: "Cluster") -> "Cluster":
        if other.kind != self.kind:
            raise CoherenceError("cannot merge clusters of different frames")
        keys = set(self.members) | set(other.members)
        out = {}
        for key in keys:
            parts = [c.members[key] for c in (self, other) if key in c.members]
            pairs = np.unique(np.concatenate([np.stack(p, axis=1) for p in parts]), axis=0)
            out[key] = (pairs[:, 0], pairs[:, 1])
        return Cluster(self.kind, self.j, out, f"{self.recipe}|{other.recipe}")

    def contains(self, other: "Cluster") -> bool:
        for key, (i1, i2) in other.members.items():
            if i1.size == 0:
                continue
            if key not in self.members:
                return False
            mine = set(zip(*(a.tolist() for a in self.members[key])))
            if not set(zip(i1.tolist(), i2.tolist())) <= mine:
                return False
        return True

    @classmethod
    def from_indices(cls, kind: str, j: int, indices, recipe: str = "explicit") -> "Cluster":
        grouped: dict = {}
        for idx in indices:
            if kind == CURVELET:
                key, k = (idx.j, idx.l), (idx.k1, idx.k2)
            else:
                key, k = (idx.j, 0), (idx.k1, idx.k2)
            grouped.setdefault(key, set()).add(k)
        members = {}
        for key, ks in grouped.items():
            arr = np.array(sorted(ks), dtype=np.int64)
            members[key] = (arr[:, 0], arr[:, 1])
        return cls(kind, j, members, recipe)

    def as_rows(self, frame: Frame) -> list[dict]:
        rows = []
        for idx in self.indices(frame):
            c = frame.center(idx)
            row = idx._asdict()
            row.update(x1=float(c[0]), x2=float(c[1]))
            rows.append(row)
        return rows


def _band_scales(frame: Frame, j: int) -> list[int]:
    return [s for s in frame.scales if abs(s - j) <= 1]


def _empty(kind: str, j: int, recipe: str) -> Cluster:
    return Cluster(kind, j, {}, recipe)


# --------------------------------------------------------------------------
# offset kernels


class _KernelCache:
    """|c G| on the offset lattice for every intersecting band pair."""

    def __init__(self, pair: FramePair):
        self.grid = pair.grid
        self._xi = [g.reshape(-1).astype(np.int64) for g in self.grid.xi]
        self._store: dict = {}

    def kernel(self, wband, cband):
        """Return (|c G|, (L1, L2)) or None when the supports are disjoint."""
        key = (wband.key, cband.key)
        if key in self._store:
            return self._store[key]
        common, iw, ic = np.intersect1d(wband.support, cband.support, assume_unique=True, return_indices=True)
        if common.size == 0:
            self._store[key] = None
            return None
        m = wband.weights[iw] * cband.weights[ic]
        L = (lcm(cband.shape[0], wband.shape[0]), lcm(cband.shape[1], wband.shape[1]))
        xi1, xi2 = self._xi[0][common], self._xi[1][common]
        flat = np.mod(xi1, L[0]) * L[1] + np.mod(xi2, L[1])
        emb = np.bincount(flat, weights=m, minlength=L[0] * L[1]).reshape(L)
        g = sp_fft.fft2(emb).real
        c = 1.0 / np.sqrt(float(cband.size) * float(wband.size))
        out = (np.abs(g) * c, L)
        self._store[key] = out
        return out


_KERNELS: "weakref.WeakKeyDictionary[FramePair, _KernelCache]" = weakref.WeakKeyDictionary()


def _kernels(pair: FramePair) -> _KernelCache:
    cache = _KERNELS.get(pair)
    if cache is None:
        cache = _KERNELS[pair] = _KernelCache(pair)
    return cache


# --------------------------------------------------------------------------
# singleton and cluster coherence


def mutual_coherence(pair: FramePair, j: int) -> float:
    """max |<psi_lambda, gamma_eta>| over both index sets around subband j."""
    pair.grid.check_scale(j)
    kc = _kernels(pair)
    best = 0.0
    for wb in pair.wavelets.bands_at(_band_scales(pair.wavelets, j)):
        for cb in pair.curvelets.bands_at(_band_scales(pair.curvelets, j)):
            k = kc.kernel(wb, cb)
            if k is not None:
                best = max(best, float(k[0].max()))
    return best


def mutual_coherence_direct(pair: FramePair, j: int) -> float:
    """Same quantity from one cross-Gram column per curvelet atom (slow)."""
    scales_w = _band_scales(pair.wavelets, j)
    best = 0.0
    for cb in pair.curvelets.bands_at(_band_scales(pair.curvelets, j)):
        for k1 in range(cb.shape[0]):
            for k2 in range(cb.shape[1]):
                idx = pair.curvelets.make_index(cb.key, k1, k2)
                col = pair.cross_gram_column(idx, scales_w)
                v = col.flat()
                if v.size:
                    best = max(best, float(np.abs(v).max()))
    return best


def cluster_coherence(S: Cluster, pair: FramePair) -> float:
    """max over atoms psi of the other frame of sum_{i in S} |<phi_i, psi>|."""
    if len(S) == 0:
        return 0.0
    sums = cluster_sums(S, pair)
    return float(max((a.max() for a in sums.values() if a.size), default=0.0))


def cluster_sums(S: Cluster, pair: FramePair) -> dict[tuple[int, int], np.ndarray]:
    """For every band of the opposite frame, the array of sum_{i in S} |<phi_i, psi_k>|."""
    own = pair.frame(S.kind)
    other = pair.other(S.kind)
    kc = _kernels(pair)
    out: dict = {}
    member_bands = [own.bands[key] for key in sorted(S.members) if S.members[key][0].size]
    for ob in other.bands_at():
        acc = None
        for mb in member_bands:
            wb, cb = (mb, ob) if S.kind == WAVELET else (ob, mb)
            k = kc.kernel(wb, cb)
            if k is None:
                continue
            gabs, L = k
            s1, s2 = L[0] // mb.shape[0], L[1] // mb.shape[1]
            ind = np.zeros(L)
            i1, i2 = S.members[mb.key]
            np.add.at(ind, (i1 * s1, i2 * s2), 1.0)
            conv = sp_fft.irfft2(sp_fft.rfft2(ind) * sp_fft.rfft2(gabs), s=L)
            t1, t2 = L[0] // ob.shape[0], L[1] // ob.shape[1]
            part = conv[::t1, ::t2]
            acc = part if acc is None else acc + part
        if acc is not None:
            out[ob.key] = np.maximum(acc, 0.0)
    return out


def cluster_coherence_direct(S: Cluster, pair: FramePair) -> float:
    """Cluster coherence from explicit cross-Gram columns (verification path)."""
    if len(S) == 0:
        return 0.0
    own = pair.frame(S.kind)
    total = None
    for idx in S.indices(own):
        col = pair.cross_gram_column(idx)
        v = np.abs(col.flat())
        total = v if total is None else total + v
    return float(total.max()) if total is not None and total.size else 0.0


# --------------------------------------------------------------------------
# clusters


def threshold_cluster(coeffs: CoefficientSet, j: int, eps_thresh: float) -> Cluster:
    """Indices around subband j with |c| > eps_thresh * max |c| over those scales."""
    if not 0.0 < eps_thresh < 1.0:
        raise CoherenceError("eps_thresh must lie in (0, 1)")
    frame = coeffs.frame
    keep = [k for k in coeffs.bands if abs(k[0] - j) <= 1]
    peak = max((float(np.abs(coeffs.bands[k]).max()) for k in keep if coeffs.bands[k].size), default=0.0)
    recipe = f"threshold({eps_thresh:g})"
    if peak == 0.0:
        return _empty(frame.kind, j, recipe)
    members = {}
    for k in keep:
        i1, i2 = np.nonzero(np.abs(coeffs.bands[k]) > eps_thresh * peak)
        if i1.size:
            members[k] = (i1, i2)
    return Cluster(frame.kind, j, members, recipe)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0 / 32.0:
        raise CoherenceError(f"tube exponent eps must lie in (0, 1/32), got {eps}")


def tube_radius(j: int, eps: float = DEFAULT_EPS) -> float:
    """D(a_j) = a_j^(1 - eps) with a_j = 2^-j, in torus units."""
    return 2.0 ** (-j * (1.0 - eps))


def _band_centres(band) -> np.ndarray:
    m1, m2 = band.shape
    k1, k2 = np.meshgrid(np.arange(m1), np.arange(m2), indexing="ij")
    return np.stack([k1.ravel() / m1, k2.ravel() / m2], axis=1)


def point_tube_cluster(cfg: PointConfig, j: int, pair: FramePair, eps: float = DEFAULT_EPS) -> Cluster:
    """Wavelets around subband j centred within a_j^(1-eps) of some point."""
    _check_eps(eps)
    pair.grid.check_scale(j)
    frame = pair.wavelets
    radius = tube_radius(j, eps)
    tree = cKDTree(np.mod(np.asarray(cfg.points, dtype=float), 1.0), boxsize=1.0)
    members = {}
    for band in frame.bands_at(_band_scales(frame, j)):
        centres = _band_centres(band)
        dist, _ = tree.query(centres, k=1)
        flat = np.flatnonzero(dist <= radius)
        if flat.size:
            members[band.key] = np.divmod(flat, band.shape[1])
    return Cluster(WAVELET, j, members, f"point-tube({eps:g})")


def curve_tube_cluster(cfg: CurveConfig, j: int, pair: FramePair, eps: float = DEFAULT_EPS,
                       orientation_tol: float | None = None) -> Cluster:
    """Curvelets around subband j near the curve and aligned with its normal.

    A member's centre lies within a_j^(1-eps) of a curve node and its wedge
    orientation is within `orientation_tol` (P^1 distance) of the normal at
    the nearest node. The default tolerance is the wedge half-width pi/L_j'
    at the member's own scale j', i.e. the wedge support contains the
    normal direction.
    """
    _check_eps(eps)
    pair.grid.check_scale(j)
    frame = pair.curvelets
    radius = tube_radius(j, eps)
    nodes = np.mod(np.asarray(cfg.points, dtype=float), 1.0)
    normals = cfg.normal_angles()
    tree = cKDTree(nodes, boxsize=1.0)
    members = {}
    for band in frame.bands_at(_band_scales(frame, j)):
        if band.key[0] == pair.grid.j_min - 1:
            continue  # isotropic low-pass band carries no orientation
        tol = orientation_tol if orientation_tol is not None else np.pi / num_orientations(band.scale)
        centres = _band_centres(band)
        dist, nearest = tree.query(centres, k=1)
        ok = (dist <= radius) & (p1_distance(band.theta, normals[nearest]) <= tol + 1e-12)
        flat = np.flatnonzero(ok)
        if flat.size:
            members[band.key] = np.divmod(flat, band.shape[1])
    return Cluster(CURVELET, j, members, f"curve-tube({eps:g})")


def relative_sparsity(coeffs: CoefficientSet, S: Cluster) -> float:
    """l1 norm of the coefficients around subband S.j that lie outside S."""
    if coeffs.kind != S.kind:
        raise CoherenceError("coefficients and cluster belong to different frames")
    total = 0.0
    for key, arr in coeffs.bands.items():
        if abs(key[0] - S.j) > 1:
            continue
        total += float(np.abs(arr[~S.mask(key, arr.shape)]).sum())
    return total


def recovery_bound(delta: float, kappa: float) -> float:
    """2 delta / (1 - 2 kappa), or +inf once kappa reaches 1/2."""
    if delta < 0 or kappa < 0:
        raise CoherenceError("delta and kappa must be non-negative")
    if kappa >= 0.5:
        return float("inf")
    return 2.0 * delta / (1.0 - 2.0 * kappa)


# --------------------------------------------------------------------------
# joint concentration


class _ClusterAnalysis:
    """Analysis of spectra on the subband-j support, split in/out of a cluster."""

    def __init__(self, op, keys, cluster: Cluster):
        self.op = op
        self.masks = [cluster.mask(k, b.shape) for k, b in zip(keys, op.bands)]
        self.keys = keys

    def split_l1(self, x: np.ndarray) -> tuple[float, float]:
        ys = self.op.forward(x)
        inside = sum(float(np.abs(y[m]).sum()) for y, m in zip(ys, self.masks))
        total = sum(float(np.abs(y).sum()) for y in ys)
        return inside, total

    def synth_members(self, rng: np.random.Generator) -> np.ndarray | None:
        ys = []
        any_member = False
        for b, m in zip(self.op.bands, self.masks):
            y = np.zeros(b.shape)
            if m.any():
                y[m] = rng.standard_normal(int(m.sum()))
                any_member = True
            ys.append(y)
        return self.op.adjoint(ys) if any_member else None

    def atom(self, rng: np.random.Generator, members_only: bool = True) -> np.ndarray | None:
        choices = [i for i, m in enumerate(self.masks) if m.any()] if members_only else list(range(len(self.masks)))
        if not choices:
            return None
        i = int(rng.choice(choices))
        b, m = self.op.bands[i], self.masks[i]
        ys = [np.zeros(bb.shape) for bb in self.op.bands]
        if members_only:
            pos = np.argwhere(m)
            k = pos[int(rng.integers(len(pos)))]
        else:
            k = (int(rng.integers(b.shape[0])), int(rng.integers(b.shape[1])))
        ys[i][k[0], k[1]] = 1.0
        return self.op.adjoint(ys)


def kappa_upper(S1: Cluster, S2: Cluster, pair: FramePair) -> float:
    """Upper bound on joint concentration: the larger of the two cluster coherences."""
    return max(cluster_coherence(S1, pair), cluster_coherence(S2, pair))


def kappa_bounds(S1: Cluster, S2: Cluster, pair: FramePair, samples: int = 16, seed: int = 0,
                 ascent_steps: int = 100) -> tuple[float, float]:
    """(sampled lower bound, exact upper bound) on the joint concentration.

    The ratio (||1_S1 Phi1^T f||_1 + ||1_S2 Phi2^T f||_1) /
    (||Phi1^T f||_1 + ||Phi2^T f||_1) is evaluated on fields band-limited to
    subband j: cluster atoms of both frames, Gaussian fields, random
    syntheses from each cluster, then `ascent_steps` steps of coordinate
    ascent along cluster atoms from the best sample.
    """
    from .separator import _operator  # local: separator imports frames only
    from .subband import filter_multiplier

    if S1.kind != WAVELET or S2.kind != CURVELET:
        raise CoherenceError("S1 must be a wavelet cluster and S2 a curvelet cluster")
    if S1.j != S2.j:
        raise CoherenceError("clusters must belong to the same subband")
    upper = kappa_upper(S1, S2, pair)
    if len(S1) == 0 and len(S2) == 0:
        return 0.0, upper
    grid = pair.grid
    j = S1.j
    support = np.flatnonzero(filter_multiplier(grid, j).reshape(-1) > 0)
    A = _operator(pair, WAVELET, j, support)
    B = _operator(pair, CURVELET, j, support)
    ca = _ClusterAnalysis(A, A.keys, S1)
    cb = _ClusterAnalysis(B, B.keys, S2)
    rng = np.random.default_rng(seed)

    def ratio(x):
        i1, t1 = ca.split_l1(x)
        i2, t2 = cb.split_l1(x)
        den = t1 + t2
        return (i1 + i2) / den if den > 0 else None

    def hermitian_noise():
        # spectrum of a real Gaussian field restricted to the support
        n = grid.size
        spec = sp_fft.fft2(rng.standard_normal((n, n)), norm="ortho").reshape(-1)
        return spec[support]

    candidates = []
    for _ in range(max(samples, 1)):
        for gen in (lambda: ca.atom(rng), lambda: cb.atom(rng), hermitian_noise,
                    lambda: ca.synth_members(rng), lambda: cb.synth_members(rng)):
            x = gen()
            if x is None:
                continue
            r = ratio(x)
            if r is not None:
                candidates.append((r, x))
    if not candidates:
        return 0.0, upper
    best_r, best_x = max(candidates, key=lambda c: c[0])
    scale = float(np.linalg.norm(best_x))
    for _ in range(ascent_steps):
        first, second = (ca, cb) if rng.random() < 0.5 else (cb, ca)
        d = first.atom(rng)
        if d is None:
            d = second.atom(rng)
        if d is None:
            break
        d = d / max(float(np.linalg.norm(d)), 1e-300) * scale
        improved = False
        for t in (1.0, -1.0, 0.5, -0.5, 0.1, -0.1):
            r = ratio(best_x + t * d)
            if r is not None and r > best_r:
                best_r, best_x, improved = r, best_x + t * d, True
                break
        if not improved:
            scale *= 0.9
    return float(best_r), upper


@dataclass
class CoherenceReport:
    j: int
    mu_singleton: float
    mu_c_forward: float
    mu_c_reverse: float
    kappa_lower: float
    delta1: float
    delta2: float
    f_norm: float
    cluster_sizes: tuple[int, int] = (0, 0)

    @property
    def kappa_upper(self) -> float:
        return max(self.mu_c_forward, self.mu_c_reverse)

    @property
    def bound(self) -> float:
        return recovery_bound(self.delta1 + self.delta2, self.kappa_upper)

    def as_dict(self) -> dict:
        b = self.bound
        return {
            "j": self.j,
            "mu_singleton": self.mu_singleton,
            "mu_c_forward": self.mu_c_forward,
            "mu_c_reverse": self.mu_c_reverse,
            "kappa_upper": self.kappa_upper,
            "kappa_lower": self.kappa_lower,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "f_norm": self.f_norm,
            "cluster_sizes": list(self.cluster_sizes),
            "bound": b if np.isfinite(b) else None,
            "bound_relative": (b / self.f_norm) if np.isfinite(b) and self.f_norm > 0 else None,
        }


def coherence_report(points: PointConfig | None, curve: CurveConfig | None, P: Field | None, C: Field | None,
                     j: int, pair: FramePair, eps: float = DEFAULT_EPS, samples: int = 16, seed: int = 0,
                     ascent_steps: int = 100, orientation_tol: float | None = None
                     ) -> tuple[CoherenceReport, Cluster, Cluster]:
    """Tube clusters, coherences and relative sparsities of the pieces P_j, C_j.

    Returns the report together with the two clusters it was computed on.
    A missing point set or curve gives an empty cluster and a zero piece.
    `samples=0` skips the sampled lower bound on kappa.
    """
    pair.grid.check_scale(j)
    zero = Field.zeros(pair.grid)
    S1 = point_tube_cluster(points, j, pair, eps) if points is not None else _empty(WAVELET, j, "point-tube")
    S2 = (curve_tube_cluster(curve, j, pair, eps, orientation_tol) if curve is not None
          else _empty(CURVELET, j, "curve-tube"))
    Pj = decompose(P)[j] if P is not None else zero
    Cj = decompose(C)[j] if C is not None else zero
    d1 = relative_sparsity(pair.wavelets.analysis(Pj, _band_scales(pair.wavelets, j)), S1)
    d2 = relative_sparsity(pair.curvelets.analysis(Cj, _band_scales(pair.curvelets, j)), S2)
    lower = kappa_bounds(S1, S2, pair, samples, seed, ascent_steps)[0] if samples > 0 else 0.0
    return CoherenceReport(
        j=j,
        mu_singleton=mutual_coherence(pair, j),
        mu_c_forward=cluster_coherence(S1, pair),
        mu_c_reverse=cluster_coherence(S2, pair),
        kappa_lower=lower,
        delta1=d1,
        delta2=d2,
        f_norm=(Pj + Cj).norm(),
        cluster_sizes=(len(S1), len(S2)),
    ), S1, S2
