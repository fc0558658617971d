"""Exact l1 separation on tiny instances by vertex enumeration.

With K = [Phi1^T; -Phi2^T] and c = [0; Phi2^T S], the objective
||Phi1^T S1||_1 + ||Phi2^T (S - S1)||_1 equals ||K S1 + c||_1, a convex
piecewise-linear function of S1 in R^n. K has full column rank (Phi1 is
Parseval), so the minimum is attained at a vertex where n of the m1 + m2
affine pieces vanish. Enumerating every full-rank n-subset of rows and
evaluating the objective at the pinned point therefore finds the exact
optimum, together with every optimal vertex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

TIE_TOL = 1e-12


class OracleError(ValueError):
    pass


@dataclass
class TinyInstance:
    phi1: np.ndarray  # n x m1, rows orthonormal
    phi2: np.ndarray  # n x m2
    s1: np.ndarray  # ground-truth first component
    s2: np.ndarray  # ground-truth second component
    cluster1: tuple[int, ...] = ()
    cluster2: tuple[int, ...] = ()
    signal: np.ndarray | None = None

    def __post_init__(self):
        self.phi1 = np.atleast_2d(np.asarray(self.phi1, dtype=float))
        self.phi2 = np.atleast_2d(np.asarray(self.phi2, dtype=float))
        self.s1 = np.asarray(self.s1, dtype=float).reshape(-1)
        self.s2 = np.asarray(self.s2, dtype=float).reshape(-1)
        n = self.phi1.shape[0]
        if self.phi2.shape[0] != n or self.s1.size != n or self.s2.size != n:
            raise OracleError("frame matrices and components must share the dimension n")
        if n > 8:
            raise OracleError(f"dimension {n} exceeds 8")
        if self.phi1.shape[1] + self.phi2.shape[1] > 24:
            raise OracleError("m1 + m2 exceeds 24")
        for name, phi in (("phi1", self.phi1), ("phi2", self.phi2)):
            if np.abs(phi @ phi.T - np.eye(n)).max() > 1e-12:
                raise OracleError(f"{name} is not a Parseval frame")
        self.cluster1 = tuple(sorted(int(i) for i in self.cluster1))
        self.cluster2 = tuple(sorted(int(i) for i in self.cluster2))
        for cl, m in ((self.cluster1, self.m1), (self.cluster2, self.m2)):
            if any(not 0 <= i < m for i in cl):
                raise OracleError("cluster index out of range")
        if self.signal is None:
            self.signal = self.s1 + self.s2
        else:
            self.signal = np.asarray(self.signal, dtype=float).reshape(-1)
            if np.linalg.norm(self.s1 + self.s2 - self.signal) > 1e-12:
                raise OracleError("ground-truth components do not sum to the signal")

    @property
    def n(self) -> int:
        return self.phi1.shape[0]

    @property
    def m1(self) -> int:
        return self.phi1.shape[1]

    @property
    def m2(self) -> int:
        return self.phi2.shape[1]

    def objective(self, s1: np.ndarray, signal: np.ndarray | None = None) -> float:
        signal = self.signal if signal is None else signal
        return float(np.abs(self.phi1.T @ s1).sum() + np.abs(self.phi2.T @ (signal - s1)).sum())

    def delta(self) -> float:
        """l1 mass of the true components' coefficients outside the clusters."""
        out1 = np.ones(self.m1, dtype=bool)
        out1[list(self.cluster1)] = False
        out2 = np.ones(self.m2, dtype=bool)
        out2[list(self.cluster2)] = False
        return float(np.abs(self.phi1.T @ self.s1)[out1].sum() + np.abs(self.phi2.T @ self.s2)[out2].sum())

    def cluster_coherences(self) -> tuple[float, float]:
        gram = np.abs(self.phi1.T @ self.phi2)  # m1 x m2
        mu1 = float(gram[list(self.cluster1), :].sum(axis=0).max()) if self.cluster1 else 0.0
        mu2 = float(gram[:, list(self.cluster2)].sum(axis=1).max()) if self.cluster2 else 0.0
        return mu1, mu2

    def kappa_upper(self) -> float:
        return max(self.cluster_coherences())

    def to_dict(self) -> dict:
        return {
            "phi1": self.phi1.tolist(),
            "phi2": self.phi2.tolist(),
            "s1": self.s1.tolist(),
            "s2": self.s2.tolist(),
            "cluster1": list(self.cluster1),
            "cluster2": list(self.cluster2),
            "signal": self.signal.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TinyInstance":
        return cls(np.array(d["phi1"]), np.array(d["phi2"]), np.array(d["s1"]), np.array(d["s2"]),
                   tuple(d.get("cluster1", ())), tuple(d.get("cluster2", ())),
                   np.array(d["signal"]) if "signal" in d else None)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TinyInstance":
        return cls.from_dict(json.loads(text))


@dataclass
class ExactSolution:
    s1: np.ndarray
    s2: np.ndarray
    objective: float
    optimal_set: list[np.ndarray] = field(default_factory=list, repr=False)
    candidates: int = 0
    min_candidate_objective: float = np.inf


def _vertices(K: np.ndarray, c: np.ndarray, chunk: int = 20000):
    """Yield (points, objectives) for every full-rank n-subset of rows of K."""
    m, n = K.shape
    subsets = combinations(range(m), n)
    while True:
        block = np.array([s for _, s in zip(range(chunk), subsets)], dtype=np.int64)
        if block.size == 0:
            return
        mats = K[block]  # (b, n, n)
        rhs = -c[block]
        # rank test through the smallest singular value
        sv = np.linalg.svd(mats, compute_uv=False)
        ok = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1e-300)
        if ok.any():
            pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
            objs = np.abs(pts @ K.T + c).sum(axis=1)
            yield pts, objs


def exact_separation(inst: TinyInstance, signal: np.ndarray | None = None) -> ExactSolution:
    """Global minimiser of ||Phi1^T S1||_1 + ||Phi2^T (S - S1)||_1 with all tied optima."""
    signal = inst.signal if signal is None else np.asarray(signal, dtype=float)
    n = inst.n
    if np.linalg.norm(signal) == 0.0:
        z = np.zeros(n)
        return ExactSolution(z, z.copy(), 0.0, [z], 0, 0.0)
    K = np.vstack([inst.phi1.T, -inst.phi2.T])
    c = np.concatenate([np.zeros(inst.m1), inst.phi2.T @ signal])
    pts_all, objs_all = [], []
    for pts, objs in _vertices(K, c):
        pts_all.append(pts)
        objs_all.append(objs)
    if not objs_all:
        raise OracleError("no full-rank subset of analysis rows: degenerate frames")
    pts = np.concatenate(pts_all)
    objs = np.concatenate(objs_all)
    best = float(objs.min())
    count = int(objs.size)
    tol = TIE_TOL * max(1.0, abs(best))
    uniq: list[np.ndarray] = []
    for p in pts[objs <= best + tol]:
        if not any(np.linalg.norm(p - q) <= 1e-9 for q in uniq):
            uniq.append(p)
    s1 = uniq[0]
    return ExactSolution(s1, signal - s1, inst.objective(s1, signal), uniq, count, best)


@dataclass
class BoundReport:
    applicable: bool
    kappa_upper: float
    delta: float
    bound: float
    worst_error: float
    violated: bool
    optimal_points: int
    noise_eps: float = 0.0
    informative: bool = True

    def as_dict(self) -> dict:
        return {k: (v if not isinstance(v, float) or np.isfinite(v) else None) for k, v in self.__dict__.items()}


def _worst_error(inst: TinyInstance, sol: ExactSolution, signal: np.ndarray) -> float:
    return max(float(np.linalg.norm(p - inst.s1) + np.linalg.norm(signal - p - inst.s2)) for p in sol.optimal_set)


def verify_recovery_bound(inst: TinyInstance, bound_scale: float = 1.0) -> BoundReport:
    """Check ||S1* - S1^0|| + ||S2* - S2^0|| <= 2 delta / (1 - 2 kappa) at every optimum.

    `bound_scale` multiplies the bound; values below one are a harness
    self-test that must produce violations.
    """
    kappa = inst.kappa_upper()
    delta = inst.delta()
    if kappa >= 0.5:
        return BoundReport(False, kappa, delta, np.inf, np.nan, False, 0)
    sol = exact_separation(inst)
    bound = bound_scale * 2.0 * delta / (1.0 - 2.0 * kappa)
    worst = _worst_error(inst, sol, inst.signal)
    return BoundReport(True, kappa, delta, bound, worst, worst > bound + 1e-9, len(sol.optimal_set))


def verify_noise_bound(inst: TinyInstance, noise: np.ndarray, eps_n: float, bound_scale: float = 1.0) -> BoundReport:
    """Exact solve on S + noise; error against the clean split <= (2 delta + 5 eps)/(1 - 2 kappa)."""
    noise = np.asarray(noise, dtype=float).reshape(-1)
    if noise.size != inst.n:
        raise OracleError("noise has the wrong dimension")
    n1 = float(np.abs(inst.phi1.T @ noise).sum())
    n2 = float(np.abs(inst.phi2.T @ noise).sum())
    if not (n1 < eps_n or n2 < eps_n) and np.linalg.norm(noise) > 0:
        raise OracleError("eps_n must exceed the l1 analysis norm of the noise in one frame")
    kappa = inst.kappa_upper()
    delta = inst.delta()
    if kappa >= 0.5:
        return BoundReport(False, kappa, delta, np.inf, np.nan, False, 0, eps_n)
    signal = inst.signal + noise
    sol = exact_separation(inst, signal)
    bound = bound_scale * (2.0 * delta + 5.0 * eps_n) / (1.0 - 2.0 * kappa)
    worst = _worst_error(inst, sol, signal)
    # a bound above the trivial error scale says nothing about the solver
    informative = bound < np.linalg.norm(inst.s1) + np.linalg.norm(inst.s2) + np.linalg.norm(signal)
    return BoundReport(True, kappa, delta, bound, worst, worst > bound + 1e-9, len(sol.optimal_set), eps_n, informative)


# --------------------------------------------------------------------------
# random instances


def random_parseval(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """n x m matrix with orthonormal rows: n rows of a random orthogonal m x m matrix."""
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    q = q * np.sign(np.diag(r))
    return q[:n, :]


def random_instance(rng: np.random.Generator, n: int = 4, m1: int = 6, m2: int = 6,
                    cluster_size: tuple[int, int] = (1, 1), leak: float = 0.05,
                    max_kappa: float = 0.5, attempts: int = 500) -> TinyInstance:
    """Random Parseval pair with clusters whose kappa_upper stays below `max_kappa`.

    Components are syntheses from cluster coefficients plus a `leak` of
    off-cluster coefficients, so delta is small but usually positive.
    """
    for _ in range(attempts):
        phi1 = random_parseval(n, m1, rng)
        phi2 = random_parseval(n, m2, rng)
        c1 = tuple(int(i) for i in rng.choice(m1, size=cluster_size[0], replace=False))
        c2 = tuple(int(i) for i in rng.choice(m2, size=cluster_size[1], replace=False))
        a1 = leak * rng.standard_normal(m1)
        a1[list(c1)] = rng.standard_normal(len(c1)) + np.sign(rng.standard_normal(len(c1)))
        a2 = leak * rng.standard_normal(m2)
        a2[list(c2)] = rng.standard_normal(len(c2)) + np.sign(rng.standard_normal(len(c2)))
        inst = TinyInstance(phi1, phi2, phi1 @ a1, phi2 @ a2, c1, c2)
        if inst.kappa_upper() < max_kappa:
            return inst
    raise OracleError("could not draw an instance below the requested kappa")


def adversarial_instance(rng: np.random.Generator, max_n: int = 2, extra: int = 2,
                         max_kappa: float = 0.5, attempts: int = 500) -> TinyInstance:
    """Small instance with unstructured ground truth and singleton clusters.

    The components are plain Gaussian vectors rather than cluster
    syntheses, so delta is large and the exact minimiser often lands far
    from the truth. Errors then come within a factor of two of the bound,
    which is what a self-test needs.
    """
    for _ in range(attempts):
        n = int(rng.integers(1, max_n + 1))
        m1 = n + int(rng.integers(0, extra + 1))
        m2 = n + int(rng.integers(0, extra + 1))
        phi1 = random_parseval(n, m1, rng)
        phi2 = random_parseval(n, m2, rng)
        c1 = (int(rng.integers(m1)),)
        c2 = (int(rng.integers(m2)),)
        inst = TinyInstance(phi1, phi2, rng.standard_normal(n), rng.standard_normal(n), c1, c2)
        if inst.kappa_upper() < max_kappa:
            return inst
    raise OracleError("could not draw an instance below the requested kappa")


def orthonormal_pair_instance(n: int = 8, rng: np.random.Generator | None = None) -> TinyInstance:
    """delta = 0 instance: identity basis and a normalised Hadamard basis.

    Each component is a multiple of one basis vector, so its analysis
    coefficients live on a singleton cluster; kappa_upper = n^-1/2.
    """
    from scipy.linalg import hadamard

    rng = rng or np.random.default_rng(0)
    phi1 = np.eye(n)
    phi2 = hadamard(n) / np.sqrt(n)
    i = int(rng.integers(n))
    k = int(rng.integers(n))
    s1 = (1.0 + rng.random()) * phi1[:, i]
    s2 = (1.0 + rng.random()) * phi2[:, k]
    return TinyInstance(phi1, phi2, s1, s2, (i,), (k,))


@dataclass
class SweepSummary:
    instances: int
    applicable: int
    violations: int
    max_ratio: float
    uninformative: int = 0

    def line(self) -> str:
        return (f"{self.instances} instances, {self.applicable} applicable, "
                f"{self.violations} violations, max error/bound {self.max_ratio:.3f}")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def sweep_recovery_bound(count: int, seed: int, bound_scale: float = 1.0, family: str = "random",
                         **kw) -> SweepSummary:
    """Verify the clean bound on `count` instances from the named family."""
    make = {"random": random_instance, "adversarial": adversarial_instance}.get(family)
    if make is None:
        raise OracleError(f"unknown instance family {family!r}")
    rng = np.random.default_rng(seed)
    applicable = violations = 0
    worst = 0.0
    for _ in range(count):
        rep = verify_recovery_bound(make(rng, **kw), bound_scale)
        if rep.applicable:
            applicable += 1
            violations += int(rep.violated)
            if rep.bound > 0:
                worst = max(worst, rep.worst_error / rep.bound)
    return SweepSummary(count, applicable, violations, worst)


def sweep_noise(count: int, seed: int, noise_level: float = 0.05, bound_scale: float = 1.0, **kw) -> SweepSummary:
    rng = np.random.default_rng(seed)
    applicable = violations = uninformative = 0
    worst = 0.0
    for _ in range(count):
        inst = random_instance(rng, **kw)
        noise = noise_level * rng.standard_normal(inst.n)
        eps_n = min(np.abs(inst.phi1.T @ noise).sum(), np.abs(inst.phi2.T @ noise).sum()) * (1 + 1e-9) + 1e-15
        rep = verify_noise_bound(inst, noise, eps_n, bound_scale)
        if rep.applicable:
            applicable += 1
            violations += int(rep.violated)
            uninformative += int(not rep.informative)
            if rep.bound > 0:
                worst = max(worst, rep.worst_error / rep.bound)
    return SweepSummary(count, applicable, violations, worst, uninformative)


def self_test(count: int = 500, seed: int = 0, bound_scale: float = 0.5) -> tuple[SweepSummary, SweepSummary]:
    """Run the adversarial family against the true and a shrunk bound.

    A working harness reports no violations for the first summary and at
    least one for the second.
    """
    honest = sweep_recovery_bound(count, seed, 1.0, family="adversarial")
    shrunk = sweep_recovery_bound(count, seed, bound_scale, family="adversarial")
    return honest, shrunk
