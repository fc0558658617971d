"""Acceptance criteria A1-A9 at their stated tolerances.

Each test appends one PASS/FAIL line to the summary printed at the end of
the run, then asserts the criterion. Grids of 512 make several of these
multi-minute runs.
"""

import time

import numpy as np
import pytest
from conftest import in_band_field

from geosep.coherence import coherence_report, curve_tube_cluster, relative_sparsity
from geosep.frames import frame_pair, p1_distance
from geosep.grid import Field, GridSpec
from geosep.oracle import exact_separation, random_instance, sweep_noise, sweep_recovery_bound
from geosep.phantoms import add_noise, energy_profile, mid_band, reference_phantoms, segment_spectrum
from geosep.separator import DenseAnalysis, SolverConfig, log2_slope, separate_full, separation_metrics, solve_split
from geosep.subband import decompose, reconstruct


def record(log, name, ok, detail, seconds, limit):
    within = seconds < limit
    status = "PASS" if ok and within else "FAIL"
    line = f"{name} {status}: {detail} ({seconds:.0f} s, limit {limit:.0f} s)"
    log.append(line)
    print(line)
    return ok and within


def strictly_decreasing(values):
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))


def fmt(d):
    return ", ".join(f"{j}: {v:.4g}" for j, v in d.items())


@pytest.fixture(scope="module")
def grid512():
    return GridSpec(512)


@pytest.fixture(scope="module")
def pair512(grid512):
    return frame_pair(grid512)


@pytest.fixture(scope="module")
def ref512(grid512):
    return reference_phantoms(grid512)


@pytest.fixture(scope="module")
def pieces512(ref512):
    return decompose(ref512.point.field), decompose(ref512.curve.field)


def test_a1_parseval(grid256, pair256, acceptance_log):
    t = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        f = in_band_field(grid256, rng)
        e = f.norm() ** 2
        for frame in (pair256.wavelets, pair256.curvelets):
            worst = max(worst, abs(frame.analysis(f).norm() ** 2 - e) / e)
    ok = record(acceptance_log, "A1", worst <= 1e-8, f"worst relative Parseval defect {worst:.2e} <= 1e-8",
                time.perf_counter() - t, 60)
    assert ok


def test_a2_filter_bank(grid256, acceptance_log):
    t = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(50):
        f = Field(grid256, rng.standard_normal((256, 256)))
        worst = max(worst, (reconstruct(decompose(f)) - f).norm() / f.norm())
    ok = record(acceptance_log, "A2", worst <= 1e-8, f"worst relative reconstruction error {worst:.2e} <= 1e-8",
                time.perf_counter() - t, 60)
    assert ok


def test_a3_energy_matching(grid512, acceptance_log):
    t = time.perf_counter()
    ref = reference_phantoms(grid512)
    js = mid_band(grid512)
    ep, ec = energy_profile(ref.point, js), energy_profile(ref.curve, js)
    slope_p = log2_slope(js, [ep[j] for j in js])
    slope_c = log2_slope(js, [ec[j] for j in js])
    ratios = {j: ep[j] / ec[j] for j in js}
    ok = abs(slope_p - 1) <= 0.3 and abs(slope_c - 1) <= 0.3 and all(0.5 <= r <= 2 for r in ratios.values())
    ok = record(acceptance_log, "A3", ok,
                f"slopes point {slope_p:.3f}, circle {slope_c:.3f}; ratios {fmt(ratios)} over j={js[0]}..{js[-1]}",
                time.perf_counter() - t, 60)
    assert ok


def test_a4_separation_trend(ref512, pair512, pieces512, acceptance_log):
    t = time.perf_counter()
    res = separate_full(ref512.mixture.field, pair512, SolverConfig(), scales=range(3, 8))
    m = separation_metrics(res, *pieces512)
    js = sorted(m.ratios)
    ok = js == [3, 4, 5, 6, 7] and strictly_decreasing([m.ratios[j] for j in js]) and m.slope <= -0.25
    ok = record(acceptance_log, "A4", ok,
                f"r_j {fmt(m.ratios)}; slope {m.slope:.3f} <= -0.25; degraded scales {res.degraded}",
                time.perf_counter() - t, 600)
    assert ok


def test_a5_cluster_decay(ref512, pair512, acceptance_log):
    t = time.perf_counter()
    js = [4, 5, 6, 7]
    reps = {j: coherence_report(ref512.points, ref512.circle, ref512.point.field, ref512.curve.field, j, pair512,
                                samples=0)[0] for j in js}
    series = {
        "mu_c1": [reps[j].mu_c_forward for j in js],
        "mu_c2": [reps[j].mu_c_reverse for j in js],
        "delta1/|f_j|": [reps[j].delta1 / reps[j].f_norm for j in js],
        "delta2/|f_j|": [reps[j].delta2 / reps[j].f_norm for j in js],
    }
    slope = log2_slope(js, series["mu_c1"])
    failing = [k for k, v in series.items() if not strictly_decreasing(v)]
    ok = not failing and slope <= -0.15
    detail = "; ".join(f"{k} [{', '.join(f'{x:.3g}' for x in v)}]" for k, v in series.items())
    detail += f"; mu_c1 slope {slope:.3f} <= -0.15; not decreasing: {failing or 'none'}"
    ok = record(acceptance_log, "A5", ok, detail, time.perf_counter() - t, 600)
    assert ok


def test_a6_recovery_bound(acceptance_log):
    t = time.perf_counter()
    clean = sweep_recovery_bound(200, seed=2026)
    noisy = sweep_noise(100, seed=2027)
    ok = clean.applicable == 200 and clean.violations == 0 and noisy.applicable == 100 and noisy.violations == 0
    ok = record(acceptance_log, "A6", ok, f"clean: {clean.line()}; noisy: {noisy.line()}",
                time.perf_counter() - t, 300)
    assert ok


def test_a7_solver_certification(acceptance_log):
    t = time.perf_counter()
    rng = np.random.default_rng(2028)
    cfg = SolverConfig(relative_gap_tol=1e-10, max_iterations=20000, residual_tol=1e-8)
    worst = 0.0
    for _ in range(100):
        inst = random_instance(rng, n=int(rng.integers(2, 9)), m1=int(rng.integers(8, 13)),
                               m2=int(rng.integers(8, 13)))
        exact = exact_separation(inst)
        res = solve_split(DenseAnalysis(inst.phi1), DenseAnalysis(inst.phi2), inst.signal, cfg)
        worst = max(worst, abs(inst.objective(res.x) - exact.objective) / exact.objective)
    ok = record(acceptance_log, "A7", worst <= 1e-6, f"worst relative objective gap {worst:.2e} <= 1e-6",
                time.perf_counter() - t, 300)
    assert ok


def _tail_exponent(coeffs, centres, points, j):
    """Slope of log2 max |coefficient| against log2 distance, beyond 8 units of 2^-j."""
    d = np.abs(centres[:, None, :] - points[None])
    d = np.minimum(d, 1 - d)
    d = np.sqrt((d**2).sum(-1)).min(1) * 2**j
    edges = 2 ** np.arange(3, np.log2(d.max()) + 0.01, 0.25)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (d >= lo) & (d < hi)
        if sel.any():
            xs.append(0.5 * np.log2(lo * hi))
            ys.append(np.log2(coeffs[sel].max()))
    return float(np.polyfit(xs, ys, 1)[0])


def test_a8_localization(grid512, pair512, ref512, pieces512, acceptance_log):
    t = time.perf_counter()
    P, C = pieces512
    pts = np.array(ref512.points.points)
    js = [5, 6, 7]
    tails = {}
    for j in js:
        co = pair512.wavelets.analysis(P[j], [j])
        band = pair512.wavelets.bands[(j, 0)]
        tails[j] = _tail_exponent(np.abs(co.bands[(j, 0)]).ravel(), band.centers().reshape(-1, 2), pts, j)
    captured = {}
    for j in js:
        S = curve_tube_cluster(ref512.circle, j, pair512)
        co = pair512.curvelets.analysis(C[j], [j - 1, j, j + 1])
        captured[j] = 1 - relative_sparsity(co, S) / co.norm(1)
    seg = decompose(segment_spectrum(0.125, grid512).field)
    wedge = {}
    for j in js:
        co = pair512.curvelets.analysis(seg[j], [j - 1, j, j + 1])
        total = sum(float((v**2).sum()) for v in co.bands.values())
        # the wedge whose centre orientation is the segment normal (theta = 0)
        normal = sum(float((v**2).sum()) for k, v in co.bands.items()
                     if k[0] >= grid512.j_min and p1_distance(pair512.curvelets.bands[k].theta, 0.0) < 1e-12)
        wedge[j] = normal / total
    ok_a = all(v <= -3 for v in tails.values())
    ok_b = all(v >= 0.95 for v in captured.values())
    ok_c = all(v >= 0.90 for v in wedge.values())
    seconds = time.perf_counter() - t
    record(acceptance_log, "A8(a)", ok_a, f"wavelet tail exponents {fmt(tails)} <= -3", seconds, 600)
    record(acceptance_log, "A8(b)", ok_b, f"curve-tube l1 capture {fmt(captured)} >= 0.95", seconds, 600)
    record(acceptance_log, "A8(c)", ok_c, f"segment normal-wedge l2 share {fmt(wedge)} >= 0.90", seconds, 600)
    assert ok_a and ok_b and ok_c and seconds < 600


def test_a9_noise_robustness(ref512, pair512, pieces512, acceptance_log):
    t = time.perf_counter()
    noisy = add_noise(ref512.mixture, 0.01, 0)
    res = separate_full(noisy.field, pair512, SolverConfig(), scales=range(3, 7))
    m = separation_metrics(res, *pieces512)
    js = sorted(m.ratios)
    ok = js == [3, 4, 5, 6] and strictly_decreasing([m.ratios[j] for j in js])
    ok = record(acceptance_log, "A9", ok, f"noisy r_j {fmt(m.ratios)}; slope {m.slope:.3f}",
                time.perf_counter() - t, 600)
    assert ok
