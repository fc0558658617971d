import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import j0

from geosep.grid import GridSpec, annulus_energy, inverse_dft
from geosep.phantoms import (PhantomError, PointConfig, add_noise, circle_config, curve_from_csv, curve_spectrum,
                             curve_transform, default_points, energy_profile, match_energies, mid_band,
                             noise_field, noise_growth, point_spectrum, reference_phantoms, segment_config,
                             segment_spectrum)


class TestPointConfig:
    def test_limits(self):
        with pytest.raises(PhantomError):
            PointConfig(())
        with pytest.raises(PhantomError):
            PointConfig(tuple((0.01 * i, 0.5) for i in range(65)))
        with pytest.raises(PhantomError):
            PointConfig(((1.0, 0.5),))

    def test_default_points_touch_circle(self):
        pts = np.array(default_points().points)
        d = np.hypot(pts[:, 0] - 0.5, pts[:, 1] - 0.5)
        assert np.isclose(d, 0.25).sum() == 1
        assert (d < 0.25).any() and (d > 0.25).any()


class TestPointSpectrum:
    def test_origin_point_is_real_positive_radial(self, grid128):
        s = point_spectrum(PointConfig(((0.0, 0.0),)), grid128).spectrum.values
        assert np.abs(s.imag).max() == 0.0
        assert np.all(s.real[grid128.radius > 0] > 0)
        assert s[3, 4] == s[4, 3] == s[5, 0] == s[-5, 0]

    def test_energy_ratio(self, grid256):
        p = point_spectrum(PointConfig(((0.3, 0.6),)), grid256)
        for j in (3, 4, 5):
            assert annulus_energy(p.spectrum, j + 1) / annulus_energy(p.spectrum, j) == pytest.approx(2, rel=0.1)

    def test_antipodal_interference(self, grid128):
        one = point_spectrum(PointConfig(((0.25, 0.25),)), grid128).spectrum.values
        two = point_spectrum(PointConfig(((0.25, 0.25), (0.75, 0.75))), grid128).spectrum.values
        xi1, xi2 = grid128.xi
        # (x1 - x2).xi = (xi1 + xi2) / 2 is an integer exactly when xi1 + xi2 is even
        even = (xi1 + xi2) % 2 == 0
        assert np.allclose(np.abs(two[even]), 2 * np.abs(one[even]), rtol=1e-12)
        assert np.abs(two[~even]).max() <= 1e-9 * np.abs(one).max()


class TestCurveSpectrum:
    def test_circle_matches_bessel(self):
        cfg = circle_config(center=(0.5, 0.5), radius=0.25, nodes=4096)
        rng = np.random.default_rng(0)
        r = rng.uniform(1, 100, 64)
        ang = rng.uniform(0, 2 * np.pi, 64)
        xi = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
        vals = curve_transform(cfg, xi)
        phase = np.exp(-2j * np.pi * xi @ np.array([0.5, 0.5]))
        assert np.abs(vals - phase * j0(2 * np.pi * 0.25 * r)).max() <= 1e-10

    def test_circle_radial_symmetry(self):
        cfg = circle_config(nodes=4096)
        r = np.linspace(2, 120, 40)
        base = np.abs(curve_transform(cfg, np.stack([r, 0 * r], axis=1)))
        for a in (0.3, 1.1, 2.5):
            rot = np.abs(curve_transform(cfg, np.stack([r * np.cos(a), r * np.sin(a)], axis=1)))
            assert np.abs(rot - base).max() <= 1e-6

    def test_energy_ratio(self, grid256):
        c = curve_spectrum(circle_config(nodes=4096), grid256)
        for j in (3, 4, 5):
            assert annulus_energy(c.spectrum, j + 1) / annulus_energy(c.spectrum, j) == pytest.approx(2, rel=0.1)

    def test_zero_length_curve(self, grid64):
        cfg = circle_config(nodes=4096)
        empty = type(cfg)(cfg.t[:0], cfg.points[:0], cfg.normals[:0], cfg.weights[:0])
        assert curve_spectrum(empty, grid64).spectrum.norm() == 0

    def test_too_few_nodes(self, grid256):
        with pytest.raises(PhantomError):
            curve_spectrum(circle_config(nodes=256), grid256)

    def test_quadrature_converged(self, grid256):
        a = curve_spectrum(circle_config(nodes=4096), grid256).spectrum.values
        b = curve_spectrum(circle_config(nodes=8192), grid256).spectrum.values
        assert np.abs(a - b).max() <= 1e-8 * np.abs(b).max()

    def test_csv_round_trip(self, tmp_path, grid128):
        cfg = circle_config(nodes=4096)
        path = tmp_path / "circle.csv"
        rows = np.column_stack([np.append(cfg.t, 1.0), np.vstack([cfg.points, cfg.points[:1]])])
        np.savetxt(path, rows, delimiter=",", header="t,x,y")
        loaded = curve_from_csv(path)
        assert loaded.closed and loaded.num_nodes == 4096
        assert loaded.min_radius_of_curvature == pytest.approx(0.25, rel=1e-3)
        a = curve_spectrum(loaded, grid128).spectrum.values
        b = curve_spectrum(cfg, grid128).spectrum.values
        assert np.abs(a - b).max() <= 1e-8 * np.abs(b).max()

    def test_csv_too_short(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,0.1,0.1\n1,0.2,0.2\n")
        with pytest.raises(PhantomError):
            curve_from_csv(path)


class TestSegment:
    def test_independent_of_first_frequency(self, grid128):
        s = segment_spectrum(0.125, grid128).spectrum.values
        assert np.ptp(s, axis=0).max() == 0.0

    def test_dc_is_taper_integral(self, grid128):
        s = segment_spectrum(0.125, grid128).spectrum.values
        # unit translates of w2 sum to one, so its integral is one
        assert s[0, 0].real == pytest.approx(128 * 0.125, rel=1e-10)

    def test_matches_quadrature(self, grid256):
        closed = segment_spectrum(0.125, grid256).spectrum.values
        quad = curve_spectrum(segment_config(0.125, nodes=4097), grid256).spectrum.values
        closed[0, 0] = 0.0  # quadrature phantoms drop DC
        assert np.abs(closed - quad).max() <= 1e-10 * np.abs(closed).max()

    @pytest.mark.parametrize("j", [5, 6])
    def test_horizontal_wedge_concentration(self, pair256, grid256, j):
        s = segment_spectrum(0.125, grid256).spectrum.values
        c = pair256.curvelets.analysis_from_spectrum(s, [j])
        total = sum(np.sum(v**2) for v in c.bands.values())
        assert np.sum(c.bands[(j, 0)] ** 2) >= 0.9 * total

    @pytest.mark.parametrize("rho", [0.0, 0.25, -0.1])
    def test_rho_range(self, grid64, rho):
        with pytest.raises(PhantomError):
            segment_spectrum(rho, grid64)


class TestMatchEnergies:
    def test_identical(self, grid128):
        p = point_spectrum(default_points(), grid128)
        _, _, factor = match_energies(p, p)
        assert factor == pytest.approx(1.0, abs=1e-14)

    def test_prescaled(self, grid128):
        p = point_spectrum(default_points(), grid128)
        c = curve_spectrum(circle_config(nodes=4096), grid128)
        _, _, f1 = match_energies(p, c)
        _, _, f10 = match_energies(p, c.scaled(10.0))
        assert f10 == pytest.approx(0.1 * f1, rel=1e-12)

    def test_zero_energy(self, grid64):
        p = point_spectrum(default_points(), grid64)
        with pytest.raises(PhantomError):
            match_energies(p, p.scaled(0.0))

    def test_reference_pair_512(self):
        grid = GridSpec(512)
        ref = reference_phantoms(grid)
        ep, ec = energy_profile(ref.point), energy_profile(ref.curve)
        for j in mid_band(grid):
            assert 0.5 <= ep[j] / ec[j] <= 2.0
            assert abs(np.log2(ep[j]) - np.log2(ec[j])) <= 1

    def test_energy_slopes(self, grid256):
        ref = reference_phantoms(grid256)
        js = mid_band(grid256)
        for ph in (ref.point, ref.curve):
            e = energy_profile(ph, js)
            slope = np.polyfit(js, np.log2([e[j] for j in js]), 1)[0]
            assert abs(slope - 1.0) <= 0.3


class TestNoise:
    def test_level_zero(self, grid64):
        p = point_spectrum(default_points(), grid64)
        assert add_noise(p, 0.0, 1) is p

    def test_negative_level(self, grid64):
        with pytest.raises(PhantomError):
            noise_field(grid64, -0.1, 1.0, 0)

    def test_deterministic(self, grid64):
        p = point_spectrum(default_points(), grid64)
        a, b = add_noise(p, 0.05, 7), add_noise(p, 0.05, 7)
        assert np.array_equal(a.field.values, b.field.values)
        assert np.array_equal(a.spectrum.values, b.spectrum.values)

    def test_norm_and_spectrum_consistent(self, grid128):
        p = point_spectrum(default_points(), grid128)
        q = add_noise(p, 0.2, 3)
        assert (q.field - p.field).norm() == pytest.approx(0.2 * p.field.norm(), rel=1e-12)
        assert np.abs(np.fft.ifft2(q.spectrum.values, norm="ortho").real - q.field.values).max() <= 1e-10

    def test_noise_growth_is_not_slower_than_sqrt(self, pair256, grid256):
        # white noise fills every lattice site, so the curvelet l1 norm grows ~ 4^j
        ref = reference_phantoms(grid256)
        noise = noise_field(grid256, 0.01, ref.mixture.field.norm(), 0)
        g = noise_growth(noise, pair256, range(3, 7))
        assert g.slope == pytest.approx(2.06, abs=0.15)
        assert g.slower_than_sqrt is False


@given(seed=st.integers(0, 2**31 - 1), level=st.floats(0.0, 1.0))
def test_noise_norm_property(grid64, seed, level):
    n = noise_field(grid64, level, 3.0, seed)
    assert n.norm() == pytest.approx(3.0 * level, rel=1e-12, abs=1e-15)


@given(x=st.floats(0, 0.999), y=st.floats(0, 0.999), a=st.floats(0.1, 10))
def test_point_spectrum_hermitian_and_linear(grid64, x, y, a):
    p = point_spectrum(PointConfig(((x, y),), (a,)), grid64)
    q = point_spectrum(PointConfig(((x, y),)), grid64)
    assert p.spectrum.hermitian_residual() <= 1e-12
    # the stored field is the inverse transform of the stored spectrum
    assert np.abs(inverse_dft(p.spectrum).values - p.field.values).max() <= 1e-12 * np.abs(p.field.values).max()
    assert np.allclose(p.spectrum.values, a * q.spectrum.values, rtol=1e-12, atol=0)
