import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geosep.grid import (Field, GridError, GridSpec, Spectrum, annulus_energy, annulus_mask, forward_dft,
                         inverse_dft)
from geosep.phantoms import PointConfig, point_spectrum


def dft_by_summation(v):
    """Unitary 2-D DFT from explicit exponential sums (no FFT)."""
    n = v.shape[0]
    k = np.arange(n)
    e = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return e @ v @ e.T / n


class TestGridSpec:
    def test_defaults(self):
        g = GridSpec(256)
        assert (g.j_min, g.j_max) == (2, 6)
        assert list(g.scales) == [2, 3, 4, 5, 6]

    @pytest.mark.parametrize("n", [32, 100, 96])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(GridError):
            GridSpec(n)

    def test_rejects_scale_above_nyquist(self):
        with pytest.raises(GridError):
            GridSpec(64, j_max=5)

    def test_rejects_inverted_range(self):
        with pytest.raises(GridError):
            GridSpec(64, j_min=4, j_max=3)

    def test_check_scale(self, grid64):
        grid64.check_scale(2)
        with pytest.raises(GridError):
            grid64.check_scale(5)

    def test_field_rejects_non_finite(self, grid64):
        v = np.zeros((64, 64))
        v[3, 3] = np.nan
        with pytest.raises(GridError):
            Field(grid64, v)


class TestForwardDFT:
    def test_zero(self, grid64):
        assert np.all(forward_dft(Field.zeros(grid64)).values == 0)

    def test_constant_concentrates_at_dc(self, grid64):
        s = forward_dft(Field(grid64, np.full((64, 64), 2.5))).values
        assert s[0, 0] == pytest.approx(2.5 * 64)
        s[0, 0] = 0
        assert np.abs(s).max() < 1e-12

    def test_matches_direct_summation(self, grid64, rng):
        v = rng.standard_normal((64, 64))
        s = forward_dft(Field(grid64, v)).values
        ref = dft_by_summation(v)
        assert np.abs(s - ref).max() < 1e-10 * np.abs(ref).max()
        # Parseval, energies from the summation oracle
        assert abs(np.sum(np.abs(ref) ** 2) - np.sum(v**2)) <= 1e-12 * np.sum(v**2)


class TestInverseDFT:
    def test_impulse_round_trip(self, grid64):
        v = np.zeros((64, 64))
        v[5, 17] = 1.0
        back = inverse_dft(forward_dft(Field(grid64, v))).values
        assert np.abs(back - v).max() <= 1e-12

    def test_random_round_trip(self, grid128, rng):
        v = rng.standard_normal((128, 128))
        back = inverse_dft(forward_dft(Field(grid128, v))).values
        assert np.linalg.norm(back - v) <= 1e-12 * np.linalg.norm(v)

    def test_rejects_non_hermitian(self, grid64):
        s = np.zeros((64, 64), dtype=complex)
        s[1, 2] = 1.0
        with pytest.raises(GridError):
            inverse_dft(Spectrum(grid64, s))


class TestAnnulusEnergy:
    def test_zero(self, grid64):
        assert annulus_energy(Spectrum(grid64, np.zeros((64, 64))), 3) == 0.0

    def test_lattice_point_count(self, grid256):
        # integer points with 8 < |xi| <= 32, counted by brute force
        count = sum(1 for a in range(-33, 34) for b in range(-33, 34) if 8 < np.hypot(a, b) <= 32)
        assert count == 3012
        s = np.where(annulus_mask(grid256, 4), 1.0, 0.0)
        assert annulus_energy(Spectrum(grid256, s), 4) == pytest.approx(count)

    def test_out_of_range(self, grid64):
        with pytest.raises(GridError):
            annulus_energy(Spectrum(grid64, np.zeros((64, 64))), 7)

    def test_one_point_energy_doubles(self, grid256):
        # |xi|^-1 integrated over a dyadic annulus is 2 pi (r2 - r1): ratio 2 per scale
        p = point_spectrum(PointConfig(((0.3, 0.6),)), grid256)
        for j in (3, 4, 5):
            ratio = annulus_energy(p.spectrum, j + 1) / annulus_energy(p.spectrum, j)
            assert ratio == pytest.approx(2.0, rel=0.1)

    def test_disjoint_annuli_bounded_by_total(self, grid256, rng):
        s = Spectrum(grid256, np.fft.fft2(rng.standard_normal((256, 256)), norm="ortho"))
        total = s.norm() ** 2
        # shells j and j+2 are disjoint
        assert annulus_energy(s, 2) + annulus_energy(s, 4) + annulus_energy(s, 6) <= total
        assert annulus_energy(s, 3) + annulus_energy(s, 5) <= total


@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_parseval_and_round_trip(grid64, seed, scale):
    v = scale * np.random.default_rng(seed).standard_normal((64, 64))
    f = Field(grid64, v)
    s = forward_dft(f)
    assert abs(s.norm() ** 2 - f.norm() ** 2) <= 1e-10 * f.norm() ** 2
    assert np.linalg.norm(inverse_dft(s).values - v) <= 1e-12 * np.linalg.norm(v)
