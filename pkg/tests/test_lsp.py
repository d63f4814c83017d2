import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from helpers import brute_force_spread

from mmwchannel.core import (
    EmptyResult,
    InvalidInput,
    MultipathComponent,
    PowerAngularSpectrum,
    PowerDelayProfile,
    SingularKFactor,
)
from mmwchannel.lsp import (
    circular_spread,
    count_directional_multipaths,
    cross_correlation,
    fit_truncated_gaussian_xpr,
    fit_zsa_local_mean,
    k_factor,
    pas_spreads,
    path_delay_spread,
    rms_delay_spread,
    xpr_per_bin,
    zenith_spread,
)

angle_sets = st.lists(
    st.tuples(st.floats(0, 359.999), st.floats(0.01, 100)), min_size=1, max_size=12
)


class TestCircularSpread:
    @pytest.mark.parametrize("angle", [0.0, 123.4, 359.9])
    def test_single_path_is_zero(self, angle):
        assert circular_spread([angle], [7.0]) == 0.0

    def test_seam_pair(self):
        assert circular_spread([350, 10], [1, 1]) == pytest.approx(10.0, abs=1e-9)

    def test_antipodal_pair(self):
        assert circular_spread([0, 180], [1, 1]) == pytest.approx(90.0, abs=1e-9)

    def test_matches_fine_grid(self, rng):
        for _ in range(20):
            n = rng.integers(2, 8)
            a, p = rng.uniform(0, 360, n), rng.uniform(0.1, 1, n)
            assert abs(circular_spread(a, p) - brute_force_spread(a, p, step=0.01)) <= 0.02

    @given(angle_sets, st.floats(-720, 720))
    def test_rotation_invariant(self, data, shift):
        a, p = map(np.array, zip(*data))
        assert circular_spread((a + shift) % 360, p) == pytest.approx(circular_spread(a, p), abs=1e-6)

    @given(angle_sets, st.floats(1e-3, 1e3))
    def test_power_scaling_invariant(self, data, k):
        a, p = map(np.array, zip(*data))
        assert circular_spread(a, p * k) == pytest.approx(circular_spread(a, p), abs=1e-6)

    @given(angle_sets)
    def test_bounded_by_uniform_limit(self, data):
        a, p = map(np.array, zip(*data))
        assert 0 <= circular_spread(a, p) <= 360 / np.sqrt(12) + 1e-9

    def test_rotation_100_random(self, rng):
        a, p = rng.uniform(0, 360, 9), rng.uniform(0.1, 1, 9)
        ref = circular_spread(a, p)
        for s in rng.uniform(0, 360, 100):
            assert abs(circular_spread((a + s) % 360, p) - ref) <= 1e-6

    @pytest.mark.parametrize("a, p", [([], []), ([1, 2], [1]), ([1, 2], [0, 0]), ([1], [-1])])
    def test_errors(self, a, p):
        with pytest.raises(InvalidInput):
            circular_spread(a, p)


class TestZenithSpread:
    def test_examples(self):
        assert zenith_spread([12.0], [3.0]) == 0.0
        assert zenith_spread([-10, 10], [1, 1]) == pytest.approx(10.0)
        assert zenith_spread([0, 0, 30], [1, 1, 2]) == pytest.approx(15.0)

    @given(st.lists(st.tuples(st.floats(-90, 90), st.floats(0.01, 10)), min_size=1, max_size=10))
    def test_equals_plain_weighted_std(self, data):
        e, p = map(np.array, zip(*data))
        w = p / p.sum()
        std = np.sqrt(np.dot(w, (e - np.dot(w, e)) ** 2))
        assert zenith_spread(e, p) == pytest.approx(std, abs=1e-7)

    def test_out_of_range(self):
        with pytest.raises(InvalidInput):
            zenith_spread([95.0, 0.0], [1, 1])


class TestDelaySpread:
    def test_single_bin(self):
        assert rms_delay_spread(PowerDelayProfile([0, 0, 5.0, 0])) == 0.0

    def test_two_equal_bins(self):
        p = np.zeros(41)
        p[0] = p[40] = 1.0
        assert rms_delay_spread(PowerDelayProfile(p, 2.5)) == pytest.approx(50.0)

    def test_unequal_closed_form(self):
        p = np.zeros(41)
        p[0], p[40] = 3.0, 1.0
        assert rms_delay_spread(PowerDelayProfile(p, 2.5)) == pytest.approx(43.30127, abs=0.01)

    def test_threshold_drops_weak_bins(self):
        p = np.zeros(101)
        p[0], p[100] = 1.0, 1e-4  # 40 dB down
        assert rms_delay_spread(PowerDelayProfile(p)) == 0.0
        assert rms_delay_spread(PowerDelayProfile(p), threshold_db=50) > 0

    @given(st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 10)), min_size=1, max_size=30), st.floats(0.01, 100), st.integers(0, 20))
    def test_scaling_and_shift_invariant(self, powers, k, shift):
        p = np.array(powers)
        assume(p.max() > 0)
        base = rms_delay_spread(PowerDelayProfile(p))
        assert rms_delay_spread(PowerDelayProfile(p * k)) == pytest.approx(base, abs=1e-9)
        shifted = np.concatenate((np.zeros(shift), p))
        assert rms_delay_spread(PowerDelayProfile(shifted)) == pytest.approx(base, abs=1e-9)

    def test_all_zero_raises(self):
        with pytest.raises(InvalidInput):
            rms_delay_spread(PowerDelayProfile([0.0, 0.0]))

    def test_path_delay_spread(self):
        assert path_delay_spread([0, 100], [3, 1]) == pytest.approx(43.30127, abs=1e-4)


class TestKFactor:
    def test_examples(self):
        assert abs(k_factor([9.0, 1.0]) - 10 * np.log10(9)) <= 1e-9
        assert abs(k_factor([2.0, 2.0])) <= 1e-9
        assert abs(k_factor([5.0, 3.0, 2.0])) <= 1e-9

    def test_pdp_and_paths(self):
        assert k_factor(PowerDelayProfile([9.0, 0.0, 1.0])) == pytest.approx(9.542425094)
        paths = [MultipathComponent(0, 9.0), MultipathComponent(5, 1.0)]
        assert k_factor(paths) == pytest.approx(9.542425094)

    @pytest.mark.parametrize("p", [[4.0], [4.0, 0.0], PowerDelayProfile([0, 3.0, 0])])
    def test_single_component_raises(self, p):
        with pytest.raises(SingularKFactor):
            k_factor(p)

    @given(st.lists(st.floats(0.01, 100), min_size=2, max_size=10), st.sampled_from([0.5, 2.0, 4.0, 1024.0]))
    def test_scaling_invariant(self, p, c):
        p = np.array(p)
        assume(p.sum() - p.max() > 1e-9 * p.sum())
        # power-of-two scalings are exact in floating point
        assert k_factor(p * c) == k_factor(p)


class TestZsaFit:
    def test_spec_triple_with_floor_in_range(self):
        a, b, c = -0.002, 2.3, 0.66
        d = np.linspace(30, 1200, 40)  # the kink sits at 820 m
        fit = fit_zsa_local_mean(zip(d, np.maximum(a * d + b, c)))
        assert fit.a == pytest.approx(a, abs=1e-6)
        assert fit.b == pytest.approx(b, abs=1e-6)
        assert fit.c == pytest.approx(c, abs=1e-6)
        assert fit.residual <= 1e-12 and fit.n_floor > 0

    def test_spec_triple_short_range_reduces_to_ols(self):
        a, b = -0.002, 2.3
        d = np.linspace(30, 200, 18)
        fit = fit_zsa_local_mean(zip(d, a * d + b))
        assert fit.a == pytest.approx(a, abs=1e-9) and fit.b == pytest.approx(b, abs=1e-9)
        assert fit.n_floor == 0  # floor not identified on this range

    def test_linear_branch_matches_ols(self, rng):
        d = np.linspace(10, 300, 25)
        y = 1.5 - 0.003 * d + rng.normal(0, 1e-3, d.size)
        y = y + 5  # keep well above any floor
        fit = fit_zsa_local_mean(zip(d, y))
        a, b = np.polyfit(d, y, 1)
        assert fit.a == pytest.approx(a, abs=1e-6) and fit.b == pytest.approx(b, abs=1e-6)

    def test_constant(self):
        fit = fit_zsa_local_mean([(10, 1.2), (20, 1.2), (50, 1.2)])
        assert fit.c == 1.2 and fit.residual == 0 and fit.a == 0

    def test_residual_non_negative_and_callable(self, rng):
        d = rng.uniform(10, 500, 20)
        fit = fit_zsa_local_mean(zip(d, rng.normal(1, 0.2, 20)))
        assert fit.residual >= 0
        assert fit(d).shape == d.shape

    @pytest.mark.parametrize("rec", [[(10, 1), (10, 2), (10, 3)], [(10, 1), (20, 2)]])
    def test_degenerate(self, rec):
        with pytest.raises(InvalidInput):
            fit_zsa_local_mean(rec)


class TestXpr:
    def test_equal_polarisations(self):
        p = PowerDelayProfile([1.0, 2.0, 3.0], noise_floor=0.01)
        assert np.allclose(xpr_per_bin(p, p), 0.0)

    def test_ten_to_one(self):
        vh = PowerDelayProfile([1.0, 2.0, 3.0], noise_floor=0.01)
        vv = PowerDelayProfile([10.0, 20.0, 30.0], noise_floor=0.01)
        assert np.allclose(xpr_per_bin(vv, vh), 10.0)

    def test_snr_gate(self):
        vv = PowerDelayProfile([10.0, 1.0], noise_floor=1.0)
        vh = PowerDelayProfile([1.0, 1.0], noise_floor=0.1)
        assert xpr_per_bin(vv, vh).size == 1
        with pytest.raises(EmptyResult):
            xpr_per_bin(PowerDelayProfile([1.0], noise_floor=1.0), PowerDelayProfile([1.0], noise_floor=1.0))

    def test_mismatched_shapes(self):
        with pytest.raises(InvalidInput):
            xpr_per_bin(PowerDelayProfile([1.0, 2.0]), PowerDelayProfile([1.0]))

    @pytest.mark.parametrize("mu, sigma, tol", [(28.7, 6.0, 0.2), (16.7, 8.8, 0.3), (29.2, 5.5, 0.2)])
    def test_truncated_fit_recovers(self, mu, sigma, tol):
        x = np.maximum(np.random.default_rng(7).normal(mu, sigma, 100_000), 0)
        m, s = fit_truncated_gaussian_xpr(x)
        assert abs(m - mu) <= tol and abs(s - sigma) <= tol

    def test_heavy_truncation(self):
        x = np.maximum(np.random.default_rng(3).normal(2.0, 6.0, 200_000), 0)
        m, s = fit_truncated_gaussian_xpr(x)
        assert abs(m - 2.0) < 0.1 and abs(s - 6.0) < 0.1

    def test_inactive_truncation_is_plain_moments(self, rng):
        x = rng.normal(50, 3, 1000)
        assert fit_truncated_gaussian_xpr(x) == pytest.approx((x.mean(), x.std()))

    @pytest.mark.parametrize("x", [np.ones(100), np.arange(10.0), -np.ones(40)])
    def test_errors(self, x):
        with pytest.raises(InvalidInput):
            fit_truncated_gaussian_xpr(x)


class TestCrossCorrelation:
    def test_examples(self, rng):
        x = rng.normal(size=50)
        assert cross_correlation(x, x) == pytest.approx(1.0)
        assert cross_correlation(x, -x) == pytest.approx(-1.0)
        y = rng.normal(size=50)
        xc = x - x.mean()
        y = y - y.mean()
        y = y - xc * np.dot(xc, y) / np.dot(xc, xc)
        assert abs(cross_correlation(x, y)) <= 1e-12

    @given(st.floats(-100, 100), st.floats(-100, 100))
    def test_affine(self, a, b):
        assume(abs(a) > 1e-3)
        x = np.array([0.3, -1.2, 2.5, 0.7, 4.1])
        assert cross_correlation(x, a * x + b) == pytest.approx(np.sign(a))

    def test_zero_variance(self):
        with pytest.raises(InvalidInput):
            cross_correlation([1, 1, 1], [1, 2, 3])


class TestMultipathCount:
    def test_all_noise(self):
        assert count_directional_multipaths(PowerDelayProfile(np.ones(20), noise_floor=1.0)) == 0

    def test_three_peaks(self):
        p = np.ones(30)
        p[[5, 15, 25]] = 10.0
        assert count_directional_multipaths(PowerDelayProfile(p, noise_floor=1.0)) == 3

    def test_inclusive_threshold(self):
        p = np.ones(9)
        p[4] = 10 ** 0.5
        assert count_directional_multipaths(PowerDelayProfile(p, noise_floor=1.0)) == 1

    def test_plateau_counts_once(self):
        p = np.ones(9)
        p[3:6] = 100.0
        assert count_directional_multipaths(PowerDelayProfile(p, noise_floor=1.0)) == 1


def test_pas_spreads_single_cell():
    p = np.zeros((36, 3))
    p[4, 1] = 1.0
    pas = PowerAngularSpectrum(np.arange(0, 360, 10.0), [-10.0, 0.0, 10.0], p)
    assert pas_spreads(pas) == (0.0, 0.0)
