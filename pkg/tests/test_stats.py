import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermatch import (Box, LatticeSpec, PointSet, fit_power_law, make_lattice, make_rng,
                        matching_distance_eccdf, number_variance, pair_correlation,
                        sample_poisson, scattering_intensity)
from hypermatch.experiments import matched_instance
from hypermatch.stats import (ball_volume, bin_log, eccdf_from_distances, exact_window_variance_1d,
                              fit_exponential_tail, pool_pair_correlation, pool_scattering,
                              pool_variance, scattering_bruteforce, window_counts)


class TestEccdf:
    def test_single_pair(self):
        t = eccdf_from_distances([0.3])
        assert t(0.29) == 1.0 and t(0.3) == 0.0 and t(1.0) == 0.0

    def test_two_pairs(self):
        assert eccdf_from_distances([0.2, 0.6])(0.4) == 0.5

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=200), st.floats(0, 10))
    def test_exact_order_statistic(self, dist, r):
        t = eccdf_from_distances(dist)
        assert t(r) == sum(x > r for x in dist) / len(dist)

    def test_from_matching(self):
        _, _, m = matched_instance(2, 10, 2.0, 0)
        t = matching_distance_eccdf(m)
        assert t.n == m.n_matched
        assert t(0.0) == 1.0

    def test_exponential_fit_recovers_rate(self):
        rng = np.random.default_rng(0)
        r = np.sqrt(rng.exponential(0.5, 200_000))  # tail exp(-2 r^2)
        slope, _, r2, n = fit_exponential_tail(eccdf_from_distances(r), 2)
        assert slope == pytest.approx(-2.0, rel=0.05)
        assert r2 > 0.99 and n > 10


class TestPowerLaw:
    def test_exact(self):
        x = np.linspace(1, 10, 10)
        exponent, prefactor, r2 = fit_power_law(x, 3 * x ** 2)
        assert exponent == pytest.approx(2.0)
        assert prefactor == pytest.approx(3.0)
        assert r2 == pytest.approx(1.0)

    def test_noisy_linear(self):
        rng = np.random.default_rng(1)
        x = np.logspace(0, 2, 30)
        y = x * (1 + 0.01 * rng.standard_normal(30))
        assert fit_power_law(x, y)[0] == pytest.approx(1.0, abs=0.05)

    def test_window(self):
        x = np.logspace(0, 3, 40)
        y = np.where(x < 10, x ** 2, 10 * x)
        assert fit_power_law(x, y, (1, 9))[0] == pytest.approx(2.0)
        assert fit_power_law(x, y, (20, 1000))[0] == pytest.approx(1.0)

    def test_needs_five_positive_points(self):
        with pytest.raises(ValueError):
            fit_power_law([1, 2, 3, 4], [1, 2, 3, 4])
        with pytest.raises(ValueError):
            fit_power_law([1, 2, 3, 4, 5], [1, 2, 0, 4, 5])


def fft_oracle(cells, L, n, modes):
    """Points on the grid (L / n) Z^d: S(k) is |DFT of the occupancy|^2 / N."""
    d = cells.shape[1]
    occ = np.zeros((n,) * d)
    np.add.at(occ, tuple(cells.T), 1.0)
    spec = np.abs(np.fft.fftn(occ)) ** 2 / len(cells)
    return np.array([spec[tuple(np.mod(m, n))] for m in modes])


class TestScattering:
    def test_single_point(self):
        t = scattering_intensity(PointSet(Box(2, 10), [[3.3, 1.2]]), 3.0)
        np.testing.assert_allclose(t.S, 1.0)

    @pytest.mark.parametrize("d,L", [(1, 30), (2, 12), (3, 6)])
    def test_perfect_lattice(self, d, L):
        ps = make_lattice(LatticeSpec(Box(d, L), "deterministic"))
        modes = np.stack(np.meshgrid(*[np.arange(0, 2 * L + 1)] * d, indexing="ij"),
                         -1).reshape(-1, d)[1:]
        t = scattering_intensity(ps, 0.0, modes=modes)
        N = L ** d
        np.testing.assert_allclose(t.S[t.bragg], N, rtol=1e-8)
        assert np.all(t.S[~t.bragg] < 1e-8 * N)
        # reciprocal vectors are the multiples of L: m in {0, L, 2L}^d minus the origin
        assert t.bragg.sum() == 3 ** d - 1

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_against_fft(self, d):
        rng = np.random.default_rng(d)
        n, L = 16, 7.0
        cells = rng.integers(0, n, (300, d))
        ps = PointSet(Box(d, L), cells * (L / n))
        modes = rng.integers(0, 3 * n, (50, d))
        modes = modes[np.any(modes > 0, axis=1)]
        t = scattering_intensity(ps, 0.0, modes=modes)
        np.testing.assert_allclose(t.S, fft_oracle(cells, L, n, modes), rtol=1e-10, atol=1e-9)

    def test_against_dense_sum(self):
        rng = np.random.default_rng(7)
        for d in (1, 2, 3):
            ps = PointSet(Box(d, 9.0), rng.random((1000, d)) * 9.0)
            t = scattering_intensity(ps, 4.0)
            ref = scattering_bruteforce(ps.coords, t.k)
            np.testing.assert_allclose(t.S, ref, rtol=1e-10)

    def test_off_grid_rejected(self):
        ps = PointSet(Box(1, 10), [1.0, 2.0])
        with pytest.raises(ValueError):
            scattering_intensity(ps, 1.0, modes=[[0.5]])
        with pytest.raises(ValueError):
            scattering_intensity(ps, 1.0, modes=[[-1]])
        with pytest.raises(ValueError):
            scattering_intensity(PointSet(Box(1, 10), np.empty(0)), 1.0)

    def test_poisson_mean_is_one(self):
        ps = sample_poisson(Box(2, 30), 1.0, 3)
        t = scattering_intensity(ps, 6.0)
        big = t.knorm > 3.0
        mean, se = t.S[big].mean(), t.S[big].std() / math.sqrt(big.sum())
        assert abs(mean - 1) < 3 * se

    def test_max_per_bin_caps_each_bin(self):
        ps = sample_poisson(Box(1, 5000), 1.0, 0)
        t = scattering_intensity(ps, 3.0, max_per_bin=10)
        assert t.bins.count.max() <= 10
        full = scattering_intensity(ps, 3.0)
        assert len(full.S) > len(t.S)

    def test_binning_and_pooling(self):
        x = np.logspace(-2, 0, 200)
        c = bin_log(x, np.ones_like(x), per_decade=12)
        assert c.count.sum() == 200
        np.testing.assert_allclose(c.mean, 1.0)
        tables = [scattering_intensity(sample_poisson(Box(1, 200), 1.0, s), 2.0)
                  for s in range(3)]
        pooled = pool_scattering(tables)
        assert pooled.count.sum() == sum((~t.bragg).sum() for t in tables)


def brute_counts(points, centers, radii):
    # closed balls as |x - c|^2 <= R^2, the convention of the kd-tree used in 3D
    disp = points.coords[None, :, :] - np.asarray(centers)[:, None, :]
    L = points.box.side
    disp = np.mod(disp + L / 2, L) - L / 2
    sq = np.sum(disp ** 2, axis=2)
    return np.stack([np.sum(sq <= r * r, axis=1) for r in radii], axis=1)


class TestNumberVariance:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_counts_against_brute_force(self, d):
        rng = np.random.default_rng(d)
        ps = sample_poisson(Box(d, 8.0), 3.0, d)
        centers = rng.random((300, d)) * 8.0
        radii = [0.5, 1.0, 2.7, 3.99]
        np.testing.assert_array_equal(window_counts(ps, centers, radii),
                                      brute_counts(ps, centers, radii))

    def test_counts_on_lattice_boundaries(self):
        # points exactly on circles and row edges stress the rounding of every wrap
        ps = make_lattice(LatticeSpec(Box(2, 10), "deterministic"))
        grid = np.arange(0, 10, 0.5)
        centers = np.stack(np.meshgrid(grid, grid, indexing="ij"), -1).reshape(-1, 2)
        radii = np.sqrt([1, 2, 4, 5, 8, 9, 10, 13, 16, 17, 18, 20, 24.9])
        np.testing.assert_array_equal(window_counts(ps, centers, radii),
                                      brute_counts(ps, centers, radii))

    def test_grid_average_matches_quadrature(self):
        rng = np.random.default_rng(4)
        L, R = 10.0, 1.3
        xs = rng.random(15) * L
        ps = PointSet(Box(1, L), xs)
        # midpoints of a fine grid: a quadrature of the count over the centre
        centers = (np.arange(2_000_000) + 0.5) * L / 2_000_000
        c = window_counts(ps, centers, [R])[:, 0]
        mean, var = exact_window_variance_1d(xs, L, R)
        assert c.mean() == pytest.approx(mean, rel=1e-3)
        assert c.var() == pytest.approx(var, rel=1e-3)

    def test_random_windows_match_quadrature(self):
        rng = np.random.default_rng(5)
        xs = rng.random(12) * 10
        t = number_variance(PointSet(Box(1, 10.0), xs), [0.7, 2.0], 200_000, make_rng(0))
        for i, R in enumerate([0.7, 2.0]):
            _, var = exact_window_variance_1d(xs, 10.0, R)
            assert abs(t.variance[i] - var) < 3 * t.se[i]

    @pytest.mark.slow
    def test_poisson_variance_equals_mean(self):
        # one realisation fluctuates by ~10% at R = 5 however many windows are
        # used, so the 5% check pools realisations
        radii = [1.0, 2.0, 3.0, 5.0]
        tables = [number_variance(sample_poisson(Box(2, 100), 2.0, s), radii, 100_000,
                                  make_rng(10 ** 6 + s)) for s in range(50)]
        pooled = pool_variance(tables)
        expected = 2.0 * ball_volume(2, np.array(radii))
        np.testing.assert_allclose(pooled.variance, expected, rtol=0.05)

    def test_lattice_variance_bounded(self):
        ps = make_lattice(LatticeSpec(Box(2, 60), seed=1))
        radii = np.linspace(1, 25, 13)
        t = number_variance(ps, radii, 20_000, make_rng(2))
        assert np.all(t.variance < 4 * radii + 5)
        assert t.variance[-1] < 0.1 * t.mean[-1]

    def test_pooling(self):
        tabs = [number_variance(sample_poisson(Box(2, 40), 1.0, s), [2.0], 5000, make_rng(s))
                for s in range(3)]
        pooled = pool_variance(tabs)
        assert pooled.variance[0] == pytest.approx(np.mean([t.variance[0] for t in tabs]))

    def test_rejects_large_radius(self):
        ps = sample_poisson(Box(2, 10), 1.0, 0)
        with pytest.raises(ValueError):
            number_variance(ps, [5.0], 100, make_rng(0))
        with pytest.raises(ValueError):
            number_variance(ps, [1.0], 1, make_rng(0))


class TestPairCorrelation:
    def test_poisson_is_flat(self):
        tables = [pair_correlation(sample_poisson(Box(2, 30), 1.0, s), 0.5, 8.0)
                  for s in range(20)]
        g = pool_pair_correlation(tables)
        assert np.all(np.abs(g.g - 1) < 3 * g.se + 1e-12)

    def test_lattice_shells(self):
        t = pair_correlation(make_lattice(LatticeSpec(Box(2, 20), "deterministic")), 0.05, 2.1)
        occupied = t.centers[t.pair_counts > 0]
        shells = {1.0, math.sqrt(2), 2.0}
        assert all(min(abs(c - s) for s in shells) < 0.05 for c in occupied)

    def test_pair_count_total(self):
        ps = sample_poisson(Box(1, 50), 1.0, 2)
        t = pair_correlation(ps, 1.0, 24.0)
        x = ps.coords[:, 0]
        gap = np.abs(np.mod(x[:, None] - x[None, :] + 25, 50) - 25)
        np.fill_diagonal(gap, np.inf)
        assert t.pair_counts.sum() == np.sum(gap < 24)

    def test_rejects_large_range(self):
        with pytest.raises(ValueError):
            pair_correlation(sample_poisson(Box(1, 10), 1.0, 0), 0.5, 5.0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 1000))
    def test_truncated_is_g_minus_one(self, seed):
        t = pair_correlation(sample_poisson(Box(1, 40), 1.0, seed), 1.0, 10.0)
        np.testing.assert_allclose(t.truncated, t.g - 1)
