import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermatch import (Box, LatticeSpec, SpectralModel, make_lattice, make_rng,
                        pair_correlation, sample_dpp_spectral, sample_poisson, torus_distance)
from hypermatch.samplers import expected_dpp_count, expected_dpp_count_variance
from hypermatch.stats import pool_pair_correlation


class TestLattice:
    def test_deterministic_1d(self):
        ps = make_lattice(LatticeSpec(Box(1, 2), "deterministic"))
        np.testing.assert_array_equal(ps.coords[:, 0], [0.0, 1.0])

    def test_fixed_shift_2d(self):
        ps = make_lattice(LatticeSpec(Box(2, 2), "fixed", shift=(0.5, 0.5)))
        got = sorted(map(tuple, ps.coords))
        assert got == [(0.5, 0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 1.5)]

    def test_stationarized_uses_first_deviate(self):
        ps = make_lattice(LatticeSpec(Box(1, 3), "stationarized", seed=42))
        u = np.random.Generator(np.random.MT19937(42)).random()
        np.testing.assert_allclose(ps.coords[:, 0], [u, 1 + u, 2 + u])

    @pytest.mark.parametrize("d,L", [(1, 7), (2, 5), (3, 4)])
    def test_count_and_spacing(self, d, L):
        ps = make_lattice(LatticeSpec(Box(d, L), seed=3))
        assert len(ps) == L ** d
        dist = torus_distance(ps.coords[:, None, :], ps.coords[None, :, :], ps.box)
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= 1 - 1e-12

    def test_non_integer_side_rejected(self):
        with pytest.raises(ValueError):
            LatticeSpec(Box(1, 2.5))

    def test_bad_shift_rejected(self):
        with pytest.raises(ValueError):
            LatticeSpec(Box(1, 3), "fixed", shift=(1.0,))
        with pytest.raises(ValueError):
            LatticeSpec(Box(1, 3), "sideways")


class TestPoisson:
    def test_tiny_intensity_is_empty(self):
        empty = sum(len(sample_poisson(Box(2, 1), 1e-9, s)) == 0 for s in range(100))
        assert empty == 100

    def test_large_1d_count(self):
        ps = sample_poisson(Box(1, 1e6), 1.01, 0)
        assert abs(len(ps) - 1.01e6) < 3 * math.sqrt(1.01e6)

    def test_mean_count_over_seeds(self):
        counts = np.array([len(sample_poisson(Box(2, 10), 2.0, s)) for s in range(1000)])
        assert abs(counts.mean() - 200) < 3 * math.sqrt(200 / 1000)

    def test_disjoint_boxes_uncorrelated(self):
        left, right = [], []
        for s in range(1000):
            x = sample_poisson(Box(2, 10), 1.0, s).coords[:, 0]
            left.append(np.sum(x < 5))
            right.append(np.sum(x >= 5))
        cov = np.cov(left, right)[0, 1]
        se = np.std(left) * np.std(right) / math.sqrt(1000)
        assert abs(cov) < 3 * se

    def test_negative_intensity(self):
        with pytest.raises(ValueError):
            sample_poisson(Box(1, 10), 0.0, 0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 3]))
    def test_determinism(self, seed, d):
        a = sample_poisson(Box(d, 4), 1.5, seed)
        b = sample_poisson(Box(d, 4), 1.5, seed)
        assert a.coords.tobytes() == b.coords.tobytes()

    def test_rng_is_mersenne_twister(self):
        assert isinstance(make_rng(1).bit_generator, np.random.MT19937)


class TestSpectralDpp:
    def test_eigenvalues_in_unit_interval(self):
        for d in (1, 2, 3):
            model = SpectralModel(1.0)
            _, lam = model.eigenvalues(Box(d, 6))
            assert lam.min() >= 0 and lam.max() <= 1

    def test_mode_sum_near_intensity(self):
        for d, L in [(1, 50), (2, 10), (3, 5)]:
            total = expected_dpp_count(Box(d, L), SpectralModel(1.0))
            assert total == pytest.approx(L ** d, rel=0.01)

    def test_invalid_model_rejected(self):
        with pytest.raises(ValueError):
            SpectralModel(1.0, scale_fraction=1.5)
        with pytest.raises(ValueError):
            SpectralModel(1.0, shape=0.0)
        with pytest.raises(ValueError):
            SpectralModel(-1.0)

    def test_peak_eigenvalue_is_scale_fraction(self):
        _, lam = SpectralModel(3.0, scale_fraction=0.5).eigenvalues(Box(2, 8))
        assert lam.max() == pytest.approx(0.25)  # (scale_fraction)^d at the zero mode

    def test_zero_modes_gives_empty(self):
        # every eigenvalue is about 1e-18, so no mode survives the Bernoulli step
        model = SpectralModel(1.0, scale_fraction=1e-9, truncation=3)
        assert len(sample_dpp_spectral(Box(2, 10), model, 0)) == 0

    def test_determinism(self):
        model = SpectralModel(1.0)
        a = sample_dpp_spectral(Box(2, 6), model, 9)
        b = sample_dpp_spectral(Box(2, 6), model, 9)
        assert a.coords.tobytes() == b.coords.tobytes()

    def test_mean_count_over_200_seeds(self):
        box, model = Box(1, 50), SpectralModel(1.0)
        counts = np.array([len(sample_dpp_spectral(box, model, s)) for s in range(200)])
        mu = expected_dpp_count(box, model)
        sigma = math.sqrt(expected_dpp_count_variance(box, model) / 200)
        assert abs(counts.mean() - mu) < 3 * sigma

    def test_pair_correlation_below_one_at_short_range(self):
        box, model = Box(1, 50), SpectralModel(1.0)
        tables = [pair_correlation(sample_dpp_spectral(box, model, s), 0.25, 2.0)
                  for s in range(100)]
        g = pool_pair_correlation(tables)
        assert g.g[0] < 1 and g.g[1] < 1
