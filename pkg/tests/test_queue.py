import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermatch import (NONE, Box, LatticeSpec, PointSet, make_lattice, one_sided_match,
                        queue_identity_residuals, sample_poisson)


def line(xs, L=10.0):
    return PointSet(Box(1, L), np.array(xs, dtype=float))


def greedy_right_to_left(phi, psi):
    """Oracle: phi points from right to left, each takes the first free psi
    point at or to its right. Gives the nested (LIFO) matching."""
    free = sorted(range(len(psi)), key=lambda j: psi[j])
    partner = [NONE] * len(phi)
    # reverse arrival order; equal positions arrive in index order
    for i in sorted(range(len(phi)), key=lambda i: (phi[i], i), reverse=True):
        for pos, j in enumerate(free):
            if psi[j] >= phi[i]:
                partner[i] = j
                free.pop(pos)
                break
    return partner


class TestExamples:
    def test_alternating(self):
        m, trace = one_sided_match(line([0.0, 1.0]), line([0.5, 1.5]))
        assert m.partner_of_phi.tolist() == [0, 1]
        assert trace.at(1) == 0 and trace.at(2) == 0

    def test_lifo_order(self):
        m, _ = one_sided_match(line([0.0, 1.0]), line([1.2, 1.4]))
        assert m.partner_of_phi.tolist() == [1, 0]
        np.testing.assert_allclose(m.displacement[:, 0], [1.4, 0.2])

    def test_service_before_any_arrival_is_skipped(self):
        m, _ = one_sided_match(line([1.0]), line([0.5, 2.0]))
        assert m.partner_of_phi.tolist() == [1]
        assert m.partner_of_psi.tolist() == [NONE, 0]

    def test_arrival_at_service_point_is_served(self):
        m, _ = one_sided_match(line([1.0]), line([1.0]))
        assert m.partner_of_phi.tolist() == [0]

    def test_queue_length_counts_waiting_points(self):
        _, trace = one_sided_match(line([0.0, 1.0, 2.0]), line([3.5, 3.6, 3.7]))
        assert [trace.at(t) for t in range(5)] == [0, 1, 2, 3, 0]

    def test_rejects_higher_dimension(self):
        ps = PointSet(Box(2, 4), np.zeros((1, 2)))
        with pytest.raises(ValueError):
            one_sided_match(ps, ps)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 50, exclude_max=True), max_size=40),
           st.lists(st.floats(0, 50, exclude_max=True), max_size=60))
    def test_equals_greedy_oracle(self, phi, psi):
        m, _ = one_sided_match(line(phi, 50.0), line(psi, 50.0))
        assert m.partner_of_phi.tolist() == greedy_right_to_left(phi, psi)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 30), st.sampled_from([1.2, 2.0]), st.booleans())
    def test_identity_and_nonnegative_waiting(self, seed, alpha, periodic):
        box = Box(1, 400)
        phi = make_lattice(LatticeSpec(box, seed=2 * seed))
        psi = sample_poisson(box, alpha, 2 * seed + 1)
        m, trace = one_sided_match(phi, psi, periodic=periodic)
        if not periodic:
            # on the segment the displacement is the wait itself, however long
            assert np.all(m.displacement[:, 0] >= 0)
            np.testing.assert_array_equal(m.displacement[:, 0], trace.waiting[m.matched_phi])
        assert np.all(trace.waiting[np.isfinite(trace.waiting)] >= 0)
        res = queue_identity_residuals(phi, trace, 200)
        assert np.all(res == 0)

    def test_wait_longer_than_half_the_box(self):
        m, trace = one_sided_match(line([1.0, 2.0], 10.0), line([9.0, 9.5], 10.0))
        np.testing.assert_array_equal(m.displacement[:, 0], [8.5, 7.0])
        np.testing.assert_array_equal(trace.waiting, [8.5, 7.0])

    def test_periodic_serves_everyone(self):
        box = Box(1, 1000)
        phi = make_lattice(LatticeSpec(box, seed=4))
        psi = sample_poisson(box, 1.5, 5)
        m, trace = one_sided_match(phi, psi, periodic=True)
        assert m.n_matched == len(phi)
        assert np.all(np.isfinite(trace.waiting))

    def test_periodic_needs_enough_services(self):
        box = Box(1, 100)
        phi = make_lattice(LatticeSpec(box, seed=4))
        psi = sample_poisson(box, 0.5, 5)
        with pytest.raises(RuntimeError):
            one_sided_match(phi, psi, periodic=True)
