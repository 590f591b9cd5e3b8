import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermatch import Ball, Box, LatticeSpec, PointSet, make_lattice, rigidity_recover, stable_match
from hypermatch.experiments import matched_instance, rigidity_campaign
from hypermatch.rigidity import undecided_sets, undecided_sets_reference


def test_empty_ball_far_from_flowers():
    box = Box(1, 100)
    phi = make_lattice(LatticeSpec(box, "fixed", shift=(0.5,)))
    psi = PointSet(box, phi.coords[:, 0] + 0.1)
    m = stable_match(phi, psi)
    rec = rigidity_recover(m, Ball((50.0,), 0.2))
    assert rec.truth == 0 and rec.recovered == 0
    assert rec.z3 == rec.z1 + rec.z2


def test_ball_too_big_for_torus():
    _, _, m = matched_instance(2, 10, 2.0, 0)
    rec = rigidity_recover(m, Ball((5.0, 5.0), 5.0))
    assert rec.inconclusive and not rec.exact


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([1, 2]), st.sampled_from([1.5, 2.0]), st.integers(0, 10 ** 6))
def test_vectorised_sets_match_flower_by_flower(d, alpha, seed):
    L = 120 if d == 1 else 14
    _, _, m = matched_instance(d, L, alpha, seed)
    center = tuple(np.random.default_rng(seed).random(d) * L)
    ball = Ball(center, 2.0)
    phi_ud, psi_ud, _ = undecided_sets(m, ball)
    ref_phi, ref_psi = undecided_sets_reference(m, ball)
    np.testing.assert_array_equal(phi_ud, ref_phi)
    np.testing.assert_array_equal(psi_ud, ref_psi)


@pytest.mark.parametrize("d,L,radius", [(1, 1000, 5.0), (2, 50, 3.0)])
@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_recovery_is_exact(d, L, radius, alpha):
    records = rigidity_campaign(d, L, alpha, radius, range(20))
    assert all(r.exact for r in records if not r.inconclusive)
    assert sum(r.inconclusive for r in records) <= 1
