"""Recovering the number of matched points in a ball from the outside data.

The lattice and the matched points outside a ball A are re-matched. Points
whose flower (for that matching) reaches A are undecided. All other points
keep their true partners, so with

    Z1 = undecided lattice points outside A
    Z2 = lattice points inside A
    Z3 = undecided matched points outside A

the hidden count is Z1 + Z2 - Z3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .flower import PHI, PSI, PreferenceGraph, matching_flower
from .geometry import PointSet, torus_displacement
from .matching import Matching, stable_match


class Ball(NamedTuple):
    center: tuple
    radius: float


@dataclass
class RigidityRecord:
    ball: Ball
    z1: int
    z2: int
    z3: int
    truth: int
    inconclusive: bool = False
    reason: str = ""

    @property
    def recovered(self) -> int:
        return self.z1 + self.z2 - self.z3

    @property
    def exact(self) -> bool:
        return not self.inconclusive and self.recovered == self.truth


def _dist_to(points: np.ndarray, center, box) -> np.ndarray:
    return np.linalg.norm(torus_displacement(points, np.asarray(center, float), box), axis=-1)


def _ranks(owner: np.ndarray, sq: np.ndarray, ties: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Position of every edge in its owner's preference list."""
    keys = [other] + [ties[:, j] for j in range(ties.shape[1] - 1, -1, -1)] + [sq, owner]
    order = np.lexsort(keys)
    owner_sorted = owner[order]
    start = np.flatnonzero(np.r_[True, owner_sorted[1:] != owner_sorted[:-1]])
    first = np.repeat(start, np.diff(np.r_[start, len(order)]))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order)) - first
    return rank


def undecided_sets(m: Matching, ball: Ball):
    """Boolean masks of undecided phi and psi points for the matching ``m``.

    A point is undecided when it is unmatched, lies in the ball (phi only), or
    one of its competing chains has a ball meeting ``ball``. Chains are walked
    backwards over directed preference edges: an edge arriving at ``w`` from
    ``v`` is bad if its ball meets A or if ``w`` has a bad outgoing edge
    towards a point it prefers to ``v``. Returns ``(phi_ud, psi_ud, cutoff)``
    where ``cutoff`` is the longest matched distance (every chain step is
    bounded by it).
    """
    box = m.box
    c, R = ball
    phi, psi = m.phi.coords, m.psi.coords
    p_m = m.matched_phi
    # squared partner lengths computed exactly as for the candidate edges below
    own = torus_displacement(phi[p_m], psi[m.partner_of_phi[p_m]], box)
    cutoff_sq = float(np.max(np.sum(own ** 2, axis=1))) if len(p_m) else 0.0
    cutoff = math.sqrt(cutoff_sq)

    boxsize = box.side if box.periodic else None
    t_phi, t_psi = cKDTree(phi, boxsize=boxsize), cKDTree(psi, boxsize=boxsize)
    pairs = t_phi.sparse_distance_matrix(t_psi, cutoff * (1 + 1e-9) + 1e-12,
                                         output_type="ndarray")
    ei = pairs["i"].astype(np.int64)
    ej = pairs["j"].astype(np.int64)
    disp = torus_displacement(phi[ei], psi[ej], box)  # from phi to psi
    sq = np.sum(disp ** 2, axis=1)
    keep = sq <= cutoff_sq
    ei, ej, disp, sq = ei[keep], ej[keep], disp[keep], sq[keep]
    length = np.sqrt(sq)

    # phi prefers smaller displacement towards psi, psi prefers larger towards phi
    rank_phi = _ranks(ei, sq, disp, ej)
    rank_psi = _ranks(ej, sq, disp, ei)

    # edge e seen as a step phi -> psi ("into psi") or psi -> phi ("into phi")
    into_psi = _dist_to(psi[ej], c, box) <= length + R
    into_phi = _dist_to(phi[ei], c, box) <= length + R
    big = np.iinfo(np.int64).max
    while True:
        min_psi = np.full(len(psi), big)
        np.minimum.at(min_psi, ej[into_phi], rank_psi[into_phi])
        new_psi = into_psi | (rank_psi > min_psi[ej])
        min_phi = np.full(len(phi), big)
        np.minimum.at(min_phi, ei[new_psi], rank_phi[new_psi])
        new_phi = into_phi | (rank_phi > min_phi[ei])
        if np.array_equal(new_psi, into_psi) and np.array_equal(new_phi, into_phi):
            break
        into_psi, into_phi = new_psi, new_phi

    min_psi = np.full(len(psi), big)
    np.minimum.at(min_psi, ej[into_phi], rank_psi[into_phi])
    min_phi = np.full(len(phi), big)
    np.minimum.at(min_phi, ei[into_psi], rank_phi[into_psi])

    phi_ud = np.ones(len(phi), dtype=bool)
    psi_ud = np.ones(len(psi), dtype=bool)
    if len(p_m):
        # locate the partner edge of every matched pair
        key_edges = ei * len(psi) + ej
        key_pairs = p_m * len(psi) + m.partner_of_phi[p_m]
        order = np.argsort(key_edges)
        pos = order[np.searchsorted(key_edges, key_pairs, sorter=order)]
        r0 = length[pos]
        x_m = m.partner_of_phi[p_m]
        phi_ud[p_m] = ((_dist_to(phi[p_m], c, box) <= r0 + R) |
                       (min_phi[p_m] <= rank_phi[pos]))
        psi_ud[x_m] = ((_dist_to(psi[x_m], c, box) <= r0 + R) |
                       (min_psi[x_m] <= rank_psi[pos]))
    phi_ud |= _dist_to(phi, c, box) <= R
    return phi_ud, psi_ud, cutoff


def undecided_sets_reference(m: Matching, ball: Ball):
    """Same masks as :func:`undecided_sets`, one flower at a time."""
    graph = PreferenceGraph(m.phi, m.psi)
    phi_ud = np.array([matching_flower(m, (PHI, i), graph=graph).intersects_ball(*ball)
                       for i in range(len(m.phi))], dtype=bool)
    phi_ud |= _dist_to(m.phi.coords, ball.center, m.box) <= ball.radius
    psi_ud = np.array([matching_flower(m, (PSI, j), graph=graph).intersects_ball(*ball)
                       for j in range(len(m.psi))], dtype=bool)
    return phi_ud, psi_ud


def rigidity_recover(matching: Matching, ball: Ball) -> RigidityRecord:
    """Recover the number of matched psi points in ``ball`` from the lattice
    and the matched points outside it."""
    box = matching.box
    ball = Ball(tuple(float(v) for v in np.atleast_1d(ball[0])), float(ball[1]))
    matched = matching.matched_psi()
    inside = _dist_to(matching.psi.coords[matching.partner_of_psi >= 0], ball.center, box) \
        <= ball.radius
    truth = int(inside.sum())
    if box.periodic and ball.radius >= 0.5 * box.side:
        return RigidityRecord(ball, 0, 0, 0, truth, True, "ball does not fit in the torus")
    outside = PointSet(box, matched.coords[~inside], "sample", matched.seed)
    m_out = stable_match(matching.phi, outside)
    phi_ud, psi_ud, cutoff = undecided_sets(m_out, ball)
    if box.periodic and cutoff + ball.radius >= 0.5 * box.side:
        return RigidityRecord(ball, 0, 0, 0, truth, True,
                              f"matching distance {cutoff:.3g} too large for the torus")
    in_a = _dist_to(matching.phi.coords, ball.center, box) <= ball.radius
    z1 = int(np.sum(phi_ud & ~in_a))
    z2 = int(np.sum(in_a))
    z3 = int(np.sum(psi_ud))
    return RigidityRecord(ball, z1, z2, z3, truth)
