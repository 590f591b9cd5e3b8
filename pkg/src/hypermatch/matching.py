"""Two-sided stable matching: iterated mutual nearest neighbours, a greedy
oracle and an exhaustive stability audit."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .geometry import (PHI_SIDE, PSI_SIDE, NeighborIndex, PointSet, preference_order,
                       torus_displacement)

NONE = -1


@dataclass
class Matching:
    """Partial matching between ``phi`` and ``psi``.

    Partners are stored as index maps with ``NONE`` (-1) for unmatched points.
    ``round_matched[p]`` is the round in which phi point ``p`` got its partner.
    """

    phi: PointSet
    psi: PointSet
    partner_of_phi: np.ndarray
    partner_of_psi: np.ndarray
    round_matched: np.ndarray

    @property
    def box(self):
        return self.phi.box

    @property
    def matched_phi(self) -> np.ndarray:
        return np.flatnonzero(self.partner_of_phi >= 0)

    @property
    def n_matched(self) -> int:
        return int(np.sum(self.partner_of_phi >= 0))

    @property
    def n_rounds(self) -> int:
        return int(self.round_matched.max(initial=0))

    @property
    def displacement(self) -> np.ndarray:
        """Y_p = tau(p) - p for matched phi points (minimum image), rows aligned
        with :attr:`matched_phi`."""
        p = self.matched_phi
        return torus_displacement(self.phi.coords[p], self.psi.coords[self.partner_of_phi[p]],
                                  self.box)

    @property
    def distances(self) -> np.ndarray:
        return np.sqrt(np.sum(self.displacement ** 2, axis=1))

    def matched_psi(self) -> PointSet:
        """The thinned process of matched psi points."""
        return self.psi.subset(self.partner_of_psi >= 0)

    def check_involution(self):
        p = self.matched_phi
        assert np.array_equal(self.partner_of_psi[self.partner_of_phi[p]], p)
        assert np.sum(self.partner_of_psi >= 0) == len(p)


def _check_same_box(phi: PointSet, psi: PointSet):
    if phi.box != psi.box:
        raise ValueError(f"point sets live in different boxes: {phi.box} vs {psi.box}")


def stable_match(phi: PointSet, psi: PointSet) -> Matching:
    """Iterated mutual-nearest-neighbour matching.

    Every round matches all pairs that are mutually most preferred among the
    still unmatched points and removes them. Each unmatched point caches its
    current favourite; only points whose favourite got matched re-query the
    index, so a round costs about the number of unmatched phi points.
    """
    _check_same_box(phi, psi)
    n_phi, n_psi = len(phi), len(psi)
    partner_phi = np.full(n_phi, NONE, dtype=np.int64)
    partner_psi = np.full(n_psi, NONE, dtype=np.int64)
    round_matched = np.full(n_phi, NONE, dtype=np.int64)
    if n_phi == 0 or n_psi == 0:
        return Matching(phi, psi, partner_phi, partner_psi, round_matched)

    psi_index = NeighborIndex(psi, query_side=PHI_SIDE)
    phi_index = NeighborIndex(phi, query_side=PSI_SIDE)
    fav_psi = np.full(n_phi, NONE, dtype=np.int64)
    fav_phi = np.full(n_psi, NONE, dtype=np.int64)
    # extra slot so that fav == NONE indexes a permanently dead entry
    psi_alive = np.append(psi_index.alive, False)
    phi_alive = np.append(phi_index.alive, False)

    rnd = 0
    alive_p = np.arange(n_phi)
    while len(alive_p) and psi_index.n_alive():
        rnd += 1
        stale = alive_p[~psi_alive[fav_psi[alive_p]]]
        if len(stale):
            fav_psi[stale] = psi_index.best(phi.coords[stale])
        cand = np.unique(fav_psi[alive_p])
        stale_x = cand[~phi_alive[fav_phi[cand]]]
        if len(stale_x):
            fav_phi[stale_x] = phi_index.best(psi.coords[stale_x])
        winners = alive_p[fav_phi[fav_psi[alive_p]] == alive_p]
        if len(winners) == 0:
            winners = _break_preference_cycle(phi, psi, alive_p, fav_psi)
        xs = fav_psi[winners]
        partner_phi[winners] = xs
        partner_psi[xs] = winners
        round_matched[winners] = rnd
        phi_index.remove(winners)
        psi_index.remove(xs)
        phi_alive[winners] = False
        psi_alive[xs] = False
        alive_p = alive_p[phi_alive[alive_p]]
    return Matching(phi, psi, partner_phi, partner_psi, round_matched)


def _break_preference_cycle(phi, psi, alive_p, fav_psi) -> np.ndarray:
    # Only reachable when exact distance ties form a preference cycle on the
    # torus; match the shortest cached pair (lowest phi index on ties).
    d = torus_displacement(phi.coords[alive_p], psi.coords[fav_psi[alive_p]], phi.box)
    sq = np.sum(d ** 2, axis=1)
    return alive_p[[int(np.lexsort((alive_p, sq))[0])]]


@numba.njit(cache=True)
def _greedy_scan(order, sq_flat, n_psi, taken_phi, taken_psi, partner_phi, start):
    """Accept sorted pairs greedily; stop at a tie group with several live
    pairs and return its bounds (or -1 when finished)."""
    n = len(order)
    i = start
    while i < n:
        j = i + 1
        while j < n and sq_flat[order[j]] == sq_flat[order[i]]:
            j += 1
        live = 0
        for t in range(i, j):
            p = order[t] // n_psi
            x = order[t] % n_psi
            if not taken_phi[p] and not taken_psi[x]:
                live += 1
        if live > 1:
            return i, j
        for t in range(i, j):
            p = order[t] // n_psi
            x = order[t] % n_psi
            if not taken_phi[p] and not taken_psi[x]:
                taken_phi[p] = True
                taken_psi[x] = True
                partner_phi[p] = x
        i = j
    return -1, -1


def brute_force_match(phi: PointSet, psi: PointSet) -> Matching:
    """Greedy global matching: repeatedly pair the closest unmatched cross pair.

    The closest remaining pair is always mutually nearest, so on instances
    without distance ties this is the unique stable matching. Exact ties are
    resolved by the preference order. Quadratic memory; meant for a few
    thousand points.
    """
    _check_same_box(phi, psi)
    n_phi, n_psi = len(phi), len(psi)
    disp = torus_displacement(phi.coords[:, None, :], psi.coords[None, :, :], phi.box)
    sq = np.sum(disp ** 2, axis=2).ravel()
    order = np.argsort(sq, kind="stable")
    taken_phi = np.zeros(n_phi, dtype=np.bool_)
    taken_psi = np.zeros(n_psi, dtype=np.bool_)
    partner_phi = np.full(n_phi, NONE, dtype=np.int64)
    step = 0
    while True:
        lo, hi = _greedy_scan(order, sq, max(n_psi, 1), taken_phi, taken_psi, partner_phi, step)
        if lo < 0:
            break
        _resolve_tie_group(phi, psi, order[lo:hi], n_psi, taken_phi, taken_psi, partner_phi)
        step = hi
    partner_psi = np.full(n_psi, NONE, dtype=np.int64)
    matched = np.flatnonzero(partner_phi >= 0)
    partner_psi[partner_phi[matched]] = matched
    rounds = np.where(partner_phi >= 0, 0, NONE)
    return Matching(phi, psi, partner_phi, partner_psi, rounds)


def _resolve_tie_group(phi, psi, flat, n_psi, taken_phi, taken_psi, partner_phi):
    """Match pairs of an equal-distance group by mutual preference."""
    while True:
        pairs = [(f // n_psi, f % n_psi) for f in flat]
        pairs = [(p, x) for p, x in pairs if not taken_phi[p] and not taken_psi[x]]
        if not pairs:
            return
        best_of_phi, best_of_psi = {}, {}
        for p in {p for p, _ in pairs}:
            xs = np.array(sorted({x for q, x in pairs if q == p}))
            best_of_phi[p] = xs[preference_order(phi.coords[p], psi.coords[xs], phi.box,
                                                 PHI_SIDE, indices=xs)[0]]
        for x in {x for _, x in pairs}:
            ps = np.array(sorted({p for p, y in pairs if y == x}))
            best_of_psi[x] = ps[preference_order(psi.coords[x], phi.coords[ps], phi.box,
                                                 PSI_SIDE, indices=ps)[0]]
        mutual = [(p, x) for p, x in best_of_phi.items() if best_of_psi[x] == p]
        if not mutual:
            mutual = [min(pairs)]
        for p, x in mutual:
            taken_phi[p] = taken_psi[x] = True
            partner_phi[p] = x


def _partner_sq(m: Matching):
    r_phi = np.full(len(m.phi), np.inf)
    p = m.matched_phi
    r_phi[p] = np.sum(m.displacement ** 2, axis=1)
    r_psi = np.full(len(m.psi), np.inf)
    r_psi[m.partner_of_phi[p]] = r_phi[p]
    return r_phi, r_psi


@numba.njit(cache=True)
def _blocking_pairs(phi, psi, r_phi, r_psi, side, periodic):
    half = 0.5 * side
    out = np.empty((0, 2), np.int64)
    for sweep in range(2):
        k = 0
        for i in range(phi.shape[0]):
            ri = r_phi[i]
            for j in range(psi.shape[0]):
                bound = min(ri, r_psi[j])
                sq = 0.0
                for c in range(phi.shape[1]):
                    t = psi[j, c] - phi[i, c]
                    if periodic:
                        # same bits as (t + half) % side - half for coordinates in [0, side)
                        u = t + half
                        if u < 0.0:
                            u += side
                        elif u >= side:
                            u -= side
                        t = u - half
                    sq += t * t
                    if sq >= bound:
                        break
                if sq < bound:
                    if sweep == 1:
                        out[k, 0] = i
                        out[k, 1] = j
                    k += 1
        if sweep == 0:
            out = np.empty((k, 2), np.int64)
    return out


def find_unstable_pairs(m: Matching) -> list[tuple[int, int]]:
    """Every pair (p, x) with |p - x| < min(|p - tau(p)|, |x - tau(x)|).

    Unmatched points have infinite distance to their partner. An empty result
    certifies stability. Exhaustive over all phi x psi pairs.
    """
    r_phi, r_psi = _partner_sq(m)
    pairs = _blocking_pairs(np.ascontiguousarray(m.phi.coords, float),
                            np.ascontiguousarray(m.psi.coords, float), r_phi, r_psi,
                            float(m.box.side), bool(m.box.periodic))
    return [(int(i), int(j)) for i, j in pairs]


def find_unstable_pairs_reference(m: Matching, chunk: int = 512) -> list[tuple[int, int]]:
    """Vectorised numpy twin of :func:`find_unstable_pairs`."""
    r_phi, r_psi = _partner_sq(m)
    out = []
    for lo in range(0, len(m.phi), chunk):
        block = m.phi.coords[lo:lo + chunk]
        disp = torus_displacement(block[:, None, :], m.psi.coords[None, :, :], m.box)
        sq = np.sum(disp ** 2, axis=2)
        bad = (sq < r_phi[lo:lo + chunk, None]) & (sq < r_psi[None, :])
        for i, j in zip(*np.nonzero(bad)):
            out.append((int(lo + i), int(j)))
    return out
