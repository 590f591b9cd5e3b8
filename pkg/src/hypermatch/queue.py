"""One-sided matching on the line as a last-in-first-out queue."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numba
import numpy as np

from .geometry import Box, PointSet
from .matching import NONE, Matching


@dataclass
class QueueTrace:
    """Queue length ``L(t)`` at integer times and the served (matched) psi points.

    ``L(t)`` counts phi points ``p < t`` whose partner is at ``t`` or later
    (unmatched points count forever). ``waiting[p]`` is ``tau(p) - p`` with
    ``inf`` for points never served.
    """

    times: np.ndarray
    L: np.ndarray
    outputs: np.ndarray
    waiting: np.ndarray
    warmup: float = 0.0

    def at(self, t: int) -> int:
        return int(self.L[int(t) - int(self.times[0])])


@numba.njit(cache=True)
def _lifo_sweep(phi, psi, stack, n_stack):
    """Sweep sorted arrivals ``phi`` and services ``psi``; ``stack`` holds the
    phi indices waiting at the start. Returns partner of every psi (or -1)
    and the number of phi left waiting (left in ``stack``)."""
    partner_psi = np.full(len(psi), -1, dtype=np.int64)
    i = 0
    for j in range(len(psi)):
        # arrivals at the same position as a service are queued first
        while i < len(phi) and phi[i] <= psi[j]:
            stack[n_stack] = i
            n_stack += 1
            i += 1
        if n_stack > 0:
            n_stack -= 1
            partner_psi[j] = stack[n_stack]
    while i < len(phi):
        stack[n_stack] = i
        n_stack += 1
        i += 1
    return partner_psi, n_stack


def one_sided_match(phi: PointSet, psi: PointSet, periodic: bool = False,
                    warmup_fraction: float = 0.05, max_laps: int = 100):
    """Match every phi point to the first available psi point on its right.

    A psi point serves the most recently arrived waiting phi point; with an
    empty queue it is skipped. With ``periodic`` the sweep is repeated around
    the circle until the queue carried over a lap stops changing.

    Without ``periodic`` the returned matching lives on the segment, so its
    displacements are the (non-negative) waits; on the circle they are torus
    representatives and the directed waits are in ``trace.waiting``.
    """
    if phi.dim != 1 or psi.dim != 1:
        raise ValueError("one-sided matching is defined on the line (d = 1)")
    if phi.box != psi.box:
        raise ValueError("point sets live in different boxes")
    T = phi.box.side
    po = np.argsort(phi.coords[:, 0], kind="stable")
    so = np.argsort(psi.coords[:, 0], kind="stable")
    p_sorted, s_sorted = phi.coords[po, 0], psi.coords[so, 0]
    n_phi = len(p_sorted)

    # phi "slots" n_phi.. stand for points carried over from the previous lap
    stack = np.empty(2 * n_phi + 1, dtype=np.int64)
    carried = np.empty(0, dtype=np.int64)
    for _ in range(max_laps if periodic else 1):
        stack[:len(carried)] = carried + n_phi
        partner_sorted, n_left = _lifo_sweep(p_sorted, s_sorted, stack, len(carried))
        left = stack[:n_left].copy()
        left = np.where(left >= n_phi, left - n_phi, left)
        if periodic and n_left > n_phi:
            # the carried queue grows every lap and would overflow the stack
            raise RuntimeError("periodic one-sided matching did not settle; "
                               "is there less than one service per arrival?")
        if not periodic or np.array_equal(left, carried):
            break
        carried = left
    else:
        raise RuntimeError("periodic one-sided matching did not settle; "
                           "is there less than one service per arrival?")

    wrapped = partner_sorted >= n_phi
    phi_of_psi = np.where(partner_sorted >= n_phi, partner_sorted - n_phi, partner_sorted)
    partner_psi = np.full(len(psi), NONE, dtype=np.int64)
    served = phi_of_psi >= 0
    partner_psi[so[served]] = po[phi_of_psi[served]]
    partner_phi = np.full(n_phi, NONE, dtype=np.int64)
    partner_phi[partner_psi[partner_psi >= 0]] = np.flatnonzero(partner_psi >= 0)

    waiting = np.full(n_phi, np.inf)
    y = s_sorted[served] - p_sorted[phi_of_psi[served]]
    y[wrapped[served]] += T
    waiting[po[phi_of_psi[served]]] = y

    rounds = np.where(partner_phi >= 0, 0, NONE)
    if not periodic and phi.box.periodic:
        segment = Box(1, T, periodic=False)
        phi, psi = replace(phi, box=segment), replace(psi, box=segment)
    m = Matching(phi, psi, partner_phi, partner_psi, rounds)
    trace = _trace(phi.coords[:, 0], waiting, T, psi.coords[partner_psi >= 0, 0],
                   warmup_fraction * T)
    return m, trace


def _trace(p: np.ndarray, waiting: np.ndarray, T: float, outputs: np.ndarray,
           warmup: float) -> QueueTrace:
    n_t = int(np.floor(T)) + 1
    times = np.arange(n_t)
    diff = np.zeros(n_t + 1, dtype=np.int64)
    served = p + waiting
    # served at or after integer t iff t <= floor(served); waiting from floor(p)+1
    lo = np.floor(p).astype(np.int64) + 1
    hi = np.where(np.isfinite(served), np.floor(np.minimum(served, n_t)), n_t - 1)
    hi = hi.astype(np.int64) + 1
    ok = lo < hi
    np.add.at(diff, np.minimum(lo[ok], n_t), 1)
    np.add.at(diff, np.minimum(hi[ok], n_t), -1)
    # periodic laps: points carried over the end keep waiting from t = 0
    over = np.isfinite(served) & (served >= T)
    np.add.at(diff, 0, int(over.sum()))
    np.add.at(diff, np.floor(served[over] - T).astype(np.int64) + 1, -1)
    L = np.cumsum(diff)[:n_t]
    return QueueTrace(times, L, np.sort(outputs), waiting, warmup)


def queue_identity_residuals(phi: PointSet, trace: QueueTrace, center: int) -> np.ndarray:
    """``Psi0[c-t, c+t) - (L(c-t) - L(c+t) + Phi[c-t, c+t))`` for every integer
    ``t`` with both ends inside the traced span; zero for every ``t`` exactly."""
    c = int(center)
    t_max = min(c - int(trace.times[0]), int(trace.times[-1]) - c)
    t = np.arange(1, t_max + 1)
    lo, hi = c - t, c + t
    out = trace.outputs
    p = np.sort(phi.coords[:, 0])
    psi0 = np.searchsorted(out, hi, "left") - np.searchsorted(out, lo, "left")
    n_phi = np.searchsorted(p, hi, "left") - np.searchsorted(p, lo, "left")
    L = trace.L
    return psi0 - (L[lo] - L[hi] + n_phi)
