"""Descending chains, matching flowers, the stopping-set check and decisive cubes.

Points are addressed as ``(side, index)`` with side 0 for phi and 1 for psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PHI_SIDE, PSI_SIDE, Box, PointSet, torus_displacement
from .matching import NONE, Matching, stable_match

PHI, PSI = 0, 1
DEFAULT_BUDGET = 1_000_000
_INCLUSIVE = (1,)  # appended to a key, turns "strictly preferred" into "preferred or equal"


class FlowerBudgetExceeded(RuntimeError):
    """Raised when a chain or flower search expands more nodes than allowed."""


@dataclass(frozen=True)
class Window:
    """Closed axis-aligned box ``[lo, hi]``."""

    lo: tuple
    hi: tuple

    @classmethod
    def cube(cls, center, half_side) -> "Window":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(tuple(c - half_side), tuple(c + half_side))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)), axis=1)

    def contains_ball(self, center, radius) -> bool:
        c = np.asarray(center, dtype=float)
        return bool(np.all(c - radius >= np.asarray(self.lo)) and
                    np.all(c + radius <= np.asarray(self.hi)))


@dataclass
class Chain:
    """Alternating sequence of points; each interior point prefers its successor
    to its predecessor."""

    nodes: list  # (side, index)
    coords: np.ndarray

    def __len__(self):
        return len(self.nodes)

    @property
    def steps(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.coords, axis=0), axis=1)


@dataclass
class Flower:
    """Union of balls determining the partner of ``anchor``.

    ``radii`` maps each ball centre ``(side, index)`` to its radius. An
    unmatched anchor gets the whole domain (``whole_domain`` True).
    """

    anchor: tuple
    anchor_coords: np.ndarray
    partner: tuple | None
    radii: dict = field(default_factory=dict)
    centers: dict = field(default_factory=dict)
    whole_domain: bool = False
    box: Box | None = None

    @property
    def bounding_radius(self) -> float:
        if self.whole_domain:
            return math.inf
        return max(float(np.linalg.norm(self._offset(k))) + r for k, r in self.radii.items())

    def _offset(self, key):
        return torus_displacement(self.anchor_coords, self.centers[key], self.box)

    def balls(self):
        """``(center, radius)`` pairs in a deterministic order."""
        return [(self.centers[k], self.radii[k]) for k in sorted(self.radii)]

    def inside(self, window: Window) -> bool:
        if self.whole_domain:
            return False
        return all(window.contains_ball(c, r) for c, r in self.balls())

    def intersects_ball(self, center, radius: float) -> bool:
        """Closed-ball intersection test under the box metric."""
        if self.whole_domain:
            return True
        for c, r in self.balls():
            gap = np.linalg.norm(torus_displacement(c, center, self.box))
            if gap <= r + radius:
                return True
        return False

    def same_balls(self, other: "Flower", rtol: float = 1e-12) -> bool:
        if self.whole_domain or other.whole_domain:
            return self.whole_domain == other.whole_domain
        if set(self.radii) != set(other.radii):
            return False
        return all(math.isclose(self.radii[k], other.radii[k], rel_tol=rtol)
                   for k in self.radii)


class PreferenceGraph:
    """Neighbour queries between the two sides of a fixed configuration."""

    def __init__(self, phi: PointSet, psi: PointSet):
        if phi.box != psi.box:
            raise ValueError("point sets live in different boxes")
        self.box = phi.box
        self.coords = (phi.coords, psi.coords)
        boxsize = self.box.side if self.box.periodic else None
        self.trees = tuple(cKDTree(c, boxsize=boxsize) if len(c) else None
                           for c in self.coords)

    def key(self, w: tuple, u: tuple) -> tuple:
        """Preference key of ``u`` as seen from ``w``; smaller is preferred."""
        disp = torus_displacement(self.coords[w[0]][w[1]], self.coords[u[0]][u[1]], self.box)
        cols = disp if w[0] == PHI else -disp
        return (float(disp @ disp), *map(float, cols), u[1])

    def preferred_to(self, w: tuple, limit: tuple) -> list:
        """Opposite-side points that ``w`` strictly prefers to key ``limit``,
        most preferred first."""
        other = 1 - w[0]
        tree = self.trees[other]
        if tree is None:
            return []
        r = math.sqrt(limit[0]) * (1 + 1e-9) + 1e-12
        if self.box.periodic:
            r = min(r, self.box.side * math.sqrt(self.box.dim))
        ids = tree.query_ball_point(self.coords[w[0]][w[1]], r)
        out = []
        for i in ids:
            k = self.key(w, (other, i))
            if k < limit:
                out.append((k, (other, i)))
        out.sort()
        return out


def _partner(m: Matching, z: tuple):
    idx = m.partner_of_phi[z[1]] if z[0] == PHI else m.partner_of_psi[z[1]]
    return None if idx == NONE else (1 - z[0], int(idx))


def _wraps(box: Box, radius: float) -> bool:
    return box.periodic and radius >= 0.5 * box.side


def matching_flower(m: Matching, z: tuple, budget: int = DEFAULT_BUDGET,
                    graph: PreferenceGraph | None = None) -> Flower:
    """Flower of ``z`` by ball growing.

    Starting from the ball around ``z`` that reaches its partner, every point
    inside a ball sends a ball to each opposite point it prefers to the point
    that reached it. A point reached several times only keeps its largest ball,
    since its admissible successors are a prefix of its preference list.
    """
    graph = graph or PreferenceGraph(m.phi, m.psi)
    zc = graph.coords[z[0]][z[1]]
    partner = _partner(m, z)
    flower = Flower(z, zc.copy(), partner, box=m.box)
    if partner is None:
        flower.whole_domain = True
        return flower
    limit = {z: graph.key(z, partner) + _INCLUSIVE}
    done = {}
    stack = [z]
    work = 0
    while stack:
        w = stack.pop()
        t = limit[w]
        if w in done and done[w] >= t:
            continue
        for k, u in graph.preferred_to(w, t):
            work += 1
            if work > budget:
                raise FlowerBudgetExceeded(f"flower of {z} exceeded {budget} expansions")
            back = graph.key(u, w)
            if u not in limit or back > limit[u]:
                limit[u] = back
                stack.append(u)
        done[w] = t
    for w, t in limit.items():
        r = math.sqrt(t[0])
        flower.radii[w] = r
        flower.centers[w] = graph.coords[w[0]][w[1]].copy()
        if _wraps(m.box, r):
            flower.whole_domain = True
    return flower


def flower_by_chains(m: Matching, z: tuple, budget: int = DEFAULT_BUDGET,
                     graph: PreferenceGraph | None = None) -> Flower:
    """Flower of ``z`` as the union of F_c over explicitly enumerated competing
    chains (no memoisation; exponential in the worst case)."""
    graph = graph or PreferenceGraph(m.phi, m.psi)
    zc = graph.coords[z[0]][z[1]]
    partner = _partner(m, z)
    flower = Flower(z, zc.copy(), partner, box=m.box)
    if partner is None:
        flower.whole_domain = True
        return flower
    radii = {}

    def add(w, r):
        if r > radii.get(w, -1.0):
            radii[w] = r

    # each stack entry is a competing chain given by its last two points
    stack = []
    for k, u in graph.preferred_to(z, graph.key(z, partner) + _INCLUSIVE):
        add(z, math.sqrt(k[0]))
        stack.append((z, u))
    work = 0
    while stack:
        prev, w = stack.pop()
        back = graph.key(w, prev)
        add(w, math.sqrt(back[0]))
        for _, u in graph.preferred_to(w, back):
            work += 1
            if work > budget:
                raise FlowerBudgetExceeded(f"chain enumeration for {z} exceeded {budget} nodes")
            stack.append((w, u))
    for w, r in radii.items():
        flower.radii[w] = r
        flower.centers[w] = graph.coords[w[0]][w[1]].copy()
        if _wraps(m.box, r):
            flower.whole_domain = True
    return flower


def descending_chains(phi: PointSet, psi: PointSet, start: tuple, b: float, n: int,
                      budget: int = DEFAULT_BUDGET, first_only: bool = False,
                      graph: PreferenceGraph | None = None) -> list[Chain]:
    """All descending chains ``(start, z_2, ..., z_{2n+1})`` whose first step is
    at most ``b``.

    Depth-first; step lengths never increase along a chain, which bounds the
    search. With ``first_only`` the search stops at the first complete chain.
    """
    if b <= 0 or n < 1:
        raise ValueError("need b > 0 and n >= 1")
    graph = graph or PreferenceGraph(phi, psi)
    target = 2 * n + 1
    first_limit = (b * b,) + (math.inf,) * (phi.box.dim + 1)
    found = []
    stack = [[start, u] for _, u in reversed(graph.preferred_to(start, first_limit))]
    work = 0
    while stack:
        chain = stack.pop()
        if len(chain) == target:
            found.append(_as_chain(graph, chain))
            if first_only:
                break
            continue
        w, prev = chain[-1], chain[-2]
        for _, u in reversed(graph.preferred_to(w, graph.key(w, prev))):
            work += 1
            if work > budget:
                raise FlowerBudgetExceeded(f"chain enumeration exceeded {budget} nodes")
            stack.append(chain + [u])
    return found


def _as_chain(graph: PreferenceGraph, nodes: list) -> Chain:
    pts = np.array([graph.coords[s][i] for s, i in nodes])
    if graph.box.periodic:
        # unwrap so consecutive coordinates differ by minimum-image steps
        steps = torus_displacement(pts[:-1], pts[1:], graph.box)
        pts = np.vstack([pts[:1], pts[0] + np.cumsum(steps, axis=0)])
    return Chain(list(nodes), pts)


def chain_bound(n: int, b: float, d: int, c: float, theta: float = 0.0) -> float:
    """Upper bound a_n^n / n! on the probability of a descending chain of n
    lattice/sample steps with first step at most ``b``.

    ``a_n = n^theta c kappa_d^2 (b^2 + 2 b sqrt(d))^d`` where ``c`` bounds the
    correlation functions (``c = alpha`` for a Poisson process).
    """
    kappa = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    a_n = n ** theta * c * kappa ** 2 * (b * b + 2 * b * math.sqrt(d)) ** d
    return a_n ** n / math.factorial(n)


def _with_point(ps: PointSet, x) -> tuple[PointSet, int]:
    x = np.asarray(x, dtype=float).reshape(ps.dim)
    hit = np.flatnonzero(np.all(ps.coords == x, axis=1))
    if len(hit):
        return ps, int(hit[0])
    return PointSet(ps.box, np.vstack([ps.coords, x]), ps.label, ps.seed), len(ps)


def _restrict(ps: PointSet, window: Window, keep=None) -> tuple[PointSet, np.ndarray]:
    mask = window.contains(ps.coords) if len(ps) else np.zeros(0, dtype=bool)
    if keep is not None:
        mask[keep] = True
    ids = np.flatnonzero(mask)
    return ps.subset(mask), ids


def verify_stopping_set(phi: PointSet, psi: PointSet, z, window: Window,
                        side: str = PHI_SIDE, budget: int = DEFAULT_BUDGET) -> bool:
    """Check the stopping-set property of the flower of ``z`` for one window.

    ``z`` is added to the ``side`` set. The flower is computed on the full
    instance and on the instance restricted to ``window``; returns True iff
    both flowers agree on lying inside the window and, when they do, ``z`` has
    the same partner in both.
    """
    if phi.box.periodic:
        raise ValueError("the stopping-set check runs in free space")
    s = PHI if side == PHI_SIDE else PSI
    sets = [phi, psi]
    sets[s], zi = _with_point(sets[s], z)
    if not window.contains(sets[s].coords[zi])[0]:
        raise ValueError("z must lie in the window")
    full = stable_match(sets[0], sets[1])
    f_full = matching_flower(full, (s, zi), budget)

    restricted, kept = zip(*(_restrict(p, window, keep=[zi] if j == s else None)
                             for j, p in enumerate(sets)))
    zi_w = int(np.searchsorted(kept[s], zi))
    part = stable_match(restricted[0], restricted[1])
    f_part = matching_flower(part, (s, zi_w), budget)

    inside_full, inside_part = f_full.inside(window), f_part.inside(window)
    if inside_full != inside_part:
        return False
    if inside_full:
        a = sets[1 - s].coords[f_full.partner[1]]
        b = restricted[1 - s].coords[f_part.partner[1]]
        return bool(np.array_equal(a, b))
    return True


def lattice_in_window(box: Box, window: Window, shift=None) -> PointSet:
    """Integer lattice points (plus ``shift``) of ``box`` that lie in ``window``."""
    u = np.zeros(box.dim) if shift is None else np.asarray(shift, float)
    lo = np.ceil(np.asarray(window.lo) - u).astype(int)
    hi = np.floor(np.asarray(window.hi) - u).astype(int)
    axes = [np.arange(max(l, 0), h + 1) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim) + u
    grid = grid[np.all(grid < box.side, axis=1)]
    return PointSet(box, grid, label="lattice")


def is_decisive(cube: Window, q, psi: PointSet, phi: PointSet | None = None,
                budget: int = DEFAULT_BUDGET) -> bool:
    """True iff the flower of lattice point ``q`` computed from the data inside
    ``cube`` lies inside ``cube``.

    Only ``psi`` points inside the cube are used, so the answer cannot depend
    on the configuration outside it. ``phi`` defaults to the integer lattice.
    """
    if psi.box.periodic:
        raise ValueError("decisiveness is evaluated in free space")
    q = np.asarray(q, dtype=float).reshape(psi.dim)
    if not cube.contains(q)[0]:
        raise ValueError("q must lie in the cube")
    phi = phi if phi is not None else lattice_in_window(psi.box, cube)
    phi_c, _ = _restrict(phi, cube)
    psi_c, _ = _restrict(psi, cube)
    phi_c, qi = _with_point(phi_c, q)
    m = stable_match(phi_c, psi_c)
    return matching_flower(m, (PHI, qi), budget).inside(cube)


def partner_of_point(m: Matching, side: str, x) -> np.ndarray | None:
    """Coordinates of the partner of the point at ``x`` (None if unmatched)."""
    s = PHI if side == PHI_SIDE else PSI
    coords = (m.phi, m.psi)[s].coords
    hit = np.flatnonzero(np.all(coords == np.asarray(x, float), axis=1))
    if not len(hit):
        raise KeyError("point not in the configuration")
    p = _partner(m, (s, int(hit[0])))
    return None if p is None else (m.phi, m.psi)[p[0]].coords[p[1]]


__all__ = [
    "Chain", "Flower", "FlowerBudgetExceeded", "PreferenceGraph", "Window", "PHI", "PSI",
    "PSI_SIDE", "chain_bound", "descending_chains", "flower_by_chains", "is_decisive",
    "lattice_in_window", "matching_flower", "partner_of_point", "verify_stopping_set",
]
