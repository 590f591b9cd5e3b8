"""Periodic boxes, point sets, the preference order and a masked neighbour index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

PHI_SIDE = "phi"
PSI_SIDE = "psi"
_SIDES = (PHI_SIDE, PSI_SIDE)


@dataclass(frozen=True)
class Box:
    """Cubic observation window ``[0, side)^dim``, a flat torus when periodic."""

    dim: int
    side: float
    periodic: bool = True

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.side > 0:
            raise ValueError(f"side must be positive, got {self.side}")

    @property
    def volume(self) -> float:
        return float(self.side) ** self.dim

    def wrap(self, coords) -> np.ndarray:
        """Reduce coordinates into ``[0, side)`` (periodic boxes only)."""
        x = np.mod(np.asarray(coords, dtype=float), self.side)
        # np.mod may round tiny negatives up to exactly `side`
        x[x >= self.side] = 0.0
        return x


def torus_displacement(a, b, box: Box) -> np.ndarray:
    """Minimum-image representative of ``b - a``.

    Components lie in ``[-L/2, L/2)`` on a periodic box; in free space this is
    the plain difference. Broadcasts over leading axes.
    """
    diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    if box.periodic:
        half = 0.5 * box.side
        diff = np.mod(diff + half, box.side) - half
    return diff


def torus_distance(a, b, box: Box) -> np.ndarray:
    return np.sqrt(np.sum(torus_displacement(a, b, box) ** 2, axis=-1))


def _tie_columns(disp: np.ndarray, side: str) -> np.ndarray:
    # phi side prefers lexicographically smaller displacements, psi side greater
    return disp if side == PHI_SIDE else -disp


def preference_key(z, candidate, box: Box, side: str, index: int = 0) -> tuple:
    """Sort key of ``candidate`` as seen from ``z``; smaller keys are preferred."""
    disp = torus_displacement(z, candidate, box)
    disp = np.atleast_1d(disp)
    cols = _tie_columns(disp, side)
    return (float(np.dot(disp, disp)), *map(float, cols), int(index))


def prefers(z, a, b, side: str, box: Box) -> bool:
    """True iff ``z`` strictly prefers ``a`` to ``b``.

    Shorter torus distance wins. Exact ties go to the lexicographically smaller
    minimum-image displacement on the phi side and the greater one on the psi
    side.
    """
    if side not in _SIDES:
        raise ValueError(f"unknown side {side!r}")
    if np.array_equal(np.atleast_1d(a), np.atleast_1d(b)):
        raise ValueError("prefers() needs two distinct candidates")
    ka, kb = preference_key(z, a, box, side), preference_key(z, b, box, side)
    if ka == kb:
        # distinct points can round to the same displacement; fall back to coordinates
        return tuple(np.atleast_1d(a).astype(float)) < tuple(np.atleast_1d(b).astype(float))
    return ka < kb


def preference_order(z, candidates: np.ndarray, box: Box, side: str,
                     indices: np.ndarray | None = None) -> np.ndarray:
    """Argsort of ``candidates`` (rows) by the preference of ``z``."""
    candidates = np.asarray(candidates, dtype=float).reshape(-1, box.dim)
    if indices is None:
        indices = np.arange(len(candidates))
    disp = torus_displacement(z, candidates, box)
    sq = np.sum(disp ** 2, axis=1)
    cols = _tie_columns(disp, side)
    # np.lexsort: last key is primary
    keys = [indices] + [cols[:, j] for j in range(box.dim - 1, -1, -1)] + [sq]
    return np.lexsort(keys)


@dataclass
class PointSet:
    """Finite configuration in a box. Rows of ``coords`` are the points."""

    box: Box
    coords: np.ndarray
    label: str = "sample"
    seed: int | None = None

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.size == 0:
            c = c.reshape(0, self.box.dim)
        if c.ndim == 1:
            c = c.reshape(-1, self.box.dim) if self.box.dim > 1 else c[:, None]
        if c.shape[1] != self.box.dim:
            raise ValueError(f"coords have dimension {c.shape[1]}, box has {self.box.dim}")
        if len(c) and (c.min() < 0.0 or c.max() >= self.box.side):
            raise ValueError("coordinates must lie in [0, L)")
        if self.label not in ("lattice", "sample"):
            raise ValueError(f"label must be 'lattice' or 'sample', got {self.label!r}")
        self.coords = c

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        return self.box.dim

    def subset(self, mask) -> "PointSet":
        return PointSet(self.box, self.coords[mask], self.label, self.seed)

    def shifted(self, z) -> "PointSet":
        """Translate by ``z`` (periodic boxes wrap)."""
        if not self.box.periodic:
            raise ValueError("shifts are only defined on periodic boxes")
        return PointSet(self.box, self.box.wrap(self.coords + np.asarray(z, float)),
                        self.label, self.seed)


class Neighbor(NamedTuple):
    index: int
    point: np.ndarray
    distance: float


@dataclass
class NeighborIndex:
    """kd-tree over a point set with a deletion mask.

    ``query_side`` is the side of the *querying* points and fixes the tie rule.
    The tree is rebuilt over the surviving points once more than half of its
    entries are masked, which keeps masked-point skipping cheap.
    """

    points: PointSet
    query_side: str = PHI_SIDE
    alive: np.ndarray = field(default=None)
    _tree: cKDTree = field(default=None, init=False, repr=False)
    _tree_ids: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.query_side not in _SIDES:
            raise ValueError(f"unknown side {self.query_side!r}")
        if self.alive is None:
            self.alive = np.ones(len(self.points), dtype=bool)
        self._rebuild()

    @property
    def box(self) -> Box:
        return self.points.box

    def _rebuild(self):
        self._tree_ids = np.flatnonzero(self.alive)
        pts = self.points.coords[self._tree_ids]
        boxsize = self.box.side if self.box.periodic else None
        self._tree = cKDTree(pts, boxsize=boxsize) if len(pts) else None

    def remove(self, ids):
        self.alive[np.asarray(ids, dtype=int)] = False
        if self._tree is not None and self.alive[self._tree_ids].sum() * 2 < len(self._tree_ids):
            self._rebuild()

    def n_alive(self) -> int:
        return int(self.alive.sum())

    def best(self, queries: np.ndarray) -> np.ndarray:
        """Most preferred alive point for every query row; -1 if none left."""
        queries = np.asarray(queries, dtype=float).reshape(-1, self.box.dim)
        out = np.full(len(queries), -1, dtype=np.int64)
        if self._tree is None or len(queries) == 0 or self.n_alive() == 0:
            return out
        rows = np.arange(len(queries))
        k = min(8, len(self._tree_ids))
        while len(rows):
            ids, sq, complete = self._candidates(queries[rows], k)
            choice = _pick_preferred(queries[rows], ids, sq, self.points.coords,
                                     self.box, self.query_side)
            done = complete & (choice >= 0)
            out[rows[done]] = choice[done]
            if k >= len(self._tree_ids):
                break
            rows = rows[~done]
            k = min(4 * k, len(self._tree_ids))
        return out

    def _candidates(self, q: np.ndarray, k: int):
        """k tree neighbours per row with exact squared distances.

        ``complete`` marks rows for which every alive point at the best exact
        distance is guaranteed to be among the candidates.
        """
        kd, kidx = self._tree.query(q, k=k)
        kd = kd.reshape(len(q), -1)
        kidx = kidx.reshape(len(q), -1)
        ids = self._tree_ids[kidx]
        disp = torus_displacement(q[:, None, :], self.points.coords[ids], self.box)
        sq = np.sum(disp ** 2, axis=2)
        dead = ~self.alive[ids]
        sq[dead] = np.inf
        ids = np.where(dead, -1, ids)
        best = np.sqrt(sq.min(axis=1))
        if k >= len(self._tree_ids):
            complete = np.ones(len(q), dtype=bool)
        else:
            complete = kd[:, -1] > best * (1 + 1e-9) + 1e-12
        return ids, sq, complete

    def within(self, x, radius: float) -> np.ndarray:
        """Alive ids within (slightly more than) ``radius`` of ``x``."""
        if self._tree is None:
            return np.empty(0, dtype=np.int64)
        r = radius * (1 + 1e-9) + 1e-12
        if self.box.periodic:
            r = min(r, self.box.side * np.sqrt(self.box.dim))
        hits = self._tree.query_ball_point(np.asarray(x, float).reshape(self.box.dim), r)
        ids = self._tree_ids[np.asarray(hits, dtype=np.int64)]
        return ids[self.alive[ids]]


def _pick_preferred(q, ids, sq, coords, box, side) -> np.ndarray:
    """Row-wise preference-minimal candidate (ids == -1 are ignored)."""
    best_sq = sq.min(axis=1)
    first = np.argmin(sq, axis=1)
    choice = ids[np.arange(len(ids)), first]
    choice[~np.isfinite(best_sq)] = -1
    n_tied = np.sum(sq == best_sq[:, None], axis=1)
    for r in np.flatnonzero((n_tied > 1) & np.isfinite(best_sq)):
        tied = ids[r][sq[r] == best_sq[r]]
        order = preference_order(q[r], coords[tied], box, side, indices=tied)
        choice[r] = tied[order[0]]
    return choice


def k_nearest(index: NeighborIndex, x, k: int) -> list[Neighbor]:
    """The ``k`` most preferred alive points of ``index`` as seen from ``x``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    alive = np.flatnonzero(index.alive)
    if len(alive) == 0:
        return []
    x = np.asarray(x, dtype=float).reshape(index.box.dim)
    n_tree = len(index._tree_ids)
    kk = min(n_tree, k)
    while True:
        kd, kidx = index._tree.query(x[None, :], k=kk)
        kd = np.atleast_1d(kd.ravel())
        ids = index._tree_ids[np.atleast_1d(kidx.ravel())]
        ids = ids[index.alive[ids]]
        sq = np.sum(torus_displacement(x, index.points.coords[ids], index.box) ** 2, axis=1)
        if kk >= n_tree:
            break
        # the k-th alive distance must sit strictly inside the searched ball
        if len(ids) >= k and np.sqrt(np.sort(sq)[k - 1]) * (1 + 1e-9) + 1e-12 < kd[-1]:
            break
        kk = min(2 * kk, n_tree)
    order = preference_order(x, index.points.coords[ids], index.box, index.query_side,
                             indices=ids)[:k]
    return [Neighbor(int(ids[o]), index.points.coords[ids[o]].copy(), float(np.sqrt(sq[o])))
            for o in order]
