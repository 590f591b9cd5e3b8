"""Estimators: matching-distance tails, scattering intensity, number variance,
pair correlation and log-log fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial import cKDTree

from .geometry import Box, PointSet
from .matching import Matching


def ball_volume(d: int, r=1.0):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * np.asarray(r, float) ** d


# ---------------------------------------------------------------- ECCDF

@dataclass
class EccdfTable:
    """Exact empirical tail ``T(r) = #{D > r} / n`` at the sorted distances."""

    r: np.ndarray
    tail: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)

    def __call__(self, r) -> np.ndarray:
        # fraction strictly above r
        r = np.asarray(r, float)
        return (self.n - np.searchsorted(self.r, r, side="right")) / self.n


def eccdf_from_distances(distances, meta: dict | None = None) -> EccdfTable:
    d = np.sort(np.asarray(distances, float).ravel())
    if len(d) == 0:
        raise ValueError("no matched points: the ECCDF is undefined")
    n = len(d)
    tail = (n - np.searchsorted(d, d, side="right")) / n
    return EccdfTable(d, tail, n, dict(meta or {}))


def matching_distance_eccdf(m: Matching | list) -> EccdfTable:
    """Tail of the partner distance over all matched lattice points (pooled
    over a list of matchings)."""
    ms = m if isinstance(m, (list, tuple)) else [m]
    return eccdf_from_distances(np.concatenate([x.distances for x in ms]))


def fit_exponential_tail(table: EccdfTable, d: int, lo: float = 1e-4, hi: float = 1e-1):
    """Least-squares line of ``log T`` against ``r^d`` over ``lo <= T <= hi``.

    Returns ``(slope, intercept, r_squared, n_points)``; only the last
    occurrence of each tail value is used so that ties do not add weight.
    """
    last = np.r_[table.r[1:] != table.r[:-1], True]
    r, t = table.r[last], table.tail[last]
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 5:
        raise ValueError(f"only {int(sel.sum())} tail points in [{lo}, {hi}]")
    x, y = r[sel] ** d, np.log(t[sel])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), _r_squared(x, y, slope, intercept), int(sel.sum())


def _r_squared(x, y, slope, intercept) -> float:
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(1 - np.sum(resid ** 2) / ss_tot) if ss_tot > 0 else 1.0


def fit_power_law(x, y, window=None):
    """Fit ``y = prefactor * x^exponent`` by least squares in log-log space.

    Returns ``(exponent, prefactor, r_squared)``.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    if window is not None:
        sel = (x >= window[0]) & (x <= window[1])
        x, y = x[sel], y[sel]
    if len(x) < 5:
        raise ValueError(f"need at least 5 points in the fit window, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(np.exp(intercept)), _r_squared(lx, ly, slope, intercept)


# ---------------------------------------------------------------- scattering

@dataclass
class SkTable:
    """Scattering intensity at integer modes ``m`` (``k = 2 pi m / L``)."""

    L: float
    modes: np.ndarray
    S: np.ndarray
    bragg: np.ndarray
    n_points: int
    bins: "BinnedCurve" = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * self.modes / self.L

    @property
    def knorm(self) -> np.ndarray:
        return np.linalg.norm(self.k, axis=1)


@dataclass
class BinnedCurve:
    """Log-binned curve; ``x_mean`` is the average abscissa of each bin's members."""

    center: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    count: np.ndarray
    x_mean: np.ndarray = None


def allowed_modes(box: Box, k_max: float) -> np.ndarray:
    """Integer vectors ``m >= 0`` (componentwise), ``m != 0``, with
    ``|2 pi m / L| <= k_max``."""
    m_max = int(math.floor(k_max * box.side / (2 * np.pi) + 1e-9))
    axes = [np.arange(m_max + 1)] * box.dim
    m = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    k2 = np.sum((2 * np.pi * m / box.side) ** 2, axis=1)
    keep = (k2 <= k_max ** 2 * (1 + 1e-12)) & np.any(m > 0, axis=1)
    m = m[keep]
    order = np.lexsort(m.T[::-1])
    order = order[np.argsort(k2[keep][order], kind="stable")]
    return m[order]


def is_bragg(modes: np.ndarray, L: float) -> np.ndarray:
    """True where every component of ``k = 2 pi m / L`` is a multiple of 2 pi."""
    frac = np.asarray(modes, float) / L
    return np.all(np.abs(frac - np.round(frac)) < 1e-9, axis=1)


@numba.njit(parallel=False, cache=True)
def _fourier_power(x, kvecs):
    n, d = x.shape
    out = np.empty(len(kvecs))
    for j in range(len(kvecs)):
        re = 0.0
        im = 0.0
        for i in range(n):
            ph = 0.0
            for a in range(d):
                ph += kvecs[j, a] * x[i, a]
            re += math.cos(ph)
            im -= math.sin(ph)
        out[j] = (re * re + im * im) / n
    return out


def _subsample_per_bin(modes: np.ndarray, L: float, per_decade: int, cap: int) -> np.ndarray:
    kn = np.linalg.norm(2 * np.pi * modes / L, axis=1)
    idx = np.floor(np.log10(kn) * per_decade + 1e-9).astype(np.int64)
    keep = []
    for b in np.unique(idx):
        members = np.flatnonzero(idx == b)
        if len(members) > cap:
            members = members[np.linspace(0, len(members) - 1, cap).round().astype(int)]
        keep.append(members)
    return np.sort(np.concatenate(keep))


def scattering_intensity(points: PointSet, k_max: float, modes=None,
                         per_decade: int = 12, max_per_bin: int | None = None) -> SkTable:
    """Direct-sum scattering intensity ``|sum_j exp(-i k.x_j)|^2 / N``.

    Wave vectors are ``2 pi m / L`` with non-negative integer ``m``; by default
    every such vector with ``0 < |k| <= k_max`` is used. ``modes`` may list
    integer vectors explicitly (anything else raises). ``max_per_bin`` keeps
    an evenly spaced subset of the vectors falling in each log bin, which
    bounds the cost of long 1D boxes.
    """
    box = points.box
    if len(points) == 0:
        raise ValueError("scattering intensity of an empty configuration")
    if modes is None:
        modes = allowed_modes(box, k_max)
    else:
        modes = np.atleast_2d(np.asarray(modes, float))
        if modes.shape[1] != box.dim:
            raise ValueError("mode vectors have the wrong dimension")
        if np.any(modes != np.round(modes)) or np.any(modes < 0):
            raise ValueError("wave vectors must lie on the grid (2 pi / L) * N_0^d")
        modes = modes.astype(np.int64)
    if max_per_bin is not None and len(modes):
        modes = modes[_subsample_per_bin(modes, box.side, per_decade, max_per_bin)]
    k = 2 * np.pi * modes.astype(float) / box.side
    S = _fourier_power(np.ascontiguousarray(points.coords), np.ascontiguousarray(k))
    bragg = is_bragg(modes, box.side)
    table = SkTable(box.side, modes, S, bragg, len(points))
    table.bins = bin_log(table.knorm[~bragg], S[~bragg], per_decade)
    return table


def scattering_bruteforce(coords: np.ndarray, kvecs: np.ndarray) -> np.ndarray:
    """Reference via a dense complex exponential matrix."""
    phase = np.exp(-1j * (np.asarray(kvecs, float) @ np.asarray(coords, float).T))
    return np.abs(phase.sum(axis=1)) ** 2 / len(coords)


def bin_log(x: np.ndarray, y: np.ndarray, per_decade: int = 12) -> BinnedCurve:
    """Average ``y`` in logarithmic bins of ``x``; standard errors over the
    pooled values of each bin (zero for singleton bins)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = x > 0
    x, y = x[ok], y[ok]
    if len(x) == 0:
        empty = np.empty(0)
        return BinnedCurve(empty, empty, empty, np.empty(0, dtype=np.int64), empty)
    idx = np.floor(np.log10(x) * per_decade + 1e-9).astype(np.int64)
    uniq, inv, count = np.unique(idx, return_inverse=True, return_counts=True)
    sums = np.bincount(inv, weights=y)
    mean = sums / count
    sq = np.bincount(inv, weights=(y - mean[inv]) ** 2)
    var = np.where(count > 1, sq / np.maximum(count - 1, 1), 0.0)
    se = np.sqrt(var / count)
    # geometric bin centres
    center = 10 ** ((uniq + 0.5) / per_decade)
    x_mean = np.bincount(inv, weights=x) / count
    return BinnedCurve(center, mean, se, count, x_mean)


def pool_scattering(tables: list[SkTable], per_decade: int = 12) -> BinnedCurve:
    """Bin the non-Bragg values of several tables together."""
    kn = np.concatenate([t.knorm[~t.bragg] for t in tables])
    S = np.concatenate([t.S[~t.bragg] for t in tables])
    return bin_log(kn, S, per_decade)


# ---------------------------------------------------------------- number variance

@dataclass
class VarianceTable:
    radii: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    se: np.ndarray
    n_windows: int
    meta: dict = field(default_factory=dict)


@numba.njit(cache=True)
def _counts_1d(xs, L, centers, radii):
    out = np.empty((len(centers), len(radii)), dtype=np.int64)
    n = len(xs)
    for i in range(len(centers)):
        c = centers[i]
        for j in range(len(radii)):
            lo = c - radii[j]
            hi = c + radii[j]
            cnt = np.searchsorted(xs, hi, side="right") - np.searchsorted(xs, lo, side="left")
            if lo < 0:
                cnt += n - np.searchsorted(xs, lo + L, side="left")
            if hi >= L:
                cnt += np.searchsorted(xs, hi - L, side="right")
            out[i, j] = cnt
    return out


@numba.njit(cache=True)
def _row_count(xs, ys, start, stop, lo, hi, cx, cy, L, r2, yshift):
    """Points of one row with x in [lo, hi] (no wrap) and within r of (cx, cy);
    ``yshift`` moves the row to the image being visited."""
    a = start + np.searchsorted(xs[start:stop], lo, side="left")
    b = start + np.searchsorted(xs[start:stop], hi, side="right")
    cnt = 0
    for i in range(a, b):
        dx = xs[i] - cx
        dy = ys[i] + yshift - cy
        if dx >= 0.5 * L:
            dx -= L
        elif dx < -0.5 * L:
            dx += L
        if dx * dx + dy * dy <= r2:
            cnt += 1
    return cnt


@numba.njit(cache=True)
def _row_count_fast(xs, start, stop, lo, hi):
    a = np.searchsorted(xs[start:stop], lo, side="left")
    b = np.searchsorted(xs[start:stop], hi, side="right")
    return b - a


@numba.njit(cache=True)
def _counts_2d(xs, ys, row_start, h, L, centers, radii):
    """Disk counts on the torus using rows of height ``h`` sorted by x.

    In every row the chord is bracketed by its widths at the nearest and the
    farthest row edge: points inside the narrow chord are counted by binary
    search, points in the two slivers between narrow and wide chord are
    tested exactly.
    """
    n_rows = len(row_start) - 1
    out = np.zeros((len(centers), len(radii)), dtype=np.int64)
    for i in range(len(centers)):
        cx = centers[i, 0]
        cy = centers[i, 1]
        for j in range(len(radii)):
            R = radii[j]
            r2 = R * R
            r_lo = int(math.floor((cy - R) / h))
            r_hi = int(math.floor((cy + R) / h))
            total = 0
            for rr in range(r_lo, r_hi + 1):
                row = rr % n_rows
                y0 = rr * h
                y1 = y0 + h
                # |dy| range over the row (unwrapped coordinates)
                if y0 <= cy <= y1:
                    dy_near = 0.0
                else:
                    dy_near = min(abs(y0 - cy), abs(y1 - cy))
                dy_far = max(abs(y0 - cy), abs(y1 - cy))
                if dy_near > R:
                    continue
                w_out = math.sqrt(max(r2 - dy_near * dy_near, 0.0))
                w_in = math.sqrt(r2 - dy_far * dy_far) if dy_far <= R else -1.0
                # keep the counted-blindly chord strictly inside even after the
                # +-L shift rounds its ends; the slivers pick up the margin
                w_in -= 1e-12 * (L + R)
                s = row_start[row]
                e = row_start[row + 1]
                ysh = (rr - row) * h
                if w_in >= 0:
                    total += _count_wrapped(xs, s, e, cx - w_in, cx + w_in, L)
                    total += _exact_wrapped(xs, ys, s, e, cx - w_out, cx - w_in, cx, cy, L, r2, ysh, 1)
                    total += _exact_wrapped(xs, ys, s, e, cx + w_in, cx + w_out, cx, cy, L, r2, ysh, 2)
                else:
                    total += _exact_wrapped(xs, ys, s, e, cx - w_out, cx + w_out, cx, cy, L, r2, ysh, 0)
            out[i, j] = total
    return out


@numba.njit(cache=True)
def _count_wrapped(xs, s, e, lo, hi, L):
    cnt = _row_count_fast(xs, s, e, max(lo, 0.0), min(hi, np.nextafter(L, 0.0)))
    if lo < 0:
        cnt += _row_count_fast(xs, s, e, lo + L, np.nextafter(L, 0.0))
    if hi >= L:
        cnt += _row_count_fast(xs, s, e, 0.0, hi - L)
    return cnt


@numba.njit(cache=True)
def _exact_wrapped(xs, ys, s, e, lo, hi, cx, cy, L, r2, ysh, mode):
    # exact distance test on [lo, hi]; mode 1 opens the upper end, 2 the lower.
    # Ends are opened after the periodic shift so they agree bit for bit with
    # the shifted ends used by _count_wrapped.
    top = np.nextafter(L, 0.0)
    cnt = 0
    for k in range(3):
        shift = (1 - k) * L
        if (k == 0 and not lo < 0) or (k == 2 and not hi >= L):
            continue
        a = lo + shift
        b = hi + shift
        if mode == 1:
            b = np.nextafter(b, -np.inf)
        elif mode == 2:
            a = np.nextafter(a, np.inf)
        a = max(a, 0.0)
        b = min(b, top)
        if a <= b:
            cnt += _row_count(xs, ys, s, e, a, b, cx, cy, L, r2, ysh)
    return cnt


def window_counts(points: PointSet, centers: np.ndarray, radii) -> np.ndarray:
    """Counts of points within torus distance ``R`` (closed balls) of every
    center, shape ``(n_centers, n_radii)``."""
    box = points.box
    radii = np.asarray(radii, float)
    centers = np.asarray(centers, float).reshape(-1, box.dim)
    L = float(box.side)
    if box.dim == 1:
        xs = np.sort(points.coords[:, 0])
        return _counts_1d(xs, L, centers[:, 0], radii)
    if box.dim == 2:
        n_rows = max(1, int(L))
        h = L / n_rows
        row = np.minimum((points.coords[:, 1] // h).astype(np.int64), n_rows - 1)
        order = np.lexsort((points.coords[:, 0], row))
        xs = np.ascontiguousarray(points.coords[order, 0])
        ys = np.ascontiguousarray(points.coords[order, 1])
        row_start = np.searchsorted(row[order], np.arange(n_rows + 1))
        return _counts_2d(xs, ys, row_start, h, L, centers, radii)
    tree = cKDTree(points.coords, boxsize=L if box.periodic else None)
    return np.stack([tree.query_ball_point(centers, r, return_length=True) for r in radii], axis=1)


def number_variance(points: PointSet, radii, n_windows: int, rng: np.random.Generator) -> VarianceTable:
    """Sample variance of counts in balls around uniformly random centers."""
    box = points.box
    radii = np.asarray(radii, float)
    if np.any(radii >= 0.5 * box.side):
        raise ValueError(f"window radius must be < L/2 = {0.5 * box.side}")
    if np.any(radii <= 0):
        raise ValueError("window radii must be positive")
    if n_windows < 2:
        raise ValueError("need at least two windows")
    centers = rng.random((n_windows, box.dim)) * box.side
    counts = window_counts(points, centers, radii).astype(float)
    mean = counts.mean(axis=0)
    dev = counts - mean
    var = np.sum(dev ** 2, axis=0) / (n_windows - 1)
    m4 = np.mean(dev ** 4, axis=0)
    se = np.sqrt(np.maximum(m4 - var ** 2, 0.0) / n_windows)
    return VarianceTable(radii, mean, var, se, n_windows)


def pool_variance(tables: list[VarianceTable]) -> VarianceTable:
    """Average variance over independent samples; the error bar is the
    standard error of that average."""
    v = np.stack([t.variance for t in tables])
    mean = np.mean([t.mean for t in tables], axis=0)
    n = len(tables)
    se = v.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else tables[0].se
    return VarianceTable(tables[0].radii, mean, v.mean(axis=0), se,
                         sum(t.n_windows for t in tables))


def exact_window_variance_1d(xs, L: float, R: float) -> tuple[float, float]:
    """Mean and variance of the count in ``[c - R, c + R]`` for ``c`` uniform
    on the circle, integrated exactly over the piecewise constant count."""
    xs = np.sort(np.asarray(xs, float))
    cuts = np.sort(np.mod(np.concatenate([xs - R, xs + R]), L))
    cuts = np.unique(np.r_[0.0, cuts, L])
    mids = 0.5 * (cuts[1:] + cuts[:-1])
    w = np.diff(cuts) / L
    d = np.abs(np.mod(mids[:, None] - xs[None, :] + 0.5 * L, L) - 0.5 * L)
    c = np.sum(d <= R, axis=1)
    mean = float(np.sum(w * c))
    return mean, float(np.sum(w * (c - mean) ** 2))


# ---------------------------------------------------------------- pair correlation

@dataclass
class GrTable:
    edges: np.ndarray
    g: np.ndarray
    se: np.ndarray
    pair_counts: np.ndarray
    expected: np.ndarray
    n_samples: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def truncated(self) -> np.ndarray:
        return self.g - 1.0


def pair_correlation(points: PointSet, dr: float, r_max: float) -> GrTable:
    """Shell-count estimate of the pair correlation function.

    Ordered pairs at torus distance in ``(r_i, r_{i+1}]`` are divided by
    ``N (N - 1) / V`` times the shell volume. The error bar treats each shell
    count as Poisson.
    """
    box = points.box
    if r_max >= 0.5 * box.side:
        raise ValueError(f"r_max must be < L/2 = {0.5 * box.side}")
    if not dr > 0:
        raise ValueError("dr must be positive")
    n_shells = int(round(r_max / dr))
    edges = np.linspace(0.0, n_shells * dr, n_shells + 1)
    N = len(points)
    if N < 2:
        raise ValueError("pair correlation needs at least two points")
    tree = cKDTree(points.coords, boxsize=box.side if box.periodic else None)
    cum = tree.count_neighbors(tree, edges).astype(float)
    cum -= N  # self pairs at distance 0
    counts = np.diff(cum)
    shell = np.diff(ball_volume(box.dim, edges))
    expected = N * (N - 1) / box.volume * shell
    g = counts / expected
    se = np.sqrt(np.maximum(counts, 1.0)) / expected
    return GrTable(edges, g, se, counts, expected)


def pool_pair_correlation(tables: list[GrTable]) -> GrTable:
    """Mean of per-sample estimates with the standard error across samples."""
    g = np.stack([t.g for t in tables])
    n = len(tables)
    se = g.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else tables[0].se
    return GrTable(tables[0].edges, g.mean(axis=0), se,
                   np.sum([t.pair_counts for t in tables], axis=0),
                   np.sum([t.expected for t in tables], axis=0), n)
