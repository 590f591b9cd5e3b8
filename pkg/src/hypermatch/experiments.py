"""Seeded end-to-end pipelines shared by the CLI, the scripts and the tests.

Seed convention: run seed ``s`` draws the lattice shift from stream ``2 s``
and the sample from stream ``2 s + 1``, so no two objects of a campaign share
a generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flower import (PHI, PreferenceGraph, Window, descending_chains, lattice_in_window,
                     verify_stopping_set)
from .geometry import Box, PointSet
from .matching import brute_force_match, find_unstable_pairs, stable_match
from .queue import one_sided_match, queue_identity_residuals
from .rigidity import Ball, rigidity_recover
from .samplers import (LatticeSpec, SpectralModel, make_lattice, make_rng, sample_dpp_spectral,
                       sample_poisson)
from .stats import (BinnedCurve, VarianceTable, fit_exponential_tail, fit_power_law,
                    matching_distance_eccdf, number_variance, pair_correlation,
                    pool_pair_correlation, pool_scattering, pool_variance,
                    scattering_intensity)


def lattice_seed(seed: int) -> int:
    return 2 * int(seed)


def sample_seed(seed: int) -> int:
    return 2 * int(seed) + 1


def make_sample(box: Box, process: str, alpha: float, seed: int,
                model: SpectralModel | None = None) -> PointSet:
    if process == "poisson":
        return sample_poisson(box, alpha, sample_seed(seed))
    if process == "dpp":
        model = model or SpectralModel(alpha)
        return sample_dpp_spectral(box, model, sample_seed(seed))
    raise ValueError(f"unknown process {process!r}")


def matched_instance(d: int, L: float, alpha: float, seed: int, process: str = "poisson",
                     shift_mode: str = "stationarized", model: SpectralModel | None = None):
    """Lattice, sample and their stable matching on the torus of side ``L``."""
    box = Box(d, float(L))
    phi = make_lattice(LatticeSpec(box, shift_mode, seed=lattice_seed(seed)))
    psi = make_sample(box, process, alpha, seed, model)
    return phi, psi, stable_match(phi, psi)


# ---------------------------------------------------------------- matching audits

@dataclass
class AuditResult:
    instances: int = 0
    unstable: int = 0
    incomplete: int = 0
    mismatched: int = 0
    details: list = field(default_factory=list)


def _small_instance(rng: np.random.Generator, d: int, alpha: float, n_max: int):
    # side chosen so that both sets stay below n_max points
    L = int(max(2, math.floor((n_max / (alpha * 1.2)) ** (1.0 / d))))
    L = int(rng.integers(max(2, L // 2), L + 1))
    box = Box(d, float(L))
    seed = int(rng.integers(2 ** 31))
    phi = make_lattice(LatticeSpec(box, "stationarized", seed=lattice_seed(seed)))
    psi = sample_poisson(box, alpha, sample_seed(seed))
    return phi, psi, seed


def stability_audit(n_instances: int = 500, seed: int = 0, n_max: int = 5000,
                    alphas=(1.2, 2.0, 11.0), dims=(1, 2, 3)) -> AuditResult:
    """Exhaustive stability and completeness checks on random instances."""
    rng = make_rng(seed)
    out = AuditResult()
    for i in range(n_instances):
        d = dims[i % len(dims)]
        alpha = alphas[(i // len(dims)) % len(alphas)]
        phi, psi, s = _small_instance(rng, d, alpha, n_max)
        m = stable_match(phi, psi)
        out.instances += 1
        if len(find_unstable_pairs(m)):
            out.unstable += 1
            out.details.append(("unstable", d, alpha, s))
        if m.n_matched != min(len(phi), len(psi)):
            out.incomplete += 1
            out.details.append(("incomplete", d, alpha, s))
    return out


def oracle_audit(n_instances: int = 200, seed: int = 1, n_max: int = 2000,
                 alphas=(1.2, 2.0, 11.0), dims=(1, 2, 3)) -> AuditResult:
    """Partner-map equality of the fast matcher and the brute-force oracle."""
    rng = make_rng(seed)
    out = AuditResult()
    for i in range(n_instances):
        d = dims[i % len(dims)]
        alpha = alphas[(i // len(dims)) % len(alphas)]
        phi, psi, s = _small_instance(rng, d, alpha, n_max)
        fast, ref = stable_match(phi, psi), brute_force_match(phi, psi)
        out.instances += 1
        if not (np.array_equal(fast.partner_of_phi, ref.partner_of_phi)
                and np.array_equal(fast.partner_of_psi, ref.partner_of_psi)):
            out.mismatched += 1
            out.details.append(("mismatch", d, alpha, s))
        if fast.n_matched != min(len(phi), len(psi)):
            out.incomplete += 1
    return out


# ---------------------------------------------------------------- matching-distance tail

@dataclass
class TailResult:
    table: object
    slope: float
    intercept: float
    r_squared: float
    n_fit: int


def eccdf_experiment(d: int, L: float, alpha: float, seeds, process: str = "poisson",
                     fit_range=(1e-4, 1e-1)) -> TailResult:
    ms = [matched_instance(d, L, alpha, s, process)[2] for s in seeds]
    table = matching_distance_eccdf(ms)
    table.meta.update(d=d, L=float(L), alpha=alpha, seeds=list(map(int, seeds)), process=process)
    slope, intercept, r2, n = fit_exponential_tail(table, d, *fit_range)
    return TailResult(table, slope, intercept, r2, n)


# ---------------------------------------------------------------- scattering

@dataclass
class ScatteringResult:
    curve: BinnedCurve
    tables: list
    k_min: float
    exponent: float
    prefactor: float
    r_squared: float


def lowest_decade(curve: BinnedCurve, k_min: float):
    """Bins whose member-mean wavenumber lies in ``[k_min, 10 k_min]``."""
    return (curve.x_mean >= k_min * (1 - 1e-9)) & (curve.x_mean <= 10 * k_min * (1 + 1e-9))


def scattering_experiment(d: int, L: float, alpha: float, seeds, k_max: float,
                          max_per_bin: int | None = None, per_decade: int = 12,
                          process: str = "poisson") -> ScatteringResult:
    """Pooled scattering intensity of the matched sample points with a power
    law fitted over the lowest decade of non-Bragg wavenumbers."""
    tables = []
    for s in seeds:
        _, _, m = matched_instance(d, L, alpha, s, process)
        tables.append(scattering_intensity(m.matched_psi(), k_max, per_decade=per_decade,
                                           max_per_bin=max_per_bin))
    curve = pool_scattering(tables, per_decade)
    k_min = 2 * np.pi / L
    sel = lowest_decade(curve, k_min)
    try:
        exponent, prefactor, r2 = fit_power_law(curve.x_mean[sel], curve.mean[sel])
    except ValueError:
        exponent = prefactor = r2 = float("nan")
    return ScatteringResult(curve, tables, k_min, exponent, prefactor, r2)


# ---------------------------------------------------------------- number variance

@dataclass
class VarianceResult:
    table: VarianceTable
    tables: list
    fits: dict


def default_numvar_radii(lo: float = 1.0, hi: float = 120.0) -> np.ndarray:
    parts = [np.geomspace(1, 10, 10), np.geomspace(10, 50, 5), np.geomspace(50, 120, 8)]
    r = np.unique(np.round(np.concatenate(parts), 12))
    return r[(r >= lo) & (r <= hi)]


def number_variance_experiment(d: int, L: float, alpha: float, seeds, radii, n_windows: int,
                               fit_windows=((1, 10), (50, 120)),
                               process: str = "poisson") -> VarianceResult:
    tables = []
    for s in seeds:
        _, _, m = matched_instance(d, L, alpha, s, process)
        # window centres use a stream disjoint from the sampling streams
        rng = make_rng(10 ** 9 + int(s))
        tables.append(number_variance(m.matched_psi(), radii, n_windows, rng))
    pooled = pool_variance(tables)
    fits = {}
    for w in fit_windows:
        try:
            fits[tuple(w)] = fit_power_law(pooled.radii, pooled.variance, w)
        except ValueError:
            fits[tuple(w)] = (float("nan"),) * 3
    return VarianceResult(pooled, tables, fits)


# ---------------------------------------------------------------- pair correlation

def pair_correlation_experiment(d: int, L: float, alpha: float, seeds, dr: float,
                                r_max: float, process: str = "poisson"):
    tables = [pair_correlation(matched_instance(d, L, alpha, s, process)[2].matched_psi(),
                               dr, r_max) for s in seeds]
    return pool_pair_correlation(tables)


# ---------------------------------------------------------------- rigidity

def rigidity_campaign(d: int, L: float, alpha: float, radius: float, seeds,
                      process: str = "poisson"):
    """One ball per seed, centred at a uniform random point of the torus."""
    records = []
    for s in seeds:
        _, _, m = matched_instance(d, L, alpha, s, process)
        center = make_rng(10 ** 9 + 7 * int(s)).random(d) * L
        records.append(rigidity_recover(m, Ball(tuple(center), radius)))
    return records


# ---------------------------------------------------------------- queue

def queue_identity_campaign(alpha: float, span: float, seeds, periodic: bool = False):
    """Largest absolute residual of the queue identity per seed."""
    worst = []
    box = Box(1, float(span))
    for s in seeds:
        phi = make_lattice(LatticeSpec(box, "stationarized", seed=lattice_seed(s)))
        psi = sample_poisson(box, alpha, sample_seed(s))
        _, trace = one_sided_match(phi, psi, periodic=periodic)
        res = queue_identity_residuals(phi, trace, int(span) // 2)
        worst.append(int(np.abs(res).max()) if len(res) else 0)
    return worst


# ---------------------------------------------------------------- chains

def chain_event_frequency(d: int, alpha: float, n: int, b: float, seeds,
                          budget: int = 1_000_000) -> tuple[int, int]:
    """How often a descending chain of ``2n + 1`` points with first step at most
    ``b`` starts from the shifted lattice point nearest the box centre.

    Chain steps never exceed ``b``, so a torus of side ``2 (2n + 1) b + 4``
    cannot wrap a chain onto itself.
    """
    L = float(math.ceil(2 * (2 * n + 1) * b + 4))
    box = Box(d, L)
    hits = 0
    for s in seeds:
        phi = make_lattice(LatticeSpec(box, "stationarized", seed=lattice_seed(s)))
        psi = sample_poisson(box, alpha, sample_seed(s))
        start = int(np.argmin(np.sum((phi.coords - L / 2) ** 2, axis=1)))
        graph = PreferenceGraph(phi, psi)
        if descending_chains(phi, psi, (PHI, start), b, n, budget, True, graph):
            hits += 1
    return hits, len(seeds)


def wilson_interval(k: int, n: int, z: float = 2.3263478740408408):
    """Wilson score interval; the default ``z`` gives 99% one-sided bounds."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, mid - half), min(1.0, mid + half)


# ---------------------------------------------------------------- stopping sets

def stopping_set_campaign(n_instances: int = 1000, seed: int = 2, side_len: float = 20.0,
                          alphas=(1.5, 2.0), dims=(1, 2)) -> list[bool]:
    """Random free-space instances with a random window around a random anchor."""
    rng = make_rng(seed)
    out = []
    for i in range(n_instances):
        d = dims[i % len(dims)]
        alpha = alphas[(i // len(dims)) % len(alphas)]
        L = side_len if d > 1 else 10 * side_len
        box = Box(d, L, periodic=False)
        psi = sample_poisson(box, alpha, int(rng.integers(2 ** 31)))
        phi = lattice_in_window(box, Window((0.0,) * d, (L,) * d), rng.random(d))
        z = rng.uniform(0.3 * L, 0.7 * L, d)
        half = rng.uniform(1.0, 0.3 * L)
        lo = np.maximum(z - half * rng.uniform(0.5, 1.0, d), 0.0)
        hi = np.minimum(z + half * rng.uniform(0.5, 1.0, d), L)
        side = "phi" if rng.random() < 0.5 else "psi"
        out.append(verify_stopping_set(phi, psi, z, Window(tuple(lo), tuple(hi)), side))
    return out


# ---------------------------------------------------------------- DPP checks

def dpp_campaign(d: int, L: float, model: SpectralModel, seeds, radius: float):
    """Counts per seed and counts in a centred ball per seed."""
    box = Box(d, float(L))
    counts, window = [], []
    for s in seeds:
        ps = sample_dpp_spectral(box, model, sample_seed(s))
        counts.append(len(ps))
        dist = np.linalg.norm(ps.coords - L / 2, axis=1)
        window.append(int(np.sum(dist <= radius)))
    return np.array(counts), np.array(window)

