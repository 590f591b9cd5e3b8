"""Seeded lattices, Poisson samples and spectral determinantal samples on the torus."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box, PointSet

SHIFT_MODES = ("deterministic", "fixed", "stationarized")


def make_rng(seed: int) -> np.random.Generator:
    """Mersenne Twister generator, bit-reproducible for a given seed."""
    return np.random.Generator(np.random.MT19937(int(seed)))


@dataclass(frozen=True)
class LatticeSpec:
    box: Box
    shift_mode: str = "stationarized"
    shift: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.shift_mode not in SHIFT_MODES:
            raise ValueError(f"shift_mode must be one of {SHIFT_MODES}")
        if float(self.box.side) != int(self.box.side):
            raise ValueError(f"lattice needs an integer side length, got {self.box.side}")
        if self.shift_mode == "fixed":
            if self.shift is None or len(self.shift) != self.box.dim:
                raise ValueError("fixed shift mode needs a shift vector of length dim")
            if any(not 0.0 <= u < 1.0 for u in self.shift):
                raise ValueError("shift components must lie in [0, 1)")


def lattice_shift(spec: LatticeSpec) -> np.ndarray:
    if spec.shift_mode == "deterministic":
        return np.zeros(spec.box.dim)
    if spec.shift_mode == "fixed":
        return np.asarray(spec.shift, dtype=float)
    return make_rng(spec.seed).random(spec.box.dim)


def make_lattice(spec: LatticeSpec) -> PointSet:
    """Integer lattice points of the box shifted by U (row-major order)."""
    box = spec.box
    n = int(box.side)
    axes = [np.arange(n, dtype=float)] * box.dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    coords = box.wrap(grid + lattice_shift(spec))
    return PointSet(box, coords, label="lattice", seed=spec.seed)


def sample_poisson(box: Box, alpha: float, seed: int) -> PointSet:
    """Homogeneous Poisson sample: Poisson(alpha L^d) many i.i.d. uniform points."""
    if not alpha > 0:
        raise ValueError(f"intensity must be positive, got {alpha}")
    rng = make_rng(seed)
    n = rng.poisson(alpha * box.volume)
    coords = rng.random((n, box.dim)) * box.side
    return PointSet(box, box.wrap(coords), label="sample", seed=seed)


@dataclass(frozen=True)
class SpectralModel:
    """Power-exponential spectral density on the torus.

    With frequencies ``f`` (cycles per unit length) the density is

        phi(f) = alpha * a^d * Gamma(d/2 + 1) / (pi^(d/2) * Gamma(d/nu + 1)) * exp(-|a f|^nu)

    which integrates to ``alpha``. The scale ``a`` is ``scale_fraction`` times
    the largest value with ``phi(0) <= 1``. Torus eigenvalues are
    ``phi(m / L)`` for integer vectors ``m`` with ``|m_i| <= truncation``.
    """

    intensity: float
    shape: float = 10.0
    scale_fraction: float = 1 - 1e-4
    truncation: int | None = None
    family: str = "power_exponential"

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        if not self.shape > 0:
            raise ValueError("shape must be positive")
        if not 0 < self.scale_fraction <= 1:
            raise ValueError("scale_fraction must lie in (0, 1]")
        if self.family != "power_exponential":
            raise ValueError(f"unsupported spectral family {self.family!r}")

    def _norm(self, d: int) -> float:
        return math.gamma(d / 2 + 1) / (math.pi ** (d / 2) * math.gamma(d / self.shape + 1))

    def max_scale(self, d: int) -> float:
        return (1.0 / (self.intensity * self._norm(d))) ** (1.0 / d)

    def scale(self, d: int) -> float:
        return self.scale_fraction * self.max_scale(d)

    def density(self, freq: np.ndarray, d: int) -> np.ndarray:
        a = self.scale(d)
        r = np.linalg.norm(np.atleast_2d(freq), axis=-1)
        return self.intensity * a ** d * self._norm(d) * np.exp(-(a * r) ** self.shape)

    def default_truncation(self, box: Box, tol: float = 1e-3, max_modes: int = 4096) -> int:
        """Smallest mode cut-off whose discarded spectral mass is below ``tol``
        of the eigenvalue sum.

        The density decreases radially, so once two further shells of modes add
        less than ``tol`` the remaining tail is negligible. The lattice sum
        itself can differ from ``alpha L^d`` by a discretisation error on small
        boxes, which is why the reference is the sum and not the integral.
        """
        m = max(1, int(math.ceil(box.side / self.scale(box.dim))))
        while m <= max_modes:
            _, lam = self._modes(box, m)
            _, lam_next = self._modes(box, m + 2)
            if lam_next.sum() - lam.sum() < tol * lam_next.sum():
                return m
            m += 1
        raise ValueError(f"spectral mass does not converge within {max_modes} modes per axis")

    def _modes(self, box: Box, m: int):
        axes = [np.arange(-m, m + 1)] * box.dim
        modes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
        return modes, self.density(modes / box.side, box.dim)

    def eigenvalues(self, box: Box):
        """Integer modes and their eigenvalues; raises if any exceeds one."""
        m = self.truncation if self.truncation is not None else self.default_truncation(box)
        modes, lam = self._modes(box, m)
        if lam.max() > 1 + 1e-12:
            raise ValueError(
                f"spectral density exceeds 1 (max eigenvalue {lam.max():.6g}); "
                f"reduce scale_fraction or intensity")
        return modes, np.minimum(lam, 1.0)


def sample_dpp_spectral(box: Box, model: SpectralModel, seed: int) -> PointSet:
    """Determinantal sample via the spectral (HKPV) algorithm.

    Modes are kept independently with probability equal to their eigenvalue;
    the resulting projection process is sampled point by point, each new point
    drawn by rejection from the uniform proposal with acceptance
    ``|v(x)|^2 / |e(x)|^2`` where ``v(x)`` is the part of the feature vector
    ``e(x)`` orthogonal to the features of the points drawn so far.
    """
    if not box.periodic:
        raise ValueError("spectral sampling needs a periodic box")
    rng = make_rng(seed)
    modes, lam = model.eigenvalues(box)
    keep = rng.random(len(lam)) < lam
    freqs = modes[keep].astype(float) / box.side
    coords = _sample_projection(freqs, box, rng)
    return PointSet(box, box.wrap(coords), label="sample", seed=seed)


def _features(x: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    # unit-norm Fourier features: |e(x)|^2 == 1 for every x
    return np.exp(2j * np.pi * x @ freqs.T) / math.sqrt(len(freqs))


def _sample_projection(freqs: np.ndarray, box: Box, rng: np.random.Generator) -> np.ndarray:
    n = len(freqs)
    out = np.empty((n, box.dim))
    basis = np.zeros((n, n), dtype=complex)  # orthonormal rows spanning drawn features
    for i in range(n):
        accept_rate = (n - i) / n
        batch = max(8, int(4 / accept_rate))
        while True:
            prop = rng.random((batch, box.dim)) * box.side
            u = rng.random(batch)
            e = _features(prop, freqs)
            if i:
                e = e - (e @ basis[:i].conj().T) @ basis[:i]
            w = np.sum(np.abs(e) ** 2, axis=1)
            hit = np.flatnonzero(u < w)
            if len(hit):
                j = hit[0]
                out[i] = prop[j]
                basis[i] = e[j] / math.sqrt(w[j])
                break
    return out


def expected_dpp_count(box: Box, model: SpectralModel) -> float:
    _, lam = model.eigenvalues(box)
    return float(lam.sum())


def expected_dpp_count_variance(box: Box, model: SpectralModel) -> float:
    _, lam = model.eigenvalues(box)
    return float(np.sum(lam * (1 - lam)))
