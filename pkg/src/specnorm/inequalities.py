"""
Besov-Sobolev interpolation inequalities: the explicit-constant abstract version, seeded
random instances for checking it, and spectral-localization stability of the
modified Besov norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .norms import (ExtendedNorm, besov_homogeneous, besov_modified, lp_norm,
                    sobolev_homogeneous)
from .spectral import (BumpFunction, WeightedMeasureSpace, apply_spectral_function,
                       from_eigenpairs, make_space)

HOLDS_RTOL = 1e-9


def sobolev_exponent(n: int, p: float) -> float:
    """n/2 - n/p, the Sobolev index matching L^p in dimension n."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not p >= 2:
        raise ValueError(f"Sobolev exponent needs p >= 2, got {p}")
    return n / 2 - (0.0 if math.isinf(p) else n / p)


def refined_exponent(s: float, sigma: float) -> float:
    """p = 2 (sigma + s) / sigma."""
    if not (s > 0 and sigma > 0):
        raise ValueError(f"need s > 0 and sigma > 0, got s={s}, sigma={sigma}")
    return 2.0 * (sigma + s) / sigma


def refined_constant(p: float, sigma: float, theta: BumpFunction) -> float:
    """2 sup|1-theta|^{2/p} (p/(p-2))^{1/p} (2/c)^{sigma (p-2)/p}."""
    if not p > 2:
        raise ValueError(f"constant needs p > 2, got {p}")
    return (2.0 * theta.sup_one_minus ** (2.0 / p) * (p / (p - 2.0)) ** (1.0 / p)
            * (2.0 / theta.c) ** (sigma * (p - 2.0) / p))


@dataclass(frozen=True)
class RefinedReport:
    """Both sides of the Besov-Sobolev interpolation inequality for one vector.

    ``constant`` and ``holds`` are None for the manifold version, whose
    constant is not explicit; ``empirical_ratio`` is then the quantity to track.
    """

    p: float
    s: float
    sigma: float
    lhs: float
    besov: ExtendedNorm
    sobolev: float
    constant: float | None
    rhs: float
    margin: float
    holds: bool | None
    vacuous: bool = False

    @property
    def empirical_ratio(self) -> float:
        """lhs / (besov^{1-2/p} sobolev^{2/p}), i.e. the smallest constant that works."""
        product = self.rhs / self.constant if self.constant else self.rhs
        if product == 0.0:
            return 0.0
        return self.lhs / product


def interpolation_product(besov: float, sobolev: float, p: float) -> float:
    return besov ** (1.0 - 2.0 / p) * sobolev ** (2.0 / p)


def verify_refined_abstract(A, theta: BumpFunction, u, s: float, sigma: float) -> RefinedReport:
    p = refined_exponent(s, sigma)
    lhs = lp_norm(A.space, u, p)
    besov = besov_homogeneous(A, theta, u, sigma)
    sob = sobolev_homogeneous(A, u, s)
    constant = refined_constant(p, sigma, theta)
    if besov.finite:
        rhs = constant * interpolation_product(besov.value, sob, p)
    else:
        rhs = math.inf
    margin = rhs / lhs if lhs > 0 else math.inf
    holds = math.isinf(rhs) or lhs <= rhs * (1.0 + HOLDS_RTOL)
    return RefinedReport(p, s, sigma, lhs, besov, sob, constant, rhs, margin, holds,
                         vacuous=not besov.finite)


def random_instance(seed, N: int, spectral_radius: float = 10.0, weight_spread: float = 10.0,
                    zero_probability: float = 0.0):
    """Seeded random (space, operator, vector) triple.

    Weights and eigenvalues are log-uniform, the eigenbasis is a Haar-random
    unitary in the D^{1/2}-conjugated frame, and the vector has independent
    complex Gaussian spectral coefficients.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    spread = math.log(weight_spread)
    weights = np.exp(rng.uniform(-spread, spread, size=N))
    space = make_space(weights)
    lam = np.exp(rng.uniform(math.log(1e-3), math.log(spectral_radius), size=N))
    if rng.random() < zero_probability:
        lam[rng.integers(N)] = 0.0
    q = scipy.stats.unitary_group.rvs(N, random_state=rng) if N > 1 else np.ones((1, 1), complex)
    phi = q / np.sqrt(weights)[:, None]
    A = from_eigenpairs(space, lam, phi)
    coeffs = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    u = A.eigenvectors @ coeffs
    return space, A, u


@dataclass(frozen=True)
class EnsembleRanges:
    N: tuple[int, int] = (2, 64)
    s: tuple[float, float] = (0.25, 4.0)
    sigma: tuple[float, float] = (0.25, 4.0)
    spectral_radius: tuple[float, float] = (1e-2, 1e3)
    weight_spread: tuple[float, float] = (1.0, 1e3)
    zero_probability: float = 0.1


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


@dataclass(frozen=True)
class InstanceResult:
    index: int
    N: int
    report: RefinedReport
    kernel_component: bool


def ensemble_instance(master_seed: int, index: int, ranges: EnsembleRanges,
                      theta: BumpFunction) -> InstanceResult:
    """Draw and check instance ``index``; depends only on (master_seed, index)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    rng = np.random.default_rng(seq)
    N = int(rng.integers(ranges.N[0], ranges.N[1] + 1))
    s = _log_uniform(rng, *ranges.s)
    sigma = _log_uniform(rng, *ranges.sigma)
    radius = _log_uniform(rng, *ranges.spectral_radius)
    spread = _log_uniform(rng, *ranges.weight_spread)
    _, A, u = random_instance(rng, N, radius, spread, ranges.zero_probability)
    report = verify_refined_abstract(A, theta, u, s, sigma)
    return InstanceResult(index, N, report, A.expand(u).has_kernel_component())


@dataclass(frozen=True)
class StabilityReport:
    j_values: list[int]
    ratios_modified: list[float]
    ratios_localized: list[float]

    @property
    def sup_ratio_modified(self) -> float:
        return max(self.ratios_modified)

    @property
    def sup_ratio_localized(self) -> float:
        return max(self.ratios_localized)


def semiclassical_cutoff(chi_source: BumpFunction, j: int):
    """t -> chi(2^{-2j} t^2) with chi(lam) = chi_source(|lam|^{1/2}); a function of A."""
    return lambda t: chi_source(np.sqrt(np.abs(np.ldexp(t * t, -2 * j))))


def verify_localization_stability(A, theta: BumpFunction, chi_source: BumpFunction, u,
                                  sigma: float, j_range) -> StabilityReport:
    base = besov_modified(A, theta, u, sigma)
    if base == 0.0:
        raise ValueError("stability ratios need a vector with nonzero modified Besov norm")
    js = [int(j) for j in j_range]
    mod, loc = [], []
    for j in js:
        v = apply_spectral_function(A, semiclassical_cutoff(chi_source, j), u)
        mod.append(besov_modified(A, theta, v, sigma) / base)
        loc.append(float(np.abs(v).max()) / (2.0 ** (j * sigma) * base))
    return StabilityReport(js, mod, loc)


def random_test_vectors(space: WeightedMeasureSpace, count: int, seed) -> np.ndarray:
    """Vectors with i.i.d. complex Gaussian coefficients in any mu-orthonormal basis.

    Dividing white noise by sqrt(mu) makes the coefficient map unitary, so
    no eigenvectors are needed to draw them.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, space.size)) + 1j * rng.standard_normal((count, space.size))
    return z / np.sqrt(space.weights)


def theta_swap_spread(A, theta: BumpFunction, theta1: BumpFunction, vectors, sigma: float):
    """Range of besov_modified(theta) / besov_modified(theta1) over the vectors.

    Returns (smallest ratio, largest ratio, K) with K the smallest number such
    that every ratio lies in [1/K, K].
    """
    ratios = np.array([besov_modified(A, theta, v, sigma) / besov_modified(A, theta1, v, sigma)
                       for v in vectors])
    lo, hi = float(ratios.min()), float(ratios.max())
    return lo, hi, max(hi, 1.0 / lo)
