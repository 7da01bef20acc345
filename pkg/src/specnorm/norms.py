"""L^p, Sobolev and Besov-type norms on a weighted finite measure space."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import BumpFunction, SpectralExpansion, WeightedMeasureSpace


@dataclass(frozen=True)
class ExtendedNorm:
    """A norm value that may be +inf (homogeneous Besov norm of kernel data)."""

    value: float
    finite: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "finite", math.isfinite(self.value))

    def __float__(self) -> float:
        return self.value


def lp_norm(space: WeightedMeasureSpace, u, p: float) -> float:
    """(sum mu_i |u_i|^p)^(1/p); the plain max for p = inf (atoms all have mass)."""
    p = float(p)
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(np.asarray(u))
    top = float(a.max()) if a.size else 0.0
    if math.isinf(p) or top == 0.0:
        return top
    return top * float(np.sum(space.weights * (a / top) ** p)) ** (1.0 / p)


def distribution_function(space: WeightedMeasureSpace, u, lam: float) -> float:
    """mu({|u| > lam}), with strict inequality."""
    if lam < 0:
        raise ValueError("distribution function needs lam >= 0")
    a = np.abs(np.asarray(u))
    return float(np.sum(space.weights[a > lam]))


def layer_cake_lp(space: WeightedMeasureSpace, u, p: float) -> float:
    """L^p norm from the layer-cake integral p * int lam^(p-1) mu(|u| > lam) dlam.

    The distribution function is a step function, so the integral is evaluated
    exactly interval by interval between consecutive distinct values of |u|.
    """
    p = float(p)
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"layer-cake formula needs finite p >= 1, got {p}")
    a = np.abs(np.asarray(u))
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    b = a / top
    pos = b > 0
    levels, inverse = np.unique(b[pos], return_inverse=True)
    level_mass = np.bincount(inverse, weights=space.weights[pos], minlength=levels.size)
    # mass of {|u| > previous level} == mass of {|u| >= this level}
    above = np.cumsum(level_mass[::-1])[::-1]
    lower = np.concatenate(([0.0], levels[:-1]))
    integral = math.fsum((levels ** p - lower ** p) * above)
    return top * integral ** (1.0 / p)


def _l2(space, v) -> float:
    return lp_norm(space, v, 2.0)


def sobolev_homogeneous(A, u, s: float) -> float:
    """||A^s u||_{L^2}."""
    if not s > 0:
        raise ValueError(f"homogeneous Sobolev norm needs s > 0, got {s}")
    return _l2(A.space, A.expand(u).apply(lambda t: t ** s))


def sobolev_inhomogeneous(A, u, s: float) -> float:
    """||(1 + A^2)^{s/2} u||_{L^2}; any real s."""
    return _l2(A.space, A.expand(u).apply(lambda t: (1.0 + t * t) ** (0.5 * s)))


def dyadic_window(lam_max: float, lam_min_pos: float, theta: BumpFunction) -> tuple[int, int]:
    """Smallest k_hi with lam_max <= c 2^k_hi, largest k_lo with lam_min_pos >= S 2^(k_lo - 1).

    Outside [k_lo, k_hi] the localized vectors are known in closed form: the
    plateau covers the spectrum above, and only the kernel part survives below.
    """
    k_hi = math.ceil(math.log2(lam_max / theta.c))
    while lam_max > math.ldexp(theta.c, k_hi):
        k_hi += 1
    while lam_max <= math.ldexp(theta.c, k_hi - 1):
        k_hi -= 1
    k_lo = math.floor(math.log2(lam_min_pos / theta.S))
    while lam_min_pos < math.ldexp(theta.S, k_lo - 1):
        k_lo -= 1
    while lam_min_pos >= math.ldexp(theta.S, k_lo):
        k_lo += 1
    return k_lo, k_hi


def _localized_sup_norms(expansion: SpectralExpansion, theta: BumpFunction, ks) -> np.ndarray:
    """||theta(2^{-k} A) u||_inf for every k in ks, in one batched synthesis."""
    ks = np.asarray(ks, dtype=int)
    mult = theta(np.ldexp(expansion.eigenvalues[None, :], -ks[:, None]))
    vecs = expansion.synthesize(mult * expansion.coefficients[None, :])
    return np.abs(vecs).max(axis=1)


def _checked_sigma(sigma: float) -> float:
    if not sigma >= 0:
        raise ValueError(f"Besov index sigma must be >= 0, got {sigma}")
    return float(sigma)


def besov_homogeneous(A, theta: BumpFunction, u, sigma: float) -> ExtendedNorm:
    """sup over all integers k of 2^{-k sigma} ||theta(2^{-k} A) u||_inf.

    For sigma > 0 a nonzero kernel component makes the low-frequency terms blow
    up, and the value is +inf.  Otherwise the supremum is attained inside a
    finite dyadic window and is computed exactly.
    """
    sigma = _checked_sigma(sigma)
    u = np.asarray(u)
    ex = A.expand(u)
    present = ex.present()
    if not np.any(present):
        return ExtendedNorm(0.0)
    kernel = ex.kernel_mask()
    has_kernel = bool(np.any(present & kernel))
    if sigma > 0 and has_kernel:
        return ExtendedNorm(math.inf)
    sup_u = float(np.abs(u).max())
    positive = ex.eigenvalues[ex.eigenvalues > 0]
    if positive.size == 0:
        # pure kernel vector with sigma = 0: every term equals ||u||_inf
        return ExtendedNorm(sup_u)
    k_lo, k_hi = dyadic_window(float(positive.max()), float(positive.min()), theta)
    ks = np.arange(k_lo, k_hi + 1)
    terms = _localized_sup_norms(ex, theta, ks) * 2.0 ** (-ks * sigma)
    value = float(terms.max())
    if has_kernel:
        # sigma == 0 here; below the window only the kernel part survives
        tail = np.where(kernel, ex.coefficients, 0.0)
        value = max(value, float(np.abs(ex.synthesize(tail)).max()))
    return ExtendedNorm(value)


def besov_modified_parts(A, theta: BumpFunction, u, sigma: float) -> tuple[float, float]:
    """The two competitors in the modified Besov norm: (dyadic sup over k >= 0, H^{-sigma} norm)."""
    sigma = _checked_sigma(sigma)
    u = np.asarray(u)
    ex = A.expand(u)
    if not np.any(ex.present()):
        return 0.0, 0.0
    lam_max = ex.lambda_max
    k_hi = 0 if lam_max <= theta.c else dyadic_window(lam_max, lam_max, theta)[1]
    ks = np.arange(0, k_hi + 1)
    dyadic = float((_localized_sup_norms(ex, theta, ks) * 2.0 ** (-ks * sigma)).max())
    low = _l2(A.space, ex.apply(lambda t: (1.0 + t * t) ** (-0.5 * sigma)))
    return dyadic, low


def besov_modified(A, theta: BumpFunction, u, sigma: float) -> float:
    """max(sup_{k >= 0} 2^{-k sigma} ||theta(2^{-k} A) u||_inf, ||u||_{H^{-sigma}}).

    Always finite: the low frequencies are measured by the H^{-sigma} norm
    instead of the dyadic terms with k < 0.
    """
    return max(besov_modified_parts(A, theta, u, sigma))
