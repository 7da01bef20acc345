"""
Weighted measure spaces, nonnegative self-adjoint operators and their
functional calculus.

Everything is finite dimensional: a measure space is a finite set of atoms
with positive masses, and an operator is stored through an eigenbasis that is
orthonormal for the weighted inner product

    <u, v>_mu = sum_x mu_x conj(u_x) v_x .

Operators only need to expose :meth:`expand`, which turns a vector into a
:class:`SpectralExpansion` (eigenvalues, coefficients, synthesis map).  The
norms module is written against that single method, so the dense operator in
this file and the block-diagonal operator of :mod:`specnorm.manifolds` are
interchangeable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

MAX_DENSE_SIZE = 4096
SYMMETRY_RTOL = 1e-8
ZERO_RTOL = 1e-10
# relative size below which a spectral coefficient is treated as absent
COEFFICIENT_RTOL = 1e-12


@dataclass(frozen=True)
class WeightedMeasureSpace:
    weights: np.ndarray
    mass: float

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def inner(self, u, v) -> complex:
        return complex(np.sum(self.weights * np.conj(u) * v))


def make_space(weights) -> WeightedMeasureSpace:
    w = np.array(weights, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("empty weight vector")
    bad = np.flatnonzero(~(w > 0))
    if bad.size:
        raise ValueError(f"nonpositive weight at index {bad[0]}")
    w.setflags(write=False)
    return WeightedMeasureSpace(weights=w, mass=float(np.sum(w)))


@dataclass(frozen=True)
class BumpFunction:
    """Smooth even cutoff, equal to 1 on [-c, c] and 0 outside (-S, S).

    The transition uses the standard ``exp(-1/x)`` smoothstep, so the
    function is C-infinity and monotone on [c, S].
    """

    c: float = 0.5
    S: float = 1.0

    def __post_init__(self):
        if not (0 < self.c < self.S) or not np.isfinite(self.S):
            raise ValueError(f"bump needs 0 < c < S, got c={self.c}, S={self.S}")

    @property
    def sup_one_minus(self) -> float:
        # theta reaches 0, so sup |1 - theta| is exactly 1
        return 1.0

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        x = (self.S - t) / (self.S - self.c)
        return np.clip(_smoothstep(x), 0.0, 1.0)


def _edge(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _smoothstep(x):
    x = np.asarray(x, dtype=float)
    a = _edge(x)
    b = _edge(1.0 - x)
    return a / (a + b)


def make_bump(c: float = 0.5, S: float = 1.0) -> BumpFunction:
    return BumpFunction(float(c), float(S))


@dataclass(frozen=True)
class SpectralExpansion:
    """A vector written in an eigenbasis: ``u = synthesize(coefficients)``.

    ``synthesize`` accepts coefficient arrays of shape ``(..., M)`` and returns
    grid vectors of shape ``(..., N)``, so a whole family of multipliers can be
    applied in one call.
    """

    eigenvalues: np.ndarray
    coefficients: np.ndarray
    synthesize: Callable[[np.ndarray], np.ndarray]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues.max()) if self.eigenvalues.size else 0.0

    def present(self) -> np.ndarray:
        """Mask of eigenpairs that actually carry part of the vector."""
        mag = np.abs(self.coefficients)
        scale = mag.max() if mag.size else 0.0
        return mag > COEFFICIENT_RTOL * scale

    def kernel_mask(self) -> np.ndarray:
        return self.eigenvalues == 0.0

    def kernel_coefficients(self) -> np.ndarray:
        return self.coefficients[self.kernel_mask()]

    def has_kernel_component(self) -> bool:
        return bool(np.any(self.present() & self.kernel_mask()))

    def multiplier(self, f) -> np.ndarray:
        """Evaluate ``f`` on the eigenvalues, checking finiteness where it matters."""
        lam = self.eigenvalues
        with np.errstate(all="ignore"):
            try:
                vals = np.asarray(f(lam))
                if vals.shape != lam.shape:
                    raise TypeError
            except (TypeError, ValueError):
                vals = np.array([f(float(t)) for t in lam])
        bad = ~np.isfinite(vals)
        if np.any(bad):
            live = bad & self.present()
            if np.any(live):
                t = float(lam[np.flatnonzero(live)[0]])
                raise ValueError(f"spectral function is not finite at eigenvalue {t!r}")
            vals = np.where(bad, 0.0, vals)
        return vals

    def apply(self, f) -> np.ndarray:
        return self.synthesize(self.multiplier(f) * self.coefficients)


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Nonnegative operator stored by its mu-orthonormal eigenpairs.

    ``eigenvectors[:, j]`` is the eigenvector for ``eigenvalues[j]``.
    """

    space: WeightedMeasureSpace
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    zero_threshold: float
    kernel_dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "kernel_dim", int(np.count_nonzero(self.eigenvalues == 0.0)))

    @property
    def size(self) -> int:
        return self.space.size

    @property
    def matrix(self) -> np.ndarray:
        """Reconstructed action ``sum_j lam_j phi_j <phi_j, . >_mu``."""
        phi = self.eigenvectors
        return (phi * self.eigenvalues) @ (phi.conj().T * self.space.weights)

    def coefficients(self, u) -> np.ndarray:
        u = _as_vector(u, self.size)
        return self.eigenvectors.conj().T @ (self.space.weights * u)

    def expand(self, u) -> SpectralExpansion:
        phi = self.eigenvectors
        return SpectralExpansion(self.eigenvalues, self.coefficients(u), lambda c: c @ phi.T)

    def map_spectrum(self, g) -> "SelfAdjointOperator":
        """The operator g(A), for g mapping [0, inf) into [0, inf) with g(0) = 0."""
        lam = np.asarray(g(self.eigenvalues), dtype=float)
        order = np.argsort(lam, kind="stable")
        return SelfAdjointOperator(self.space, lam[order], self.eigenvectors[:, order],
                                   float(g(self.zero_threshold)))


def _as_vector(u, n: int) -> np.ndarray:
    u = np.asarray(u)
    if u.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {u.shape}")
    return u


def zero_threshold(lambda_max: float) -> float:
    return ZERO_RTOL * max(lambda_max, 1.0)


def clamp_spectrum(lam: np.ndarray) -> tuple[np.ndarray, float]:
    """Reject clearly negative spectra and snap roundoff-sized values to 0."""
    lam = np.asarray(lam, dtype=float)
    top = float(lam.max()) if lam.size else 0.0
    tau = zero_threshold(top)
    if lam.size and lam.min() < -ZERO_RTOL * max(abs(top), 1.0):
        raise ValueError(f"operator is not nonnegative: smallest eigenvalue {lam.min()!r}")
    lam = np.where(np.abs(lam) < tau, 0.0, lam)
    return lam, tau


def eigendecompose(matrix, space: WeightedMeasureSpace) -> SelfAdjointOperator:
    """Diagonalize a matrix that is self-adjoint for the weighted inner product.

    With D = diag(mu), self-adjointness means D^{1/2} A D^{-1/2} is Hermitian,
    so a standard Hermitian solver applies; eigenvectors are mapped back by
    D^{-1/2} which makes them mu-orthonormal.
    """
    a = np.asarray(matrix)
    n = space.size
    if a.shape != (n, n):
        raise ValueError(f"matrix shape {a.shape} does not match space of size {n}")
    if n > MAX_DENSE_SIZE:
        raise ValueError(
            f"dense eigendecomposition limited to N <= {MAX_DENSE_SIZE} (got {n}); "
            "use the angular-mode block path in specnorm.manifolds for large grids")
    root = np.sqrt(space.weights)
    b = root[:, None] * a / root[None, :]
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    asym = np.linalg.norm(b - b.conj().T) / scale
    if asym > SYMMETRY_RTOL:
        raise ValueError(f"matrix is not self-adjoint in the weighted inner product "
                         f"(relative asymmetry {asym:.3e})")
    b = 0.5 * (b + b.conj().T)
    try:
        lam, q = scipy.linalg.eigh(b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    lam, tau = clamp_spectrum(lam)
    phi = q.astype(complex) / root[:, None]
    return SelfAdjointOperator(space, lam, phi, tau)


def from_eigenpairs(space: WeightedMeasureSpace, eigenvalues, eigenvectors) -> SelfAdjointOperator:
    """Build an operator from mu-orthonormal eigenvectors (columns) and eigenvalues."""
    lam, tau = clamp_spectrum(eigenvalues)
    order = np.argsort(lam, kind="stable")
    phi = np.asarray(eigenvectors, dtype=complex)[:, order]
    return SelfAdjointOperator(space, lam[order], phi, tau)


def apply_spectral_function(A, f, u) -> np.ndarray:
    """Return f(A) u = sum_j f(lam_j) <phi_j, u>_mu phi_j."""
    return A.expand(u).apply(f)


def spectral_localize(A, theta: BumpFunction, k: int, u) -> np.ndarray:
    """theta(2^{-k} A) u."""
    return apply_spectral_function(A, lambda t: theta(np.ldexp(t, -int(k))), u)
