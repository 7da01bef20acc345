import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specnorm.inequalities import random_instance, random_test_vectors, theta_swap_spread
from specnorm.norms import (besov_homogeneous, besov_modified, besov_modified_parts,
                            distribution_function, dyadic_window, layer_cake_lp, lp_norm,
                            sobolev_homogeneous, sobolev_inhomogeneous)
from specnorm.spectral import eigendecompose, make_bump, make_space, spectral_localize

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def brute_force_besov(A, theta, u, sigma, ks):
    """Plain loop over a wide k range, one localization at a time."""
    return max(2.0 ** (-k * sigma) * np.abs(spectral_localize(A, theta, k, u)).max() for k in ks)


# ------------------------------------------------------------------- L^p

def test_lp_examples():
    assert lp_norm(make_space([1, 1]), [1, 1], 4) == pytest.approx(2 ** 0.25, rel=1e-15)
    assert lp_norm(make_space([2]), [3], 2) == pytest.approx(3 * math.sqrt(2), rel=1e-15)
    assert lp_norm(make_space([5, 0.1]), [1, -2], math.inf) == 2


def test_lp_rejects_small_p():
    with pytest.raises(ValueError):
        lp_norm(make_space([1]), [1], 0.5)


def test_distribution_function_examples():
    space = make_space([1, 3])
    assert distribution_function(space, [1, 2], 1.5) == 3
    assert distribution_function(space, [1, 2], 2.0) == 0
    assert distribution_function(space, [1, 2], 7.0) == 0
    assert distribution_function(space, [1, 2], 0.0) == space.mass
    with pytest.raises(ValueError):
        distribution_function(space, [1, 2], -1.0)


def test_layer_cake_examples():
    assert layer_cake_lp(make_space([3.0]), [2.0], 3) == pytest.approx(2 * 3 ** (1 / 3), rel=1e-14)
    # piecewise: p * (int_0^1 2 lam dlam + int_1^2 lam dlam) = 2*1 + (4 - 1) = 5
    assert layer_cake_lp(make_space([1, 1]), [1, 2], 2) == pytest.approx(math.sqrt(5), rel=1e-15)
    assert lp_norm(make_space([1, 1]), [1, 2], 2) == pytest.approx(math.sqrt(5), rel=1e-15)
    assert layer_cake_lp(make_space([1, 1]), [0, 0], 2) == 0


def test_layer_cake_ties_and_zeros():
    space = make_space([0.5, 2.0, 1.0, 3.0])
    u = [0.0, 1.5, -1.5, 1.5j]
    for p in (1, 2.5, 7):
        assert layer_cake_lp(space, u, p) == pytest.approx(lp_norm(space, u, p), rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 50), st.sampled_from([1, 1.5, 2, 4, 10]))
def test_layer_cake_equals_lp(seed, n, p):
    rng = np.random.default_rng(seed)
    space = make_space(np.exp(rng.uniform(-5, 5, n)))
    u = rng.standard_normal(n) * np.exp(rng.uniform(-3, 3, n)) + 1j * rng.standard_normal(n)
    assert layer_cake_lp(space, u, p) == pytest.approx(lp_norm(space, u, p), rel=1e-12)


# --------------------------------------------------------------- Sobolev

def test_homogeneous_sobolev_on_eigenvectors():
    _, A, _ = random_instance(11, 8, 30.0, 20.0)
    for j in range(8):
        phi = A.eigenvectors[:, j]
        assert sobolev_homogeneous(A, phi, 0.7) == pytest.approx(A.eigenvalues[j] ** 0.7, rel=1e-10)


def test_homogeneous_sobolev_examples():
    A = eigendecompose(np.diag([0.0, 3.0]), make_space([1, 1]))
    assert sobolev_homogeneous(A, [1.0, 0.0], 2.0) == 0
    B = eigendecompose(np.diag([1.0, 4.0]), make_space([1, 1]))
    # (1, 4)^(1/2) * (1, 1) = (1, 2)
    assert sobolev_homogeneous(B, [1, 1], 0.5) == pytest.approx(math.sqrt(5), rel=1e-14)
    with pytest.raises(ValueError):
        sobolev_homogeneous(B, [1, 1], 0.0)


def test_inhomogeneous_sobolev_examples():
    space, A, u = random_instance(12, 10)
    assert sobolev_inhomogeneous(A, u, 0.0) == pytest.approx(lp_norm(space, u, 2), rel=1e-12)
    B = eigendecompose(np.diag([0.0, 1.0]), make_space([1, 1]))
    for sigma in (0.5, 1.0, 3.0):
        assert sobolev_inhomogeneous(B, [0, 1], -sigma) == pytest.approx(2 ** (-sigma / 2), rel=1e-14)
    assert sobolev_inhomogeneous(B, [2, 0], 5.0) == pytest.approx(2.0, rel=1e-14)


# ---------------------------------------------------------------- Besov

def test_besov_kernel_is_infinite():
    A = eigendecompose(np.diag([0.0, 1.0, 5.0]), make_space([1, 2, 1]))
    assert not besov_homogeneous(A, make_bump(), [1, 0, 0], 0.5).finite
    assert besov_homogeneous(A, make_bump(), [1, 0, 0], 0.5).value == math.inf
    assert besov_homogeneous(A, make_bump(), [1, 0, 0], 0.0).value == 1.0
    assert besov_homogeneous(A, make_bump(), [0, 0, 0], 2.0).value == 0.0


def test_besov_single_atom_example():
    A = eigendecompose(np.array([[1.0]]), make_space([1.0]))
    th = make_bump(1.0, 2.0)
    ks = range(-40, 41)
    oracle = brute_force_besov(A, th, np.array([1.0]), 1.0, ks)
    assert oracle == 1.0
    assert besov_homogeneous(A, th, [1.0], 1.0).value == 1.0


def test_besov_sigma_zero_nonnegative_vector():
    # kernel-free vector with spectrum inside the plateau at the top of the window
    A = eigendecompose(np.diag([0.2, 0.3]), make_space([1, 1]))
    th = make_bump()
    assert besov_homogeneous(A, th, [0.5, 2.0], 0.0).value == pytest.approx(2.0, rel=1e-15)
    assert brute_force_besov(A, th, np.array([0.5, 2.0]), 0.0, range(-40, 41)) == \
        pytest.approx(2.0, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 16), st.floats(0.0, 3.0), st.floats(0.1, 2.0), st.floats(1.1, 4.0))
def test_besov_window_matches_brute_force(seed, n, sigma, c, ratio):
    _, A, u = random_instance(seed, n, 1e3, 100.0)
    th = make_bump(c, c * ratio)
    fast = besov_homogeneous(A, th, u, sigma).value
    slow = brute_force_besov(A, th, u, sigma, range(-60, 61))
    assert fast == pytest.approx(slow, rel=1e-12)


def test_dyadic_window_bounds():
    th = make_bump(0.5, 1.0)
    for lam_max, lam_min in [(1.0, 1.0), (3.7, 1e-3), (0.5, 0.5), (1e3, 1e-2), (2.0 ** 10, 2.0 ** -9)]:
        k_lo, k_hi = dyadic_window(lam_max, lam_min, th)
        assert lam_max <= math.ldexp(th.c, k_hi) and lam_max > math.ldexp(th.c, k_hi - 1)
        assert lam_min >= math.ldexp(th.S, k_lo - 1) and lam_min < math.ldexp(th.S, k_lo)


def test_besov_rejects_negative_sigma():
    A = eigendecompose(np.diag([1.0]), make_space([1]))
    with pytest.raises(ValueError):
        besov_homogeneous(A, make_bump(), [1.0], -0.1)
    with pytest.raises(ValueError):
        besov_modified(A, make_bump(), [1.0], -0.1)


def test_modified_besov_eigenvector_example():
    # unit-L^2 eigenvector for lambda = 1 with sup norm m
    A = eigendecompose(0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]]), make_space([1.0, 1.0]))
    j = int(np.argmin(np.abs(A.eigenvalues - 1.0)))
    assert A.eigenvalues[j] == pytest.approx(1.0)
    phi = A.eigenvectors[:, j]
    m = np.abs(phi).max()
    th = make_bump(1.0, 2.0)
    assert besov_modified(A, th, phi, 1.0) == pytest.approx(max(m, 2 ** -0.5), rel=1e-12)


def test_modified_besov_on_kernel_and_zero():
    A = eigendecompose(np.diag([0.0, 2.0]), make_space([1.0, 3.0]))
    # kernel vector: dyadic part is its sup norm, low part its L^2 norm
    u = np.array([0.5, 0.0])
    assert besov_modified_parts(A, make_bump(), u, 1.5) == pytest.approx((0.5, 0.5))
    assert besov_modified(A, make_bump(), 3 * u, 0.7) == pytest.approx(1.5)
    w = np.array([0.0, 0.0])
    assert besov_modified(A, make_bump(), w, 1.0) == 0.0
    assert besov_modified_parts(A, make_bump(), w, 1.0) == (0.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 20))
def test_modified_besov_nonincreasing_in_sigma(seed, n):
    _, A, u = random_instance(seed, n, 100.0, 50.0)
    th = make_bump()
    values = [besov_modified(A, th, u, s) for s in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(values, values[1:]))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 20), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
def test_homogeneity(seed, n, alpha):
    space, A, u = random_instance(seed, n, 50.0, 10.0)
    th = make_bump()
    norms = [
        lambda v: lp_norm(space, v, 3.0),
        lambda v: layer_cake_lp(space, v, 3.0),
        lambda v: sobolev_homogeneous(A, v, 0.8),
        lambda v: sobolev_inhomogeneous(A, v, -1.3),
        lambda v: besov_homogeneous(A, th, v, 0.5).value,
        lambda v: besov_modified(A, th, v, 0.5),
    ]
    for norm in norms:
        assert norm(alpha * u) == pytest.approx(abs(alpha) * norm(u), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 20))
def test_triangle_inequality(seed, n):
    space, A, u = random_instance(seed, n, 50.0, 10.0)
    v = random_test_vectors(space, 1, seed)[0]
    th = make_bump()
    norms = [
        lambda x: lp_norm(space, x, 1.5),
        lambda x: lp_norm(space, x, math.inf),
        lambda x: sobolev_homogeneous(A, x, 1.0),
        lambda x: sobolev_inhomogeneous(A, x, 0.5),
        lambda x: besov_homogeneous(A, th, x, 1.0).value,
        lambda x: besov_modified(A, th, x, 1.0),
    ]
    for norm in norms:
        assert norm(u + v) <= norm(u) + norm(v) + 1e-10


def test_theta_swap_equivalence_against_calibration():
    """Swapping the cutoff changes the modified norm by a bounded factor."""
    th, th1 = make_bump(0.5, 1.0), make_bump(1.0, 2.0)
    for seed in range(5):
        space, A, _ = random_instance(seed, 32, 1e3, 1e3)
        _, _, K_cal = theta_swap_spread(A, th, th1, random_test_vectors(space, 20, 1000 + seed), 1.0)
        _, _, K = theta_swap_spread(A, th, th1, random_test_vectors(space, 200, seed), 1.0)
        assert 1.0 <= K <= 2.0 * K_cal
