import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment
from scipy.stats import wasserstein_distance

from shiftrecover.metrics import (
    DegenerateCorrelationError,
    Estimator,
    histogram_divergence,
    linear_assignment,
    make_projection,
    pearson,
    sliced_divergence,
    ssim,
    ssim_per_image,
    wasserstein_1d,
    wasserstein_exact,
    wasserstein_sliced,
)


# projections

def test_full_rank_orthonormal():
    v = make_projection(8, 8, "orthonormal", 0).matrix
    assert np.linalg.norm(v @ v.T - np.eye(8)) < 1e-6


@pytest.mark.parametrize("n,m", [(100, 10), (784, 64), (16, 2)])
def test_orthonormal_rows(n, m):
    v = make_projection(n, m, "orthonormal", 3).matrix
    assert v.shape == (m, n)
    assert np.linalg.norm(v @ v.T - np.eye(m)) < 1e-6


def test_projection_deterministic():
    a = make_projection(100, 10, "orthonormal", 3).matrix
    np.testing.assert_array_equal(a, make_projection(100, 10, "orthonormal", 3).matrix)


def test_orthonormal_is_non_expansive(rng):
    p = make_projection(50, 7, "orthonormal", 1)
    x = rng.standard_normal((200, 50))
    assert np.all(np.linalg.norm(p(x), axis=1) <= np.linalg.norm(x, axis=1) + 1e-12)


def test_random_families_entries():
    g = make_projection(400, 40, "gaussian", 2).matrix
    assert abs(g.var() - 1 / 40) < 0.1 / 40
    s = make_projection(400, 40, "sparse", 2).matrix
    vals = np.unique(np.round(s * np.sqrt(40 / 3), 12))
    assert set(vals.tolist()) <= {-1.0, 0.0, 1.0}
    assert abs((s != 0).mean() - 1 / 3) < 0.02


def test_projection_errors():
    with pytest.raises(ValueError):
        make_projection(4, 5)
    with pytest.raises(ValueError):
        make_projection(4, 2, "hadamard")


# exact transport

def test_exact_examples():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 1.0], [1.0, 1.0]])
    assert wasserstein_exact(a, b, 2) == pytest.approx(1.0)
    assert wasserstein_exact([[0.0]], [[3.0]], 1) == 3.0
    assert wasserstein_exact(a, a, 1) == 0.0


def test_exact_errors():
    with pytest.raises(ValueError):
        wasserstein_exact(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        wasserstein_exact(np.zeros((3, 2)), np.zeros((3, 2)), p=3)


@pytest.mark.parametrize("seed", range(10))
def test_hungarian_matches_brute_force(seed):
    cost = np.random.default_rng(seed).random((6, 6))
    col = linear_assignment(cost)
    best = min(sum(cost[i, p[i]] for i in range(6)) for p in itertools.permutations(range(6)))
    assert abs(cost[np.arange(6), col].sum() - best) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 17, 60])
def test_hungarian_matches_scipy(n, rng):
    cost = rng.random((n, n)) * 10
    r, c = linear_sum_assignment(cost)
    ours = linear_assignment(cost)
    assert sorted(ours.tolist()) == list(range(n))
    assert cost[np.arange(n), ours].sum() == pytest.approx(cost[r, c].sum(), abs=1e-12)


def test_1d_matches_scipy_for_unequal_sizes(rng):
    u, v = rng.random(13), rng.random(29) + 0.3
    assert wasserstein_1d(u, v, 1) == pytest.approx(wasserstein_distance(u, v), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]))
def test_exact_is_a_metric(seed, p):
    r = np.random.default_rng(seed)
    a, b, c = (r.standard_normal((8, 3)) for _ in range(3))
    assert wasserstein_exact(a, b, p) == wasserstein_exact(b, a, p)
    assert wasserstein_exact(a, c, p) <= wasserstein_exact(a, b, p) + wasserstein_exact(b, c, p) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]), st.sampled_from([2, 4, 8]))
def test_orthonormal_projection_contracts(seed, p, m):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((16, 16)), r.standard_normal((16, 16)) + 0.5
    proj = make_projection(16, m, "orthonormal", seed)
    assert wasserstein_exact(proj(a), proj(b), p) <= wasserstein_exact(a, b, p) + 1e-9


# sliced

def test_sliced_examples(rng):
    a = rng.standard_normal((20, 3))
    assert wasserstein_sliced(a, a, 1, 32, 0) == 0.0
    u, v = rng.random((20, 1)), rng.random((20, 1))
    assert wasserstein_sliced(u, v, 1, 1, 0) == pytest.approx(wasserstein_exact(u, v, 1))


def test_sliced_size_mismatch():
    with pytest.raises(ValueError):
        wasserstein_sliced(np.zeros((3, 2)), np.zeros((4, 2)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_sliced_below_exact_for_p1(seed):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((24, 4)), r.standard_normal((24, 4)) * 1.5
    assert wasserstein_sliced(a, b, 1, 256, seed) <= wasserstein_exact(a, b, 1) + 1e-9


def test_sliced_close_to_exact_in_1d_scaling(rng):
    # sliced W1 of a pure translation t equals E|<t, theta>|
    a = rng.standard_normal((32, 4))
    t = np.array([1.0, 0, 0, 0])
    est = wasserstein_sliced(a, a + t, 1, 4096, 3)
    theta = rng.standard_normal((200000, 4))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    assert est == pytest.approx(np.abs(theta[:, 0]).mean(), rel=0.03)


def test_estimator_reference_and_caching(small):
    est = Estimator(dim=16, slices=32, seed=4)
    a, b = small.subset(np.arange(20)), small.subset(np.arange(20, 40))
    assert est(est.reference(a), b) == est(a, b)
    assert est(a, a) == 0.0
    assert Estimator(dim=16, slices=32, seed=4)(a, b) == est(a, b)


def test_estimator_is_permutation_invariant(small):
    est = Estimator(dim=16, slices=32, seed=4)
    a, b = small.subset(np.arange(20)), small.subset(np.arange(20, 40))
    assert est(a, b) == pytest.approx(est(a, b.subset(np.arange(20)[::-1])), abs=1e-15)


# ssim

def _ssim_loop(x, y):
    vals = []
    for i in range(0, x.shape[0] - 7, 4):
        for j in range(0, x.shape[1] - 7, 4):
            a, b = x[i:i + 8, j:j + 8], y[i:i + 8, j:j + 8]
            ma, mb = a.mean(), b.mean()
            cov = ((a - ma) * (b - mb)).mean()
            vals.append((2 * ma * mb + 1e-4) * (2 * cov + 9e-4)
                        / ((ma**2 + mb**2 + 1e-4) * (a.var() + b.var() + 9e-4)))
    return np.mean(vals)


def test_ssim_matches_window_loop(rng):
    x, y = rng.random((20, 24)), rng.random((20, 24))
    assert ssim(x, y) == pytest.approx(_ssim_loop(x, y), rel=1e-12)


def test_ssim_examples(rng):
    x, y = rng.random((16, 16)), rng.random((16, 16))
    assert ssim(x, x) == pytest.approx(1.0)
    assert ssim(x, y) == pytest.approx(ssim(y, x))
    assert ssim(np.zeros((16, 16)), np.ones((16, 16))) < 0.01
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8)), np.zeros((8, 9)))


def test_batch_ssim_is_mean_of_pairs(small):
    a, b = small.subset(np.arange(5)), small.subset(np.arange(5, 10))
    per = [ssim(a.images[i], b.images[i]) for i in range(5)]
    assert ssim(a, b) == pytest.approx(np.mean(per))
    assert len(ssim_per_image(a, b)) == 5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_ssim_bounds(seed):
    r = np.random.default_rng(seed)
    v = ssim(r.random((12, 12)), r.random((12, 12)))
    assert -1 < v <= 1


# divergences

def test_divergence_identity_and_saturation(rng):
    a = rng.random(500)
    for kind in ("tv", "kl", "js"):
        assert histogram_divergence(a, a, kind) == pytest.approx(0.0, abs=1e-12)
    lo, hi = rng.random(300) * 0.1, 0.9 + rng.random(300) * 0.1
    assert histogram_divergence(lo, hi, "tv") == pytest.approx(1.0, abs=1e-6)
    assert histogram_divergence(lo, hi, "js") == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_pinsker(seed):
    r = np.random.default_rng(seed)
    a, b = r.random(200), r.random(200) ** 2
    assert histogram_divergence(a, b, "tv") <= np.sqrt(histogram_divergence(a, b, "kl") / 2) + 1e-12


def test_divergence_errors():
    with pytest.raises(ValueError):
        histogram_divergence([], [1.0])
    with pytest.raises(ValueError):
        histogram_divergence([0.0, 1.0], [1.0], bins=1)


def test_sliced_divergence_zero_on_identical(rng):
    a = rng.random((30, 5))
    assert sliced_divergence(a, a, "tv", seed=2) == pytest.approx(0.0, abs=1e-12)


# pearson

def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(DegenerateCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])


def test_pearson_matches_numpy(rng):
    x, y = rng.random(40), rng.random(40)
    assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-12)
