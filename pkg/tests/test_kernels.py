"""Kernel identities and vocabulary construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coolgp.kernels import (
    DomainParams,
    StandardizedVocabulary,
    cross_gram,
    cross_gram_batch,
    gram_cross,
    gram_uu,
    k_ff,
    k_fu,
    k_uu,
    make_vocabulary,
)


def test_kuu_unit_diagonal():
    z = np.array([0.3, -1.2])
    assert k_uu(z, z) == pytest.approx(1.0)


def test_kuu_symmetry_and_decay():
    a, b = np.array([0.0, 0.0]), np.array([1.0, 2.0])
    assert k_uu(a, b) == pytest.approx(k_uu(b, a))
    assert k_uu(a, b) == pytest.approx(np.exp(-0.5 * 5.0))


def test_kfu_matches_warped_kuu(params):
    x = np.array([0.4, -0.7])
    z = np.array([0.1, 0.9])
    assert k_fu(x, z, params) == pytest.approx(params.sigma_s * k_uu(params.W @ x, z))


def test_kff_self_variance():
    params = DomainParams(W=np.array([[1.0, 0.5], [0.0, 2.0]]), sigma_s=1.7, sigma_n=0.1)
    x = np.array([0.2, 0.3])
    assert k_ff(x, x, params) == pytest.approx(params.sigma_s**2)


def test_kff_depends_on_projected_distance():
    params = DomainParams(W=np.array([[1.0, 0.0]]), sigma_s=1.0, sigma_n=0.1)
    # W kills the second coordinate, so the kernel must too.
    x1 = np.array([0.5, -3.0])
    x2 = np.array([0.5, 4.0])
    assert k_ff(x1, x2, params) == pytest.approx(params.sigma_s**2)


@given(st.integers(min_value=1, max_value=6))
@settings(max_examples=20, deadline=None)
def test_gram_uu_positive_definite(n):
    rng = np.random.default_rng(n)
    Z = rng.standard_normal((n, 2)) * 2.0
    K = gram_uu(Z)
    np.testing.assert_allclose(K, K.T)
    eigs = np.linalg.eigvalsh(K + 1e-10 * np.eye(n))
    assert np.all(eigs > 0)


def test_cross_gram_agrees_with_scalar_kernel(params, rng):
    X = rng.standard_normal((4, 2))
    Z = rng.standard_normal((3, 2))
    K = cross_gram(X, Z, params.W, params.sigma_s)
    for i in range(4):
        for j in range(3):
            assert K[i, j] == pytest.approx(k_fu(X[i], Z[j], params))


def test_cross_gram_batch_stacks_per_sample(params, rng):
    X = rng.standard_normal((5, 2))
    Z = rng.standard_normal((4, 2))
    bank = rng.standard_normal((3, 2, 2))
    out = cross_gram_batch(X, Z, bank, params.sigma_s)
    assert out.shape == (3, 5, 4)
    for t in range(3):
        np.testing.assert_allclose(out[t], cross_gram(X, Z, bank[t], params.sigma_s))


def test_gram_cross_empty_block(small_vocab, params):
    K = gram_cross(np.zeros((0, 2)), small_vocab, params)
    assert K.shape == (0, small_vocab.m)


def test_vocabulary_rejects_duplicate_points():
    Z = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        StandardizedVocabulary.from_points(Z)


def test_vocabulary_cached_inverse(small_vocab):
    ident = small_vocab.Kuu @ small_vocab.Kuu_inv
    np.testing.assert_allclose(ident, np.eye(small_vocab.m), atol=1e-6)


def test_make_vocabulary_deterministic():
    a = make_vocabulary(m=10, q=3, seed=7)
    b = make_vocabulary(m=10, q=3, seed=7)
    np.testing.assert_array_equal(a.Z, b.Z)
    assert a.m == 10 and a.q == 3


def test_make_vocabulary_distinct_seeds_differ():
    a = make_vocabulary(m=10, q=3, seed=7)
    b = make_vocabulary(m=10, q=3, seed=8)
    assert not np.array_equal(a.Z, b.Z)


def test_domain_params_validation():
    with pytest.raises(ValueError):
        DomainParams(W=np.eye(2), sigma_s=1.0, sigma_n=0.0)
    with pytest.raises(ValueError):
        DomainParams(W=np.eye(2), sigma_s=-1.0, sigma_n=0.1)
