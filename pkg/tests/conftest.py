"""Shared fixtures: a small vocabulary and domain setup reused across tests."""

import numpy as np
import pytest

from coolgp.kernels import DomainParams, StandardizedVocabulary, make_vocabulary


@pytest.fixture(scope="session")
def small_vocab() -> StandardizedVocabulary:
    return make_vocabulary(m=8, q=2, seed=42)


@pytest.fixture
def params() -> DomainParams:
    return DomainParams(W=np.eye(2), sigma_s=1.0, sigma_n=0.1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)


def make_block(rng, n=10, d=2, scale=1.0):
    X = scale * rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    return X, y
