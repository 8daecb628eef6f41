"""Closed-form kernels over the standardized domain.

The shared latent function lives in a unit-scale "standardized" space with a
fixed isotropic squared-exponential kernel.  Each agent's domain-specific
function is a warp of that latent function through a projection matrix W and a
signal scale, which makes the standardized/cross-domain/domain-specific
kernels all closed-form in terms of projected inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

DEFAULT_JITTER = 1e-8


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of A and rows of B."""
    d2 = (
        np.sum(A * A, axis=-1)[..., :, None]
        + np.sum(B * B, axis=-1)[..., None, :]
        - 2.0 * (A @ np.swapaxes(B, -1, -2))
    )
    return np.maximum(d2, 0.0)


def k_uu(z: np.ndarray, z2: np.ndarray) -> float:
    """Standardized-domain kernel exp(-0.5 ||z - z'||^2)."""
    z = np.asarray(z, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if z.shape != z2.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {z2.shape}")
    d = z - z2
    return float(np.exp(-0.5 * d @ d))


@dataclass(frozen=True)
class DomainParams:
    """Per-agent domain configuration: projection W, signal scale, noise std."""

    W: np.ndarray  # (d_out, d_in)
    sigma_s: float = 1.0
    sigma_n: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "W", np.atleast_2d(np.asarray(self.W, dtype=float)))
        if self.sigma_s <= 0:
            raise ValueError("sigma_s must be positive")
        if self.sigma_n <= 0:
            raise ValueError("sigma_n must be positive")

    @property
    def d_out(self) -> int:
        return self.W.shape[0]

    @property
    def d_in(self) -> int:
        return self.W.shape[1]


def k_fu(x: np.ndarray, z: np.ndarray, params: DomainParams) -> float:
    """Cross-domain covariance sigma_s * exp(-0.5 ||W x - z||^2)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    wx = params.W @ x
    if wx.shape != z.shape:
        raise ValueError(f"dimension mismatch: W x has shape {wx.shape}, z {z.shape}")
    d = wx - z
    return float(params.sigma_s * np.exp(-0.5 * d @ d))


def k_ff(x: np.ndarray, x2: np.ndarray, params: DomainParams) -> float:
    """Domain-specific kernel sigma_s^2 * exp(-0.5 (x-x')^T W^T W (x-x'))."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d = params.W @ (x - x2)
    return float(params.sigma_s**2 * np.exp(-0.5 * d @ d))


def gram_uu(Z: np.ndarray) -> np.ndarray:
    """Standardized-kernel Gram matrix for the rows of Z."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return np.exp(-0.5 * _sqdist(Z, Z))


def cross_gram(X: np.ndarray, Z: np.ndarray, W: np.ndarray, sigma_s: float) -> np.ndarray:
    """n x m cross-covariance matrix [k_fu(x_i, z_j)] under an explicit W."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = X @ np.asarray(W, dtype=float).T
    return sigma_s * np.exp(-0.5 * _sqdist(T, Z))


def cross_gram_batch(
    X: np.ndarray, Z: np.ndarray, Ws: np.ndarray, sigma_s: float
) -> np.ndarray:
    """Stacked cross-covariances (k, n, m) for a batch of projections Ws."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.einsum("nd,tqd->tnq", X, np.asarray(Ws, dtype=float))
    return sigma_s * np.exp(-0.5 * _sqdist(T, Z[None, :, :]))


@dataclass(frozen=True)
class StandardizedVocabulary:
    """The m standardized inducing inputs Z plus the factorized Gram matrix.

    Immutable after construction; every agent in a system must share the same
    instance (or a value-equal one) for fusion to be meaningful.
    """

    Z: np.ndarray
    jitter: float
    Kuu: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)  # lower factor of Kuu + jitter*I
    Kuu_inv: np.ndarray = field(repr=False)  # explicit (Kuu + jitter*I)^{-1}

    @classmethod
    def from_points(cls, Z: np.ndarray, jitter: float = DEFAULT_JITTER) -> "StandardizedVocabulary":
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if len(np.unique(Z, axis=0)) != Z.shape[0]:
            raise ValueError("vocabulary points must be pairwise distinct")
        Kuu = gram_uu(Z)
        stabilized = Kuu + jitter * np.eye(Z.shape[0])
        chol = np.linalg.cholesky(stabilized)
        Kuu_inv = sla.cho_solve((chol, True), np.eye(Z.shape[0]))
        Kuu_inv = 0.5 * (Kuu_inv + Kuu_inv.T)
        for arr in (Z, Kuu, chol, Kuu_inv):
            arr.setflags(write=False)
        return cls(Z=Z, jitter=jitter, Kuu=Kuu, chol=chol, Kuu_inv=Kuu_inv)

    @property
    def m(self) -> int:
        return self.Z.shape[0]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    def solve(self, B: np.ndarray) -> np.ndarray:
        """(Kuu + jitter*I)^{-1} B via the cached triangular factor."""
        return sla.cho_solve((self.chol, True), B)

    def logdet(self) -> float:
        """log det(Kuu + jitter*I)."""
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))


def gram_cross(
    X: np.ndarray, vocab: StandardizedVocabulary, params: DomainParams
) -> np.ndarray:
    """n x m matrix [k_fu(X[i], Z[j])]; returns a 0 x m matrix for empty X."""
    X = np.asarray(X, dtype=float).reshape(-1, params.d_in)
    if X.shape[0] == 0:
        return np.zeros((0, vocab.m))
    if params.d_out != vocab.q:
        raise ValueError(
            f"projection output dim {params.d_out} != vocabulary dim {vocab.q}"
        )
    return cross_gram(X, vocab.Z, params.W, params.sigma_s)


def make_vocabulary(
    m: int,
    q: int,
    seed: int,
    jitter: float = DEFAULT_JITTER,
    oversample: int = 4,
) -> StandardizedVocabulary:
    """Seeded vocabulary: sample standard-normal candidates, greedily thin.

    Draws m*oversample candidates and keeps m of them by farthest-point
    selection, which approximately maximizes the minimum pairwise distance and
    keeps the Gram matrix well conditioned.
    """
    if m < 1:
        raise ValueError("need at least one vocabulary point")
    rng = np.random.default_rng(seed)
    candidates = rng.standard_normal((m * oversample, q))
    chosen = [0]
    d2 = np.sum((candidates - candidates[0]) ** 2, axis=1)
    for _ in range(1, m):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((candidates - candidates[nxt]) ** 2, axis=1))
    return StandardizedVocabulary.from_points(candidates[chosen], jitter=jitter)
