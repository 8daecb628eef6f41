"""Communicable agent state in natural-parameter form.

An agent summarizes everything it has seen into R = [R1; R2] = [S^-1; S^-1 m],
the natural parameters of its Gaussian posterior over the inducing outputs.
Expectations over the projection posterior q(W) are importance-sampled on a
fixed bank of prior draws, with per-sample kernel aggregates cached so that a
change of q(W) only costs O(k m^2) to absorb, no matter how much data has
streamed past.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .kernels import DomainParams, StandardizedVocabulary, cross_gram, cross_gram_batch

SYM_RTOL = 1e-10

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NaturalRepresentation:
    """[R1; R2] = [S^-1; S^-1 m]: the constant-size communicable summary."""

    R1: np.ndarray
    R2: np.ndarray

    def __post_init__(self):
        R1 = np.asarray(self.R1, dtype=float)
        R2 = np.asarray(self.R2, dtype=float).ravel()
        if R1.shape != (R2.size, R2.size):
            raise ValueError("R1 must be m x m matching R2's length")
        scale = max(1.0, float(np.max(np.abs(R1))))
        if np.max(np.abs(R1 - R1.T)) > SYM_RTOL * scale:
            raise ValueError("R1 is not symmetric")
        object.__setattr__(self, "R1", R1)
        object.__setattr__(self, "R2", R2)

    @property
    def m(self) -> int:
        return self.R2.size

    def allclose(self, other: "NaturalRepresentation", atol: float = 0.0, rtol: float = 1e-12) -> bool:
        return np.allclose(self.R1, other.R1, atol=atol, rtol=rtol) and np.allclose(
            self.R2, other.R2, atol=atol, rtol=rtol
        )


@dataclass(frozen=True)
class MomentParameters:
    """Posterior mean and covariance of the inducing outputs."""

    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class ProjectionPosterior:
    """Factored Gaussian over the projection matrix: one (mu, sigma) per entry."""

    mu: np.ndarray  # (d_out, d_in)
    sigma: np.ndarray  # (d_out, d_in), all entries > 0

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma must have the same shape")
        if np.any(sigma <= 0):
            raise ValueError("all sigma entries must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def prior(cls, d_out: int, d_in: int) -> "ProjectionPosterior":
        return cls(mu=np.zeros((d_out, d_in)), sigma=np.ones((d_out, d_in)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mu.shape

    def log_density(self, W: np.ndarray) -> float:
        """Summed factored-Gaussian log density at W."""
        z = (W - self.mu) / self.sigma
        return float(-0.5 * np.sum(z * z) - np.sum(np.log(self.sigma)) - 0.5 * self.mu.size * _LOG_2PI)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        eps = rng.standard_normal((size,) + self.mu.shape)
        return self.mu[None] + self.sigma[None] * eps


def prior_log_density(W: np.ndarray) -> float:
    """Log density of the standard-normal prior over projection entries."""
    W = np.asarray(W, dtype=float)
    return float(-0.5 * np.sum(W * W) - 0.5 * W.size * _LOG_2PI)


def natural_from_moments(mp: MomentParameters) -> NaturalRepresentation:
    """R1 = cov^-1, R2 = cov^-1 mean (Cholesky-based; raises if cov is singular)."""
    cov = np.asarray(mp.cov, dtype=float)
    mean = np.asarray(mp.mean, dtype=float).ravel()
    chol = np.linalg.cholesky(cov)
    R1 = sla.cho_solve((chol, True), np.eye(cov.shape[0]))
    R1 = 0.5 * (R1 + R1.T)
    R2 = sla.cho_solve((chol, True), mean)
    return NaturalRepresentation(R1=R1, R2=R2)


def moments_from_natural(R: NaturalRepresentation) -> MomentParameters:
    """cov = R1^-1, mean = R1^-1 R2; an indefinite R1 signals a corrupted rep."""
    try:
        chol = np.linalg.cholesky(R.R1)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "R1 is not positive definite; representation is corrupted or "
            "inconsistently fused"
        ) from exc
    cov = sla.cho_solve((chol, True), np.eye(R.m))
    cov = 0.5 * (cov + cov.T)
    mean = sla.cho_solve((chol, True), R.R2)
    return MomentParameters(mean=mean, cov=cov)


def prior_natural(vocab: StandardizedVocabulary) -> NaturalRepresentation:
    """Natural parameters of the zero-mean prior over inducing outputs."""
    return NaturalRepresentation(R1=vocab.Kuu_inv.copy(), R2=np.zeros(vocab.m))


@dataclass
class SampleBank:
    """Fixed prior draws of W plus per-sample kernel aggregates.

    per_sample_A[t] accumulates K_UD K_DU and per_sample_b[t] accumulates
    K_UD y over every absorbed block, all evaluated at sample W_t.  The cache
    footprint is O(k m^2) regardless of stream length.
    """

    samples: np.ndarray  # (k, d_out, d_in)
    seed: int
    per_sample_A: np.ndarray  # (k, m, m)
    per_sample_b: np.ndarray  # (k, m)
    deterministic: bool = False
    blocks_absorbed: int = 0

    @property
    def k(self) -> int:
        return self.samples.shape[0]


def sample_bank_init(k: int, d_out: int, d_in: int, seed: int, m: int) -> SampleBank:
    """Bank of k i.i.d. standard-normal projections with zeroed caches."""
    if k < 1:
        raise ValueError("bank size k must be at least 1")
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((k, d_out, d_in))
    return SampleBank(
        samples=samples,
        seed=seed,
        per_sample_A=np.zeros((k, m, m)),
        per_sample_b=np.zeros((k, m)),
    )


def deterministic_bank(qw: ProjectionPosterior, m: int) -> SampleBank:
    """Single-sample bank pinned at the mean of q(W) with unit weight.

    Makes every downstream identity exact; the oracle backbone for tests.
    """
    return SampleBank(
        samples=qw.mu[None].copy(),
        seed=-1,
        per_sample_A=np.zeros((1, m, m)),
        per_sample_b=np.zeros((1, m)),
        deterministic=True,
    )


def absorb_block(
    bank: SampleBank,
    X_i: np.ndarray,
    y_i: np.ndarray,
    vocab: StandardizedVocabulary,
    params: DomainParams,
) -> SampleBank:
    """Fold one data block into the per-sample caches (in place)."""
    X_i = np.atleast_2d(np.asarray(X_i, dtype=float))
    y_i = np.asarray(y_i, dtype=float).ravel()
    if X_i.shape[0] == 0:
        raise ValueError("block must contain at least one point")
    if X_i.shape[0] != y_i.size:
        raise ValueError("X_i and y_i disagree on the number of points")
    if X_i.shape[1] != bank.samples.shape[2]:
        raise ValueError(
            f"block dimension {X_i.shape[1]} != bank input dimension {bank.samples.shape[2]}"
        )
    K = cross_gram_batch(X_i, vocab.Z, bank.samples, params.sigma_s)  # (k, n, m)
    bank.per_sample_A += np.einsum("tnm,tnp->tmp", K, K)
    bank.per_sample_b += np.einsum("tnm,n->tm", K, y_i)
    bank.blocks_absorbed += 1
    return bank


def log_importance_weights(qw: ProjectionPosterior, bank: SampleBank) -> np.ndarray:
    """Log of the unnormalized ratios q(W_t)/p(W_t)."""
    if bank.deterministic:
        return np.zeros(1)
    log_w = np.empty(bank.k)
    for t, W in enumerate(bank.samples):
        log_w[t] = qw.log_density(W) - prior_log_density(W)
        if not np.isfinite(log_w[t]):
            raise FloatingPointError(f"non-finite log importance ratio at sample {t}")
    return log_w


def importance_weights(qw: ProjectionPosterior, bank: SampleBank) -> np.ndarray:
    """Unnormalized ratios q(W_t)/p(W_t), computed in the log domain."""
    return np.exp(log_importance_weights(qw, bank))


def normalized_weights(log_w: np.ndarray) -> np.ndarray:
    """Self-normalized weights from log ratios, stable under over/underflow."""
    log_w = np.asarray(log_w, dtype=float)
    shifted = np.exp(log_w - np.max(log_w))
    return shifted / np.sum(shifted)


def effective_sample_size(weights: np.ndarray) -> float:
    """(sum w)^2 / sum w^2 — the usual weight-degeneracy diagnostic."""
    weights = np.asarray(weights, dtype=float)
    denom = float(np.sum(weights**2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(weights)) ** 2 / denom


def representation_from_caches(
    bank: SampleBank,
    weights: np.ndarray,
    vocab: StandardizedVocabulary,
    params: DomainParams,
) -> NaturalRepresentation:
    """Reweight the cached aggregates into a natural representation.

    R1 = Kuu^-1 + (1/sigma_n^2) Kuu^-1 [mean_t w_t A_t] Kuu^-1
    R2 = (1/sigma_n^2) Kuu^-1 [mean_t w_t b_t]

    Cost O(k m^2), independent of how much data the caches have absorbed.
    """
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.size != bank.k:
        raise ValueError("weights and bank sample counts disagree")
    Kinv = vocab.Kuu_inv
    inv_noise = 1.0 / params.sigma_n**2
    A_bar = np.einsum("t,tmp->mp", weights, bank.per_sample_A) / bank.k
    b_bar = weights @ bank.per_sample_b / bank.k
    R1 = Kinv + inv_noise * (Kinv @ A_bar @ Kinv)
    R1 = 0.5 * (R1 + R1.T)
    R2 = inv_noise * (Kinv @ b_bar)
    return NaturalRepresentation(R1=R1, R2=R2)


def exact_block_E(
    X_i: np.ndarray,
    y_i: np.ndarray,
    qw: ProjectionPosterior,
    vocab: StandardizedVocabulary,
    params: DomainParams,
    mc_samples: int,
    seed: int,
    chunk: int = 4096,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo oracle for one block's natural-parameter contribution.

    Samples W directly from q(W) (no importance reweighting) and averages the
    kernel products, so it converges to the exact expectations at a 1/sqrt(n)
    rate.  Test-suite ground truth; not used on the streaming path.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be at least 1")
    X_i = np.atleast_2d(np.asarray(X_i, dtype=float))
    y_i = np.asarray(y_i, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    m = vocab.m
    C_uu = np.zeros((m, m))
    C_ud_y = np.zeros(m)
    done = 0
    while done < mc_samples:
        n_draw = min(chunk, mc_samples - done)
        Ws = qw.sample(n_draw, rng)
        K = cross_gram_batch(X_i, vocab.Z, Ws, params.sigma_s)  # (n_draw, n, m)
        C_uu += np.einsum("tnm,tnp->mp", K, K)
        C_ud_y += np.einsum("tnm,n->m", K, y_i)
        done += n_draw
    C_uu /= mc_samples
    C_ud_y /= mc_samples
    Kinv = vocab.Kuu_inv
    inv_noise = 1.0 / params.sigma_n**2
    E1 = inv_noise * (Kinv @ C_uu @ Kinv)
    E1 = 0.5 * (E1 + E1.T)
    E2 = inv_noise * (Kinv @ C_ud_y)
    return E1, E2
