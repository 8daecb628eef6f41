"""An online learning agent.

Each agent owns a sample bank, a projection posterior q(W), and a natural
representation of q(u).  Ingesting a block folds its kernel aggregates into
the caches, optionally takes one stochastic gradient step on q(W)'s
hyperparameters, and recomputes the representation with fresh importance
weights — all at a cost independent of how much data has already streamed by.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import DomainParams, StandardizedVocabulary, cross_gram
from .representation import (
    MomentParameters,
    NaturalRepresentation,
    ProjectionPosterior,
    SampleBank,
    absorb_block,
    deterministic_bank,
    effective_sample_size,
    importance_weights,
    log_importance_weights,
    moments_from_natural,
    normalized_weights,
    prior_natural,
    representation_from_caches,
    sample_bank_init,
)

_LOG_2PI = float(np.log(2.0 * np.pi))


def default_rate_schedule(step: int, rate_0: float = 1e-2) -> float:
    """rate_0 / (1 + 0.1 step): divergent sum, convergent square sum."""
    return rate_0 / (1.0 + 0.1 * step)


@dataclass
class LearnConfig:
    learning_rate: float = 1e-2
    rate_decay: Optional[Callable[[int], float]] = None  # step index -> rate
    grad_samples: int = 2
    stream_length_N: Optional[int] = None  # None = unbounded (use blocks seen)
    hyperlearning_enabled: bool = True
    grad_seed: int = 0
    grad_clip: Optional[float] = 10.0  # max gradient norm; None disables clipping

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.grad_samples < 1:
            raise ValueError("grad_samples must be at least 1")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive when set")

    def rate_at(self, step: int) -> float:
        if self.rate_decay is not None:
            return self.rate_decay(step)
        return default_rate_schedule(step, self.learning_rate)


def kl_qw(qw: ProjectionPosterior) -> float:
    """KL(q(W) || p(W)) for factored Gaussians vs the standard-normal prior."""
    return float(
        0.5 * np.sum(qw.mu**2 + qw.sigma**2 - 1.0 - 2.0 * np.log(qw.sigma))
    )


def kl_qu(rep: NaturalRepresentation, vocab: StandardizedVocabulary) -> float:
    """KL(q(u) || p(u)) between N(m, S) and the vocabulary prior N(0, Kuu)."""
    mp = moments_from_natural(rep)
    Kinv = vocab.Kuu_inv
    _, logdet_S = np.linalg.slogdet(mp.cov)
    return float(
        0.5
        * (
            np.trace(Kinv @ mp.cov)
            + mp.mean @ (Kinv @ mp.mean)
            - vocab.m
            + vocab.logdet()
            - logdet_S
        )
    )


class Agent:
    """Single-owner mutable learning agent over a shared vocabulary."""

    def __init__(
        self,
        agent_id,
        vocab: StandardizedVocabulary,
        params: DomainParams,
        bank_size: int,
        bank_seed: int,
        d_in: int,
        qw: Optional[ProjectionPosterior] = None,
        learn_config: Optional[LearnConfig] = None,
        deterministic: bool = False,
    ):
        self.id = agent_id
        self.vocab = vocab
        self.params = params
        self.learn_config = learn_config or LearnConfig()
        self.qw = qw if qw is not None else ProjectionPosterior.prior(vocab.q, d_in)
        if self.qw.shape != (vocab.q, d_in):
            raise ValueError("q(W) shape must be (vocab dim, input dim)")
        self.deterministic = deterministic
        if deterministic:
            if self.learn_config.hyperlearning_enabled:
                raise ValueError("deterministic-W mode requires hyperlearning disabled")
            self.bank: SampleBank = deterministic_bank(self.qw, vocab.m)
        else:
            self.bank = sample_bank_init(bank_size, vocab.q, d_in, bank_seed, vocab.m)
        self.log_weights = log_importance_weights(self.qw, self.bank)
        self.weights = np.exp(self.log_weights)
        self.rep: NaturalRepresentation = prior_natural(vocab)
        self.fused_rep: Optional[NaturalRepresentation] = None
        self.blocks_seen = 0
        self.hyper_steps = 0
        self.last_step_skipped = False
        # Fixed reparameterization draws shared by every ELBO/gradient call so
        # the objective is a deterministic function of theta.
        eps_rng = np.random.default_rng(self.learn_config.grad_seed)
        self._eps = eps_rng.standard_normal(
            (self.learn_config.grad_samples,) + self.qw.shape
        )

    # -- streaming -----------------------------------------------------------

    def ingest_block(self, X_i: np.ndarray, y_i: np.ndarray) -> "Agent":
        """Absorb one block, optionally take a hyper step, refresh the rep."""
        X_i = np.atleast_2d(np.asarray(X_i, dtype=float))
        y_i = np.asarray(y_i, dtype=float).ravel()
        if X_i.shape[0] == 0 or X_i.shape[0] != y_i.size:
            raise ValueError("block must be nonempty with matching X and y counts")
        if X_i.shape[1] != self.qw.shape[1]:
            raise ValueError(
                f"block dimension {X_i.shape[1]} != agent input dimension {self.qw.shape[1]}"
            )
        self.blocks_seen += 1
        absorb_block(self.bank, X_i, y_i, self.vocab, self.params)
        if self.learn_config.hyperlearning_enabled:
            self.rep = representation_from_caches(
                self.bank, self.weights, self.vocab, self.params
            )
            hyper_step(self, X_i, y_i)
        self.log_weights = log_importance_weights(self.qw, self.bank)
        self.weights = np.exp(self.log_weights)
        self.rep = representation_from_caches(
            self.bank, self.weights, self.vocab, self.params
        )
        return self

    @property
    def ess(self) -> float:
        # Shift-invariant in the log domain, so underflowed raw weights do not
        # collapse the diagnostic to zero.
        w_hat = normalized_weights(self.log_weights)
        return effective_sample_size(w_hat)

    # -- prediction ----------------------------------------------------------

    def predict(
        self, X_test: np.ndarray, use_fused: bool = False
    ) -> tuple[np.ndarray, np.ndarray]:
        """Predictive means and variances at the test inputs.

        Marginalizes W by self-normalized reweighting of the bank samples; in
        deterministic-W mode this is the exact sparse-GP predictive.
        """
        rep = self.rep
        if use_fused and self.fused_rep is not None:
            rep = self.fused_rep
        mp = moments_from_natural(rep)
        X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
        Kinv = self.vocab.Kuu_inv
        alpha = Kinv @ mp.mean
        M = Kinv @ mp.cov @ Kinv
        w_hat = normalized_weights(self.log_weights)
        n = X_test.shape[0]
        means = np.zeros(n)
        variances = np.zeros(n)
        for t, W_t in enumerate(self.bank.samples):
            Kt = cross_gram(X_test, self.vocab.Z, W_t, self.params.sigma_s)
            means += w_hat[t] * (Kt @ alpha)
            nystrom = np.sum((Kt @ Kinv) * Kt, axis=1)
            post = np.sum((Kt @ M) * Kt, axis=1)
            variances += w_hat[t] * (self.params.sigma_s**2 - nystrom + post)
        variances += self.params.sigma_n**2
        return means, variances


# -- variational objective ---------------------------------------------------


def _block_loglik(
    W: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    vocab: StandardizedVocabulary,
    params: DomainParams,
    mp: MomentParameters,
    want_grad: bool,
) -> tuple[float, Optional[np.ndarray]]:
    """Expected log-likelihood of one block under q(u) at a fixed W.

    The expectation over p(f | u, W) and then over q(u) is closed-form; only W
    is sampled.  Optionally returns the gradient w.r.t. W.
    """
    n = X.shape[0]
    sigma_n2 = params.sigma_n**2
    Kdu = cross_gram(X, vocab.Z, W, params.sigma_s)  # (n, m)
    B = vocab.Kuu_inv
    A = Kdu @ B
    c = B @ mp.mean
    r = y - Kdu @ c
    trace_ASA = float(np.sum((A @ mp.cov) * A))
    trace_AK = float(np.sum(A * Kdu))
    ll = (
        -0.5 * n * (_LOG_2PI + np.log(sigma_n2))
        - 0.5 / sigma_n2 * (r @ r + trace_ASA + n * params.sigma_s**2 - trace_AK)
    )
    if not want_grad:
        return float(ll), None
    M = B @ mp.cov @ B
    G = (np.outer(r, c) - Kdu @ (M - B)) / sigma_n2
    H = G * Kdu
    T = X @ W.T
    V = H @ vocab.Z - np.sum(H, axis=1, keepdims=True) * T
    return float(ll), V.T @ X


def _elbo_terms(
    agent: Agent,
    blocks: Sequence[tuple[np.ndarray, np.ndarray]],
    block_weight: float,
    want_grad: bool,
) -> tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    mp = moments_from_natural(agent.rep)
    total_ll = 0.0
    d_mu = np.zeros(agent.qw.shape) if want_grad else None
    d_sigma = np.zeros(agent.qw.shape) if want_grad else None
    n_draws = agent._eps.shape[0]
    for X, y in blocks:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        for eps in agent._eps:
            W = agent.qw.mu + agent.qw.sigma * eps
            ll, dW = _block_loglik(
                W, X, y, agent.vocab, agent.params, mp, want_grad
            )
            total_ll += block_weight * ll / n_draws
            if want_grad:
                d_mu += block_weight * dW / n_draws
                d_sigma += block_weight * (dW * eps) / n_draws
    return total_ll, d_mu, d_sigma


def elbo(
    agent: Agent,
    blocks: Sequence[tuple[np.ndarray, np.ndarray]],
    scale_N: Optional[int] = None,
) -> float:
    """Decomposed variational objective: sum of block terms minus both KLs.

    With scale_N, the block sum is rescaled by scale_N / len(blocks), which
    turns a uniformly drawn subset into an unbiased surrogate for the full
    stream objective.
    """
    weight = 1.0
    if scale_N is not None and len(blocks) > 0:
        weight = scale_N / len(blocks)
    ll, _, _ = _elbo_terms(agent, blocks, weight, want_grad=False)
    return ll - kl_qu(agent.rep, agent.vocab) - kl_qw(agent.qw)


def elbo_grad(
    agent: Agent,
    blocks: Sequence[tuple[np.ndarray, np.ndarray]],
    scale_N: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the objective w.r.t. (mu, sigma) at fixed q(u) moments."""
    weight = 1.0
    if scale_N is not None and len(blocks) > 0:
        weight = scale_N / len(blocks)
    _, d_mu, d_sigma = _elbo_terms(agent, blocks, weight, want_grad=True)
    d_mu -= agent.qw.mu
    d_sigma -= agent.qw.sigma - 1.0 / agent.qw.sigma
    return d_mu, d_sigma


def hyper_step(agent: Agent, X_star: np.ndarray, y_star: np.ndarray) -> Agent:
    """One stochastic ascent step on theta using the given block as D_*.

    sigma is stepped through its log so positivity is preserved.  A non-finite
    gradient skips the step and raises the agent's diagnostic flag.
    """
    if not agent.learn_config.hyperlearning_enabled:
        raise ValueError("hyperlearning is disabled for this agent")
    N = agent.learn_config.stream_length_N
    if N is None:
        N = max(agent.blocks_seen, 1)
    d_mu, d_sigma = elbo_grad(agent, [(X_star, y_star)], scale_N=N)
    if not (np.all(np.isfinite(d_mu)) and np.all(np.isfinite(d_sigma))):
        agent.last_step_skipped = True
        return agent
    clip = agent.learn_config.grad_clip
    if clip is not None:
        norm = float(np.sqrt(np.sum(d_mu**2) + np.sum(d_sigma**2)))
        if norm > clip:
            d_mu = d_mu * (clip / norm)
            d_sigma = d_sigma * (clip / norm)
    rate = agent.learn_config.rate_at(agent.hyper_steps)
    mu = agent.qw.mu + rate * d_mu
    rho = np.log(agent.qw.sigma) + rate * (d_sigma * agent.qw.sigma)
    agent.qw = ProjectionPosterior(mu=mu, sigma=np.exp(rho))
    agent.hyper_steps += 1
    agent.last_step_skipped = False
    return agent
