"""Named verification suites behind the `verify` CLI subcommand.

Each suite returns a report dict with a boolean ``passed``, the measured
quantities, and the thresholds they were held to.  The suites cover the
empirical scaling laws (sampling error vs bank size, fusion error vs agent
count), gradient unbiasedness, reparameterized-gradient correctness, and
message-passing consensus.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from .agent import Agent, LearnConfig, elbo, elbo_grad
from .fusion import fuse_many, random_tree_topology, run_protocol
from .kernels import DomainParams, make_vocabulary
from .representation import (
    NaturalRepresentation,
    ProjectionPosterior,
    exact_block_E,
    importance_weights,
    prior_natural,
    representation_from_caches,
    sample_bank_init,
    absorb_block,
)


def _toy_problem(seed: int = 0, m: int = 6, d: int = 2, n: int = 8):
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(m, d, seed=seed + 1)
    params = DomainParams(W=np.eye(d), sigma_s=1.0, sigma_n=0.2)
    X = rng.uniform(-1, 1, size=(n, d))
    y = rng.standard_normal(n)
    qw = ProjectionPosterior(
        mu=0.3 * rng.standard_normal((d, d)), sigma=np.full((d, d), 0.9)
    )
    return vocab, params, X, y, qw


def _rep_from_bank(k, seed, X, y, qw, vocab, params) -> NaturalRepresentation:
    bank = sample_bank_init(k, vocab.q, X.shape[1], seed, vocab.m)
    absorb_block(bank, X, y, vocab, params)
    w = importance_weights(qw, bank)
    return representation_from_caches(bank, w, vocab, params)


def _rep_error(rep: NaturalRepresentation, truth: NaturalRepresentation) -> float:
    d1 = rep.R1 - truth.R1
    d2 = rep.R2 - truth.R2
    return float(np.sqrt(np.sum(d1 * d1) + np.sum(d2 * d2)))


def _ground_truth_rep(vocab, params, X, y, qw, mc_samples=10**6, seed=12345):
    E1, E2 = exact_block_E(X, y, qw, vocab, params, mc_samples=mc_samples, seed=seed)
    R0 = prior_natural(vocab)
    return NaturalRepresentation(R1=R0.R1 + E1, R2=R0.R2 + E2)


def lemma1_scaling(
    trials: int = 50, ks=(8, 32, 128, 512), slope_range=(-0.65, -0.35)
) -> Dict:
    """Median representation error vs bank size follows the 1/sqrt(k) law."""
    vocab, params, X, y, qw = _toy_problem()
    truth = _ground_truth_rep(vocab, params, X, y, qw)
    medians = []
    for k in ks:
        errs = [
            _rep_error(_rep_from_bank(k, 1000 + 37 * k + t, X, y, qw, vocab, params), truth)
            for t in range(trials)
        ]
        medians.append(float(np.median(errs)))
    slope = float(np.polyfit(np.log(ks), np.log(medians), 1)[0])
    passed = slope_range[0] <= slope <= slope_range[1]
    return {
        "suite": "lemma1-scaling",
        "passed": passed,
        "slope": slope,
        "slope_range": list(slope_range),
        "medians": medians,
        "ks": list(ks),
    }


def theorem1_scaling(
    trials: int = 30, sizes=(2, 4, 8, 16), k: int = 32, max_exponent: float = 1.3
) -> Dict:
    """Fusion error at fixed k grows at most about linearly in agent count."""
    vocab, params, X, y, qw = _toy_problem()
    truth_local = _ground_truth_rep(vocab, params, X, y, qw)
    R0 = prior_natural(vocab)
    mean_errs = []
    for s in sizes:
        errs = []
        for t in range(trials):
            reps = [
                _rep_from_bank(k, 5000 + 101 * s + 13 * t + i, X, y, qw, vocab, params)
                for i in range(s)
            ]
            fused = fuse_many(reps, R0)
            truth_fused = fuse_many([truth_local] * s, R0)
            errs.append(_rep_error(fused, truth_fused))
        mean_errs.append(float(np.mean(errs)))
    exponent = float(np.polyfit(np.log(sizes), np.log(mean_errs), 1)[0])
    passed = exponent <= max_exponent
    return {
        "suite": "theorem1-scaling",
        "passed": passed,
        "exponent": exponent,
        "max_exponent": max_exponent,
        "mean_errors": mean_errs,
        "sizes": list(sizes),
    }


def _toy_agent(seed: int = 0, m: int = 5, d: int = 2, hyper: bool = False) -> Agent:
    vocab = make_vocabulary(m, d, seed=seed + 7)
    params = DomainParams(W=np.eye(d), sigma_s=1.0, sigma_n=0.3)
    cfg = LearnConfig(hyperlearning_enabled=hyper, grad_samples=2, grad_seed=seed + 3)
    return Agent(
        agent_id=0,
        vocab=vocab,
        params=params,
        bank_size=4,
        bank_seed=seed + 11,
        d_in=d,
        learn_config=cfg,
    )


def unbiasedness(n_draws: int = 500, n_blocks: int = 5, tol_sigmas: float = 3.0) -> Dict:
    """Mean single-block stochastic gradient matches the full-batch gradient."""
    rng = np.random.default_rng(42)
    agent = _toy_agent(seed=1)
    blocks = [
        (rng.uniform(-1, 1, size=(6, 2)), rng.standard_normal(6)) for _ in range(n_blocks)
    ]
    for X, y in blocks:
        absorb_block(agent.bank, X, y, agent.vocab, agent.params)
    agent.rep = representation_from_caches(
        agent.bank, agent.weights, agent.vocab, agent.params
    )
    agent.qw = ProjectionPosterior(
        mu=0.2 * rng.standard_normal(agent.qw.shape), sigma=np.full(agent.qw.shape, 0.8)
    )
    full_mu, full_sigma = elbo_grad(agent, blocks, scale_N=None)
    full = np.concatenate([full_mu.ravel(), full_sigma.ravel()])
    per_block = []
    for X, y in blocks:
        g_mu, g_sigma = elbo_grad(agent, [(X, y)], scale_N=n_blocks)
        per_block.append(np.concatenate([g_mu.ravel(), g_sigma.ravel()]))
    per_block = np.array(per_block)
    picks = rng.integers(0, n_blocks, size=n_draws)
    draws = per_block[picks]
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(n_draws)
    # coordinates with zero spread must match exactly
    gap = np.abs(mean - full)
    ok = np.where(se > 0, gap <= tol_sigmas * se, gap <= 1e-12)
    worst = float(np.max(np.where(se > 0, gap / np.maximum(se, 1e-300), 0.0)))
    return {
        "suite": "unbiasedness",
        "passed": bool(np.all(ok)),
        "worst_gap_in_sigmas": worst,
        "tol_sigmas": tol_sigmas,
        "n_draws": n_draws,
    }


def gradcheck(h: float = 1e-5, tol: float = 1e-4) -> Dict:
    """Analytic objective gradient vs central finite differences."""
    rng = np.random.default_rng(3)
    agent = _toy_agent(seed=2, m=5, d=2)
    X = rng.uniform(-1, 1, size=(20, 2))
    y = rng.standard_normal(20)
    absorb_block(agent.bank, X, y, agent.vocab, agent.params)
    agent.rep = representation_from_caches(
        agent.bank, agent.weights, agent.vocab, agent.params
    )
    agent.qw = ProjectionPosterior(
        mu=0.3 * rng.standard_normal(agent.qw.shape), sigma=np.full(agent.qw.shape, 0.7)
    )
    blocks = [(X, y)]
    g_mu, g_sigma = elbo_grad(agent, blocks)
    base_qw = agent.qw
    max_rel = 0.0
    for which, analytic in (("mu", g_mu), ("sigma", g_sigma)):
        arr = getattr(base_qw, which)
        for idx in np.ndindex(arr.shape):
            fd_vals = []
            for sign in (+1, -1):
                bumped = arr.copy()
                bumped[idx] += sign * h
                agent.qw = ProjectionPosterior(
                    mu=bumped if which == "mu" else base_qw.mu,
                    sigma=bumped if which == "sigma" else base_qw.sigma,
                )
                fd_vals.append(elbo(agent, blocks))
            fd = (fd_vals[0] - fd_vals[1]) / (2 * h)
            denom = max(abs(fd), abs(analytic[idx]), 1e-6)
            max_rel = max(max_rel, abs(fd - analytic[idx]) / denom)
    agent.qw = base_qw
    return {
        "suite": "gradcheck",
        "passed": max_rel <= tol,
        "max_relative_error": max_rel,
        "tol": tol,
    }


def consensus(sizes=(2, 8, 32), tol: float = 1e-10, seed: int = 0) -> Dict:
    """Lossless message passing reaches the all-agent fusion at every node."""
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(4, 2, seed=5)
    R0 = prior_natural(vocab)
    worst = 0.0
    for n in sizes:
        topo = random_tree_topology(n, seed=seed + n)
        reps = {}
        for i in range(n):
            A = rng.standard_normal((4, 4)) * 0.2
            reps[i] = NaturalRepresentation(
                R1=R0.R1 + A @ A.T, R2=rng.standard_normal(4)
            )
        expected = fuse_many([reps[i] for i in range(n)], R0)
        results, _ = run_protocol(topo, reps, R0, rounds=topo.diameter)
        extra, _ = run_protocol(topo, reps, R0, rounds=topo.diameter + 3)
        for i in range(n):
            rep, complete = results[i]
            if not complete:
                return {"suite": "consensus", "passed": False, "reason": f"incomplete at node {i}"}
            worst = max(worst, _rep_error(rep, expected))
            worst = max(worst, _rep_error(extra[i][0], rep))
    return {
        "suite": "consensus",
        "passed": worst <= tol,
        "worst_error": worst,
        "tol": tol,
    }


SUITES = {
    "lemma1-scaling": lemma1_scaling,
    "theorem1-scaling": theorem1_scaling,
    "unbiasedness": unbiasedness,
    "gradcheck": gradcheck,
    "consensus": consensus,
}


def run_suite(name: str) -> Dict:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
