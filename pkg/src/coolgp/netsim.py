"""Deterministic simulation of the multi-agent system.

Drives streams of data blocks through a set of agents, interleaves periodic
fusion sweeps over a tree topology with Bernoulli transmission loss, and runs
a centralized-server baseline in which a dropped upload is irrecoverable for
that round.  Everything is a pure function of (config, seed) via named RNG
substreams.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent import Agent, LearnConfig
from .fusion import (
    Topology,
    fuse_many,
    line_topology,
    random_tree_topology,
    run_protocol,
    star_topology,
    tree_diameter,
)
from .kernels import DomainParams, StandardizedVocabulary, make_vocabulary
from .representation import NaturalRepresentation, prior_natural

METRICS_HEADER = "batch_index,agent_id,rmse_pre,rmse_post,ess,wall_ms"


def substream(seed: int, *tags: str) -> np.random.Generator:
    """Named RNG substream: independent components from one master seed."""
    keys = [seed] + [zlib.crc32(t.encode()) for t in tags]
    return np.random.default_rng(keys)


@dataclass
class SimConfig:
    n_agents: int = 2
    topology_kind: str = "line"  # line | star | random-tree | custom
    loss_rate: float = 0.0
    fusion_period: int = 10
    seed: int = 0
    # agent template
    vocab_size: int = 50
    bank_size: int = 10
    d: int = 6
    sigma_n: float = 0.1
    sigma_s: float = 1.0
    learn_config: LearnConfig = field(default_factory=LearnConfig)
    custom_edges: Optional[List[tuple]] = None
    mode: str = "decentralized"  # decentralized | centralized

    def __post_init__(self):
        if not (0.0 <= self.loss_rate < 1.0):
            raise ValueError("loss_rate must lie in [0, 1)")
        if self.fusion_period < 1:
            raise ValueError("fusion_period must be at least 1")
        if self.mode not in ("decentralized", "centralized"):
            raise ValueError(f"unknown mode: {self.mode}")

    def make_topology(self) -> Topology:
        if self.topology_kind == "line":
            return line_topology(self.n_agents)
        if self.topology_kind == "star":
            return star_topology(self.n_agents)
        if self.topology_kind == "random-tree":
            rng = substream(self.seed, "topology")
            return random_tree_topology(self.n_agents, int(rng.integers(2**31)))
        if self.topology_kind == "custom":
            if self.custom_edges is None:
                raise ValueError("custom topology needs custom_edges")
            return Topology.from_edges(range(self.n_agents), self.custom_edges)
        raise ValueError(f"unknown topology kind: {self.topology_kind}")


@dataclass
class TraceRow:
    batch_index: int
    agent_id: int
    rmse_pre: float
    rmse_post: float
    ess: float
    wall_ms: float


@dataclass
class SimTrace:
    rows: List[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def checkpoints(self) -> List[int]:
        return sorted({r.batch_index for r in self.rows})

    def at(self, batch_index: int) -> List[TraceRow]:
        return [r for r in self.rows if r.batch_index == batch_index]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(METRICS_HEADER + "\n")
            for r in self.rows:
                fh.write(
                    f"{r.batch_index},{r.agent_id},{r.rmse_pre:.17g},"
                    f"{r.rmse_post:.17g},{r.ess:.17g},{r.wall_ms:.17g}\n"
                )


def dispatch_stream(n_blocks: int, n_agents: int, seed: int) -> np.ndarray:
    """Uniform i.i.d. assignment of block indices to agents."""
    if n_blocks < 1 or n_agents < 1:
        raise ValueError("need at least one block and one agent")
    rng = substream(seed, "dispatch")
    return rng.integers(0, n_agents, size=n_blocks)


def run_fusion_sweep(
    agents: Sequence[Agent],
    topology: Topology,
    loss_rate: float,
    seed: int,
) -> Tuple[Dict[int, Tuple[NaturalRepresentation, bool]], list]:
    """One synchronous sweep; under loss, runs a 2x-diameter retry budget.

    Fuses each agent's rep snapshot as published at round 0; results are
    stored on the agents as their fused representations.
    """
    t_max = tree_diameter(topology)
    rounds = t_max if loss_rate == 0.0 else 2 * t_max
    reps = {a.id: a.rep for a in agents}
    R0 = prior_natural(agents[0].vocab)
    rng = substream(seed, "loss")
    drop = None
    if loss_rate > 0.0:
        drop = lambda s, r, t: bool(rng.random() < loss_rate)
    results, log = run_protocol(topology, reps, R0, rounds=rounds, drop=drop)
    for a in agents:
        a.fused_rep = results[a.id][0]
    return results, log


def centralized_baseline(
    agents: Sequence[Agent],
    loss_rate: float,
    seed: int,
) -> Tuple[NaturalRepresentation, List[int]]:
    """Star-server aggregation with irrecoverable upload loss.

    Each agent's single transmission survives with probability 1 - loss_rate;
    the server fuses only the survivors and broadcasts the result back (the
    return leg is assumed lossless).  Zero survivors yield the prior.
    """
    if len(agents) == 0:
        raise ValueError("need at least one agent")
    R0 = prior_natural(agents[0].vocab)
    rng = substream(seed, "loss")
    survivors = [a.id for a in agents if rng.random() >= loss_rate]
    if survivors:
        fused = fuse_many([a.rep for a in agents if a.id in set(survivors)], R0)
    else:
        fused = R0
    for a in agents:
        a.fused_rep = fused
    return fused, survivors


def _rmse(agent: Agent, X: np.ndarray, y: np.ndarray, use_fused: bool) -> float:
    mean, _ = agent.predict(X, use_fused=use_fused)
    return float(np.sqrt(np.mean((mean - y) ** 2)))


def build_agents(config: SimConfig, vocab: StandardizedVocabulary) -> List[Agent]:
    agents = []
    # One bank of projection samples, drawn up front and shared by every
    # agent: fusion is only meaningful when all parties weight the same
    # mixture components.
    bank_seed = int(substream(config.seed, "bank").integers(2**31))
    for i in range(config.n_agents):
        params = DomainParams(
            W=np.zeros((vocab.q, config.d)),
            sigma_s=config.sigma_s,
            sigma_n=config.sigma_n,
        )
        agents.append(
            Agent(
                agent_id=i,
                vocab=vocab,
                params=params,
                bank_size=config.bank_size,
                bank_seed=bank_seed,
                d_in=config.d,
                learn_config=replace(
                    config.learn_config,
                    grad_seed=int(substream(config.seed, "gradient", str(i)).integers(2**31)),
                ),
            )
        )
    return agents


def run_experiment(
    config: SimConfig,
    streams: Sequence[Sequence[tuple[np.ndarray, np.ndarray]]],
    testsets: Sequence[tuple[np.ndarray, np.ndarray]],
    assignment: Optional[Sequence[tuple[int, int, int]]] = None,
) -> SimTrace:
    """Interleave dispatch, ingestion, and periodic pre/post-RMSE checkpoints.

    ``streams`` holds one block list per domain; agents are assigned domains
    round-robin.  Every agent is scored on the pooled test set spanning all
    domains, so the pre-fusion numbers expose each agent's blind spots and
    the post-fusion numbers show how much the network filled them in.
    ``assignment`` optionally overrides dispatch as explicit
    (domain, block_index, agent_id) triples in arrival order.
    """
    if len(testsets) != len(streams):
        raise ValueError("need one test set per stream")
    for dom, (X_test, _) in enumerate(testsets):
        if np.atleast_2d(X_test).shape[1] != config.d:
            raise ValueError(
                f"test set {dom} dimension != configured input dimension {config.d}"
            )
    for dom, blocks in enumerate(streams):
        for X, _ in blocks:
            if np.atleast_2d(X).shape[1] != config.d:
                raise ValueError(
                    f"stream {dom} block dimension != configured input dimension {config.d}"
                )

    vocab = make_vocabulary(
        config.vocab_size, config.d, int(substream(config.seed, "vocab").integers(2**31))
    )
    agents = build_agents(config, vocab)
    topology = config.make_topology()
    domain_of = {a.id: a.id % len(streams) for a in agents}

    if assignment is None:
        assignment = []
        order_rng = substream(config.seed, "dispatch", "order")
        pending = [
            (dom, idx) for dom, blocks in enumerate(streams) for idx in range(len(blocks))
        ]
        order = order_rng.permutation(len(pending))
        for dom, idx in (pending[i] for i in order):
            members = [a.id for a in agents if domain_of[a.id] == dom]
            pick_rng = substream(config.seed, "dispatch", f"{dom}:{idx}")
            assignment.append((dom, idx, members[int(pick_rng.integers(len(members)))]))

    trace = SimTrace()
    X_pool = np.vstack([np.atleast_2d(X) for X, _ in testsets])
    y_pool = np.concatenate([np.atleast_1d(y) for _, y in testsets])

    def checkpoint(batch_index: int) -> None:
        pre = {}
        wall = {}
        for a in agents:
            t0 = time.perf_counter()
            pre[a.id] = _rmse(a, X_pool, y_pool, use_fused=False)
            wall[a.id] = (time.perf_counter() - t0) * 1e3
        if config.mode == "centralized":
            centralized_baseline(agents, config.loss_rate, config.seed + batch_index)
        else:
            run_fusion_sweep(agents, topology, config.loss_rate, config.seed + batch_index)
        for a in agents:
            post = _rmse(a, X_pool, y_pool, use_fused=True)
            trace.append(
                TraceRow(
                    batch_index=batch_index,
                    agent_id=a.id,
                    rmse_pre=pre[a.id],
                    rmse_post=post,
                    ess=a.ess,
                    wall_ms=wall[a.id],
                )
            )

    n_batches = len(assignment)
    if n_batches == 0:
        checkpoint(0)
        return trace
    for i, (dom, idx, agent_id) in enumerate(assignment, start=1):
        X, y = streams[dom][idx]
        agents[agent_id].ingest_block(X, y)
        if i % config.fusion_period == 0 or i == n_batches:
            checkpoint(i)
    return trace
