"""Fusion of natural representations and tree message passing.

In natural coordinates the product-divide combination of two posteriors with a
shared prior is plain addition: R_ab = R_a + R_b - R_0.  The message-passing
protocol runs synchronous rounds on a tree and converges to the all-agent
fusion at every node after diameter-many rounds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import networkx as nx
import numpy as np

from .representation import NaturalRepresentation


class ProtocolError(RuntimeError):
    pass


def fuse_pair(
    Ra: NaturalRepresentation,
    Rb: NaturalRepresentation,
    R0: NaturalRepresentation,
) -> NaturalRepresentation:
    """R_a + R_b - R_0, componentwise; constant cost in data size."""
    if not (Ra.m == Rb.m == R0.m):
        raise ValueError("representations are over different vocabularies")
    return NaturalRepresentation(
        R1=Ra.R1 + Rb.R1 - R0.R1, R2=Ra.R2 + Rb.R2 - R0.R2
    )


def fuse_many(
    reps: Sequence[NaturalRepresentation], R0: NaturalRepresentation
) -> NaturalRepresentation:
    """sum(reps) - (s - 1) R_0; equal to a left fold of fuse_pair."""
    if len(reps) == 0:
        raise ValueError("need at least one representation to fuse")
    s = len(reps)
    if any(r.m != R0.m for r in reps):
        raise ValueError("representations are over different vocabularies")
    R1 = sum(r.R1 for r in reps) - (s - 1) * R0.R1
    R2 = sum(r.R2 for r in reps) - (s - 1) * R0.R2
    return NaturalRepresentation(R1=R1, R2=R2)


# -- topology ----------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Agent ids plus an undirected edge set, with tree/diameter flags."""

    nodes: tuple
    edges: frozenset  # of 2-tuples, canonically ordered
    is_tree: bool
    diameter: int

    @classmethod
    def from_edges(cls, nodes: Iterable, edges: Iterable[tuple]) -> "Topology":
        nodes = tuple(nodes)
        g = nx.Graph()
        g.add_nodes_from(nodes)
        g.add_edges_from(edges)
        connected = len(nodes) > 0 and nx.is_connected(g)
        is_tree = connected and g.number_of_edges() == len(nodes) - 1
        diameter = nx.diameter(g) if connected else -1
        canon = frozenset(tuple(sorted(e, key=str)) for e in g.edges())
        return cls(nodes=nodes, edges=canon, is_tree=is_tree, diameter=diameter)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def neighbors(self, node) -> list:
        return sorted(self.graph().neighbors(node), key=str)


def line_topology(n: int) -> Topology:
    return Topology.from_edges(range(n), [(i, i + 1) for i in range(n - 1)])


def star_topology(n: int) -> Topology:
    return Topology.from_edges(range(n), [(0, i) for i in range(1, n)])


def random_tree_topology(n: int, seed: int) -> Topology:
    """Uniform random labeled tree via a seeded Pruefer sequence."""
    if n == 1:
        return Topology.from_edges([0], [])
    if n == 2:
        return Topology.from_edges([0, 1], [(0, 1)])
    rng = np.random.default_rng(seed)
    prufer = [int(v) for v in rng.integers(0, n, size=n - 2)]
    g = nx.from_prufer_sequence(prufer)
    return Topology.from_edges(range(n), g.edges())


def tree_diameter(topology: Topology) -> int:
    """Longest shortest path, in edges; the protocol's round count t_max."""
    if not topology.is_tree:
        raise ValueError(
            "topology is not a connected tree; reduce it with spanning_tree first"
        )
    return topology.diameter


def spanning_tree(topology: Topology, latencies: Dict[tuple, float]) -> Topology:
    """Minimum-total-latency spanning tree of a connected graph."""
    g = topology.graph()
    for u, v in g.edges():
        key = tuple(sorted((u, v), key=str))
        g[u][v]["weight"] = latencies.get(key, latencies.get((v, u), 1.0))
    if not nx.is_connected(g):
        comps = [sorted(c, key=str) for c in nx.connected_components(g)]
        raise ValueError(f"graph is disconnected; components: {comps}")
    mst = nx.minimum_spanning_tree(g, weight="weight")
    return Topology.from_edges(topology.nodes, mst.edges())


# -- message passing ---------------------------------------------------------


@dataclass(frozen=True)
class FusionMessage:
    """Immutable natural-representation payload exchanged between neighbors.

    ``sources`` is simulator bookkeeping (which agents the payload aggregates);
    it is not part of the wire format.
    """

    sender: object
    recipient: object
    step: int
    payload: NaturalRepresentation
    sources: frozenset = field(default_factory=frozenset)


class ProtocolNode:
    """One agent's view of the message-passing protocol.

    Keeps the latest received message per neighbor; a round with a lost
    message simply reuses the previous payload from that neighbor, so
    information is delayed rather than destroyed.
    """

    def __init__(
        self,
        agent_id,
        rep: NaturalRepresentation,
        neighbors: Sequence,
        R0: NaturalRepresentation,
    ):
        self.id = agent_id
        self.rep = rep
        self.neighbors = list(neighbors)
        self.R0 = R0
        self.store: Dict[object, FusionMessage] = {}

    def _aggregate(self, exclude=None) -> tuple[NaturalRepresentation, frozenset]:
        R1 = self.rep.R1.copy()
        R2 = self.rep.R2.copy()
        sources = {self.id}
        for k, msg in self.store.items():
            if k == exclude:
                continue
            R1 += msg.payload.R1 - self.R0.R1
            R2 += msg.payload.R2 - self.R0.R2
            sources |= msg.sources
        return NaturalRepresentation(R1=R1, R2=R2), frozenset(sources)

    def init_messages(self) -> List[FusionMessage]:
        """Round-0 messages: the bare local representation, one per neighbor."""
        return [
            FusionMessage(
                sender=self.id,
                recipient=j,
                step=0,
                payload=self.rep,
                sources=frozenset({self.id}),
            )
            for j in self.neighbors
        ]

    def receive(self, inbox: Sequence[FusionMessage]) -> None:
        senders = [msg.sender for msg in inbox]
        if len(senders) != len(set(senders)):
            raise ProtocolError(f"duplicate sender in one round at node {self.id}")
        for msg in inbox:
            if msg.sender not in self.neighbors:
                raise ProtocolError(
                    f"node {self.id} received a message from non-neighbor {msg.sender}"
                )
            self.store[msg.sender] = msg

    def step_messages(
        self, inbox: Sequence[FusionMessage], step: int
    ) -> List[FusionMessage]:
        """Fold the inbox into the store and emit next-round messages.

        Outgoing payload to j aggregates the local rep with every stored
        neighbor message except j's own, each with one prior contribution
        removed to avoid double counting.
        """
        self.receive(inbox)
        out = []
        for j in self.neighbors:
            payload, sources = self._aggregate(exclude=j)
            out.append(
                FusionMessage(
                    sender=self.id,
                    recipient=j,
                    step=step,
                    payload=payload,
                    sources=sources,
                )
            )
        return out

    def assemble_global(
        self, n_total: Optional[int] = None
    ) -> tuple[NaturalRepresentation, bool]:
        """Best-effort global representation plus a completeness flag."""
        rep, sources = self._aggregate(exclude=None)
        complete = all(k in self.store for k in self.neighbors)
        if n_total is not None:
            complete = complete and len(sources) == n_total
        return rep, complete


def run_protocol(
    topology: Topology,
    reps: Dict[object, NaturalRepresentation],
    R0: NaturalRepresentation,
    rounds: Optional[int] = None,
    drop: Optional[callable] = None,
) -> tuple[Dict[object, tuple[NaturalRepresentation, bool]], list]:
    """Drive the synchronous protocol for a number of rounds.

    ``drop(sender, recipient, round)`` may veto individual deliveries (the
    simulator's loss model); dropped messages are logged, and senders
    retransmit their latest aggregate next round.  Returns each node's
    assembled representation and completeness flag, plus the delivery log.
    """
    if not topology.is_tree:
        raise ValueError(
            "protocol requires a tree topology; reduce with spanning_tree first"
        )
    if rounds is None:
        rounds = topology.diameter
    nodes = {
        i: ProtocolNode(i, reps[i], topology.neighbors(i), R0)
        for i in topology.nodes
    }
    log = []
    outgoing = {i: nodes[i].init_messages() for i in topology.nodes}
    for t in range(rounds):
        inboxes: Dict[object, List[FusionMessage]] = {i: [] for i in topology.nodes}
        for i in topology.nodes:
            for msg in outgoing[i]:
                delivered = drop is None or not drop(msg.sender, msg.recipient, t)
                log.append((t, msg.sender, msg.recipient, delivered))
                if delivered:
                    inboxes[msg.recipient].append(msg)
        outgoing = {
            i: nodes[i].step_messages(inboxes[i], step=t + 1) for i in topology.nodes
        }
    n_total = len(topology.nodes)
    return {i: nodes[i].assemble_global(n_total) for i in topology.nodes}, log


# -- wire format -------------------------------------------------------------

_HEADER = struct.Struct("<qqqq")  # m, sender, recipient, step


def encode_message(msg: FusionMessage) -> bytes:
    """(m, from, to, step) header plus row-major float64 R1 then R2."""
    m = msg.payload.m
    head = _HEADER.pack(m, int(msg.sender), int(msg.recipient), int(msg.step))
    body = msg.payload.R1.astype("<f8").tobytes() + msg.payload.R2.astype("<f8").tobytes()
    return head + body


def decode_message(data: bytes) -> FusionMessage:
    m, sender, recipient, step = _HEADER.unpack_from(data)
    expect = _HEADER.size + 8 * (m * m + m)
    if len(data) != expect:
        raise ValueError(f"message has {len(data)} bytes, expected {expect}")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    R1 = flat[: m * m].reshape(m, m).copy()
    R2 = flat[m * m :].copy()
    return FusionMessage(
        sender=sender,
        recipient=recipient,
        step=step,
        payload=NaturalRepresentation(R1=0.5 * (R1 + R1.T), R2=R2),
        sources=frozenset({sender}),
    )
