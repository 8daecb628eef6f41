"""Pairwise/global fusion, tree topologies, the sweep protocol, wire codec."""

import numpy as np
import pytest

from coolgp.fusion import (
    FusionMessage,
    ProtocolError,
    Topology,
    decode_message,
    encode_message,
    fuse_many,
    fuse_pair,
    line_topology,
    random_tree_topology,
    run_protocol,
    spanning_tree,
    star_topology,
    tree_diameter,
)
from coolgp.representation import NaturalRepresentation, prior_natural


def random_rep(rng, m=4):
    A = rng.standard_normal((m, m))
    return NaturalRepresentation(R1=A @ A.T + m * np.eye(m), R2=rng.standard_normal(m))


@pytest.fixture
def R0(small_vocab):
    return prior_natural(small_vocab)


def reps_for(vocab, n, seed=0):
    rng = np.random.default_rng(seed)
    return {i: random_rep(rng, vocab.m) for i in range(n)}


def test_fuse_pair_is_commutative(small_vocab, R0):
    reps = reps_for(small_vocab, 2)
    ab = fuse_pair(reps[0], reps[1], R0)
    ba = fuse_pair(reps[1], reps[0], R0)
    assert ab.allclose(ba, atol=1e-12)


def test_fuse_pair_with_prior_is_identity(small_vocab, R0):
    rep = reps_for(small_vocab, 1)[0]
    assert fuse_pair(rep, R0, R0).allclose(rep, atol=1e-12)


def test_fuse_many_matches_sequential_pairs(small_vocab, R0):
    reps = reps_for(small_vocab, 4)
    seq = reps[0]
    for i in range(1, 4):
        seq = fuse_pair(seq, reps[i], R0)
    assert fuse_many(list(reps.values()), R0).allclose(seq, atol=1e-10)


def test_fusion_order_invariance(small_vocab, R0):
    reps = list(reps_for(small_vocab, 5).values())
    a = fuse_many(reps, R0)
    b = fuse_many(reps[::-1], R0)
    assert a.allclose(b, atol=1e-10)


def test_line_and_star_diameters():
    assert tree_diameter(line_topology(6)) == 5
    assert tree_diameter(star_topology(6)) == 2
    assert tree_diameter(line_topology(2)) == 1


def test_random_tree_is_tree_and_seeded():
    a = random_tree_topology(12, seed=4)
    b = random_tree_topology(12, seed=4)
    assert a.is_tree
    assert set(a.edges) == set(b.edges)
    assert len(a.edges) == 11


def test_tree_diameter_rejects_cycles():
    topo = Topology.from_edges([0, 1, 2], [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(ValueError, match="spanning_tree"):
        tree_diameter(topo)


def test_spanning_tree_picks_cheap_edges():
    topo = Topology.from_edges([0, 1, 2], [(0, 1), (1, 2), (2, 0)])
    lat = {(0, 1): 1.0, (1, 2): 1.0, (2, 0): 10.0}
    tree = spanning_tree(topo, lat)
    assert tree.is_tree
    assert (0, 2) not in tree.edges and (2, 0) not in tree.edges


def test_spanning_tree_rejects_disconnected():
    topo = Topology.from_edges([0, 1, 2, 3], [(0, 1), (2, 3)])
    with pytest.raises(ValueError):
        spanning_tree(topo, {(0, 1): 1.0, (2, 3): 1.0})


def test_lossless_protocol_reaches_consensus(small_vocab, R0):
    topo = random_tree_topology(9, seed=2)
    reps = reps_for(small_vocab, 9, seed=3)
    target = fuse_many(list(reps.values()), R0)
    results, log = run_protocol(topo, reps, R0)
    assert all(delivered for *_unused, delivered in log)
    for i in topo.nodes:
        rep, complete = results[i]
        assert complete
        assert rep.allclose(target, atol=1e-9)


def test_extra_rounds_are_a_fixed_point(small_vocab, R0):
    topo = line_topology(5)
    reps = reps_for(small_vocab, 5, seed=6)
    target = fuse_many(list(reps.values()), R0)
    results, _ = run_protocol(topo, reps, R0, rounds=tree_diameter(topo) + 3)
    for i in topo.nodes:
        assert results[i][0].allclose(target, atol=1e-9)


def test_dropped_messages_recovered_by_retransmission(small_vocab, R0):
    topo = line_topology(4)
    reps = reps_for(small_vocab, 4, seed=8)
    target = fuse_many(list(reps.values()), R0)
    dropped = []

    def drop(sender, recipient, t):
        # Kill everything in round 0; retransmissions must still converge.
        if t == 0:
            dropped.append((sender, recipient))
            return True
        return False

    results, _ = run_protocol(topo, reps, R0, rounds=tree_diameter(topo) + 1, drop=drop)
    assert dropped
    for i in topo.nodes:
        rep, complete = results[i]
        assert complete
        assert rep.allclose(target, atol=1e-9)


def test_insufficient_rounds_flagged_incomplete(small_vocab, R0):
    topo = line_topology(5)
    reps = reps_for(small_vocab, 5, seed=9)
    results, _ = run_protocol(topo, reps, R0, rounds=1)
    assert not all(complete for _, complete in results.values())


def test_protocol_requires_tree(small_vocab, R0):
    topo = Topology.from_edges([0, 1, 2], [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(ValueError):
        run_protocol(topo, reps_for(small_vocab, 3), R0)


def test_duplicate_sender_in_round_raises(small_vocab, R0):
    from coolgp.fusion import ProtocolNode

    rep = reps_for(small_vocab, 1)[0]
    node = ProtocolNode(0, rep, neighbors=[1], R0=R0)
    msg = FusionMessage(sender=1, recipient=0, step=0, payload=rep,
                        sources=frozenset({1}))
    with pytest.raises(ProtocolError):
        node.receive([msg, msg])


def test_wire_roundtrip(small_vocab):
    rng = np.random.default_rng(0)
    msg = FusionMessage(sender=3, recipient=7, step=2,
                        payload=random_rep(rng, small_vocab.m),
                        sources=frozenset({3}))
    back = decode_message(encode_message(msg))
    assert (back.sender, back.recipient, back.step) == (3, 7, 2)
    np.testing.assert_allclose(back.payload.R1, msg.payload.R1, rtol=1e-15)
    np.testing.assert_allclose(back.payload.R2, msg.payload.R2, rtol=1e-15)


def test_wire_rejects_truncation(small_vocab):
    rng = np.random.default_rng(1)
    msg = FusionMessage(sender=0, recipient=1, step=0,
                        payload=random_rep(rng, small_vocab.m),
                        sources=frozenset({0}))
    data = encode_message(msg)
    with pytest.raises(ValueError):
        decode_message(data[:-8])


def test_message_size_is_constant(small_vocab):
    """Wire size depends only on the vocabulary, never on data volume."""
    rng = np.random.default_rng(2)
    sizes = set()
    for step in range(3):
        msg = FusionMessage(sender=0, recipient=1, step=step,
                            payload=random_rep(rng, small_vocab.m),
                            sources=frozenset({0}))
        sizes.add(len(encode_message(msg)))
    assert len(sizes) == 1
    m = small_vocab.m
    assert sizes.pop() == 32 + 8 * (m * m + m)
