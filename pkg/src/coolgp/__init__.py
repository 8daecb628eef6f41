"""Collective online GP learning with decentralized natural-parameter fusion."""

__version__ = "0.1.0"

from .kernels import (
    DomainParams,
    StandardizedVocabulary,
    gram_cross,
    k_ff,
    k_fu,
    k_uu,
    make_vocabulary,
)
from .representation import (
    MomentParameters,
    NaturalRepresentation,
    ProjectionPosterior,
    SampleBank,
    absorb_block,
    deterministic_bank,
    effective_sample_size,
    exact_block_E,
    importance_weights,
    log_importance_weights,
    moments_from_natural,
    natural_from_moments,
    normalized_weights,
    prior_natural,
    representation_from_caches,
    sample_bank_init,
)
from .agent import Agent, LearnConfig, elbo, elbo_grad, hyper_step, kl_qu, kl_qw
from .fusion import (
    FusionMessage,
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
from .netsim import (
    SimConfig,
    SimTrace,
    centralized_baseline,
    dispatch_stream,
    run_experiment,
    run_fusion_sweep,
)
from .synthetic import SyntheticSpec, generate, read_dataset, write_dataset
