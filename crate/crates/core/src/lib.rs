//! Distributed social learning over networks with compressed belief exchange.
//!
//! Agents on a connected graph keep beliefs over a finite hypothesis set,
//! update them with private observations, and gossip compressed belief
//! corrections with error feedback. The crate provides the compression
//! operators, graph and mixing-matrix construction, ground-truth world
//! models, the learning dynamics themselves, and diagnostics that check the
//! convergence theory's constants and inequalities on recorded runs.

pub mod compression;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod learner;
pub mod rng;
pub mod world;

pub use compression::{
    compress, densify, CompressedVector, CompressionKind, CompressionSpec, Payload,
};
pub use diagnostics::{
    check_recursion, lyapunov_trace, nonasymptotic_check, ratio_rate, record_paired_run,
    theory_constants, LyapunovTrace, NonasymptoticReport, PairedRun, RecursionReport,
    TheoryConstants,
};
pub use error::{Error, Result};
pub use graph::{
    build_graph, lazy_matrix, mixing_matrix, spectral_gap, GraphKind, MixingMatrix, Topology,
};
pub use learner::{
    init_state, min_prior_mass, normalize, step, theoretical_gamma, uniform_priors, AgentState,
    NetworkState, UpdateMode,
};
pub use rng::{
    derive_rng, StreamKey, PURPOSE_COMPRESS, PURPOSE_GRAPH, PURPOSE_SIGNALS, PURPOSE_WORLD,
};
pub use world::{kl, objective, random_world, sample_signal, ObjectiveProfile, WorldModel};
