//! Error type shared by all library modules.

use thiserror::Error;

/// Everything that can go wrong while building worlds, graphs, or running
/// the learning dynamics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector must be non-empty")]
    EmptyVector,

    #[error("vector contains a non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("sparsity k={k} is outside 1..={m}")]
    BadSparsity { k: usize, m: usize },

    #[error("quantizer width {bits} bits is outside 2..={scalar_bits}")]
    BadQuantizerBits { bits: u32, scalar_bits: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{kind} graph needs at least {min} nodes, got {n}")]
    TooFewNodes {
        kind: &'static str,
        min: usize,
        n: usize,
    },

    #[error("torus needs n = r*c with r, c >= 2; n={0} has no such factorization")]
    TorusShape(usize),

    #[error("edge probability {0} is outside [0, 1]")]
    BadEdgeProbability(f64),

    #[error("no connected graph found in {attempts} attempts (p={p})")]
    ConnectivityRetriesExhausted { attempts: usize, p: f64 },

    #[error("graph is disconnected or mixing matrix has a repeated unit eigenvalue")]
    Disconnected,

    #[error("probability vector {what}: {problem}")]
    BadDistribution { what: String, problem: &'static str },

    #[error("KL divergence is infinite: truth puts mass {mass} on symbol {symbol} where the model puts zero")]
    KlInfinite { symbol: usize, mass: f64 },

    #[error("no world with a unique optimum of gap >= {min_gap} found in {attempts} attempts")]
    WorldRetriesExhausted { attempts: usize, min_gap: f64 },

    #[error("step size gamma={0} is outside (0, 1]")]
    BadGamma(f64),

    #[error("quality factor omega={0} is outside (0, 1]")]
    BadOmega(f64),

    #[error("spectral quantity {what}={value} is outside (0, 1]")]
    BadSpectral { what: &'static str, value: f64 },

    #[error("signal {signal} is outside agent {agent}'s alphabet of size {alphabet}")]
    SignalOutOfRange {
        agent: usize,
        signal: usize,
        alphabet: usize,
    },

    #[error("prior for agent {agent} has a non-positive entry at hypothesis {hypothesis}")]
    BadPrior { agent: usize, hypothesis: usize },

    #[error("every hypothesis is optimal; the second-best gap is undefined")]
    DegenerateObjective,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
