//! The learning dynamics: compressed gossip with error feedback, its
//! memory-efficient reformulation, and the uncompressed oracle process.
//!
//! All belief state lives in the log domain (nats) and is never normalized
//! in place; `normalize` produces probability vectors on demand. One round
//! is synchronous: every agent compresses the gap between its belief and its
//! public estimate from the pre-round state, every agent applies every
//! received correction, and only then do beliefs move.
//!
//! The standard update keeps one estimate vector per neighbor. The
//! memory-efficient update keeps a single aggregate in its place and yields
//! the same trajectory: the aggregate is initialized consistently and each
//! round absorbs the same mixing-weighted corrections that the standard
//! update reads from its per-neighbor copies.

use std::collections::BTreeMap;

use crate::compression::{compress, densify, CompressedVector, CompressionSpec};
use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::rng::StreamKey;
use crate::world::WorldModel;

/// Which belief-update formulation a network runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// Per-neighbor estimate vectors.
    Standard,
    /// One aggregate vector in place of the per-neighbor copies.
    MemoryEfficient,
}

/// One agent's local state, all in the log domain.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    /// Unnormalized log belief over hypotheses.
    pub log_mu: Vec<f64>,
    /// The public estimate of `log_mu` that every neighbor also tracks.
    pub log_mu_hat: Vec<f64>,
    /// Memory-efficient aggregate: mixing-weighted sum of estimates over
    /// the closed neighborhood. Empty in standard mode.
    pub log_c: Vec<f64>,
    /// Standard mode: this agent's copy of each neighbor's estimate.
    /// Empty in memory-efficient mode.
    pub neighbor_hat: BTreeMap<usize, Vec<f64>>,
}

/// The whole network plus an optional paired oracle process.
#[derive(Clone, Debug)]
pub struct NetworkState {
    pub agents: Vec<AgentState>,
    /// Rounds completed so far.
    pub round: u64,
    pub gamma: f64,
    pub mode: UpdateMode,
    /// Log state of the uncompressed oracle when pairing is enabled.
    pub log_nu: Option<Vec<Vec<f64>>>,
}

/// Uniform prior rows for n agents over m hypotheses.
pub fn uniform_priors(n: usize, m: usize) -> Vec<Vec<f64>> {
    vec![vec![1.0 / m as f64; m]; n]
}

/// Smallest prior mass across agents and hypotheses.
pub fn min_prior_mass(priors: &[Vec<f64>]) -> f64 {
    priors
        .iter()
        .flat_map(|row| row.iter().copied())
        .fold(f64::INFINITY, f64::min)
}

/// Sets up the network at round zero. Estimates start at one (log zero) so
/// the first message carries the full prior; the oracle, when enabled,
/// starts from the same priors.
pub fn init_state(
    world: &WorldModel,
    matrix: &MixingMatrix,
    gamma: f64,
    priors: &[Vec<f64>],
    mode: UpdateMode,
    with_oracle: bool,
) -> Result<NetworkState> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::BadGamma(gamma));
    }
    if matrix.n != world.n {
        return Err(Error::DimensionMismatch {
            expected: world.n,
            got: matrix.n,
        });
    }
    if priors.len() != world.n {
        return Err(Error::DimensionMismatch {
            expected: world.n,
            got: priors.len(),
        });
    }
    let m = world.m;
    let mut agents = Vec::with_capacity(world.n);
    for (i, prior) in priors.iter().enumerate() {
        if prior.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: prior.len(),
            });
        }
        let mut sum = 0.0;
        for (theta, &p) in prior.iter().enumerate() {
            if p <= 0.0 || !p.is_finite() {
                return Err(Error::BadPrior {
                    agent: i,
                    hypothesis: theta,
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadDistribution {
                what: format!("prior of agent {i}"),
                problem: "does not sum to 1",
            });
        }
        let log_mu: Vec<f64> = prior.iter().map(|&p| p.ln()).collect();
        let neighbor_hat = match mode {
            UpdateMode::Standard => matrix.neighbors[i]
                .iter()
                .map(|&(j, _)| (j, vec![0.0; m]))
                .collect(),
            UpdateMode::MemoryEfficient => BTreeMap::new(),
        };
        let log_c = match mode {
            UpdateMode::Standard => Vec::new(),
            UpdateMode::MemoryEfficient => vec![0.0; m],
        };
        agents.push(AgentState {
            log_mu,
            log_mu_hat: vec![0.0; m],
            log_c,
            neighbor_hat,
        });
    }
    let log_nu = with_oracle.then(|| agents.iter().map(|a| a.log_mu.clone()).collect());
    Ok(NetworkState {
        agents,
        round: 0,
        gamma,
        mode,
        log_nu,
    })
}

/// Runs one synchronous round: compress, exchange, update beliefs with this
/// round's observations, and advance the paired oracle on the same
/// observations. Returns the messages sent.
pub fn step(
    state: &mut NetworkState,
    world: &WorldModel,
    matrix: &MixingMatrix,
    spec: &CompressionSpec,
    signals: &[usize],
    key: &StreamKey,
) -> Result<Vec<CompressedVector>> {
    if signals.len() != state.agents.len() {
        return Err(Error::DimensionMismatch {
            expected: state.agents.len(),
            got: signals.len(),
        });
    }
    let loglik: Vec<Vec<f64>> = signals
        .iter()
        .enumerate()
        .map(|(i, &s)| world.log_likelihoods_for_signal(i, s))
        .collect::<Result<_>>()?;
    let messages = match state.mode {
        UpdateMode::Standard => round_standard(state, matrix, spec, &loglik, key)?,
        UpdateMode::MemoryEfficient => round_memory_efficient(state, matrix, spec, &loglik, key)?,
    };
    if let Some(log_nu) = &mut state.log_nu {
        round_oracle(log_nu, matrix, state.gamma, &loglik);
    }
    state.round += 1;
    Ok(messages)
}

/// Compression phase shared by both formulations: every agent compresses
/// the gap between its belief and its public estimate, from pre-round state.
fn compress_phase(
    state: &NetworkState,
    spec: &CompressionSpec,
    key: &StreamKey,
) -> Result<Vec<CompressedVector>> {
    let t = state.round;
    state
        .agents
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let diff: Vec<f64> = agent
                .log_mu
                .iter()
                .zip(&agent.log_mu_hat)
                .map(|(&mu, &hat)| mu - hat)
                .collect();
            let mut rng = key.compression(t, i as u64);
            compress(spec, &diff, &mut rng)
        })
        .collect()
}

/// Standard update: apply corrections to the own estimate and to every
/// stored neighbor estimate, then move beliefs along the estimate
/// disagreement plus the log likelihood of this round's signal.
pub fn round_standard(
    state: &mut NetworkState,
    matrix: &MixingMatrix,
    spec: &CompressionSpec,
    loglik: &[Vec<f64>],
    key: &StreamKey,
) -> Result<Vec<CompressedVector>> {
    let messages = compress_phase(state, spec, key)?;
    let dense: Vec<Vec<f64>> = messages.iter().map(densify).collect();
    let n = state.agents.len();
    for i in 0..n {
        let agent = &mut state.agents[i];
        add_in_place(&mut agent.log_mu_hat, &dense[i]);
        for (&j, hat) in agent.neighbor_hat.iter_mut() {
            add_in_place(hat, &dense[j]);
        }
    }
    let gamma = state.gamma;
    for (i, agent) in state.agents.iter_mut().enumerate() {
        let m = agent.log_mu.len();
        let mut mix = vec![0.0; m];
        for &(j, w) in &matrix.neighbors[i] {
            let hat_j = &agent.neighbor_hat[&j];
            for theta in 0..m {
                mix[theta] += w * (hat_j[theta] - agent.log_mu_hat[theta]);
            }
        }
        for theta in 0..m {
            agent.log_mu[theta] += gamma * mix[theta] + loglik[i][theta];
        }
    }
    Ok(messages)
}

/// Memory-efficient update: identical messages and trajectory, but the
/// per-neighbor copies are replaced by one aggregate that absorbs the
/// mixing-weighted corrections of the closed neighborhood.
pub fn round_memory_efficient(
    state: &mut NetworkState,
    matrix: &MixingMatrix,
    spec: &CompressionSpec,
    loglik: &[Vec<f64>],
    key: &StreamKey,
) -> Result<Vec<CompressedVector>> {
    let messages = compress_phase(state, spec, key)?;
    let dense: Vec<Vec<f64>> = messages.iter().map(densify).collect();
    let gamma = state.gamma;
    for (i, agent) in state.agents.iter_mut().enumerate() {
        for (theta, c) in agent.log_c.iter_mut().enumerate() {
            let mut weighted = matrix.diag[i] * dense[i][theta];
            for &(j, w) in &matrix.neighbors[i] {
                weighted += w * dense[j][theta];
            }
            *c += weighted;
        }
        add_in_place(&mut agent.log_mu_hat, &dense[i]);
        for (theta, mu) in agent.log_mu.iter_mut().enumerate() {
            *mu += gamma * (agent.log_c[theta] - agent.log_mu_hat[theta]) + loglik[i][theta];
        }
    }
    Ok(messages)
}

/// Oracle process: exact lazy gossip on log beliefs, no compression.
pub fn round_oracle(
    log_nu: &mut [Vec<f64>],
    matrix: &MixingMatrix,
    gamma: f64,
    loglik: &[Vec<f64>],
) {
    let before: Vec<Vec<f64>> = log_nu.to_vec();
    for (i, row) in log_nu.iter_mut().enumerate() {
        let m = row.len();
        let mut mix = vec![0.0; m];
        for &(j, w) in &matrix.neighbors[i] {
            for theta in 0..m {
                mix[theta] += w * (before[j][theta] - before[i][theta]);
            }
        }
        for theta in 0..m {
            row[theta] += gamma * mix[theta] + loglik[i][theta];
        }
    }
}

fn add_in_place(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Normalizes a log-domain row to a probability vector, shifting by the
/// maximum so the exponentials cannot overflow.
pub fn normalize(log_row: &[f64]) -> Vec<f64> {
    let max = log_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_row.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Step size guaranteed by the convergence theory:
/// gamma* = delta^2 omega / (32 delta + 2 delta^2 + 8 beta^2
///          + 4 delta beta^2 - 8 delta omega).
pub fn theoretical_gamma(delta: f64, beta: f64, omega: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadSpectral {
            what: "delta",
            value: delta,
        });
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::BadSpectral {
            what: "beta",
            value: beta,
        });
    }
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::BadOmega(omega));
    }
    let den = 32.0 * delta + 2.0 * delta * delta + 8.0 * beta * beta + 4.0 * delta * beta * beta
        - 8.0 * delta * omega;
    Ok(delta * delta * omega / den)
}
