//! Experiment configuration: a TOML file of `[section] key = value` pairs.
//!
//! Every validation error names the offending field so a typo in a config
//! file points straight at the line to fix.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use complearn::{CompressionSpec, GraphKind, UpdateMode};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySection,
    pub world: WorldSection,
    pub compression: CompressionSection,
    pub run: RunSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// One of "path", "ring", "torus", "erdos_renyi", "complete", "file".
    pub kind: String,
    #[serde(default)]
    pub n: Option<usize>,
    /// Edge probability for erdos_renyi; defaults to 2 ln(n) / n.
    #[serde(default)]
    pub p: Option<f64>,
    /// Edge-list file for kind = "file".
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    /// Number of hypotheses m.
    pub hypotheses: usize,
    /// Signal alphabet size per agent.
    #[serde(default = "default_alphabet")]
    pub alphabet_size: usize,
    /// Likelihood floor: every supported symbol has mass >= this.
    #[serde(default = "default_floor")]
    pub likelihood_floor: f64,
    /// Resample generated worlds until the optimum is unique.
    #[serde(default = "default_true")]
    pub unique_optimum: bool,
    /// Minimum second-best objective gap for generated worlds.
    #[serde(default)]
    pub min_gap: f64,
    /// Load a saved world instead of generating one.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionSection {
    /// One of "full", "top_k", "rand_k", "qsgd", "qsgd_deterministic".
    pub operator: String,
    /// Kept coordinates for sparsifiers.
    #[serde(default)]
    pub k: Option<usize>,
    /// Alternative to `k`: keep ceil(ratio * m) coordinates.
    #[serde(default)]
    pub ratio: Option<f64>,
    /// Bits per coordinate for the quantizers.
    #[serde(default)]
    pub quantizer_bits: Option<u32>,
    /// Bits of one uncompressed scalar (word size b).
    #[serde(default = "default_scalar_bits")]
    pub scalar_bits: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub rounds: u64,
    #[serde(default)]
    pub seed: u64,
    /// "theoretical", "grid", or a number in (0, 1].
    #[serde(default = "default_gamma")]
    pub gamma: GammaValue,
    /// "standard" or "memory_efficient"; the trajectories coincide.
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Monte Carlo repetitions.
    #[serde(default = "default_runs")]
    pub runs: u64,
    /// Convergence-error threshold for stopping and rounds-to-threshold.
    #[serde(default = "default_error_threshold")]
    pub error_threshold: f64,
    /// Belief mass below which a non-optimal hypothesis counts as rejected.
    #[serde(default = "default_belief_threshold")]
    pub belief_threshold: f64,
    /// Stop a run once the convergence error drops below the threshold.
    #[serde(default)]
    pub early_stop: bool,
    /// "fixed" replays one observation table; "resampled" draws fresh
    /// observations per Monte Carlo run.
    #[serde(default = "default_signal_mode")]
    pub signal_mode: String,
    /// Failure probability in the non-asymptotic bound.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Repeated runs used to estimate expectations over compression
    /// randomness in the diagnostics.
    #[serde(default = "default_repeats")]
    pub repeats: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "n" (network size) or "m" (hypothesis count).
    pub parameter: String,
    pub values: Vec<usize>,
    /// Compression ratios; each becomes k = ceil(ratio * m) for sparsifiers.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GammaValue {
    Fixed(f64),
    Named(String),
}

/// Stepsize selection after validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    Theoretical,
    Grid,
    Fixed(f64),
}

fn default_alphabet() -> usize {
    20
}
fn default_floor() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}
fn default_scalar_bits() -> u32 {
    64
}
fn default_gamma() -> GammaValue {
    GammaValue::Named("theoretical".to_string())
}
fn default_mode() -> String {
    "standard".to_string()
}
fn default_runs() -> u64 {
    1
}
fn default_error_threshold() -> f64 {
    1e-5
}
fn default_belief_threshold() -> f64 {
    1e-8
}
fn default_signal_mode() -> String {
    "fixed".to_string()
}
fn default_rho() -> f64 {
    0.05
}
fn default_repeats() -> u64 {
    10
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_str_validated(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).context("parsing config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.graph_kind()?;
        if self.topology.kind != "file" {
            let n = self
                .topology
                .n
                .context("topology.n is required unless topology.kind = \"file\"")?;
            if n == 0 {
                bail!("topology.n must be positive");
            }
        } else if self.topology.file.is_none() {
            bail!("topology.file is required when topology.kind = \"file\"");
        }
        if let Some(p) = self.topology.p {
            if !(p > 0.0 && p <= 1.0) {
                bail!("topology.p must lie in (0, 1], got {p}");
            }
        }
        if self.world.hypotheses < 2 {
            bail!("world.hypotheses must be at least 2");
        }
        if self.world.alphabet_size < 2 {
            bail!("world.alphabet_size must be at least 2");
        }
        let floor_total = self.world.likelihood_floor * self.world.alphabet_size as f64;
        if !(self.world.likelihood_floor > 0.0 && floor_total < 1.0) {
            bail!(
                "world.likelihood_floor must be positive with floor * alphabet_size < 1, got {}",
                self.world.likelihood_floor
            );
        }
        if self.world.min_gap < 0.0 {
            bail!("world.min_gap must be nonnegative");
        }
        if let Some(sweep) = &self.sweep {
            match sweep.parameter.as_str() {
                "n" | "m" => {}
                other => bail!("sweep.parameter must be \"n\" or \"m\", got \"{other}\""),
            }
            if sweep.values.is_empty() {
                bail!("sweep.values must not be empty");
            }
            if sweep.ratios.is_empty() {
                bail!("sweep.ratios must not be empty");
            }
            for &v in &sweep.values {
                if v < 2 {
                    bail!("sweep.values entries must be at least 2, got {v}");
                }
            }
            for &r in &sweep.ratios {
                if !(r > 0.0 && r <= 1.0) {
                    bail!("sweep.ratios entries must lie in (0, 1], got {r}");
                }
            }
        }
        // A sweep fills in the sparsity per cell, so probe with its first
        // ratio when the compression section leaves k and ratio open.
        if self.sweep.is_some() && self.compression.k.is_none() && self.compression.ratio.is_none()
        {
            let mut probe = self.clone();
            probe.compression.ratio = self.sweep.as_ref().map(|s| s.ratios[0]);
            probe.compression_spec(self.world.hypotheses)?;
        } else {
            self.compression_spec(self.world.hypotheses)?;
        }
        if self.run.rounds == 0 {
            bail!("run.rounds must be positive");
        }
        if self.run.runs == 0 {
            bail!("run.runs must be positive");
        }
        if self.run.repeats == 0 {
            bail!("run.repeats must be positive");
        }
        self.gamma_policy()?;
        self.update_mode()?;
        if !(self.run.error_threshold > 0.0 && self.run.error_threshold < 1.0) {
            bail!(
                "run.error_threshold must lie in (0, 1), got {}",
                self.run.error_threshold
            );
        }
        if !(self.run.belief_threshold > 0.0 && self.run.belief_threshold < 1.0) {
            bail!(
                "run.belief_threshold must lie in (0, 1), got {}",
                self.run.belief_threshold
            );
        }
        match self.run.signal_mode.as_str() {
            "fixed" | "resampled" => {}
            other => bail!("run.signal_mode must be \"fixed\" or \"resampled\", got \"{other}\""),
        }
        if !(self.run.rho > 0.0 && self.run.rho < 1.0) {
            bail!("run.rho must lie in (0, 1), got {}", self.run.rho);
        }
        Ok(())
    }

    pub fn graph_kind(&self) -> Result<GraphKind> {
        Ok(match self.topology.kind.as_str() {
            "path" => GraphKind::Path,
            "ring" => GraphKind::Ring,
            "torus" => GraphKind::Torus,
            "erdos_renyi" => GraphKind::ErdosRenyi,
            "complete" => GraphKind::Complete,
            "file" => GraphKind::Custom,
            other => bail!(
                "topology.kind must be one of path, ring, torus, erdos_renyi, complete, file; got \"{other}\""
            ),
        })
    }

    /// Builds the operator for dimension `m`, translating `ratio` into
    /// k = ceil(ratio * m) when `k` is absent.
    pub fn compression_spec(&self, m: usize) -> Result<CompressionSpec> {
        let c = &self.compression;
        let sparsity = || -> Result<usize> {
            match (c.k, c.ratio) {
                (Some(_), Some(_)) => {
                    bail!("compression.k and compression.ratio are mutually exclusive")
                }
                (Some(k), None) => Ok(k),
                (None, Some(r)) => {
                    if !(r > 0.0 && r <= 1.0) {
                        bail!("compression.ratio must lie in (0, 1], got {r}");
                    }
                    Ok(((r * m as f64).ceil() as usize).clamp(1, m))
                }
                (None, None) => bail!(
                    "compression.k or compression.ratio is required for operator \"{}\"",
                    c.operator
                ),
            }
        };
        let spec = match c.operator.as_str() {
            "full" => CompressionSpec::full(c.scalar_bits),
            "top_k" => CompressionSpec::top_k(sparsity()?, c.scalar_bits)
                .context("compression.k is invalid for top_k")?,
            "rand_k" => CompressionSpec::rand_k(sparsity()?, c.scalar_bits)
                .context("compression.k is invalid for rand_k")?,
            "qsgd" | "qsgd_deterministic" => {
                let bits = c
                    .quantizer_bits
                    .context("compression.quantizer_bits is required for the quantizers")?;
                let build = if c.operator == "qsgd" {
                    CompressionSpec::qsgd
                } else {
                    CompressionSpec::qsgd_deterministic
                };
                build(bits, c.scalar_bits).context("compression.quantizer_bits is invalid")?
            }
            other => bail!(
                "compression.operator must be one of full, top_k, rand_k, qsgd, qsgd_deterministic; got \"{other}\""
            ),
        };
        // Surface dimension problems (k > m) at config time.
        spec.omega(m)
            .with_context(|| format!("compression.k exceeds world.hypotheses = {m}"))?;
        Ok(spec)
    }

    pub fn gamma_policy(&self) -> Result<GammaPolicy> {
        match &self.run.gamma {
            GammaValue::Fixed(v) => {
                if !(*v > 0.0 && *v <= 1.0) {
                    bail!("run.gamma must lie in (0, 1], got {v}");
                }
                Ok(GammaPolicy::Fixed(*v))
            }
            GammaValue::Named(name) => match name.as_str() {
                "theoretical" => Ok(GammaPolicy::Theoretical),
                "grid" => Ok(GammaPolicy::Grid),
                other => bail!(
                    "run.gamma must be \"theoretical\", \"grid\", or a number in (0, 1]; got \"{other}\""
                ),
            },
        }
    }

    pub fn update_mode(&self) -> Result<UpdateMode> {
        match self.run.mode.as_str() {
            "standard" => Ok(UpdateMode::Standard),
            "memory_efficient" => Ok(UpdateMode::MemoryEfficient),
            other => {
                bail!("run.mode must be \"standard\" or \"memory_efficient\", got \"{other}\"")
            }
        }
    }

    pub fn resampled(&self) -> bool {
        self.run.signal_mode == "resampled"
    }
}
