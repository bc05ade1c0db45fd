//! Experiment orchestration: resolves a config into a concrete world,
//! topology, and operator, then drives single runs, stepsize grid search,
//! Monte Carlo batches, and parameter sweeps.

use anyhow::{anyhow, bail, Context, Result};

use complearn::{
    build_graph, derive_rng, init_state, mixing_matrix, normalize, objective, random_world,
    sample_signal, step, theoretical_gamma, uniform_priors, CompressionSpec, GraphKind,
    MixingMatrix, ObjectiveProfile, StreamKey, Topology, WorldModel, PURPOSE_GRAPH,
    PURPOSE_SIGNALS, PURPOSE_WORLD,
};

use crate::config::{ExperimentConfig, GammaPolicy};

/// A config resolved into concrete simulation inputs.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub world: WorldModel,
    pub topology: Topology,
    pub matrix: MixingMatrix,
    pub spec: CompressionSpec,
    pub profile: ObjectiveProfile,
}

/// One row of a run trace: state after round `t` (`t = 0` is the prior).
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub t: u64,
    /// Mean distance of normalized beliefs from the optimum indicator.
    pub error: f64,
    /// Cumulative network-wide transmitted bits.
    pub bits: u64,
    /// Normalized belief on the optimal hypothesis, per agent.
    pub beliefs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub rows: Vec<TraceRow>,
    /// First round with error below the threshold.
    pub converged_at: Option<u64>,
    /// Cumulative bits at that round.
    pub bits_to_threshold: Option<u64>,
    pub bits_per_round: u64,
    pub final_error: f64,
    pub gamma: f64,
}

/// Erdos-Renyi default edge probability 2 ln(n) / n, capped at 1.
pub fn default_edge_probability(n: usize) -> f64 {
    (2.0 * (n as f64).ln() / n as f64).min(1.0)
}

pub fn resolve(config: &ExperimentConfig) -> Result<Experiment> {
    let master = config.run.seed;
    let kind = config.graph_kind()?;
    let topology = if kind == GraphKind::Custom {
        let path = config
            .topology
            .file
            .as_ref()
            .context("topology.file is required when topology.kind = \"file\"")?;
        Topology::load(path).with_context(|| format!("loading topology {}", path.display()))?
    } else {
        let n = config.topology.n.context("topology.n is required")?;
        let p = match kind {
            GraphKind::ErdosRenyi => Some(
                config
                    .topology
                    .p
                    .unwrap_or_else(|| default_edge_probability(n)),
            ),
            _ => config.topology.p,
        };
        let mut rng = derive_rng(master, PURPOSE_GRAPH, 0, 0, 0);
        build_graph(kind, n, p, &mut rng).context("building topology")?
    };
    let n = topology.n;
    let m = config.world.hypotheses;
    let world = if let Some(path) = &config.world.file {
        let world =
            WorldModel::load(path).with_context(|| format!("loading world {}", path.display()))?;
        if world.n != n {
            bail!("world.file has {} agents but the topology has {n}", world.n);
        }
        if world.m != m {
            bail!(
                "world.file has {} hypotheses but world.hypotheses = {m}",
                world.m
            );
        }
        world
    } else {
        let mut rng = derive_rng(master, PURPOSE_WORLD, 0, 0, 0);
        random_world(
            n,
            m,
            config.world.alphabet_size,
            config.world.likelihood_floor,
            config.world.unique_optimum,
            config.world.min_gap,
            &mut rng,
        )
        .context("generating world")?
    };
    let matrix = mixing_matrix(&topology)?;
    let spec = config.compression_spec(m)?;
    let profile = objective(&world)?;
    Ok(Experiment {
        config: config.clone(),
        world,
        topology,
        matrix,
        spec,
        profile,
    })
}

impl Experiment {
    pub fn omega(&self) -> f64 {
        // Validated at resolve time.
        self.spec.omega(self.world.m).expect("validated spec")
    }

    /// Bits the whole network transmits in one round: every undirected edge
    /// carries one message in each direction.
    pub fn bits_per_round(&self) -> u64 {
        2 * self.topology.edges.len() as u64
            * self
                .spec
                .encoded_bits(self.world.m)
                .expect("validated spec")
    }

    pub fn theta_star(&self) -> Result<usize> {
        self.profile.unique_optimum().ok_or_else(|| {
            anyhow!("the objective has tied optima; convergence error needs a unique optimum")
        })
    }

    /// One observation row for round `t` of signal stream `sig_run`.
    pub fn signal_row(&self, sig_run: u64, t: u64) -> Vec<usize> {
        (0..self.world.n)
            .map(|i| {
                let mut rng =
                    derive_rng(self.config.run.seed, PURPOSE_SIGNALS, sig_run, t, i as u64);
                sample_signal(&self.world, i, &mut rng)
            })
            .collect()
    }

    pub fn signal_table(&self, sig_run: u64, rounds: u64) -> Vec<Vec<usize>> {
        (0..rounds).map(|t| self.signal_row(sig_run, t)).collect()
    }

    /// Resolves the stepsize policy, running the grid search when asked.
    pub fn resolve_gamma(&self, rounds: u64) -> Result<(f64, Option<GridReport>)> {
        match self.config.gamma_policy()? {
            GammaPolicy::Fixed(v) => Ok((v, None)),
            GammaPolicy::Theoretical => {
                let gamma =
                    theoretical_gamma(self.matrix.spectral_gap, self.matrix.beta, self.omega())?;
                Ok((gamma, None))
            }
            GammaPolicy::Grid => {
                let report = gamma_grid_search(self, rounds)?;
                Ok((report.selected, Some(report)))
            }
        }
    }
}

/// Mean over agents of ‖mu~_i - indicator(theta_star)‖ from log beliefs.
pub fn convergence_error(log_beliefs: &[Vec<f64>], theta_star: usize) -> f64 {
    let n = log_beliefs.len();
    let mut total = 0.0;
    for row in log_beliefs {
        let p = normalize(row);
        let mut sq = 0.0;
        for (theta, &mass) in p.iter().enumerate() {
            let target = if theta == theta_star { 1.0 } else { 0.0 };
            sq += (mass - target) * (mass - target);
        }
        total += sq.sqrt();
    }
    total / n as f64
}

/// Runs one trajectory. `sig_run` picks the observation stream, `comp_run`
/// the compression stream; `threshold` is the convergence-error target and
/// `early_stop` ends the run once it is reached.
pub fn run_single(
    ex: &Experiment,
    gamma: f64,
    rounds: u64,
    sig_run: u64,
    comp_run: u64,
    threshold: f64,
    early_stop: bool,
) -> Result<RunOutcome> {
    let theta_star = ex.theta_star()?;
    let mode = ex.config.update_mode()?;
    let priors = uniform_priors(ex.world.n, ex.world.m);
    let mut state = init_state(&ex.world, &ex.matrix, gamma, &priors, mode, false)?;
    let key = StreamKey::new(ex.config.run.seed, comp_run);
    let bits_per_round = ex.bits_per_round();
    let snapshot = |state: &complearn::NetworkState, t: u64, bits: u64| {
        let logs: Vec<Vec<f64>> = state.agents.iter().map(|a| a.log_mu.clone()).collect();
        let error = convergence_error(&logs, theta_star);
        let beliefs = logs.iter().map(|row| normalize(row)[theta_star]).collect();
        TraceRow {
            t,
            error,
            bits,
            beliefs,
        }
    };
    let mut rows = vec![snapshot(&state, 0, 0)];
    let mut converged_at = None;
    let mut bits_to_threshold = None;
    let mut bits = 0u64;
    for t in 0..rounds {
        let signals = ex.signal_row(sig_run, t);
        step(&mut state, &ex.world, &ex.matrix, &ex.spec, &signals, &key)?;
        bits += bits_per_round;
        let row = snapshot(&state, t + 1, bits);
        let hit = row.error < threshold;
        rows.push(row);
        if hit && converged_at.is_none() {
            converged_at = Some(t + 1);
            bits_to_threshold = Some(bits);
            if early_stop {
                break;
            }
        }
    }
    let final_error = rows.last().expect("at least the prior row").error;
    Ok(RunOutcome {
        rows,
        converged_at,
        bits_to_threshold,
        bits_per_round,
        final_error,
        gamma,
    })
}

#[derive(Clone, Debug)]
pub struct GridCandidate {
    pub gamma: f64,
    pub converged_at: Option<u64>,
    pub final_error: f64,
}

#[derive(Clone, Debug)]
pub struct GridReport {
    pub candidates: Vec<GridCandidate>,
    pub selected: f64,
}

/// Default grid {omega/4, omega/2, omega, 2 omega, 4 omega}, clipped to
/// (0, 1] and deduplicated.
pub fn grid_candidates(omega: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|f| (f * omega).min(1.0))
        .filter(|g| *g > 0.0)
        .collect();
    grid.dedup();
    grid
}

/// Fewest rounds to the threshold wins; ties go to the smaller stepsize;
/// if nothing converged, the smallest final error wins.
pub fn select_gamma(candidates: &[GridCandidate]) -> Result<f64> {
    let best = candidates
        .iter()
        .min_by(|a, b| match (a.converged_at, b.converged_at) {
            (Some(ra), Some(rb)) => ra.cmp(&rb).then(a.gamma.total_cmp(&b.gamma)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a
                .final_error
                .total_cmp(&b.final_error)
                .then(a.gamma.total_cmp(&b.gamma)),
        })
        .ok_or_else(|| anyhow!("stepsize grid is empty"))?;
    Ok(best.gamma)
}

/// Runs every grid candidate on the fixed observation stream.
pub fn gamma_grid_search(ex: &Experiment, rounds: u64) -> Result<GridReport> {
    let mut candidates = Vec::new();
    for gamma in grid_candidates(ex.omega()) {
        let outcome = run_single(ex, gamma, rounds, 0, 0, ex.config.run.error_threshold, true)?;
        candidates.push(GridCandidate {
            gamma,
            converged_at: outcome.converged_at,
            final_error: outcome.final_error,
        });
    }
    let selected = select_gamma(&candidates)?;
    Ok(GridReport {
        candidates,
        selected,
    })
}

#[derive(Clone, Debug)]
pub struct McRun {
    pub run: u64,
    pub converged_at: Option<u64>,
    pub bits_to_threshold: Option<u64>,
    pub final_error: f64,
}

#[derive(Clone, Debug)]
pub struct McSummary {
    pub runs: u64,
    pub converged: u64,
    /// Statistics over converged runs; NaN when none converged.
    pub mean_rounds: f64,
    pub std_rounds: f64,
    pub mean_bits: f64,
    pub std_bits: f64,
    pub mean_final_error: f64,
    pub per_run: Vec<McRun>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Repeated runs on one world. In "resampled" mode each run draws fresh
/// observations; in "fixed" mode runs share the observation stream and only
/// the compression randomness varies.
pub fn monte_carlo(ex: &Experiment, gamma: f64, rounds: u64) -> Result<McSummary> {
    let total = ex.config.run.runs;
    let resampled = ex.config.resampled();
    let mut per_run = Vec::with_capacity(total as usize);
    for r in 0..total {
        let sig_run = if resampled { r } else { 0 };
        let outcome = run_single(
            ex,
            gamma,
            rounds,
            sig_run,
            r,
            ex.config.run.error_threshold,
            true,
        )?;
        per_run.push(McRun {
            run: r,
            converged_at: outcome.converged_at,
            bits_to_threshold: outcome.bits_to_threshold,
            final_error: outcome.final_error,
        });
    }
    let rounds_hit: Vec<f64> = per_run
        .iter()
        .filter_map(|r| r.converged_at.map(|v| v as f64))
        .collect();
    let bits_hit: Vec<f64> = per_run
        .iter()
        .filter_map(|r| r.bits_to_threshold.map(|v| v as f64))
        .collect();
    let (mean_rounds, std_rounds) = mean_std(&rounds_hit);
    let (mean_bits, std_bits) = mean_std(&bits_hit);
    let mean_final_error = per_run.iter().map(|r| r.final_error).sum::<f64>() / total.max(1) as f64;
    Ok(McSummary {
        runs: total,
        converged: rounds_hit.len() as u64,
        mean_rounds,
        std_rounds,
        mean_bits,
        std_bits,
        mean_final_error,
        per_run,
    })
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    /// "n" or "m".
    pub parameter: String,
    pub value: usize,
    pub ratio: f64,
    pub k: usize,
    pub omega: f64,
    pub gamma: f64,
    pub bits_per_round: u64,
    pub summary: McSummary,
}

/// Monte Carlo over the (ratio x value) grid of the sweep section. Each
/// cell rebuilds the world and topology at its own size from the same
/// master seed.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let section = config
        .sweep
        .clone()
        .context("config has no [sweep] section")?;
    let mut cells = Vec::new();
    for &value in &section.values {
        let mut cell_config = config.clone();
        match section.parameter.as_str() {
            "n" => cell_config.topology.n = Some(value),
            "m" => cell_config.world.hypotheses = value,
            other => bail!("sweep.parameter must be \"n\" or \"m\", got \"{other}\""),
        }
        for &ratio in &section.ratios {
            let mut run_config = cell_config.clone();
            run_config.compression.k = None;
            run_config.compression.ratio = Some(ratio);
            if matches!(run_config.compression.operator.as_str(), "full") && ratio < 1.0 {
                bail!("sweep.ratios below 1 need a sparsifying compression.operator");
            }
            let ex = resolve(&run_config)?;
            let (gamma, _) = ex.resolve_gamma(run_config.run.rounds)?;
            let summary = monte_carlo(&ex, gamma, run_config.run.rounds)?;
            cells.push(SweepCell {
                parameter: section.parameter.clone(),
                value,
                ratio,
                k: ex.spec.k,
                omega: ex.omega(),
                gamma,
                bits_per_round: ex.bits_per_round(),
                summary,
            });
        }
    }
    Ok(cells)
}
