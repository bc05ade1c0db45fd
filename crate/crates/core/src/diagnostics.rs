//! Convergence-theory constants and diagnostics over recorded runs.
//!
//! The diagnostics pair a compressed run with the uncompressed oracle run
//! driven by the same observations, then track the joint deviation
//!
//!   e_t = sum_i ( ‖x_i^t‖^2 + ‖x_i^t - xhat_i^{t+1}‖^2 ),
//!
//! where x_i^t is the log gap between compressed and oracle beliefs and
//! xhat_i^{t+1} the gap of the public estimate right after round t's
//! exchange (the belief-average gap is zero because both processes start
//! from the same priors). The oracle's per-round movement z_t feeds the
//! contraction inequality e_t <= eta e_{t-1} + L z_t and its geometric
//! envelope. Expectations over compression randomness are estimated by
//! averaging e_t across repeated runs that share one observation table.
//! Everything is in nats.

use crate::compression::CompressionSpec;
use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::learner::{init_state, normalize, step, theoretical_gamma, UpdateMode};
use crate::rng::StreamKey;
use crate::world::{objective, ObjectiveProfile, WorldModel};

/// Every constant the convergence theory assigns to one configuration.
#[derive(Clone, Debug)]
pub struct TheoryConstants {
    pub n: usize,
    pub m: usize,
    /// Spectral gap of the mixing matrix.
    pub delta: f64,
    /// ‖I - A‖_2.
    pub beta: f64,
    /// Compression quality at dimension m.
    pub omega: f64,
    pub gamma: f64,
    /// Smallest prior mass.
    pub alpha1: f64,
    /// Likelihood floor.
    pub alpha2: f64,
    /// alpha = min(alpha1, alpha2).
    pub alpha: f64,
    /// Contraction rate eta of the joint deviation.
    pub eta: f64,
    /// Weight L on the oracle movement in the contraction.
    pub big_l: f64,
    /// Per-round oracle movement bound R (z_t <= R^2).
    pub r_bound: f64,
    /// Uniform gap bound between mean compressed and oracle log beliefs.
    pub g1: f64,
    /// Uniform bound on the oracle's own log-belief ratios.
    pub g2: f64,
    /// Additive constant in the non-asymptotic belief bound.
    pub c2: f64,
    /// Second-best objective gap; `None` when every hypothesis is optimal.
    pub c1: Option<f64>,
    /// Objective gap per hypothesis.
    pub c_v: Vec<f64>,
    /// Step size guaranteed by the theory for this configuration.
    pub gamma_star: f64,
    pub rho: f64,
    /// Round after which the non-asymptotic bound holds with
    /// probability 1 - rho; `None` when c1 is undefined.
    pub t_rho: Option<f64>,
}

/// Contraction rate eta = 1 - delta^2 omega / 164.
pub fn contraction_rate(delta: f64, omega: f64) -> f64 {
    1.0 - delta * delta * omega / 164.0
}

/// Compression overhead L = (1 - omega)(2 - omega) / omega.
pub fn compression_overhead(omega: f64) -> f64 {
    (1.0 - omega) * (2.0 - omega) / omega
}

/// Oracle movement bound R = 4 sqrt(nm) ln(1/alpha) / (gamma delta).
pub fn oracle_drift_bound(n: usize, m: usize, alpha: f64, gamma: f64, delta: f64) -> f64 {
    4.0 * ((n * m) as f64).sqrt() * (1.0 / alpha).ln() / (gamma * delta)
}

/// Rounds T(rho) = (8 / c1^2) ln(alpha)^2 ln(1/rho) after which the
/// non-asymptotic bound holds with probability 1 - rho.
pub fn holding_time(c1: f64, alpha: f64, rho: f64) -> f64 {
    let la = alpha.ln();
    8.0 / (c1 * c1) * la * la * (1.0 / rho).ln()
}

impl TheoryConstants {
    /// Initial joint deviation bound (1 - omega) n m ln(alpha)^2.
    pub fn e0_bound(&self) -> f64 {
        let la = self.alpha.ln();
        (1.0 - self.omega) * (self.n * self.m) as f64 * la * la
    }

    /// Geometric envelope eta^t e_0 + L R^2 (1 - eta^t) / (1 - eta).
    pub fn envelope(&self, e0: f64, t: u64) -> f64 {
        let eta_pow = self.eta.powi(t as i32);
        let r_sq = self.r_bound * self.r_bound;
        eta_pow * e0 + self.big_l * r_sq * (1.0 - eta_pow) / (1.0 - self.eta)
    }
}

/// Assembles the constants for one configuration. `alpha1` is the smallest
/// prior mass (see `learner::min_prior_mass`).
pub fn theory_constants(
    world: &WorldModel,
    matrix: &MixingMatrix,
    spec: &CompressionSpec,
    gamma: f64,
    alpha1: f64,
    rho: f64,
) -> Result<TheoryConstants> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::BadGamma(gamma));
    }
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(Error::BadSpectral {
            what: "alpha1",
            value: alpha1,
        });
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::BadSpectral {
            what: "rho",
            value: rho,
        });
    }
    let n = world.n;
    let m = world.m;
    let omega = spec.omega(m)?;
    let delta = matrix.spectral_gap;
    let beta = matrix.beta;
    let alpha = alpha1.min(world.alpha2);
    let profile = objective(world)?;
    let c_v: Vec<f64> = (0..m).map(|t| profile.gap(t)).collect();
    let ln_inv_alpha = (1.0 / alpha).ln();
    let sqrt_nm = ((n * m) as f64).sqrt();
    let g1 = 73.0 * sqrt_nm / (delta * delta * gamma * omega) * ln_inv_alpha;
    let g2 = 16.0 * (n as f64).ln() / (gamma * delta) * ln_inv_alpha;
    let c2 = 162.0 * sqrt_nm / (delta * delta * gamma * omega) * ln_inv_alpha;
    Ok(TheoryConstants {
        n,
        m,
        delta,
        beta,
        omega,
        gamma,
        alpha1,
        alpha2: world.alpha2,
        alpha,
        eta: contraction_rate(delta, omega),
        big_l: compression_overhead(omega),
        r_bound: oracle_drift_bound(n, m, alpha, gamma, delta),
        g1,
        g2,
        c2,
        c1: profile.c1,
        c_v,
        gamma_star: theoretical_gamma(delta, beta, omega)?,
        rho,
        t_rho: profile.c1.map(|c1| holding_time(c1, alpha, rho)),
    })
}

/// Per-round snapshots of one compressed run and its paired oracle.
/// Index order is [round][agent][hypothesis], rounds 0..=T.
#[derive(Clone, Debug)]
pub struct PairedRun {
    pub log_mu: Vec<Vec<Vec<f64>>>,
    pub log_mu_hat: Vec<Vec<Vec<f64>>>,
    pub log_nu: Vec<Vec<Vec<f64>>>,
}

/// Runs `signals.len()` rounds with oracle pairing, recording every state.
#[allow(clippy::too_many_arguments)]
pub fn record_paired_run(
    world: &WorldModel,
    matrix: &MixingMatrix,
    spec: &CompressionSpec,
    gamma: f64,
    priors: &[Vec<f64>],
    mode: UpdateMode,
    signals: &[Vec<usize>],
    key: &StreamKey,
) -> Result<PairedRun> {
    let mut state = init_state(world, matrix, gamma, priors, mode, true)?;
    let mut run = PairedRun {
        log_mu: Vec::with_capacity(signals.len() + 1),
        log_mu_hat: Vec::with_capacity(signals.len() + 1),
        log_nu: Vec::with_capacity(signals.len() + 1),
    };
    let snapshot = |state: &crate::learner::NetworkState, run: &mut PairedRun| {
        run.log_mu
            .push(state.agents.iter().map(|a| a.log_mu.clone()).collect());
        run.log_mu_hat
            .push(state.agents.iter().map(|a| a.log_mu_hat.clone()).collect());
        run.log_nu
            .push(state.log_nu.as_ref().expect("oracle enabled").clone());
    };
    snapshot(&state, &mut run);
    for row in signals {
        step(&mut state, world, matrix, spec, row, key)?;
        snapshot(&state, &mut run);
    }
    Ok(run)
}

/// The joint deviation e_t, its two components, and the oracle movement
/// z_t, all of length T with z[0] = 0. e_t is averaged across the supplied
/// repeats; z_t comes from the shared oracle.
#[derive(Clone, Debug)]
pub struct LyapunovTrace {
    pub e: Vec<f64>,
    pub z: Vec<f64>,
    /// Belief-gap component of e_t.
    pub x_dev: Vec<f64>,
    /// Estimate-gap component of e_t.
    pub hat_dev: Vec<f64>,
}

fn norm_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Builds the deviation trace from repeated paired runs sharing one
/// observation table.
pub fn lyapunov_trace(runs: &[PairedRun]) -> Result<LyapunovTrace> {
    let first = runs.first().ok_or(Error::EmptyVector)?;
    let rounds = first.log_mu.len().saturating_sub(1);
    for r in runs {
        if r.log_mu.len() != rounds + 1
            || r.log_mu_hat.len() != rounds + 1
            || r.log_nu.len() != rounds + 1
        {
            return Err(Error::DimensionMismatch {
                expected: rounds + 1,
                got: r.log_mu.len(),
            });
        }
    }
    let n = first.log_mu[0].len();
    let mut e = vec![0.0; rounds];
    let mut x_dev = vec![0.0; rounds];
    let mut hat_dev = vec![0.0; rounds];
    for run in runs {
        for t in 0..rounds {
            let mut xd = 0.0;
            let mut hd = 0.0;
            for i in 0..n {
                xd += norm_sq_diff(&run.log_mu[t][i], &run.log_nu[t][i]);
                // Estimate gap against the exchange that closes round t:
                // x^t - xhat^{t+1} telescopes to log mu^t - log muhat^{t+1}
                // because the oracle's estimate is its previous belief.
                hd += norm_sq_diff(&run.log_mu[t][i], &run.log_mu_hat[t + 1][i]);
            }
            x_dev[t] += xd;
            hat_dev[t] += hd;
            e[t] += xd + hd;
        }
    }
    let scale = 1.0 / runs.len() as f64;
    for v in [&mut e, &mut x_dev, &mut hat_dev] {
        v.iter_mut().for_each(|x| *x *= scale);
    }
    let mut z = vec![0.0; rounds];
    for (t, zt) in z.iter_mut().enumerate().skip(1) {
        *zt = (0..n)
            .map(|i| norm_sq_diff(&first.log_nu[t][i], &first.log_nu[t - 1][i]))
            .sum();
    }
    Ok(LyapunovTrace {
        e,
        z,
        x_dev,
        hat_dev,
    })
}

/// Outcome of the contraction and envelope checks on one trace.
#[derive(Clone, Debug)]
pub struct RecursionReport {
    /// Per-round e_t <= slack (eta e_{t-1} + L z_t); index 0 is vacuous.
    pub recursion_ok: Vec<bool>,
    /// Per-round e_t <= slack (eta^t e_0 + L R^2 (1 - eta^t) / (1 - eta)).
    pub envelope_ok: Vec<bool>,
    pub all_recursion: bool,
    pub all_envelope: bool,
    /// Violating fraction of rounds t >= 1 for the contraction.
    pub recursion_violations: f64,
    /// Violating fraction of all rounds for the envelope.
    pub envelope_violations: f64,
}

/// Checks both inequalities. `slack` is a multiplicative allowance on the
/// right-hand sides: 1.0 for deterministic operators, above 1.0 when e_t is
/// a sample mean.
pub fn check_recursion(
    trace: &LyapunovTrace,
    constants: &TheoryConstants,
    slack: f64,
) -> RecursionReport {
    let eta = constants.eta;
    let big_l = constants.big_l;
    let rounds = trace.e.len();
    let mut recursion_ok = vec![true; rounds];
    let mut envelope_ok = vec![true; rounds];
    for t in 0..rounds {
        if t >= 1 {
            let rhs = eta * trace.e[t - 1] + big_l * trace.z[t];
            recursion_ok[t] = trace.e[t] <= slack * rhs;
        }
        envelope_ok[t] = trace.e[t] <= slack * constants.envelope(trace.e[0], t as u64);
    }
    let recursion_violations = if rounds > 1 {
        recursion_ok[1..].iter().filter(|ok| !**ok).count() as f64 / (rounds - 1) as f64
    } else {
        0.0
    };
    let envelope_violations =
        envelope_ok.iter().filter(|ok| !**ok).count() as f64 / rounds.max(1) as f64;
    RecursionReport {
        all_recursion: recursion_ok.iter().all(|&b| b),
        all_envelope: envelope_ok.iter().all(|&b| b),
        recursion_ok,
        envelope_ok,
        recursion_violations,
        envelope_violations,
    }
}

/// Per-round, per-agent normalized log-odds decay rate
/// (1/t) (log mu~_i^t(v) - log mu~_i^t(w)), averaged across repeats.
/// Row t-1 holds round t, for t = 1..=T.
pub fn ratio_rate(runs: &[PairedRun], theta_v: usize, theta_w: usize) -> Result<Vec<Vec<f64>>> {
    let first = runs.first().ok_or(Error::EmptyVector)?;
    let rounds = first.log_mu.len().saturating_sub(1);
    let n = first.log_mu[0].len();
    let m = first.log_mu[0][0].len();
    if theta_v >= m || theta_w >= m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: theta_v.max(theta_w),
        });
    }
    let mut out = vec![vec![0.0; n]; rounds];
    for run in runs {
        for t in 1..=rounds {
            for (i, acc) in out[t - 1].iter_mut().enumerate() {
                // Normalization cancels in the difference.
                let gap = run.log_mu[t][i][theta_v] - run.log_mu[t][i][theta_w];
                *acc += gap / t as f64;
            }
        }
    }
    let scale = 1.0 / runs.len() as f64;
    for row in &mut out {
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// Outcome of the non-asymptotic belief-decay check.
#[derive(Clone, Debug)]
pub struct NonasymptoticReport {
    /// False when c1 is undefined or the run never reaches T(rho).
    pub evaluated: bool,
    /// First checked round, ceil of T(rho).
    pub t_start: u64,
    /// (round, agent, hypothesis) triples checked.
    pub checked: usize,
    pub violations: usize,
    /// Smallest bound margin seen; positive means satisfied.
    pub min_margin: f64,
}

/// Checks mean log mu~_i^t(theta_v) <= -(t/2) c1 + c2 for every non-optimal
/// hypothesis at every round t >= T(rho).
pub fn nonasymptotic_check(
    runs: &[PairedRun],
    profile: &ObjectiveProfile,
    constants: &TheoryConstants,
) -> Result<NonasymptoticReport> {
    let first = runs.first().ok_or(Error::EmptyVector)?;
    let rounds = first.log_mu.len().saturating_sub(1);
    let (Some(c1), Some(t_rho)) = (constants.c1, constants.t_rho) else {
        return Ok(NonasymptoticReport {
            evaluated: false,
            t_start: 0,
            checked: 0,
            violations: 0,
            min_margin: f64::INFINITY,
        });
    };
    let t_start = t_rho.ceil().max(1.0) as u64;
    if (rounds as u64) < t_start {
        return Ok(NonasymptoticReport {
            evaluated: false,
            t_start,
            checked: 0,
            violations: 0,
            min_margin: f64::INFINITY,
        });
    }
    let n = first.log_mu[0].len();
    let m = first.log_mu[0][0].len();
    let non_optimal: Vec<usize> = (0..m)
        .filter(|t| !profile.optimal_set.contains(t))
        .collect();
    let mut checked = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for t in t_start..=rounds as u64 {
        let bound = -(t as f64 / 2.0) * c1 + constants.c2;
        for i in 0..n {
            // Mean over repeats of the normalized log belief.
            let mut mean_log = vec![0.0; m];
            for run in runs {
                let p = normalize(&run.log_mu[t as usize][i]);
                for (theta, &pv) in p.iter().enumerate() {
                    mean_log[theta] += pv.ln();
                }
            }
            mean_log.iter_mut().for_each(|v| *v /= runs.len() as f64);
            for &v in &non_optimal {
                checked += 1;
                let margin = bound - mean_log[v];
                min_margin = min_margin.min(margin);
                if margin < 0.0 {
                    violations += 1;
                }
            }
        }
    }
    Ok(NonasymptoticReport {
        evaluated: true,
        t_start,
        checked,
        violations,
        min_margin,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::compression::CompressionSpec;
    use crate::graph::{build_graph, mixing_matrix, GraphKind};
    use crate::learner::{min_prior_mass, uniform_priors};
    use crate::rng::{derive_rng, PURPOSE_SIGNALS, PURPOSE_WORLD};
    use crate::world::{random_world, sample_signal};
    use approx::assert_relative_eq;

    fn signal_table(world: &WorldModel, rounds: u64, master: u64) -> Vec<Vec<usize>> {
        (0..rounds)
            .map(|t| {
                (0..world.n)
                    .map(|i| {
                        let mut rng = derive_rng(master, PURPOSE_SIGNALS, 0, t, i as u64);
                        sample_signal(world, i, &mut rng)
                    })
                    .collect()
            })
            .collect()
    }

    fn ring_setup(master: u64) -> (WorldModel, MixingMatrix) {
        let mut r = derive_rng(master, PURPOSE_WORLD, 0, 0, 0);
        let world = random_world(5, 5, 6, 1e-3, true, 0.05, &mut r).unwrap();
        let g = build_graph(GraphKind::Ring, 5, None, &mut r).unwrap();
        (world, mixing_matrix(&g).unwrap())
    }

    #[test]
    fn closed_form_constants_match_worked_examples() {
        assert_relative_eq!(contraction_rate(1.0, 1.0), 1.0 - 1.0 / 164.0);
        assert!((contraction_rate(1.0, 1.0) - 0.99390).abs() < 1e-5);
        assert_relative_eq!(compression_overhead(1.0), 0.0);
        assert_relative_eq!(compression_overhead(0.5), 1.5, max_relative = 1e-15);
        // 200 * ln(0.01)^2 * ln(20).
        assert_relative_eq!(holding_time(0.2, 0.01, 0.05), 1.2706e4, max_relative = 1e-4);
        assert_relative_eq!(
            oracle_drift_bound(4, 9, 0.01, 0.5, 0.25),
            4.0 * 6.0 * (100.0f64).ln() / 0.125,
            max_relative = 1e-14
        );
    }

    #[test]
    fn constants_assemble_for_a_ring_world() {
        let (world, matrix) = ring_setup(31);
        let spec = CompressionSpec::top_k(3, 64).unwrap();
        let priors = uniform_priors(world.n, world.m);
        let c =
            theory_constants(&world, &matrix, &spec, 0.01, min_prior_mass(&priors), 0.05).unwrap();
        assert_eq!(c.n, 5);
        assert_relative_eq!(c.omega, 0.6, max_relative = 1e-15);
        assert_relative_eq!(c.alpha, 1e-3); // floor below the uniform prior 0.2
        assert!(c.eta > 0.0 && c.eta < 1.0);
        assert!(c.gamma_star > 0.0 && c.gamma_star < 1.0);
        assert!(c.t_rho.unwrap() > 0.0);
        assert_eq!(c.c_v.len(), world.m);
        assert!(c.c_v.iter().all(|&g| g >= 0.0));
        assert!(c.e0_bound() >= 0.0);
        // c2 and g1 share everything but their leading factor.
        assert_relative_eq!(c.c2 / c.g1, 162.0 / 73.0, max_relative = 1e-12);
        assert!(theory_constants(&world, &matrix, &spec, 0.0, 0.2, 0.05).is_err());
        assert!(theory_constants(&world, &matrix, &spec, 0.01, 0.2, 1.0).is_err());
    }

    #[test]
    fn lossless_pairing_has_zero_deviation() {
        let (world, matrix) = ring_setup(32);
        let spec = CompressionSpec::full(64);
        let priors = uniform_priors(world.n, world.m);
        let signals = signal_table(&world, 100, 7);
        let run = record_paired_run(
            &world,
            &matrix,
            &spec,
            0.2,
            &priors,
            UpdateMode::Standard,
            &signals,
            &StreamKey::new(7, 0),
        )
        .unwrap();
        let trace = lyapunov_trace(std::slice::from_ref(&run)).unwrap();
        assert_eq!(trace.e.len(), 100);
        for t in 0..100 {
            assert!(trace.e[t] <= 1e-16, "e[{t}] = {}", trace.e[t]);
        }
        assert!(trace.z[1] > 0.0);
        assert_eq!(trace.z[0], 0.0);
    }

    #[test]
    fn initial_deviation_respects_the_compression_bound() {
        let (world, matrix) = ring_setup(33);
        let spec = CompressionSpec::top_k(2, 64).unwrap();
        let priors = uniform_priors(world.n, world.m);
        let constants =
            theory_constants(&world, &matrix, &spec, 0.01, min_prior_mass(&priors), 0.05).unwrap();
        let signals = signal_table(&world, 5, 8);
        let run = record_paired_run(
            &world,
            &matrix,
            &spec,
            0.01,
            &priors,
            UpdateMode::Standard,
            &signals,
            &StreamKey::new(8, 0),
        )
        .unwrap();
        let trace = lyapunov_trace(std::slice::from_ref(&run)).unwrap();
        // e_0 is purely the first compression residual here.
        assert_relative_eq!(trace.e[0], trace.hat_dev[0]);
        assert_eq!(trace.x_dev[0], 0.0);
        assert!(trace.e[0] <= constants.e0_bound());
    }

    #[test]
    fn contraction_holds_for_deterministic_sparsification() {
        let (world, matrix) = ring_setup(34);
        let spec = CompressionSpec::top_k(3, 64).unwrap();
        let priors = uniform_priors(world.n, world.m);
        let constants = theory_constants(
            &world,
            &matrix,
            &spec,
            theoretical_gamma(
                matrix.spectral_gap,
                matrix.beta,
                spec.omega(world.m).unwrap(),
            )
            .unwrap(),
            min_prior_mass(&priors),
            0.05,
        )
        .unwrap();
        let signals = signal_table(&world, 60, 9);
        let run = record_paired_run(
            &world,
            &matrix,
            &spec,
            constants.gamma,
            &priors,
            UpdateMode::Standard,
            &signals,
            &StreamKey::new(9, 0),
        )
        .unwrap();
        let trace = lyapunov_trace(std::slice::from_ref(&run)).unwrap();
        let report = check_recursion(&trace, &constants, 1.0);
        assert!(report.all_recursion);
        assert!(report.all_envelope);
        assert_eq!(report.recursion_violations, 0.0);
        // The oracle movement bound holds every round.
        let r_sq = constants.r_bound * constants.r_bound;
        for t in 1..trace.z.len() {
            assert!(trace.z[t] <= r_sq);
        }
    }

    #[test]
    fn lossless_ratio_rate_matches_the_oracle_everywhere() {
        let (world, matrix) = ring_setup(35);
        let spec = CompressionSpec::full(64);
        let priors = uniform_priors(world.n, world.m);
        let signals = signal_table(&world, 40, 10);
        let run = record_paired_run(
            &world,
            &matrix,
            &spec,
            0.3,
            &priors,
            UpdateMode::Standard,
            &signals,
            &StreamKey::new(10, 0),
        )
        .unwrap();
        let same = ratio_rate(std::slice::from_ref(&run), 2, 2).unwrap();
        assert!(same.iter().flatten().all(|&v| v == 0.0));
        let rates = ratio_rate(std::slice::from_ref(&run), 1, 0).unwrap();
        assert_eq!(rates.len(), 40);
        let t = 40;
        for i in 0..world.n {
            let oracle_rate = (run.log_nu[t][i][1] - run.log_nu[t][i][0]) / t as f64;
            assert_relative_eq!(rates[t - 1][i], oracle_rate, epsilon = 1e-9);
        }
    }

    #[test]
    fn short_runs_leave_the_tail_bound_unevaluated() {
        let (world, matrix) = ring_setup(36);
        let spec = CompressionSpec::top_k(3, 64).unwrap();
        let priors = uniform_priors(world.n, world.m);
        let constants =
            theory_constants(&world, &matrix, &spec, 0.01, min_prior_mass(&priors), 0.05).unwrap();
        // T(rho) is far beyond 10 rounds for this configuration.
        assert!(constants.t_rho.unwrap() > 10.0);
        let signals = signal_table(&world, 10, 11);
        let run = record_paired_run(
            &world,
            &matrix,
            &spec,
            0.01,
            &priors,
            UpdateMode::Standard,
            &signals,
            &StreamKey::new(11, 0),
        )
        .unwrap();
        let profile = objective(&world).unwrap();
        let report = nonasymptotic_check(std::slice::from_ref(&run), &profile, &constants).unwrap();
        assert!(!report.evaluated);
        assert_eq!(report.checked, 0);
    }

    #[test]
    fn fast_world_passes_the_tail_bound() {
        // Strongly separated hypotheses keep T(rho) inside a short run.
        let n = 4;
        let m = 3;
        let spread = vec![
            0.85, 0.05, 0.05, 0.05, // theta 0 == truth
            0.05, 0.85, 0.05, 0.05, // theta 1
            0.05, 0.05, 0.85, 0.05, // theta 2
        ];
        let world = WorldModel {
            n,
            m,
            alphabet_sizes: vec![4; n],
            likelihoods: vec![spread; n],
            truths: vec![vec![0.85, 0.05, 0.05, 0.05]; n],
            alpha2: 0.05,
        };
        world.validate().unwrap();
        let g = build_graph(GraphKind::Complete, n, None, &mut derive_rng(0, 1, 0, 0, 0)).unwrap();
        let matrix = mixing_matrix(&g).unwrap();
        let spec = CompressionSpec::top_k(2, 64).unwrap();
        let priors = uniform_priors(n, m);
        let gamma =
            theoretical_gamma(matrix.spectral_gap, matrix.beta, spec.omega(m).unwrap()).unwrap();
        let constants =
            theory_constants(&world, &matrix, &spec, gamma, min_prior_mass(&priors), 0.05).unwrap();
        let t_start = constants.t_rho.unwrap().ceil() as u64;
        let rounds = t_start + 30;
        let signals = signal_table(&world, rounds, 12);
        let run = record_paired_run(
            &world,
            &matrix,
            &spec,
            gamma,
            &priors,
            UpdateMode::Standard,
            &signals,
            &StreamKey::new(12, 0),
        )
        .unwrap();
        let profile = objective(&world).unwrap();
        let report = nonasymptotic_check(std::slice::from_ref(&run), &profile, &constants).unwrap();
        assert!(report.evaluated);
        assert!(report.checked > 0);
        assert_eq!(report.violations, 0);
        assert!(report.min_margin > 0.0);
    }
}
