//! Assembles the convergence diagnostics for one experiment: paired
//! compressed/oracle runs, the deviation trace and its inequality checks,
//! per-hypothesis belief decay rates, and the non-asymptotic bound margins.

use anyhow::{Context, Result};

use complearn::{
    check_recursion, lyapunov_trace, min_prior_mass, nonasymptotic_check, normalize, ratio_rate,
    record_paired_run, theory_constants, uniform_priors, LyapunovTrace, NonasymptoticReport,
    PairedRun, RecursionReport, StreamKey, TheoryConstants,
};

use crate::experiment::Experiment;

/// Extra right-hand-side allowance when expectations are estimated from
/// finitely many repeats.
pub const SAMPLING_SLACK: f64 = 1.05;

pub struct DiagnosticsRun {
    pub constants: TheoryConstants,
    pub trace: LyapunovTrace,
    pub report: RecursionReport,
    /// Per non-optimal hypothesis: mean-over-agents decay rate of the
    /// belief odds against the optimum, per round (index t-1 holds round t).
    pub rates: Vec<(usize, Vec<f64>)>,
    /// Per round t >= 1 (index t-1): worst-case margin of the
    /// non-asymptotic bound over agents and non-optimal hypotheses.
    pub margins: Vec<f64>,
    pub nonasym: NonasymptoticReport,
    pub repeats: u64,
    pub slack: f64,
}

pub fn run_diagnostics(ex: &Experiment, gamma: f64, rounds: u64) -> Result<DiagnosticsRun> {
    let theta_star = ex.theta_star()?;
    let priors = uniform_priors(ex.world.n, ex.world.m);
    let constants = theory_constants(
        &ex.world,
        &ex.matrix,
        &ex.spec,
        gamma,
        min_prior_mass(&priors),
        ex.config.run.rho,
    )
    .context("assembling theory constants")?;
    let repeats = if ex.spec.is_deterministic() {
        1
    } else {
        ex.config.run.repeats
    };
    let signals = ex.signal_table(0, rounds);
    let mode = ex.config.update_mode()?;
    let runs: Vec<PairedRun> = (0..repeats)
        .map(|r| {
            record_paired_run(
                &ex.world,
                &ex.matrix,
                &ex.spec,
                gamma,
                &priors,
                mode,
                &signals,
                &StreamKey::new(ex.config.run.seed, r),
            )
        })
        .collect::<complearn::Result<_>>()?;
    let trace = lyapunov_trace(&runs)?;
    let slack = if ex.spec.is_deterministic() {
        1.0
    } else {
        SAMPLING_SLACK
    };
    let report = check_recursion(&trace, &constants, slack);
    let mut rates = Vec::new();
    for theta in 0..ex.world.m {
        if ex.profile.optimal_set.contains(&theta) {
            continue;
        }
        let per_agent = ratio_rate(&runs, theta, theta_star)?;
        let mean: Vec<f64> = per_agent
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect();
        rates.push((theta, mean));
    }
    let margins = bound_margins(&runs, &ex.profile.optimal_set, &constants, rounds);
    let nonasym = nonasymptotic_check(&runs, &ex.profile, &constants)?;
    Ok(DiagnosticsRun {
        constants,
        trace,
        report,
        rates,
        margins,
        nonasym,
        repeats,
        slack,
    })
}

/// Worst margin of mean log mu~ <= -(t/2) c1 + c2 per round, over agents
/// and non-optimal hypotheses; NaN when c1 is undefined.
fn bound_margins(
    runs: &[PairedRun],
    optimal_set: &[usize],
    constants: &TheoryConstants,
    rounds: u64,
) -> Vec<f64> {
    let Some(c1) = constants.c1 else {
        return vec![f64::NAN; rounds as usize];
    };
    let first = &runs[0];
    let n = first.log_mu[0].len();
    let m = first.log_mu[0][0].len();
    let non_optimal: Vec<usize> = (0..m).filter(|t| !optimal_set.contains(t)).collect();
    let mut margins = Vec::with_capacity(rounds as usize);
    for t in 1..=rounds as usize {
        let bound = -(t as f64 / 2.0) * c1 + constants.c2;
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let mut mean_log = vec![0.0; m];
            for run in runs {
                let p = normalize(&run.log_mu[t][i]);
                for (theta, &pv) in p.iter().enumerate() {
                    mean_log[theta] += pv.ln();
                }
            }
            for &v in &non_optimal {
                worst = worst.min(bound - mean_log[v] / runs.len() as f64);
            }
        }
        margins.push(worst);
    }
    margins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::experiment::resolve;

    fn diag_config(operator: &str, k_line: &str) -> ExperimentConfig {
        let text = format!(
            r#"
            [topology]
            kind = "ring"
            n = 5

            [world]
            hypotheses = 5
            alphabet_size = 6
            min_gap = 0.05

            [compression]
            operator = "{operator}"
            {k_line}

            [run]
            rounds = 60
            seed = 3
            repeats = 4
            "#
        );
        ExperimentConfig::from_str_validated(&text).unwrap()
    }

    #[test]
    fn deterministic_diagnostics_use_one_run_and_no_slack() {
        let ex = resolve(&diag_config("top_k", "k = 3")).unwrap();
        let (gamma, _) = ex.resolve_gamma(60).unwrap();
        let diag = run_diagnostics(&ex, gamma, 60).unwrap();
        assert_eq!(diag.repeats, 1);
        assert_eq!(diag.slack, 1.0);
        assert!(diag.report.all_recursion);
        assert!(diag.report.all_envelope);
        assert_eq!(diag.rates.len(), 4);
        assert_eq!(diag.rates[0].1.len(), 60);
        assert_eq!(diag.margins.len(), 60);
        // Desk-scale bound constants dwarf the belief decay at t = 60.
        assert!(diag.margins.iter().all(|m| *m > 0.0));
        assert!(!diag.nonasym.evaluated, "T(rho) exceeds 60 rounds here");
    }

    #[test]
    fn randomized_diagnostics_average_over_repeats() {
        let ex = resolve(&diag_config("rand_k", "k = 3")).unwrap();
        let (gamma, _) = ex.resolve_gamma(60).unwrap();
        let diag = run_diagnostics(&ex, gamma, 60).unwrap();
        assert_eq!(diag.repeats, 4);
        assert_eq!(diag.slack, SAMPLING_SLACK);
        assert_eq!(diag.trace.e.len(), 60);
        assert!(diag.trace.e.iter().all(|&e| e >= 0.0));
    }
}
