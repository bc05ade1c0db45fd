//! CSV output. All floating-point fields carry 12 significant digits so
//! traces are reproducible byte for byte under a fixed seed.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::diagnose::DiagnosticsRun;
use crate::experiment::{McSummary, RunOutcome, SweepCell};

/// Formats with 12 significant digits (scientific notation).
pub fn sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    format!("{v:.11e}")
}

pub fn trace_csv(outcome: &RunOutcome) -> String {
    let n = outcome.rows.first().map_or(0, |r| r.beliefs.len());
    let mut out = String::from("t,error,bits");
    for i in 0..n {
        out.push_str(&format!(",belief_{i}"));
    }
    out.push('\n');
    for row in &outcome.rows {
        out.push_str(&format!("{},{},{}", row.t, sig(row.error), row.bits));
        for b in &row.beliefs {
            out.push(',');
            out.push_str(&sig(*b));
        }
        out.push('\n');
    }
    out
}

pub fn write_trace(path: &Path, outcome: &RunOutcome) -> Result<()> {
    fs::write(path, trace_csv(outcome)).with_context(|| format!("writing trace {}", path.display()))
}

/// One row per round; fields outside their defined range are "nan"
/// (the deviation columns stop one round before the rate columns start
/// being meaningful).
pub fn diagnostics_csv(diag: &DiagnosticsRun) -> String {
    let rounds = diag.trace.e.len();
    let mut out = String::from("t,e,z,envelope,recursion_ok");
    for (theta, _) in &diag.rates {
        out.push_str(&format!(",rate_{theta}"));
    }
    out.push_str(",bound_margin\n");
    for t in 0..=rounds {
        let (e, z, env, rec) = if t < rounds {
            (
                sig(diag.trace.e[t]),
                sig(diag.trace.z[t]),
                sig(diag.constants.envelope(diag.trace.e[0], t as u64)),
                if diag.report.recursion_ok[t] {
                    "1"
                } else {
                    "0"
                }
                .to_string(),
            )
        } else {
            ("nan".into(), "nan".into(), "nan".into(), "nan".into())
        };
        out.push_str(&format!("{t},{e},{z},{env},{rec}"));
        for (_, series) in &diag.rates {
            let rate = if t >= 1 { series[t - 1] } else { f64::NAN };
            out.push(',');
            out.push_str(&sig(rate));
        }
        let margin = if t >= 1 {
            diag.margins[t - 1]
        } else {
            f64::NAN
        };
        out.push(',');
        out.push_str(&sig(margin));
        out.push('\n');
    }
    out
}

pub fn write_diagnostics(path: &Path, diag: &DiagnosticsRun) -> Result<()> {
    fs::write(path, diagnostics_csv(diag))
        .with_context(|| format!("writing diagnostics {}", path.display()))
}

pub fn mc_csv(summary: &McSummary) -> String {
    let mut out = String::from("run,converged_at,bits_to_threshold,final_error\n");
    for run in &summary.per_run {
        let rounds = run
            .converged_at
            .map_or("nan".to_string(), |v| v.to_string());
        let bits = run
            .bits_to_threshold
            .map_or("nan".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            run.run,
            rounds,
            bits,
            sig(run.final_error)
        ));
    }
    out
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "parameter,value,ratio,k,omega,gamma,bits_per_round,runs,converged,\
         mean_rounds,std_rounds,mean_bits,std_bits,mean_final_error\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.parameter,
            c.value,
            sig(c.ratio),
            c.k,
            sig(c.omega),
            sig(c.gamma),
            c.bits_per_round,
            c.summary.runs,
            c.summary.converged,
            sig(c.summary.mean_rounds),
            sig(c.summary.std_rounds),
            sig(c.summary.mean_bits),
            sig(c.summary.std_bits),
            sig(c.summary.mean_final_error),
        ));
    }
    out
}
