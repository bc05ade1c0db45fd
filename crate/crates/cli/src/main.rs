use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use complearn::{mixing_matrix, Topology};
use complearn_cli::config::ExperimentConfig;
use complearn_cli::diagnose::run_diagnostics;
use complearn_cli::experiment::{gamma_grid_search, monte_carlo, resolve, run_single, sweep};
use complearn_cli::plot::{plot_files, XAxis};
use complearn_cli::trace::{mc_csv, sig, sweep_csv, write_diagnostics, write_trace};

#[derive(Parser)]
#[command(
    name = "complearn",
    version,
    about = "Distributed social learning with compressed belief exchange"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv (plus world.txt, topology.txt).
    Run {
        config: PathBuf,
        /// Override run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.rounds.
        #[arg(long)]
        rounds: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Pair the run with its uncompressed oracle and write
        /// diagnostics.csv with the convergence-theory checks.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Monte Carlo over the [sweep] grid; writes sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Try every stepsize in the grid and report the fastest.
    GammaSearch {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// Print the mixing-matrix spectrum of an edge-list file.
    Spectral { topology: PathBuf },
    /// Render trace CSVs as a log-scale SVG line chart.
    Plot {
        /// Trace files; one series each.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// X axis: rounds or transmitted bits.
        #[arg(long, value_enum, default_value_t = XArg::Rounds)]
        x: XArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum XArg {
    Rounds,
    Bits,
}

impl From<XArg> for XAxis {
    fn from(x: XArg) -> Self {
        match x {
            XArg::Rounds => XAxis::Rounds,
            XArg::Bits => XAxis::Bits,
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>, rounds: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    if let Some(rounds) = rounds {
        config.run.rounds = rounds;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            rounds,
            out_dir,
            diagnostics,
        } => run_command(&config, seed, rounds, &out_dir, diagnostics),
        Command::Sweep {
            config,
            seed,
            out_dir,
        } => sweep_command(&config, seed, &out_dir),
        Command::GammaSearch {
            config,
            seed,
            rounds,
        } => gamma_search_command(&config, seed, rounds),
        Command::Spectral { topology } => spectral_command(&topology),
        Command::Plot { traces, out, x } => {
            plot_files(&traces, x.into(), &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn run_command(
    config_path: &Path,
    seed: Option<u64>,
    rounds_override: Option<u64>,
    out_dir: &Path,
    diagnostics: bool,
) -> Result<()> {
    let config = load_config(config_path, seed, rounds_override)?;
    let rounds = config.run.rounds;
    let ex = resolve(&config)?;
    println!(
        "world: n={} m={} alphabet={}  topology: {} edges, delta={} beta={}",
        ex.world.n,
        ex.world.m,
        ex.world.alphabet_sizes[0],
        ex.topology.edges.len(),
        sig(ex.matrix.spectral_gap),
        sig(ex.matrix.beta),
    );
    println!(
        "compression: {:?} k={} omega={}  message bits={}",
        ex.spec.kind,
        ex.spec.k,
        sig(ex.omega()),
        ex.spec.encoded_bits(ex.world.m)?,
    );
    let (gamma, grid) = ex.resolve_gamma(rounds)?;
    if let Some(report) = &grid {
        for c in &report.candidates {
            println!(
                "  grid gamma={}: converged_at={} final_error={}",
                sig(c.gamma),
                c.converged_at.map_or("-".into(), |t| t.to_string()),
                sig(c.final_error),
            );
        }
    }
    println!("gamma: {}", sig(gamma));

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let outcome = run_single(
        &ex,
        gamma,
        rounds,
        0,
        0,
        config.run.error_threshold,
        config.run.early_stop,
    )?;
    write_trace(&out_dir.join("trace.csv"), &outcome)?;
    ex.world.save(out_dir.join("world.txt"))?;
    ex.topology.dump(out_dir.join("topology.txt"))?;
    let last = outcome.rows.last().expect("trace has rows");
    println!(
        "run: {} rounds, final error {}, total bits {}",
        last.t,
        sig(outcome.final_error),
        last.bits,
    );
    match outcome.converged_at {
        Some(t) => println!(
            "threshold {} reached at round {t} ({} bits)",
            sig(config.run.error_threshold),
            outcome.bits_to_threshold.expect("bits recorded"),
        ),
        None => println!(
            "threshold {} not reached in {} rounds",
            sig(config.run.error_threshold),
            last.t
        ),
    }

    if config.run.runs > 1 {
        let summary = monte_carlo(&ex, gamma, rounds)?;
        fs::write(out_dir.join("mc.csv"), mc_csv(&summary))?;
        println!(
            "monte carlo: {}/{} runs converged, rounds {} +/- {}, bits {} +/- {}",
            summary.converged,
            summary.runs,
            sig(summary.mean_rounds),
            sig(summary.std_rounds),
            sig(summary.mean_bits),
            sig(summary.std_bits),
        );
    }

    if diagnostics {
        let diag = run_diagnostics(&ex, gamma, rounds)?;
        write_diagnostics(&out_dir.join("diagnostics.csv"), &diag)?;
        let c = &diag.constants;
        println!(
            "constants: gamma_star={} eta={} L={} R={} G1={} G2={} C2={}",
            sig(c.gamma_star),
            sig(c.eta),
            sig(c.big_l),
            sig(c.r_bound),
            sig(c.g1),
            sig(c.g2),
            sig(c.c2),
        );
        match (c.c1, c.t_rho) {
            (Some(c1), Some(t_rho)) => {
                println!(
                    "objective gap c1={} holding time T(rho)={}",
                    sig(c1),
                    sig(t_rho)
                )
            }
            _ => println!("objective gap undefined (tied optima); tail bound skipped"),
        }
        println!(
            "deviation checks over {} repeats (slack {}): recursion violations {}, envelope violations {}",
            diag.repeats,
            diag.slack,
            sig(diag.report.recursion_violations),
            sig(diag.report.envelope_violations),
        );
        if diag.nonasym.evaluated {
            println!(
                "tail bound from round {}: {} checks, {} violations, min margin {}",
                diag.nonasym.t_start,
                diag.nonasym.checked,
                diag.nonasym.violations,
                sig(diag.nonasym.min_margin),
            );
        } else {
            println!("tail bound not evaluated (run shorter than T(rho) or gap undefined)");
        }
    }
    Ok(())
}

fn sweep_command(config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let config = load_config(config_path, seed, None)?;
    let cells = sweep(&config)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    fs::write(out_dir.join("sweep.csv"), sweep_csv(&cells))?;
    for c in &cells {
        println!(
            "{}={} ratio={} k={} omega={}: {}/{} converged, rounds {} +/- {}, bits {}",
            c.parameter,
            c.value,
            sig(c.ratio),
            c.k,
            sig(c.omega),
            c.summary.converged,
            c.summary.runs,
            sig(c.summary.mean_rounds),
            sig(c.summary.std_rounds),
            sig(c.summary.mean_bits),
        );
    }
    println!("wrote {}", out_dir.join("sweep.csv").display());
    Ok(())
}

fn gamma_search_command(config_path: &Path, seed: Option<u64>, rounds: Option<u64>) -> Result<()> {
    let config = load_config(config_path, seed, rounds)?;
    let ex = resolve(&config)?;
    let report = gamma_grid_search(&ex, config.run.rounds)?;
    for c in &report.candidates {
        println!(
            "gamma={}: converged_at={} final_error={}",
            sig(c.gamma),
            c.converged_at.map_or("-".into(), |t| t.to_string()),
            sig(c.final_error),
        );
    }
    println!("selected {}", sig(report.selected));
    Ok(())
}

fn spectral_command(path: &Path) -> Result<()> {
    let topology =
        Topology::load(path).with_context(|| format!("loading topology {}", path.display()))?;
    let matrix = mixing_matrix(&topology)?;
    println!("nodes: {}", topology.n);
    println!("edges: {}", topology.edges.len());
    println!("spectral_gap: {}", sig(matrix.spectral_gap));
    println!("beta: {}", sig(matrix.beta));
    Ok(())
}
