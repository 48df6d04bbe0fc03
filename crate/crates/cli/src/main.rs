//! `slar`: runs the Vlasov-Poisson benchmarks, convergence studies and
//! checkpoint slicing.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use slar_core::runner::{self, RunConfig, Simulation};
use slar_core::SlarError;

/// Exit status of a run stopped by a failing time step.
const STEP_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "slar", version, about = "Adaptive-rank semi-Lagrangian Vlasov-Poisson solver")]
struct Cli {
    /// Worker threads for accessor evaluation; defaults to all cores.
    #[arg(long, global = true, env = "SLAR_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step a benchmark, writing diagnostics.csv and checkpoints.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` of the config.
        #[arg(long, env = "SLAR_OUTPUT_DIR")]
        output: Option<PathBuf>,
        /// Continue from a checkpoint written by an earlier run of the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Reversibility errors over refinement levels and fitted orders.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Directory for convergence.csv; overrides `output_dir` of the config.
        #[arg(long, env = "SLAR_OUTPUT_DIR")]
        output: Option<PathBuf>,
    },
    /// Writes a 2D cut through a checkpoint as tidy CSV.
    Slice {
        #[arg(long)]
        checkpoint: PathBuf,
        /// The two free modes, by name (x1, v2, ...) or index.
        #[arg(long, value_delimiter = ',', required = true)]
        modes: Vec<String>,
        /// Values of the other modes, either in mode order or as name=value.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        fixed: Vec<String>,
        /// CSV file; standard output if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<SlarError>() {
        Some(SlarError::Step { .. }) => STEP_FAILURE,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run { config, output, resume } => {
            let cfg = load_config(&config, output)?;
            let out = runner::run(&cfg, resume.as_deref())?;
            log::info!("finished at t={} after {} steps; diagnostics in {}", out.time, out.step, out.csv_path.display());
            Ok(())
        }
        Command::Converge { config, levels, output } => {
            let cfg = load_config(&config, output)?;
            let table = runner::convergence_study(&cfg, levels)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("convergence.csv");
            table.write_csv(&path)?;
            let mut stdout = std::io::stdout().lock();
            for (study, rows, order) in [("spatial", &table.spatial, table.spatial_order), ("temporal", &table.temporal, table.temporal_order)] {
                for r in rows.iter() {
                    writeln!(stdout, "{study:<8} N={:<4} CFL={:<6} eps={:.1e} steps={:<5} error={:.3e}", r.n, r.cfl, r.eps_base, r.steps, r.error)?;
                }
                if let Some(order) = order {
                    writeln!(stdout, "{study} order {order:.2}")?;
                }
            }
            log::info!("wrote {}", path.display());
            Ok(())
        }
        Command::Slice { checkpoint, modes, fixed, output } => {
            if modes.len() != 2 {
                bail!("--modes takes exactly two modes, got {}", modes.len());
            }
            let (f, meta) = runner::load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let sim = Simulation::new(meta.config)?;
            let names = runner::mode_names(sim.system().layout());
            let free = (mode_index(&modes[0], &names)?, mode_index(&modes[1], &names)?);
            let values = fixed_values(&fixed, free, &names)?;
            let slice = runner::extract_slice(&f, sim.system().grid(), free, &values, &names)?;
            for (m, i, c) in &slice.fixed {
                log::info!("{} fixed at cell {i} (center {c})", names[*m]);
            }
            match output {
                Some(path) => slice.write_csv(path)?,
                None => slice.write_csv_to(std::io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn load_config(path: &Path, output: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(dir) = output {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn mode_index(token: &str, names: &[String]) -> Result<usize> {
    let token = token.trim();
    if let Some(m) = names.iter().position(|n| n == token) {
        return Ok(m);
    }
    match token.parse::<usize>() {
        Ok(m) if m < names.len() => Ok(m),
        _ => bail!("unknown mode '{token}', expected one of {} or an index below {}", names.join(", "), names.len()),
    }
}

/// Values for every mode outside `free`, in mode order.
fn fixed_values(tokens: &[String], free: (usize, usize), names: &[String]) -> Result<Vec<f64>> {
    let others: Vec<usize> = (0..names.len()).filter(|&m| m != free.0 && m != free.1).collect();
    let tokens: Vec<&str> = tokens.iter().map(|t| t.trim()).filter(|t| !t.is_empty()).collect();
    let parse = |s: &str| s.trim().parse::<f64>().with_context(|| format!("invalid value '{s}'"));
    if tokens.iter().all(|t| t.contains('=')) && !tokens.is_empty() {
        let mut values = vec![None; names.len()];
        for t in tokens {
            let (name, value) = t.split_once('=').unwrap();
            let m = mode_index(name, names)?;
            if !others.contains(&m) {
                bail!("mode {} is free and cannot be fixed", names[m]);
            }
            values[m] = Some(parse(value)?);
        }
        return others
            .iter()
            .map(|&m| values[m].with_context(|| format!("no value given for mode {}", names[m])))
            .collect();
    }
    if tokens.len() != others.len() {
        bail!("expected {} fixed values for modes {}, got {}", others.len(), others.iter().map(|&m| names[m].as_str()).collect::<Vec<_>>().join(", "), tokens.len());
    }
    tokens.into_iter().map(parse).collect()
}
