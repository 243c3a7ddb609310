use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use spinbath_cli::analysis::{self, FIT_FILE, LDOS_FILE, SPECTRUM_FILE};
use spinbath_cli::run::{write_text, METRICS_FILE};
use spinbath_cli::validate::validate;
use spinbath_cli::{run, CliError, RunConfig, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "spinbath",
    version,
    about = "Decoherence and thermalization of spin systems in spin baths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory; overrides `run.output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate and write the metric time series.
    Run {
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Seeds for a batch, e.g. `1-8` or `3,5,9`; each gets `<out>/seed_<s>`.
        #[arg(long)]
        seeds: Option<String>,
        /// Trajectories run at once in batch mode.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Stop after this many steps, leaving a checkpoint.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Eigenvalues of the system Hamiltonian.
    Spectrum,
    /// Local density of states of the initial state.
    Ldos,
    /// Exponential fits of a finished run.
    Fit {
        /// Metrics file to fit instead of `<out>/metrics.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compare against dense oracles (at most 12 spins).
    Validate {
        /// Shrink the spectral bounds to exercise the bound check.
        #[arg(long, hide = true)]
        corrupt_bounds: bool,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config {
        message: format!("cannot parse seed list `{text}`"),
        line: None,
    };
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.run.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_one(cfg: &RunConfig, seed: u64, dir: &Path, opts: RunOptions) -> Result<(), CliError> {
    let summary = run(cfg, seed, dir, opts)?;
    eprintln!(
        "seed {seed}: {} steps, norm drift {:.2e}, energy drift {:.2e}, order {}{}",
        summary.steps_done,
        summary.norm_drift,
        summary.energy_drift,
        summary.chebyshev_order,
        if summary.completed {
            ""
        } else {
            " (stopped, checkpoint kept)"
        }
    );
    if summary.completed {
        if cfg.run.fit {
            let report = analysis::fit_run_dir(dir, cfg.run.fit_start)?;
            write_text(dir, FIT_FILE, &report.to_toml(cfg.run.tau))?;
        }
        if cfg.run.ldos {
            let l = analysis::ldos(cfg, seed)?;
            write_text(dir, LDOS_FILE, &analysis::ldos_table(&l.spectrum))?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        message: "--config <path> is required".into(),
        line: None,
    })?;
    let cfg = RunConfig::load(path)?;
    let seed = cli.seed.unwrap_or(cfg.run.seed);
    let out = out_dir(cli, &cfg);
    match &cli.command {
        Command::Run {
            resume,
            seeds,
            jobs,
            stop_after,
        } => {
            let opts = RunOptions {
                resume: *resume,
                stop_after: *stop_after,
            };
            match seeds {
                None => run_one(&cfg, seed, &out, opts),
                Some(list) => {
                    let seeds = parse_seeds(list)?;
                    let jobs = (*jobs).max(1);
                    let mut first_err = None;
                    for batch in seeds.chunks(jobs) {
                        let results: Vec<Result<(), CliError>> = batch
                            .par_iter()
                            .map(|&s| run_one(&cfg, s, &out.join(format!("seed_{s}")), opts))
                            .collect();
                        for r in results {
                            if let Err(e) = r {
                                eprintln!("{e}");
                                first_err.get_or_insert(e);
                            }
                        }
                    }
                    first_err.map_or(Ok(()), Err)
                }
            }
        }
        Command::Spectrum => {
            let basis = analysis::spectrum(&cfg, seed)?;
            let table = analysis::spectrum_table(&basis);
            print!("{table}");
            if cli.out.is_some() {
                write_text(&out, SPECTRUM_FILE, &table)?;
            }
            Ok(())
        }
        Command::Ldos => {
            let l = analysis::ldos(&cfg, seed)?;
            write_text(&out, LDOS_FILE, &analysis::ldos_table(&l.spectrum))?;
            println!(
                "normalization {:.6}\nmean {:.10}\nvariance {:.10}\nwindow {:.6e}\nsteps {}",
                l.spectrum.normalization(),
                l.spectrum.mean(),
                l.spectrum.variance(),
                l.sampling.window_width,
                l.sampling.n_steps
            );
            Ok(())
        }
        Command::Fit { input } => {
            let report = match input {
                Some(p) => analysis::fit_series(p, None, cfg.run.fit_start)?,
                None => analysis::fit_run_dir(&out, cfg.run.fit_start)?,
            };
            let text = report.to_toml(cfg.run.tau);
            print!("{text}");
            write_text(&out, FIT_FILE, &text)?;
            if report.any_success() {
                Ok(())
            } else {
                Err(CliError::Numerical(format!(
                    "no fit converged on {}",
                    input
                        .clone()
                        .unwrap_or_else(|| out.join(METRICS_FILE))
                        .display()
                )))
            }
        }
        Command::Validate { corrupt_bounds } => {
            let report = validate(&cfg, seed, *corrupt_bounds)?;
            print!("{}", report.render());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Numerical(
                    "oracle deviation above tolerance".into(),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("cannot configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
