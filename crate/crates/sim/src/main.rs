//! `entauth` — simulator and analysis CLI for the hybrid entanglement
//! authentication protocol.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when `selftest`
//! finds a violation, 1 on I/O failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entauth_sim::config::{ConfigError, ExperimentConfig, OutputFormat};
use entauth_sim::report::render_sweep;
use entauth_sim::runner::{run_experiment, size_table, sweep, DEFAULT_SIZE_TARGETS};
use entauth_sim::selftest;

#[derive(Parser)]
#[command(
    name = "entauth",
    about = "Simulate a trusted-server entanglement authentication protocol against eavesdropper strategies and check the closed-form security bounds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Monte Carlo experiment and print its report.
    Run(RunArgs),
    /// Run one experiment per value of a swept parameter.
    Sweep(SweepArgs),
    /// Print the (k, d) sizing table for target security levels.
    Size(SizeArgs),
    /// Run the oracle-equality and Monte Carlo regression suite.
    Selftest(SelftestArgs),
}

/// Options shared by `run` and `sweep`; flags override config-file values.
#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the per-trial random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Eavesdropper strategy: passive, intercept-resend, subset-guess,
    /// photon-number-splitting (pns), oracle-locations.
    #[arg(long)]
    strategy: Option<String>,
    /// Key-bit count k.
    #[arg(long)]
    k: Option<u32>,
    /// Tamper-bit count d.
    #[arg(long)]
    d: Option<u32>,
    /// Subset size g for the subset-guess strategy.
    #[arg(long)]
    g: Option<u32>,
    /// Single-photon emission probability p1.
    #[arg(long)]
    p1: Option<f64>,
    /// Maximum photons per emission.
    #[arg(long)]
    max_photons: Option<u32>,
    /// Tamper error threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Disclosed key bits m.
    #[arg(long)]
    m: Option<u32>,
    /// Target security level D.
    #[arg(long)]
    target_d: Option<f64>,
    /// Restart budget after failed tamper checks.
    #[arg(long)]
    max_restarts: Option<u32>,
    /// Which arm Eve taps: alice-arm, bob-arm, both-arms.
    #[arg(long)]
    placement: Option<String>,
    /// Grant Eve the decrypted classical messages.
    #[arg(long)]
    knows_plaintext: bool,
    /// Report format: json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Write the report to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Parameter to sweep: g, d, k, p1, target_d.
    #[arg(long)]
    vary: String,
    /// Comma-separated list of values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

#[derive(Args)]
struct SizeArgs {
    /// Comma-separated target security levels D.
    #[arg(long, value_delimiter = ',')]
    target_d: Vec<f64>,
    /// Report format: json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Write the table to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Trials per Monte Carlo regression experiment.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

fn build_config(args: &ExperimentArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| {
            ConfigError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        config.apply_file(&text)?;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        config.set("trials", &trials.to_string())?;
    }
    if let Some(strategy) = &args.strategy {
        config.set("strategy", strategy)?;
    }
    if let Some(k) = args.k {
        config.set("k", &k.to_string())?;
    }
    if let Some(d) = args.d {
        config.set("d", &d.to_string())?;
    }
    if let Some(g) = args.g {
        config.set("g", &g.to_string())?;
    }
    if let Some(p1) = args.p1 {
        config.set("p1", &p1.to_string())?;
    }
    if let Some(max_photons) = args.max_photons {
        config.set("max_photons", &max_photons.to_string())?;
    }
    if let Some(threshold) = args.threshold {
        config.set("error_threshold", &threshold.to_string())?;
    }
    if let Some(m) = args.m {
        config.set("m", &m.to_string())?;
    }
    if let Some(target) = args.target_d {
        config.set("target_d", &target.to_string())?;
    }
    if let Some(max_restarts) = args.max_restarts {
        config.set("max_restarts", &max_restarts.to_string())?;
    }
    if let Some(placement) = &args.placement {
        config.set("placement", placement)?;
    }
    if args.knows_plaintext {
        config.set("knows_plaintext", "true")?;
    }
    if let Some(format) = &args.format {
        config.set("output_format", format)?;
    }
    Ok(config)
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), ExitCode> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::from(1)
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn config_failure(err: ConfigError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => {
            let config = match build_config(&args.experiment) {
                Ok(config) => config,
                Err(e) => return config_failure(e),
            };
            if !config.strategy.is_rational_forgery(config.params.key_count) {
                eprintln!(
                    "note: subset size g < k can never cover the key; treating this as a test configuration"
                );
            }
            let report = match run_experiment(&config) {
                Ok(report) => report,
                Err(e) => return config_failure(e),
            };
            match emit(&report.render(config.output_format), args.experiment.out.as_ref()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(code) => code,
            }
        }
        Command::Sweep(args) => {
            let config = match build_config(&args.experiment) {
                Ok(config) => config,
                Err(e) => return config_failure(e),
            };
            let reports = match sweep(&config, &args.vary, &args.values) {
                Ok(reports) => reports,
                Err(e) => return config_failure(e),
            };
            let text = render_sweep(&reports, config.output_format);
            match emit(&text, args.experiment.out.as_ref()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(code) => code,
            }
        }
        Command::Size(args) => {
            let targets = if args.target_d.is_empty() {
                DEFAULT_SIZE_TARGETS.to_vec()
            } else {
                args.target_d.clone()
            };
            let format = match args.format.as_deref() {
                None => OutputFormat::Json,
                Some(name) => match OutputFormat::parse(name) {
                    Some(format) => format,
                    None => {
                        return config_failure(ConfigError::new(
                            "format",
                            format!("unknown format `{name}`"),
                        ))
                    }
                },
            };
            let table = match size_table(&targets) {
                Ok(table) => table,
                Err(e) => return config_failure(e),
            };
            match emit(&table.render(format), args.out.as_ref()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(code) => code,
            }
        }
        Command::Selftest(args) => {
            if args.trials == 0 {
                return config_failure(ConfigError::new("trials", "must be at least 1"));
            }
            let results = selftest::run_selftest(args.trials);
            for result in &results {
                let status = if result.passed { "ok  " } else { "FAIL" };
                println!("{status} {} — {}", result.name, result.details);
            }
            if selftest::all_passed(&results) {
                println!("selftest passed ({} checks)", results.len());
                ExitCode::SUCCESS
            } else {
                println!("selftest FAILED");
                ExitCode::from(3)
            }
        }
    }
}
