use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hosfl::config::{self, ExperimentConfig, LatencyConfig};
use hosfl::runner;
use hosfl::Error;

/// Split federated learning simulator with seeded zeroth-order client updates.
#[derive(Parser)]
#[command(name = "hosfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the root seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one protocol; writes metrics, traffic breakdown and checksum.
    Run(Common),
    /// Sweep client depth in the latency model; writes a CSV table.
    SweepLatency(Common),
    /// Monte Carlo moments of the client estimator against the bounds.
    DiagnoseEstimator(Common),
    /// Closed-form per-round traffic for every protocol.
    ReportTraffic(Common),
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn experiment(c: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config is required".into()))?;
    let mut cfg = config::parse_config(&read(path)?)?;
    if let Some(seed) = c.seed {
        cfg.root_seed = seed;
        cfg.validate()?;
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(c) => {
            let (cfg, out) = experiment(&c)?;
            let res = runner::run(&cfg, &out)?;
            println!("rounds={} checksum={}", res.log.rounds_run, res.checksum);
            println!("metrics: {}", res.metrics_path.display());
            println!("traffic: {}", res.traffic_path.display());
        }
        Command::SweepLatency(c) => {
            let mut cfg = match &c.config {
                Some(p) => config::parse_latency_config(&read(p)?)?,
                None => LatencyConfig::default(),
            };
            if let (Some(seed), Some(noise)) = (c.seed, cfg.noise.as_mut()) {
                noise.seed = seed;
            }
            let out = c.out.unwrap_or_else(|| PathBuf::from("out"));
            let (rows, path) = runner::latency_sweep(&cfg, &out)?;
            for r in &rows {
                println!("L_c={} P_max={}", r.client_layers, r.p_max);
            }
            println!("table: {}", path.display());
        }
        Command::DiagnoseEstimator(c) => {
            let (cfg, out) = experiment(&c)?;
            let (report, path) = runner::diagnose_estimator(&cfg, &out)?;
            println!(
                "bias_sq={:.6e} (bound {:.6e}) second_moment={:.6e} gamma={:.4}",
                report.empirical.empirical_bias_sq,
                report.theory.bias_bound_sq,
                report.empirical.empirical_second_moment,
                report.gamma.gamma
            );
            println!("report: {}", path.display());
        }
        Command::ReportTraffic(c) => {
            let (cfg, out) = experiment(&c)?;
            let path = runner::report_traffic(&cfg, &out)?;
            println!("report: {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
