//! Experiment execution and file emission behind the CLI subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::comm::{self, MessageKind, ProtocolKind, TrafficShape};
use crate::config::{ExperimentConfig, LatencyConfig};
use crate::error::Result;
use crate::latency::{self, SweepRow};
use crate::model;
use crate::numeric::Vector;
use crate::protocol::{self, MetricsLog, TrainingSetup};
use crate::zo::{self, EstimatorDiagnostics, GammaMeasurement, TheoryBounds};

pub const METRICS_FORMAT: &str = "hosfl-metrics/1";

/// Hex SHA-256 of the little-endian `f64` bytes of `theta`.
pub fn checksum(theta: &Vector) -> String {
    hex::encode(Sha256::digest(theta.to_le_bytes()))
}

pub fn training_setup(cfg: &ExperimentConfig) -> Result<TrainingSetup> {
    cfg.validate()?;
    let (train, eval) = cfg.build_datasets()?;
    let shards = cfg
        .partition
        .apply(&train.labels(), cfg.hp.clients, cfg.partition_seed())?;
    Ok(TrainingSetup {
        protocol: cfg.protocol,
        model: cfg.model.clone(),
        hp: cfg.hp.clone(),
        root_seed: cfg.root_seed,
        train,
        eval,
        shards,
        initial_theta: model::init_params(&cfg.model, cfg.init_seed()),
        sample_budget: cfg.sample_budget,
    })
}

#[derive(Serialize)]
struct MetricsHeader<'a> {
    format: &'a str,
    protocol: &'a str,
    root_seed: u64,
    rounds: u64,
    client_dim: usize,
    server_dim: usize,
    message_kinds: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: MetricsLog,
    pub checksum: String,
    pub metrics_path: PathBuf,
    pub traffic_path: PathBuf,
    pub checksum_path: PathBuf,
}

/// Trains and writes metrics, traffic breakdown and checksum under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let setup = training_setup(cfg)?;
    let log = protocol::run_training(&setup)?;
    fs::create_dir_all(out_dir)?;

    let metrics_path = out_dir.join(&cfg.output.metrics);
    let mut w = BufWriter::new(File::create(&metrics_path)?);
    let header = MetricsHeader {
        format: METRICS_FORMAT,
        protocol: cfg.protocol.name(),
        root_seed: cfg.root_seed,
        rounds: log.rounds_run,
        client_dim: cfg.model.client_dim(),
        server_dim: cfg.model.server_dim(),
        message_kinds: MessageKind::ALL.iter().map(|k| k.name()).collect(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for rec in &log.records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let traffic_path = out_dir.join(&cfg.output.traffic);
    comm::write_breakdown_csv(&comm::breakdown_report(&log.ledger), File::create(&traffic_path)?)?;

    let sum = checksum(&log.final_theta);
    let checksum_path = out_dir.join(&cfg.output.checksum);
    fs::write(&checksum_path, format!("{sum}\n"))?;
    log::info!(
        "{} finished {} rounds, checksum {sum}",
        cfg.protocol.name(),
        log.rounds_run
    );
    Ok(RunOutcome {
        log,
        checksum: sum,
        metrics_path,
        traffic_path,
        checksum_path,
    })
}

/// Writes the sweep table to `out_dir/<cfg.output>`.
pub fn latency_sweep(cfg: &LatencyConfig, out_dir: &Path) -> Result<(Vec<SweepRow>, PathBuf)> {
    let rows = latency::latency_sweep(
        &cfg.network,
        &cfg.device,
        &cfg.workload,
        cfg.client_layers_min..=cfg.client_layers_max,
        cfg.noise,
    )?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(&cfg.output);
    latency::write_sweep_table(&rows, File::create(&path)?)?;
    Ok((rows, path))
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub client_dim: usize,
    pub perturbations: usize,
    pub mu: f64,
    pub gamma: GammaMeasurement,
    pub theory: TheoryBounds,
    pub empirical: EstimatorDiagnostics,
}

/// Monte Carlo moments of the client estimator at the initial parameters,
/// next to the closed-form bounds. Written as JSON.
pub fn diagnose_estimator(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(DiagnosticReport, PathBuf)> {
    let setup = training_setup(cfg)?;
    let take = cfg.hp.batch_size.min(setup.train.len());
    let idx: Vec<usize> = (0..take).collect();
    let batch = setup.train.batch(&idx)?;
    let gamma = zo::measure_gamma(&setup.initial_theta, &batch, &cfg.model)?;
    let d_c = cfg.model.client_dim();
    let empirical = zo::estimator_diagnostics(
        &cfg.model,
        &setup.initial_theta,
        &batch,
        &cfg.hp.zo,
        cfg.diagnostics.trials,
        cfg.root_seed,
        cfg.diagnostics.sampling,
    )?;
    let report = DiagnosticReport {
        client_dim: d_c,
        perturbations: cfg.hp.zo.perturbations,
        mu: cfg.hp.zo.mu,
        theory: zo::theory_bounds(d_c, cfg.hp.zo.perturbations, cfg.hp.zo.mu, gamma.gamma),
        gamma,
        empirical,
    };
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("diagnostics.json");
    let mut f = File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, &report)?;
    f.write_all(b"\n")?;
    Ok((report, path))
}

/// Closed-form traffic of every protocol for this configuration:
/// `protocol,kind,direction,bytes_per_round,bytes_total`.
pub fn report_traffic(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let rounds = protocol::planned_rounds(&cfg.hp, cfg.sample_budget);
    let shape = TrafficShape {
        clients_per_round: cfg.hp.clients_per_round as u64,
        batch_size: cfg.hp.batch_size as u64,
        perturbations: cfg.hp.zo.perturbations as u64,
    };
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("traffic_report.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["protocol", "kind", "direction", "bytes_per_round", "bytes_total"])?;
    for p in ProtocolKind::ALL {
        let per_round = comm::closed_form_traffic(shape, &cfg.model, p);
        for k in MessageKind::ALL {
            let b = per_round[k.index()];
            w.write_record([
                p.name().to_string(),
                k.name().to_string(),
                k.direction().name().to_string(),
                b.to_string(),
                (b * rounds).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(path)
}
