//! Experiment configuration, read from TOML.
//!
//! Unknown keys anywhere in the document are rejected. Parse errors carry
//! the line and column reported by the TOML parser.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::comm::ProtocolKind;
use crate::data::{self, Dataset, PartitionSpec, Task};
use crate::error::{Error, Result};
use crate::latency::{DeviceProfile, NetworkProfile, NoiseSpec, WorkloadProfile};
use crate::model::{LossKind, SplitModelConfig};
use crate::protocol::HyperParams;
use crate::rng::{derive_tagged, domain};
use crate::zo::MeanSampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub task: Task,
    pub n_train: usize,
    #[serde(default)]
    pub n_eval: usize,
    /// Blob center distance (classification).
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Additive target noise (regression).
    #[serde(default)]
    pub noise: f64,
}

fn default_separation() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_metrics")]
    pub metrics: String,
    #[serde(default = "default_traffic")]
    pub traffic: String,
    #[serde(default = "default_checksum")]
    pub checksum: String,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_metrics() -> String {
    "metrics.jsonl".into()
}
fn default_traffic() -> String {
    "traffic.csv".into()
}
fn default_checksum() -> String {
    "checksum.txt".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            metrics: default_metrics(),
            traffic: default_traffic(),
            checksum: default_checksum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_sampling")]
    pub sampling: MeanSampling,
}

fn default_trials() -> usize {
    1000
}
fn default_sampling() -> MeanSampling {
    MeanSampling::Plain
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            trials: default_trials(),
            sampling: default_sampling(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub root_seed: u64,
    /// Stop after this many processed samples; absent means `hp.rounds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_budget: Option<u64>,
    pub model: SplitModelConfig,
    pub hp: HyperParams,
    pub partition: PartitionSpec,
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Parse(e.to_string()))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.hp.validate()?;
        self.partition.validate()?;
        self.diagnostics_validate()?;
        // TOML integers are signed.
        if self.root_seed > i64::MAX as u64 {
            return Err(Error::InvalidConfig(format!("root_seed must be <= {}", i64::MAX)));
        }
        if self.sample_budget.is_some_and(|b| b > i64::MAX as u64) {
            return Err(Error::InvalidConfig(format!("sample_budget must be <= {}", i64::MAX)));
        }
        let d = &self.data;
        if d.n_train == 0 {
            return Err(Error::InvalidConfig("data.n_train must be >= 1".into()));
        }
        match (d.task, self.model.loss) {
            (Task::ClassificationBlobs, LossKind::SoftmaxCrossEntropy) => {
                if self.model.output_dim() < 2 {
                    return Err(Error::InvalidConfig(
                        "model.layer_dims must end in >= 2 classes for classification".into(),
                    ));
                }
                if !(d.separation >= 0.0 && d.separation.is_finite()) {
                    return Err(Error::InvalidConfig("data.separation must be non-negative".into()));
                }
            }
            (Task::RegressionQuadratic, LossKind::SquaredError) => {
                if !(d.noise >= 0.0 && d.noise.is_finite()) {
                    return Err(Error::InvalidConfig("data.noise must be non-negative".into()));
                }
            }
            (task, loss) => {
                return Err(Error::InvalidConfig(format!(
                    "data.task {} does not match model.loss {loss:?}",
                    task.name()
                )))
            }
        }
        Ok(())
    }

    fn diagnostics_validate(&self) -> Result<()> {
        if self.diagnostics.trials == 0 {
            return Err(Error::InvalidConfig("diagnostics.trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn data_seed(&self) -> u64 {
        derive_tagged(self.root_seed, domain::DATA, 0, 0)
    }

    pub fn partition_seed(&self) -> u64 {
        derive_tagged(self.root_seed, domain::PARTITION, 0, 0)
    }

    pub fn init_seed(&self) -> u64 {
        derive_tagged(self.root_seed, domain::INIT, 0, 0)
    }

    /// `(train, eval)`; eval falls back to the training set when `n_eval = 0`.
    pub fn build_datasets(&self) -> Result<(Dataset, Dataset)> {
        let d = &self.data;
        let n = d.n_train + d.n_eval;
        let all = match d.task {
            Task::ClassificationBlobs => data::make_classification_blobs(
                n,
                self.model.input_dim(),
                self.model.output_dim(),
                d.separation,
                self.data_seed(),
            )?,
            Task::RegressionQuadratic => data::make_regression_quadratic(
                n,
                self.model.input_dim(),
                self.model.output_dim(),
                d.noise,
                self.data_seed(),
            )?,
        };
        if d.n_eval == 0 {
            return Ok((all.clone(), all));
        }
        Ok(all.split(d.n_train))
    }
}

/// Inputs of the latency sweep. Every field defaults to the reference
/// edge-device setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    #[serde(default)]
    pub network: NetworkProfile,
    #[serde(default)]
    pub device: DeviceProfile,
    #[serde(default = "default_workload")]
    pub workload: WorkloadProfile,
    #[serde(default = "default_lc_min")]
    pub client_layers_min: u64,
    #[serde(default = "default_lc_max")]
    pub client_layers_max: u64,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_sweep_file")]
    pub output: String,
}

fn default_workload() -> WorkloadProfile {
    WorkloadProfile::llama_1b(4)
}
fn default_lc_min() -> u64 {
    2
}
fn default_lc_max() -> u64 {
    8
}
fn default_sweep_file() -> String {
    "latency_sweep.csv".into()
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            network: NetworkProfile::default(),
            device: DeviceProfile::default(),
            workload: default_workload(),
            client_layers_min: default_lc_min(),
            client_layers_max: default_lc_max(),
            noise: None,
            output: default_sweep_file(),
        }
    }
}

pub fn parse_latency_config(text: &str) -> Result<LatencyConfig> {
    let cfg: LatencyConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if cfg.client_layers_min > cfg.client_layers_max {
        return Err(Error::InvalidConfig(
            "client_layers_min must not exceed client_layers_max".into(),
        ));
    }
    if let Some(n) = cfg.noise {
        if !(0.0..1.0).contains(&n.level) || n.draws == 0 {
            return Err(Error::InvalidConfig(
                "noise.level must lie in [0, 1) and noise.draws must be >= 1".into(),
            ));
        }
    }
    cfg.network.validate()?;
    cfg.device.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
protocol = "hosfl"
root_seed = 42

[model]
layer_dims = [4, 6, 3]
activation = "tanh"
cut_index = 1
loss = "softmax_cross_entropy"

[hp]
eta = 0.1
rounds = 5
clients = 4
clients_per_round = 2
batch_size = 8

[partition]
mode = "iid"

[data]
task = "classification_blobs"
n_train = 64
"#;

    #[test]
    fn defaults_applied() {
        let cfg = parse_config(BASE).unwrap();
        assert_eq!(cfg.hp.zo.perturbations, 5);
        assert_eq!(cfg.hp.zo.mu, 1e-3);
        assert_eq!(cfg.output.metrics, "metrics.jsonl");
    }

    #[test]
    fn missing_protocol_is_named() {
        let text = BASE.replace("protocol = \"hosfl\"\n", "");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("protocol"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = BASE.replace("batch_size = 8", "batch_size = 8\nbatchsize = 3");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn k_above_m_rejected() {
        let text = BASE.replace("clients_per_round = 2", "clients_per_round = 9");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("clients_per_round"), "{err}");
    }

    #[test]
    fn parse_error_has_line() {
        let err = parse_config("protocol = \n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(BASE).unwrap();
        let again = parse_config(&serialize_config(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn latency_defaults() {
        let cfg = parse_latency_config("").unwrap();
        assert_eq!(cfg, LatencyConfig::default());
        assert!(parse_latency_config("bogus = 1").is_err());
    }
}
