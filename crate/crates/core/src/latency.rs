//! Feasibility model for hiding client perturbation passes behind the
//! uplink, server compute and downlink of a split transformer round.
//!
//! Per-layer forward FLOPs:
//!
//! ```text
//! 2·B·S·(2·H² + 2·H·kv + m·H·F) + 4·B·S²·H
//! ```
//!
//! with `kv` the key/value projection width, `F` the MLP width and `m` the
//! number of MLP matrices (2 plain, 3 gated). With `kv = H`, `F = 4H`,
//! `m = 2` this is `24·B·S·H² + 4·B·S²·H`. The server runs forward and
//! backward (3x forward); the client runs forward only. Half the RTT is
//! charged to each direction.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_tagged, domain, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkProfile {
    pub uplink_bps: f64,
    pub downlink_bps: f64,
    pub rtt_seconds: f64,
}

impl Default for NetworkProfile {
    fn default() -> Self {
        NetworkProfile {
            uplink_bps: 30e6,
            downlink_bps: 200e6,
            rtt_seconds: 0.030,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub client_flops_per_s: f64,
    pub server_flops_per_s: f64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        DeviceProfile {
            client_flops_per_s: 2.0e12,
            server_flops_per_s: 312e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub batch: u64,
    pub seq_len: u64,
    pub hidden: u64,
    pub layers: u64,
    pub client_layers: u64,
    pub bytes_per_element: u64,
    /// MLP inner width; `None` means `4 * hidden`.
    #[serde(default)]
    pub ffn_dim: Option<u64>,
    /// Key/value projection width; `None` means `hidden`.
    #[serde(default)]
    pub kv_dim: Option<u64>,
    /// Gated MLP (three matrices instead of two).
    #[serde(default)]
    pub gated_mlp: bool,
}

impl WorkloadProfile {
    /// Plain transformer geometry: `F = 4H`, full-width K/V, two MLP matrices.
    pub fn dense(batch: u64, seq_len: u64, hidden: u64, layers: u64, client_layers: u64) -> Self {
        WorkloadProfile {
            batch,
            seq_len,
            hidden,
            layers,
            client_layers,
            bytes_per_element: 2,
            ffn_dim: None,
            kv_dim: None,
            gated_mlp: false,
        }
    }

    /// LLaMA-3.2-1B-style geometry at batch 32, sequence 256, fp16.
    pub fn llama_1b(client_layers: u64) -> Self {
        WorkloadProfile {
            batch: 32,
            seq_len: 256,
            hidden: 2048,
            layers: 18,
            client_layers,
            bytes_per_element: 2,
            ffn_dim: Some(8192),
            kv_dim: Some(512),
            gated_mlp: true,
        }
    }

    pub fn with_client_layers(mut self, client_layers: u64) -> Self {
        self.client_layers = client_layers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch", self.batch),
            ("seq_len", self.seq_len),
            ("hidden", self.hidden),
            ("bytes_per_element", self.bytes_per_element),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("workload.{name} must be positive")));
            }
        }
        if self.client_layers < 1 || self.client_layers >= self.layers {
            return Err(Error::InvalidConfig(format!(
                "workload.client_layers must satisfy 1 <= L_c < L={}, got {}",
                self.layers, self.client_layers
            )));
        }
        Ok(())
    }

    /// Bytes of one cut-layer activation tensor.
    pub fn activation_bytes(&self) -> f64 {
        (self.batch * self.seq_len * self.hidden * self.bytes_per_element) as f64
    }

    pub fn layer_flops(&self) -> f64 {
        let (b, s, h) = (self.batch as f64, self.seq_len as f64, self.hidden as f64);
        let f = self.ffn_dim.map_or(4.0 * h, |v| v as f64);
        let kv = self.kv_dim.map_or(h, |v| v as f64);
        let mats = if self.gated_mlp { 3.0 } else { 2.0 };
        2.0 * b * s * (2.0 * h * h + 2.0 * h * kv + mats * h * f) + 4.0 * b * s * s * h
    }
}

/// Forward FLOPs of one dense transformer layer.
pub fn transformer_layer_flops(batch: u64, seq_len: u64, hidden: u64) -> f64 {
    WorkloadProfile::dense(batch, seq_len, hidden, 2, 1).layer_flops()
}

fn validate_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in pairs {
        if !(v > 0.0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

impl NetworkProfile {
    pub fn validate(&self) -> Result<()> {
        validate_positive(&[("network.uplink_bps", self.uplink_bps), ("network.downlink_bps", self.downlink_bps)])?;
        if !(self.rtt_seconds >= 0.0) {
            return Err(Error::InvalidConfig("network.rtt_seconds must be non-negative".into()));
        }
        Ok(())
    }
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        validate_positive(&[
            ("device.client_flops_per_s", self.client_flops_per_s),
            ("device.server_flops_per_s", self.server_flops_per_s),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTimeline {
    pub t_client_fwd: f64,
    pub t_uplink: f64,
    pub t_server: f64,
    pub t_downlink: f64,
    pub t_perturb_total: f64,
    pub idle_window: f64,
}

pub fn round_timeline(net: &NetworkProfile, dev: &DeviceProfile, work: &WorkloadProfile, perturbations: u64) -> RoundTimeline {
    let layer = work.layer_flops();
    let act_bits = work.activation_bytes() * 8.0;
    let t_client_fwd = work.client_layers as f64 * layer / dev.client_flops_per_s;
    let server_layers = work.layers.saturating_sub(work.client_layers) as f64;
    let t_server = 3.0 * server_layers * layer / dev.server_flops_per_s;
    let t_uplink = act_bits / net.uplink_bps + net.rtt_seconds / 2.0;
    let t_downlink = act_bits / net.downlink_bps + net.rtt_seconds / 2.0;
    RoundTimeline {
        t_client_fwd,
        t_uplink,
        t_server,
        t_downlink,
        t_perturb_total: perturbations as f64 * t_client_fwd,
        idle_window: t_uplink + t_server + t_downlink,
    }
}

fn floor_ratio(timeline: &RoundTimeline) -> u64 {
    if !timeline.t_client_fwd.is_finite() {
        return 0;
    }
    let r = timeline.idle_window / timeline.t_client_fwd;
    if r.is_finite() {
        r.floor() as u64
    } else {
        u64::MAX
    }
}

/// Largest `P` whose perturbation passes fit inside the idle window.
pub fn max_overlapped_perturbations(net: &NetworkProfile, dev: &DeviceProfile, work: &WorkloadProfile) -> u64 {
    floor_ratio(&round_timeline(net, dev, work, 0))
}

/// Same as [`max_overlapped_perturbations`] with every speed scaled by an
/// independent uniform factor in `[1 - noise, 1 + noise]`.
pub fn max_overlapped_perturbations_noisy(
    net: &NetworkProfile,
    dev: &DeviceProfile,
    work: &WorkloadProfile,
    noise: f64,
    seed: u64,
) -> u64 {
    let mut rng = seeded_rng(derive_tagged(seed, domain::LATENCY, work.client_layers, 0));
    let mut jitter = || 1.0 + noise * rng.gen_range(-1.0..=1.0);
    let net = NetworkProfile {
        uplink_bps: net.uplink_bps * jitter(),
        downlink_bps: net.downlink_bps * jitter(),
        rtt_seconds: net.rtt_seconds,
    };
    let dev = DeviceProfile {
        client_flops_per_s: dev.client_flops_per_s * jitter(),
        server_flops_per_s: dev.server_flops_per_s * jitter(),
    };
    max_overlapped_perturbations(&net, &dev, work)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub client_layers: u64,
    pub timeline: RoundTimeline,
    pub p_max: u64,
    /// `(min, max)` of `P_max` over noisy draws, when noise is enabled.
    pub p_max_band: Option<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub level: f64,
    pub draws: u32,
    pub seed: u64,
}

pub fn latency_sweep(
    net: &NetworkProfile,
    dev: &DeviceProfile,
    base: &WorkloadProfile,
    client_layers: std::ops::RangeInclusive<u64>,
    noise: Option<NoiseSpec>,
) -> Result<Vec<SweepRow>> {
    net.validate()?;
    dev.validate()?;
    let mut rows = Vec::new();
    for lc in client_layers {
        let work = base.with_client_layers(lc);
        work.validate()?;
        let p_max = max_overlapped_perturbations(net, dev, &work);
        let p_max_band = noise.map(|n| {
            (0..n.draws)
                .map(|i| max_overlapped_perturbations_noisy(net, dev, &work, n.level, derive_tagged(n.seed, domain::LATENCY, i as u64, 1)))
                .fold((u64::MAX, 0), |(lo, hi), p| (lo.min(p), hi.max(p)))
        });
        rows.push(SweepRow {
            client_layers: lc,
            timeline: round_timeline(net, dev, &work, p_max),
            p_max,
            p_max_band,
        });
    }
    Ok(rows)
}

/// Comma-separated table, one row per client depth.
pub fn write_sweep_table<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "client_layers",
        "t_client_fwd",
        "t_uplink",
        "t_server",
        "t_downlink",
        "idle_window",
        "p_max",
        "p_max_low",
        "p_max_high",
    ])?;
    for r in rows {
        let t = &r.timeline;
        let (lo, hi) = r
            .p_max_band
            .map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        w.write_record([
            r.client_layers.to_string(),
            format!("{:.9}", t.t_client_fwd),
            format!("{:.9}", t.t_uplink),
            format!("{:.9}", t.t_server),
            format!("{:.9}", t.t_downlink),
            format!("{:.9}", t.idle_window),
            r.p_max.to_string(),
            lo,
            hi,
        ])?;
    }
    w.flush()?;
    Ok(())
}
