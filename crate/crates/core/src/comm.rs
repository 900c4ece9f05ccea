//! Payload-level traffic accounting.
//!
//! Sizes: 8 bytes per float, 8 per seed, 4 per class label. Framing and
//! headers are ignored. Broadcasts are counted once at server egress.
//! Catch-up downloads made by stale clients are tracked apart from the live
//! per-round traffic so that live totals stay comparable to the closed form.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{LossKind, SplitModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    ActivationUp,
    LabelUp,
    /// Activation gradient `lambda`.
    GradDown,
    ModelUp,
    ModelDown,
    ScalarUp,
    ScalarDown,
    SeedDown,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::ActivationUp,
        MessageKind::LabelUp,
        MessageKind::GradDown,
        MessageKind::ModelUp,
        MessageKind::ModelDown,
        MessageKind::ScalarUp,
        MessageKind::ScalarDown,
        MessageKind::SeedDown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn direction(self) -> Direction {
        match self {
            MessageKind::ActivationUp
            | MessageKind::LabelUp
            | MessageKind::ModelUp
            | MessageKind::ScalarUp => Direction::Up,
            _ => Direction::Down,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::ActivationUp => "ActivationUp",
            MessageKind::LabelUp => "LabelUp",
            MessageKind::GradDown => "GradDown",
            MessageKind::ModelUp => "ModelUp",
            MessageKind::ModelDown => "ModelDown",
            MessageKind::ScalarUp => "ScalarUp",
            MessageKind::ScalarDown => "ScalarDown",
            MessageKind::SeedDown => "SeedDown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    /// History replay fetched by a stale client.
    DownSync,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::DownSync => "down-sync",
        }
    }
}

/// Bytes keyed by message kind, `MessageKind::ALL` order.
pub type KindBytes = [u64; 8];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficLedger {
    totals: KindBytes,
    catch_up: KindBytes,
    /// Cumulative live totals at the end of each closed round.
    per_round: Vec<KindBytes>,
}

impl TrafficLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, kind: MessageKind, bytes: u64) {
        self.totals[kind.index()] += bytes;
    }

    pub fn record_catch_up(&mut self, kind: MessageKind, bytes: u64) {
        self.catch_up[kind.index()] += bytes;
    }

    pub fn total(&self, kind: MessageKind) -> u64 {
        self.totals[kind.index()]
    }

    pub fn catch_up(&self, kind: MessageKind) -> u64 {
        self.catch_up[kind.index()]
    }

    pub fn totals(&self) -> &KindBytes {
        &self.totals
    }

    pub fn catch_up_totals(&self) -> &KindBytes {
        &self.catch_up
    }

    pub fn grand_total(&self) -> u64 {
        self.totals.iter().chain(&self.catch_up).sum()
    }

    /// Marks the end of a round.
    pub fn close_round(&mut self) {
        self.per_round.push(self.totals);
    }

    pub fn snapshots(&self) -> &[KindBytes] {
        &self.per_round
    }

    /// Per-round increments; their sum equals the totals at the last close.
    pub fn round_deltas(&self) -> Vec<KindBytes> {
        let mut prev = [0u64; 8];
        self.per_round
            .iter()
            .map(|snap| {
                let mut d = [0u64; 8];
                for i in 0..8 {
                    d[i] = snap[i] - prev[i];
                }
                prev = *snap;
                d
            })
            .collect()
    }

    /// Totals as a name-keyed map, for serialization.
    pub fn totals_by_name(&self) -> BTreeMap<&'static str, u64> {
        MessageKind::ALL
            .iter()
            .map(|k| (k.name(), self.total(*k)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Hosfl,
    Sfl,
    Zosfl,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Hosfl, ProtocolKind::Sfl, ProtocolKind::Zosfl];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Hosfl => "hosfl",
            ProtocolKind::Sfl => "sfl",
            ProtocolKind::Zosfl => "zosfl",
        }
    }
}

/// Inputs of the per-round traffic formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficShape {
    pub clients_per_round: u64,
    pub batch_size: u64,
    pub perturbations: u64,
}

/// Label payload per sample for a model's loss.
pub fn label_bytes_per_sample(model: &SplitModelConfig) -> u64 {
    match model.loss {
        LossKind::SoftmaxCrossEntropy => 4,
        LossKind::SquaredError => 8 * model.output_dim() as u64,
    }
}

/// Live bytes per round for each kind.
pub fn closed_form_traffic(shape: TrafficShape, model: &SplitModelConfig, protocol: ProtocolKind) -> KindBytes {
    let k = shape.clients_per_round;
    let b = shape.batch_size;
    let p = shape.perturbations;
    let act = k * b * model.cut_width() as u64 * 8;
    let labels = k * b * label_bytes_per_sample(model);
    let d_c = model.client_dim() as u64;
    let mut out = [0u64; 8];
    let mut set = |kind: MessageKind, v: u64| out[kind.index()] = v;
    match protocol {
        ProtocolKind::Hosfl => {
            set(MessageKind::ActivationUp, act);
            set(MessageKind::LabelUp, labels);
            set(MessageKind::GradDown, act);
            set(MessageKind::ScalarUp, k * p * 8);
            set(MessageKind::ScalarDown, p * 8);
            set(MessageKind::SeedDown, p * 8);
        }
        ProtocolKind::Sfl => {
            set(MessageKind::ActivationUp, act);
            set(MessageKind::LabelUp, labels);
            set(MessageKind::GradDown, act);
            set(MessageKind::ModelUp, k * d_c * 8);
            set(MessageKind::ModelDown, k * d_c * 8);
        }
        ProtocolKind::Zosfl => {
            set(MessageKind::ActivationUp, 2 * act);
            set(MessageKind::LabelUp, labels);
            set(MessageKind::ModelUp, k * d_c * 8);
            set(MessageKind::ModelDown, k * d_c * 8);
            // One difference coefficient and one perturbation seed per client.
            set(MessageKind::ScalarDown, k * 8);
            set(MessageKind::SeedDown, k * 8);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub kind: MessageKind,
    pub direction: Direction,
    pub bytes: u64,
    pub share: f64,
}

/// One row per kind for live traffic, then the two catch-up rows.
pub fn breakdown_report(ledger: &TrafficLedger) -> Vec<BreakdownRow> {
    let mut rows: Vec<(MessageKind, Direction, u64)> = MessageKind::ALL
        .iter()
        .map(|&k| (k, k.direction(), ledger.total(k)))
        .collect();
    for k in [MessageKind::ScalarDown, MessageKind::SeedDown] {
        rows.push((k, Direction::DownSync, ledger.catch_up(k)));
    }
    let total: u64 = rows.iter().map(|r| r.2).sum();
    rows.into_iter()
        .map(|(kind, direction, bytes)| BreakdownRow {
            kind,
            direction,
            bytes,
            share: if total == 0 {
                0.0
            } else {
                bytes as f64 / total as f64
            },
        })
        .collect()
}

/// Writes `kind,direction,bytes,share` rows.
pub fn write_breakdown_csv<W: Write>(rows: &[BreakdownRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "direction", "bytes", "share"])?;
    for r in rows {
        w.write_record([
            r.kind.name().to_string(),
            r.direction.name().to_string(),
            r.bytes.to_string(),
            format!("{:.12}", r.share),
        ])?;
    }
    w.flush()?;
    Ok(())
}
