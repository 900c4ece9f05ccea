//! Round orchestration for HO-SFL and the SFL / ZO-SFL baselines.
//!
//! All messaging is in-process; every transmission is booked on the
//! [`TrafficLedger`]. Server-side reductions walk sampled clients in
//! ascending id order, so results never depend on completion order.
//!
//! HO-SFL keeps one canonical client model on the server, updated by the
//! same rule as the clients. Clients outside the sampled set stay frozen and
//! replay the missed `(seed, scalar)` history when next selected.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comm::{KindBytes, MessageKind, ProtocolKind, TrafficLedger};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{self, Batch, SplitModelConfig};
use crate::numeric::{self, Vector};
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::rng::{derive_tagged, domain, gaussian_vector, round_seeds, seeded_rng};
use crate::zo::{self, ZoConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    /// Learning rate `eta`.
    pub eta: f64,
    /// Upper bound on rounds `T`.
    pub rounds: u64,
    /// Total clients `M`.
    pub clients: usize,
    /// Clients sampled per round `K`.
    pub clients_per_round: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub zo: ZoConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("hp.eta must be positive, got {}", self.eta)));
        }
        if self.clients == 0 {
            return Err(Error::InvalidConfig("hp.clients must be >= 1".into()));
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.clients {
            return Err(Error::InvalidConfig(format!(
                "hp.clients_per_round must lie in [1, clients={}], got {}",
                self.clients, self.clients_per_round
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("hp.batch_size must be >= 1".into()));
        }
        self.zo.validate()
    }

    /// Samples consumed by one round (`K * B`).
    pub fn samples_per_round(&self) -> u64 {
        (self.clients_per_round * self.batch_size) as u64
    }
}

/// What one HO-SFL round broadcast; enough to replay its client update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub seeds: Vec<u64>,
    pub v_bar: Vec<f64>,
    pub eta_used: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    records: BTreeMap<u64, RoundRecord>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: RoundRecord) {
        self.records.insert(record.round, record);
    }

    pub fn get(&self, round: u64) -> Option<&RoundRecord> {
        self.records.get(&round)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Drops every record older than `round`.
    pub fn prune_before(&mut self, round: u64) {
        self.records = self.records.split_off(&round);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub id: usize,
    pub theta_c: Vector,
    /// Round the local model corresponds to (`t'_m`).
    pub t_sync: u64,
    /// Indices into the training set.
    pub shard: Vec<usize>,
    pub optimizer: OptimizerState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerState {
    pub theta_s: Vector,
    pub round: u64,
    pub history: History,
    pub optimizer: OptimizerState,
    /// Canonical client-side model, kept for evaluation and baselines.
    pub theta_c: Vector,
    pub client_optimizer: OptimizerState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub participants: Vec<usize>,
    pub mean_train_loss: f64,
    /// Norm of the applied client-side update direction.
    pub client_grad_norm: f64,
    pub samples: u64,
    /// Cumulative live bytes per kind after this round.
    pub traffic: KindBytes,
}

/// Uniform subset of size `K` without replacement, sorted ascending.
pub fn sample_clients(clients: usize, per_round: usize, root_seed: u64, round: u64) -> Result<Vec<usize>> {
    if per_round > clients {
        return Err(Error::InvalidConfig(format!(
            "cannot sample {per_round} of {clients} clients"
        )));
    }
    let mut rng = seeded_rng(derive_tagged(root_seed, domain::CLIENT_SAMPLING, round, 0));
    let mut picked = sample(&mut rng, clients, per_round).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Replays missed rounds `[t_sync, now)` in order. Returns the number of
/// rounds replayed. No model parameters are transferred.
pub fn client_sync(client: &mut ClientState, history: &History, hp: &HyperParams, d_c: usize, now: u64) -> Result<u64> {
    if client.t_sync > now {
        return Err(Error::Protocol(format!(
            "client {} is ahead of the server ({} > {now})",
            client.id, client.t_sync
        )));
    }
    // Check coverage before touching the model.
    for tau in client.t_sync..now {
        if history.get(tau).is_none() {
            return Err(Error::UnrecoverableStaleness {
                client: client.id,
                round: tau,
            });
        }
    }
    let replayed = now - client.t_sync;
    for tau in client.t_sync..now {
        let rec = history.get(tau).expect("coverage checked");
        let g = zo::reconstruct_gradient(&rec.v_bar, &rec.seeds, &hp.zo, d_c)?;
        client.optimizer.step(&mut client.theta_c, &g, rec.eta_used)?;
    }
    client.t_sync = now;
    Ok(replayed)
}

/// Server, clients, data and ledger of one simulated federation.
#[derive(Debug, Clone)]
pub struct Federation {
    pub model: SplitModelConfig,
    pub hp: HyperParams,
    pub root_seed: u64,
    pub train: Dataset,
    pub server: ServerState,
    pub clients: Vec<ClientState>,
    pub ledger: TrafficLedger,
    /// When false, sampled stale clients are a protocol violation instead
    /// of being synchronized in phase 1.
    pub auto_sync: bool,
}

struct ClientUpload {
    id: usize,
    batch: Batch,
    z: crate::numeric::Matrix,
}

impl Federation {
    pub fn new(
        model: SplitModelConfig,
        hp: HyperParams,
        root_seed: u64,
        train: Dataset,
        shards: Vec<Vec<usize>>,
        theta: &Vector,
    ) -> Result<Self> {
        model.validate()?;
        hp.validate()?;
        if shards.len() != hp.clients {
            return Err(Error::DimensionMismatch {
                context: "client shards",
                expected: hp.clients,
                actual: shards.len(),
            });
        }
        if theta.dim() != model.total_dim() {
            return Err(Error::DimensionMismatch {
                context: "initial theta",
                expected: model.total_dim(),
                actual: theta.dim(),
            });
        }
        let (theta_c, theta_s) = theta.split_at(model.client_dim());
        let clients = shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| ClientState {
                id,
                theta_c: theta_c.clone(),
                t_sync: 0,
                shard,
                optimizer: OptimizerState::new(&hp.optimizer, model.client_dim()),
            })
            .collect();
        let server = ServerState {
            theta_s,
            round: 0,
            history: History::new(),
            optimizer: OptimizerState::new(&hp.optimizer, model.server_dim()),
            theta_c,
            client_optimizer: OptimizerState::new(&hp.optimizer, model.client_dim()),
        };
        Ok(Federation {
            model,
            hp,
            root_seed,
            train,
            server,
            clients,
            ledger: TrafficLedger::new(),
            auto_sync: true,
        })
    }

    /// Canonical `[theta_c; theta_s]`.
    pub fn theta(&self) -> Vector {
        Vector::concat(&self.server.theta_c, &self.server.theta_s)
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<(f64, Option<f64>)> {
        model::evaluate(&self.theta(), &data.full_batch()?, &self.model)
    }

    pub fn run_round(&mut self, protocol: ProtocolKind) -> Result<RoundMetrics> {
        match protocol {
            ProtocolKind::Hosfl => self.run_round_hosfl(),
            ProtocolKind::Sfl => self.run_round_sfl(),
            ProtocolKind::Zosfl => self.run_round_zosfl(),
        }
    }

    fn check_participants(&self, sampled: &[usize]) -> Result<()> {
        if sampled.is_empty() || sampled.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Protocol(
                "participants must be non-empty, strictly ascending".into(),
            ));
        }
        if let Some(&bad) = sampled.iter().find(|&&m| m >= self.clients.len()) {
            return Err(Error::Protocol(format!("unknown client {bad}")));
        }
        Ok(())
    }

    fn draw_batch(&self, client: usize, round: u64) -> Result<Batch> {
        let shard = &self.clients[client].shard;
        if shard.is_empty() {
            return Err(Error::EmptyShard(client));
        }
        let b = self.hp.batch_size;
        let mut rng = seeded_rng(derive_tagged(self.root_seed, domain::BATCH, round, client as u64));
        let idx: Vec<usize> = if shard.len() >= b {
            sample(&mut rng, shard.len(), b).into_iter().map(|i| shard[i]).collect()
        } else {
            (0..b).map(|_| shard[rng.gen_range(0..shard.len())]).collect()
        };
        self.train.batch(&idx)
    }

    fn activation_bytes(&self) -> u64 {
        (self.hp.batch_size * self.model.cut_width() * 8) as u64
    }

    fn finish_round(&mut self, participants: Vec<usize>, loss: f64, grad_norm: f64) -> RoundMetrics {
        self.ledger.close_round();
        let metrics = RoundMetrics {
            round: self.server.round,
            participants,
            mean_train_loss: loss,
            client_grad_norm: grad_norm,
            samples: self.hp.samples_per_round(),
            traffic: *self.ledger.totals(),
        };
        self.server.round += 1;
        metrics
    }

    /// One HO-SFL round: sync and forward, server first-order step with
    /// feedback, client scalar projections, scalar aggregation and update.
    pub fn run_round_hosfl(&mut self) -> Result<RoundMetrics> {
        let sampled = sample_clients(self.hp.clients, self.hp.clients_per_round, self.root_seed, self.server.round)?;
        self.run_round_hosfl_with(sampled)
    }

    /// Same round with an explicit participant set.
    pub fn run_round_hosfl_with(&mut self, sampled: Vec<usize>) -> Result<RoundMetrics> {
        self.check_participants(&sampled)?;
        let t = self.server.round;
        let d_c = self.model.client_dim();
        let p = self.hp.zo.perturbations;
        let seeds = round_seeds(self.root_seed, t, p);

        // Phase 1: synchronization and forward.
        let mut uploads = Vec::with_capacity(sampled.len());
        for &m in &sampled {
            if self.clients[m].t_sync != t {
                if !self.auto_sync {
                    return Err(Error::Protocol(format!(
                        "client {m} is at round {} but round {t} is running",
                        self.clients[m].t_sync
                    )));
                }
                let replayed = client_sync(&mut self.clients[m], &self.server.history, &self.hp, d_c, t)?;
                self.ledger
                    .record_catch_up(MessageKind::ScalarDown, replayed * p as u64 * 8);
                self.ledger
                    .record_catch_up(MessageKind::SeedDown, replayed * p as u64 * 8);
            }
            let batch = self.draw_batch(m, t)?;
            let z = model::client_forward(&self.clients[m].theta_c, &batch, &self.model)?;
            uploads.push(ClientUpload { id: m, batch, z });
        }

        // Phase 2: server first-order update and feedback.
        let mut grads = Vec::with_capacity(uploads.len());
        let mut lambdas = Vec::with_capacity(uploads.len());
        let mut loss_sum = 0.0;
        for up in &uploads {
            let pass = model::server_forward_backward(&self.server.theta_s, &up.z, &up.batch.targets, &self.model)?;
            loss_sum += pass.loss;
            grads.push(pass.grad);
            lambdas.push(pass.lambda);
        }
        let g_s = numeric::mean(&grads)?;
        let mut theta_s = self.server.theta_s.clone();
        let mut opt_s = self.server.optimizer.clone();
        opt_s.step(&mut theta_s, &g_s, self.hp.eta)?;

        // Phase 3: client zeroth-order projections.
        let mut scalars = Vec::with_capacity(uploads.len());
        for (up, lambda) in uploads.iter().zip(&lambdas) {
            let proj = zo::zo_scalars(
                &self.clients[up.id].theta_c,
                lambda,
                &up.z,
                &up.batch,
                &seeds,
                &self.hp.zo,
                &self.model,
                t,
                up.id,
            )?;
            if let Some(bad) = proj.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteScalar {
                    round: t,
                    client: up.id,
                    perturbation: bad + 1,
                });
            }
            scalars.push(proj.values);
        }

        // Phase 4: aggregation and client update.
        let k = scalars.len() as f64;
        let v_bar: Vec<f64> = (0..p)
            .map(|i| scalars.iter().fold(0.0, |acc, s| acc + s[i]) / k)
            .collect();
        let g_c = zo::reconstruct_gradient(&v_bar, &seeds, &self.hp.zo, d_c)?;
        let mut theta_c = self.server.theta_c.clone();
        let mut opt_c = self.server.client_optimizer.clone();
        opt_c.step(&mut theta_c, &g_c, self.hp.eta)?;
        let mut updated = Vec::with_capacity(sampled.len());
        for &m in &sampled {
            let mut c = self.clients[m].clone();
            let g = zo::reconstruct_gradient(&v_bar, &seeds, &self.hp.zo, d_c)?;
            c.optimizer.step(&mut c.theta_c, &g, self.hp.eta)?;
            c.t_sync = t + 1;
            updated.push(c);
        }

        // Commit.
        let act = self.activation_bytes();
        for up in &uploads {
            self.ledger.record(MessageKind::ActivationUp, act);
            self.ledger
                .record(MessageKind::LabelUp, up.batch.targets.payload_bytes());
            self.ledger.record(MessageKind::GradDown, act);
            self.ledger.record(MessageKind::ScalarUp, p as u64 * 8);
        }
        self.ledger.record(MessageKind::SeedDown, p as u64 * 8);
        self.ledger.record(MessageKind::ScalarDown, p as u64 * 8);
        self.server.theta_s = theta_s;
        self.server.optimizer = opt_s;
        self.server.theta_c = theta_c;
        self.server.client_optimizer = opt_c;
        for c in updated {
            let id = c.id;
            self.clients[id] = c;
        }
        self.server.history.push(RoundRecord {
            round: t,
            seeds,
            v_bar,
            eta_used: self.hp.eta,
        });
        let loss = loss_sum / k;
        Ok(self.finish_round(sampled, loss, g_c.norm()))
    }

    /// SFL (split learning with per-round FedAvg of client models): exact
    /// client backprop through the feedback, then model upload and average.
    pub fn run_round_sfl(&mut self) -> Result<RoundMetrics> {
        let sampled = sample_clients(self.hp.clients, self.hp.clients_per_round, self.root_seed, self.server.round)?;
        self.run_round_sfl_with(sampled)
    }

    /// Same round with an explicit participant set.
    pub fn run_round_sfl_with(&mut self, sampled: Vec<usize>) -> Result<RoundMetrics> {
        self.check_participants(&sampled)?;
        let t = self.server.round;
        let global_c = self.server.theta_c.clone();
        let mut grads_s = Vec::new();
        let mut grads_c = Vec::new();
        let mut local_models = Vec::new();
        let mut local_opts = Vec::new();
        let mut label_bytes = Vec::new();
        let mut loss_sum = 0.0;
        for &m in &sampled {
            let batch = self.draw_batch(m, t)?;
            let z = model::client_forward(&global_c, &batch, &self.model)?;
            let pass = model::server_forward_backward(&self.server.theta_s, &z, &batch.targets, &self.model)?;
            let g_c = model::client_backward(&global_c, &batch, &pass.lambda, &self.model)?;
            let mut local = global_c.clone();
            let mut opt = self.server.client_optimizer.clone();
            opt.step(&mut local, &g_c, self.hp.eta)?;
            loss_sum += pass.loss;
            label_bytes.push(batch.targets.payload_bytes());
            grads_s.push(pass.grad);
            grads_c.push(g_c);
            local_models.push(local);
            local_opts.push(opt);
        }
        let g_s = numeric::mean(&grads_s)?;
        let mut theta_s = self.server.theta_s.clone();
        let mut opt_s = self.server.optimizer.clone();
        opt_s.step(&mut theta_s, &g_s, self.hp.eta)?;
        let theta_c = numeric::mean(&local_models)?;
        let opt_c = OptimizerState::average(&local_opts).expect("non-empty sample");
        let grad_norm = numeric::mean(&grads_c)?.norm();

        let act = self.activation_bytes();
        let d_c_bytes = (self.model.client_dim() * 8) as u64;
        for (i, &m) in sampled.iter().enumerate() {
            self.ledger.record(MessageKind::ModelDown, d_c_bytes);
            self.ledger.record(MessageKind::ActivationUp, act);
            self.ledger.record(MessageKind::LabelUp, label_bytes[i]);
            self.ledger.record(MessageKind::GradDown, act);
            self.ledger.record(MessageKind::ModelUp, d_c_bytes);
            let c = &mut self.clients[m];
            c.theta_c = local_models[i].clone();
            c.t_sync = t + 1;
        }
        self.server.theta_s = theta_s;
        self.server.optimizer = opt_s;
        self.server.theta_c = theta_c;
        self.server.client_optimizer = opt_c;
        let k = sampled.len() as f64;
        Ok(self.finish_round(sampled, loss_sum / k, grad_norm))
    }

    /// ZO-SFL: full-model two-point SPSA. Each client uploads the two
    /// perturbed activations, the server evaluates both losses under its own
    /// perturbed parameters and returns the difference coefficient.
    pub fn run_round_zosfl(&mut self) -> Result<RoundMetrics> {
        let sampled = sample_clients(self.hp.clients, self.hp.clients_per_round, self.root_seed, self.server.round)?;
        self.run_round_zosfl_with(sampled)
    }

    /// Same round with an explicit participant set.
    pub fn run_round_zosfl_with(&mut self, sampled: Vec<usize>) -> Result<RoundMetrics> {
        self.check_participants(&sampled)?;
        let t = self.server.round;
        let mu = self.hp.zo.mu;
        let d_c = self.model.client_dim();
        let d = self.model.total_dim();
        let global_c = self.server.theta_c.clone();
        let mut server_dirs = Vec::new();
        let mut client_dirs = Vec::new();
        let mut local_models = Vec::new();
        let mut local_opts = Vec::new();
        let mut label_bytes = Vec::new();
        let mut loss_sum = 0.0;
        for &m in &sampled {
            let batch = self.draw_batch(m, t)?;
            let seed = derive_tagged(self.root_seed, domain::SPSA, t, m as u64);
            let u = gaussian_vector(seed, d);
            let (u_c, u_s) = u.split_at(d_c);
            let mut c_plus = global_c.clone();
            c_plus.add_scaled(mu, &u_c)?;
            let mut c_minus = global_c.clone();
            c_minus.add_scaled(-mu, &u_c)?;
            let z_plus = model::client_forward(&c_plus, &batch, &self.model)?;
            let z_minus = model::client_forward(&c_minus, &batch, &self.model)?;
            let mut s_plus = self.server.theta_s.clone();
            s_plus.add_scaled(mu, &u_s)?;
            let mut s_minus = self.server.theta_s.clone();
            s_minus.add_scaled(-mu, &u_s)?;
            let l_plus = model::server_loss(&s_plus, &z_plus, &batch.targets, &self.model)?;
            let l_minus = model::server_loss(&s_minus, &z_minus, &batch.targets, &self.model)?;
            let coef = (l_plus - l_minus) / (2.0 * mu);
            if !coef.is_finite() {
                return Err(Error::NonFiniteScalar {
                    round: t,
                    client: m,
                    perturbation: 1,
                });
            }
            let g_c = u_c.scaled(coef);
            let mut local = global_c.clone();
            let mut opt = self.server.client_optimizer.clone();
            opt.step(&mut local, &g_c, self.hp.eta)?;
            loss_sum += 0.5 * (l_plus + l_minus);
            label_bytes.push(batch.targets.payload_bytes());
            server_dirs.push(u_s.scaled(coef));
            client_dirs.push(g_c);
            local_models.push(local);
            local_opts.push(opt);
        }
        let g_s = numeric::mean(&server_dirs)?;
        let mut theta_s = self.server.theta_s.clone();
        let mut opt_s = self.server.optimizer.clone();
        opt_s.step(&mut theta_s, &g_s, self.hp.eta)?;
        let theta_c = numeric::mean(&local_models)?;
        let opt_c = OptimizerState::average(&local_opts).expect("non-empty sample");
        let grad_norm = numeric::mean(&client_dirs)?.norm();

        let act = self.activation_bytes();
        let d_c_bytes = (d_c * 8) as u64;
        for (i, &m) in sampled.iter().enumerate() {
            self.ledger.record(MessageKind::ModelDown, d_c_bytes);
            self.ledger.record(MessageKind::SeedDown, 8);
            self.ledger.record(MessageKind::ActivationUp, 2 * act);
            self.ledger.record(MessageKind::LabelUp, label_bytes[i]);
            self.ledger.record(MessageKind::ScalarDown, 8);
            self.ledger.record(MessageKind::ModelUp, d_c_bytes);
            let c = &mut self.clients[m];
            c.theta_c = local_models[i].clone();
            c.t_sync = t + 1;
        }
        self.server.theta_s = theta_s;
        self.server.optimizer = opt_s;
        self.server.theta_c = theta_c;
        self.server.client_optimizer = opt_c;
        let k = sampled.len() as f64;
        Ok(self.finish_round(sampled, loss_sum / k, grad_norm))
    }
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: u64,
    pub train_loss: f64,
    pub eval_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_accuracy: Option<f64>,
    pub client_grad_norm: f64,
    pub samples_processed: u64,
    pub bytes: BTreeMap<String, u64>,
}

#[derive(Debug, Clone)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
    pub final_theta: Vector,
    pub ledger: TrafficLedger,
    pub rounds_run: u64,
}

/// Everything needed to train one protocol end to end.
#[derive(Debug, Clone)]
pub struct TrainingSetup {
    pub protocol: ProtocolKind,
    pub model: SplitModelConfig,
    pub hp: HyperParams,
    pub root_seed: u64,
    pub train: Dataset,
    pub eval: Dataset,
    pub shards: Vec<Vec<usize>>,
    pub initial_theta: Vector,
    /// Stop once this many samples were processed; `None` runs `hp.rounds`.
    pub sample_budget: Option<u64>,
}

/// Rounds actually run: `min(T, ceil(budget / (K * B)))`.
pub fn planned_rounds(hp: &HyperParams, sample_budget: Option<u64>) -> u64 {
    match sample_budget {
        Some(budget) => hp.rounds.min(budget.div_ceil(hp.samples_per_round())),
        None => hp.rounds,
    }
}

pub fn run_training(setup: &TrainingSetup) -> Result<MetricsLog> {
    let mut fed = Federation::new(
        setup.model.clone(),
        setup.hp.clone(),
        setup.root_seed,
        setup.train.clone(),
        setup.shards.clone(),
        &setup.initial_theta,
    )?;
    let rounds = planned_rounds(&setup.hp, setup.sample_budget);
    let mut records = Vec::with_capacity(rounds as usize);
    let mut samples = 0u64;
    for _ in 0..rounds {
        let m = fed.run_round(setup.protocol)?;
        samples += m.samples;
        let (eval_loss, eval_accuracy) = fed.evaluate(&setup.eval)?;
        records.push(MetricsRecord {
            round: m.round,
            train_loss: m.mean_train_loss,
            eval_loss,
            eval_accuracy,
            client_grad_norm: m.client_grad_norm,
            samples_processed: samples,
            bytes: MessageKind::ALL
                .iter()
                .map(|k| (k.name().to_string(), m.traffic[k.index()]))
                .collect(),
        });
    }
    Ok(MetricsLog {
        records,
        final_theta: fed.theta(),
        ledger: fed.ledger,
        rounds_run: rounds,
    })
}
