//! Seeded interval-by-interval simulation of RSU uploads.
//!
//! Each interval: draw channels, plan the active set, build the slot matrix,
//! pick samples for the free slots, serve every RSU's FCFS queue over its
//! scheduled slots (each attempt succeeds with probability `1 - beta` and
//! adds an exponential delay), then update the ledgers and retrain the
//! server's classifier.

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel_conditions, ChannelConfig, ChannelState, PacketRecord};
use crate::coalition::SearchLimits;
use crate::dataset::{load_delimited, BlobSpec, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{jain_index, AccumulatorState, AttemptVector, IntervalSnapshot, PolicyWeights};
use crate::policy::{plan_interval, Policy, PolicyKind};
use crate::schedule::{build_matrix, DEFAULT_MAX_ITERS};
use crate::seed::{derive_seed, stream_rng, SimRng, Stream};
use crate::select::{
    class_quota_per_rsu, macro_f1, min_margin_select, train_proxy_classifier, ProxyClassifier, RsuInventory,
    TrainingConfig,
};

/// Explicit per-RSU channel values held for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedChannels {
    pub drop_rates: Vec<f64>,
    pub delay_rates: Vec<f64>,
}

/// How each RSU's sample inventory is drawn from the classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassPartition {
    /// Every RSU holds every class in equal amounts.
    Balanced,
    /// RSU `i` holds classes `(i * k + m) mod C` for `m < k`, equal amounts.
    RoundRobin { classes_per_rsu: usize },
    /// `counts[i][j]` samples of class `j` at RSU `i`.
    Explicit { counts: Vec<Vec<usize>> },
}

impl Default for ClassPartition {
    fn default() -> Self {
        ClassPartition::RoundRobin { classes_per_rsu: 2 }
    }
}

impl ClassPartition {
    /// Per-RSU per-class sample counts.
    pub fn counts(&self, rsus: usize, classes: usize, per_rsu: usize) -> Result<Vec<Vec<usize>>> {
        let spread = |held: &[usize]| {
            let mut row = vec![0; classes];
            for (m, &j) in held.iter().enumerate() {
                row[j] += per_rsu / held.len() + usize::from(m < per_rsu % held.len());
            }
            row
        };
        match self {
            ClassPartition::Balanced => {
                let all: Vec<usize> = (0..classes).collect();
                Ok(vec![spread(&all); rsus])
            }
            ClassPartition::RoundRobin { classes_per_rsu: k } => {
                if *k == 0 || *k > classes {
                    return Err(Error::config(format!(
                        "partition.classes_per_rsu must lie in 1..={classes}, got {k}"
                    )));
                }
                Ok((0..rsus)
                    .map(|i| {
                        let held: Vec<usize> = (0..*k).map(|m| (i * k + m) % classes).collect();
                        spread(&held)
                    })
                    .collect())
            }
            ClassPartition::Explicit { counts } => {
                if counts.len() != rsus || counts.iter().any(|r| r.len() != classes) {
                    return Err(Error::config(format!(
                        "partition.counts must be an N x C = {rsus} x {classes} table"
                    )));
                }
                Ok(counts.clone())
            }
        }
    }
}

fn d_rsus() -> usize {
    10
}
fn d_channels() -> usize {
    5
}
fn d_coalition() -> usize {
    5
}
fn d_slots() -> usize {
    100
}
fn d_intervals() -> usize {
    10
}
fn d_classes() -> usize {
    10
}
fn d_dim() -> usize {
    8
}
fn d_true() -> bool {
    true
}
fn d_fair() -> PolicyWeights {
    PolicyWeights::with_fairness()
}
fn d_nofair() -> PolicyWeights {
    PolicyWeights::without_fairness()
}
fn d_per_rsu() -> usize {
    1000
}
fn d_one() -> usize {
    1
}
fn d_test() -> usize {
    100
}
fn d_separation() -> f64 {
    4.0
}
fn d_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Number of RSUs `N`.
    #[serde(default = "d_rsus")]
    pub rsus: usize,
    /// Number of channels `M`.
    #[serde(default = "d_channels")]
    pub channels: usize,
    /// Active-set size `K`.
    #[serde(default = "d_coalition")]
    pub coalition_size: usize,
    /// Timeslots per interval `T`.
    #[serde(default = "d_slots")]
    pub slots: usize,
    #[serde(default = "d_intervals")]
    pub intervals: usize,
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelConfig,
    /// Redraw `(beta, lambda)` every interval rather than once per run.
    #[serde(default = "d_true")]
    pub redraw_channels: bool,
    /// Use these values instead of random draws.
    #[serde(default)]
    pub fixed_channels: Option<FixedChannels>,
    #[serde(default = "d_fair")]
    pub weights_fair: PolicyWeights,
    #[serde(default = "d_nofair")]
    pub weights_nofair: PolicyWeights,
    #[serde(default)]
    pub partition: ClassPartition,
    #[serde(default = "d_per_rsu")]
    pub samples_per_rsu: usize,
    #[serde(default = "d_one")]
    pub samples_per_packet: usize,
    /// Held-out test samples per class.
    #[serde(default = "d_test")]
    pub test_per_class: usize,
    /// Nearest class-mean distance of the synthetic blobs, in units of sigma.
    #[serde(default = "d_separation")]
    pub class_separation: f64,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub limits: SearchLimits,
    /// Min-conflicts iteration budget per schedule.
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    /// Labeled feature file to use instead of synthetic blobs.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let (n, m, k) = (self.rsus, self.channels, self.coalition_size);
        if m == 0 {
            return Err(Error::config("channels: M must be at least 1"));
        }
        if m >= n {
            return Err(Error::config(format!("invariant M < N violated (M = {m}, N = {n})")));
        }
        if k < m || k > n {
            return Err(Error::config(format!(
                "invariant M <= K <= N violated (M = {m}, K = {k}, N = {n})"
            )));
        }
        if self.slots == 0 {
            return Err(Error::config("invariant T >= 1 violated"));
        }
        if self.classes < 2 {
            return Err(Error::config("classes: C must be at least 2"));
        }
        if self.samples_per_packet == 0 {
            return Err(Error::config("samples_per_packet must be at least 1"));
        }
        if self.test_per_class == 0 {
            return Err(Error::config("test_per_class must be at least 1"));
        }
        self.channel.validate()?;
        self.weights_fair.validate()?;
        self.weights_nofair.validate()?;
        if self.weights_fair.fairness <= 0.0 {
            return Err(Error::config("weights_fair.fairness must be > 0"));
        }
        if self.weights_nofair.fairness != 0.0 {
            return Err(Error::config("weights_nofair.fairness must be 0"));
        }
        self.training.validate()?;
        if let Some(fixed) = &self.fixed_channels {
            if fixed.drop_rates.len() != n || fixed.delay_rates.len() != n {
                return Err(Error::config(format!(
                    "fixed_channels needs {n} drop rates and {n} delay rates"
                )));
            }
            ChannelState::new(fixed.drop_rates.clone(), fixed.delay_rates.clone(), 0)?;
        }
        self.partition.counts(n, self.classes, self.samples_per_rsu)?;
        if self.dataset.is_none() {
            BlobSpec {
                classes: self.classes,
                dim: self.feature_dim,
                separation: self.class_separation,
                sigma: 1.0,
            }
            .validate()?;
        }
        Ok(())
    }

    /// Policy of `kind` with this config's `K` and weights.
    pub fn policy(&self, kind: PolicyKind) -> Policy {
        let weights = match kind {
            PolicyKind::OptimizedFair => self.weights_fair,
            _ => self.weights_nofair,
        };
        Policy::new(kind, self.coalition_size).with_weights(weights)
    }
}

/// One row of a run's interval log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub interval: usize,
    pub coalition: Vec<usize>,
    pub alpha: Vec<f64>,
    pub drop_rates: Vec<f64>,
    pub delay_rates: Vec<f64>,
    /// New packets queued this interval.
    pub enqueued: u64,
    /// Transmission attempts (used slots).
    pub attempted: u64,
    pub delivered: u64,
    /// Mean end-to-end delay of the packets delivered this interval.
    pub mean_delay: Option<f64>,
    /// Delivered packets per timeslot.
    pub goodput: f64,
    /// Jain's index of cumulative delivered class counts.
    pub jain_delivered: f64,
    /// Cumulative delivered samples per class.
    pub class_counts: Vec<u64>,
    pub scheduled_per_rsu: Vec<usize>,
    pub delivered_per_rsu: Vec<u64>,
    pub pending: u64,
    /// Macro-F1 of the classifier after this interval's retraining.
    pub f1_online: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schedule: Option<Vec<Vec<u8>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub coalition_size: usize,
    pub seed: u64,
    pub records: Vec<IntervalRecord>,
    pub final_class_counts: Vec<u64>,
    pub expected_ledger: Vec<f64>,
    pub final_f1: f64,
    pub total_delivered_samples: u64,
    pub total_delivered_packets: u64,
    pub pending_packets: u64,
}

impl RunSummary {
    pub fn final_jain(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.jain_delivered)
    }

    /// Mean per-interval goodput.
    pub fn mean_goodput(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.goodput).sum::<f64>() / self.records.len() as f64
    }

    /// Packet-weighted mean delay over the whole run.
    pub fn mean_delay(&self) -> Option<f64> {
        let (sum, n) = self.records.iter().fold((0.0, 0u64), |(s, n), r| match r.mean_delay {
            Some(d) => (s + d * r.delivered as f64, n + r.delivered),
            None => (s, n),
        });
        (n > 0).then(|| sum / n as f64)
    }

    /// Delivered packets of each RSU per timeslot of the run, given `T`.
    pub fn utilization(&self, slots: usize) -> Vec<f64> {
        let Some(first) = self.records.first() else {
            return Vec::new();
        };
        let total = (slots * self.records.len()) as f64;
        (0..first.delivered_per_rsu.len())
            .map(|i| self.records.iter().map(|r| r.delivered_per_rsu[i] as f64).sum::<f64>() / total)
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Packet {
    samples: Vec<usize>,
    attempts: u64,
    delay: f64,
    first_interval: usize,
}

struct Streams {
    channel: SimRng,
    policy: SimRng,
    schedule: SimRng,
    transmission: SimRng,
    selection: SimRng,
}

/// Live state of one run.
pub struct Simulation {
    config: SimConfig,
    policy: Policy,
    data: Dataset,
    test: Dataset,
    inventories: Vec<RsuInventory>,
    channel: Option<ChannelState>,
    accumulator: AccumulatorState,
    queues: Vec<VecDeque<Packet>>,
    delivered_ids: Vec<usize>,
    delivered_packets: Vec<PacketRecord>,
    model: Option<ProxyClassifier>,
    streams: Streams,
    interval: usize,
    enqueued_total: u64,
    delivered_total: u64,
    dump_schedule: bool,
}

impl Simulation {
    pub fn new(config: &SimConfig, policy: &Policy) -> Result<Self> {
        config.validate()?;
        policy.validate(config.rsus, config.channels)?;
        let (data, test, inventories) = build_population(config)?;
        let policy_seed = derive_seed(config.seed, &[policy.kind.index()]);
        Ok(Self {
            accumulator: AccumulatorState::new(data.classes()),
            queues: vec![VecDeque::new(); config.rsus],
            streams: Streams {
                channel: stream_rng(config.seed, Stream::Channel),
                policy: stream_rng(policy_seed, Stream::Policy),
                schedule: stream_rng(policy_seed, Stream::Schedule),
                transmission: stream_rng(policy_seed, Stream::Transmission),
                selection: stream_rng(policy_seed, Stream::Selection),
            },
            config: config.clone(),
            policy: *policy,
            data,
            test,
            inventories,
            channel: None,
            delivered_ids: Vec::new(),
            delivered_packets: Vec::new(),
            model: None,
            interval: 0,
            enqueued_total: 0,
            delivered_total: 0,
            dump_schedule: false,
        })
    }

    /// Attach each interval's slot matrix to its record.
    pub fn with_schedule_dump(mut self, dump: bool) -> Self {
        self.dump_schedule = dump;
        self
    }

    pub fn accumulator(&self) -> &AccumulatorState {
        &self.accumulator
    }

    pub fn inventories(&self) -> &[RsuInventory] {
        &self.inventories
    }

    pub fn delivered_packets(&self) -> &[PacketRecord] {
        &self.delivered_packets
    }

    pub fn model(&self) -> Option<&ProxyClassifier> {
        self.model.as_ref()
    }

    pub fn pending_packets(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    pub fn enqueued_packets(&self) -> u64 {
        self.enqueued_total
    }

    pub fn delivered_packet_count(&self) -> u64 {
        self.delivered_total
    }

    fn draw_channel(&mut self) -> Result<ChannelState> {
        let t = self.interval;
        if let Some(fixed) = &self.config.fixed_channels {
            return ChannelState::new(fixed.drop_rates.clone(), fixed.delay_rates.clone(), t);
        }
        match &self.channel {
            Some(prev) if !self.config.redraw_channels => Ok(ChannelState { interval: t, ..prev.clone() }),
            _ => sample_channel_conditions(&mut self.streams.channel, &self.config.channel, self.config.rsus, t),
        }
    }

    /// What the planner sees at the start of the next interval.
    pub fn snapshot(&mut self) -> Result<IntervalSnapshot> {
        if self.channel.as_ref().is_none_or(|c| c.interval != self.interval) {
            self.channel = Some(self.draw_channel()?);
        }
        Ok(IntervalSnapshot {
            channel: self.channel.clone().expect("drawn above"),
            received: self.accumulator.expected.clone(),
            inventories: self
                .inventories
                .iter()
                .map(|inv| inv.counts().into_iter().map(|c| c as f64).collect())
                .collect(),
            capacity: self.config.channels,
            channel_rate: self.config.channel.channel_rate,
        })
    }

    pub fn step_interval(&mut self) -> Result<IntervalRecord> {
        let cfg = self.config.clone();
        let n = cfg.rsus;
        let snapshot = self.snapshot()?;
        let channel = snapshot.channel.clone();

        let plan = plan_interval(&self.policy, &snapshot, &cfg.limits, &mut self.streams.policy)?;
        let q = build_matrix(&plan.alpha, cfg.slots, cfg.channels, &mut self.streams.schedule, cfg.max_iters)?;
        let scheduled: Vec<usize> = (0..n).map(|i| q.row_sum(i)).collect();

        let enqueued = self.enqueue_new_packets(&scheduled)?;

        let mut attempted = 0u64;
        let mut delivered_per_rsu = vec![0u64; n];
        let mut delay_sum = 0.0;
        for i in 0..n {
            let beta = channel.drop_rates[i];
            let exp = Exp::new(channel.delay_rates[i]).map_err(|e| Error::domain(e.to_string()))?;
            for _slot in q.scheduled_slots(i) {
                let Some(head) = self.queues[i].front_mut() else { break };
                attempted += 1;
                head.attempts += 1;
                head.delay += exp.sample(&mut self.streams.transmission) + cfg.channel.fixed_tx_delay;
                if self.streams.transmission.random::<f64>() >= beta {
                    let packet = self.queues[i].pop_front().expect("head exists");
                    delivered_per_rsu[i] += 1;
                    delay_sum += packet.delay;
                    for &s in &packet.samples {
                        let label = self.data.label(s);
                        self.accumulator.delivered[label] += 1;
                        self.delivered_ids.push(s);
                    }
                    self.delivered_packets.push(PacketRecord {
                        rsu: i,
                        attempts: packet.attempts,
                        delay: packet.delay,
                        label: self.data.label(packet.samples[0]),
                        first_interval: packet.first_interval,
                    });
                }
            }
        }
        let delivered: u64 = delivered_per_rsu.iter().sum();
        self.delivered_total += delivered;

        // planning ledger: inventory counts scaled by effective throughput
        for (i, inv) in snapshot.inventories.iter().enumerate() {
            let zeta = plan.alpha.0[i] * snapshot.channel_rate * (1.0 - channel.drop_rates[i]);
            for (j, &c) in inv.iter().enumerate() {
                self.accumulator.expected[j] += c * zeta;
            }
        }
        self.accumulator.interval += 1;

        if !self.delivered_ids.is_empty() {
            self.model = Some(train_proxy_classifier(
                &self.data,
                &self.delivered_ids,
                &cfg.training,
                self.model.as_ref(),
            ));
        }
        let f1_online = self.current_f1();

        let record = IntervalRecord {
            interval: self.interval,
            coalition: plan.coalition.members().to_vec(),
            alpha: plan.alpha.0.clone(),
            drop_rates: channel.drop_rates.clone(),
            delay_rates: channel.delay_rates.clone(),
            enqueued,
            attempted,
            delivered,
            mean_delay: (delivered > 0).then(|| delay_sum / delivered as f64),
            goodput: delivered as f64 / cfg.slots as f64,
            jain_delivered: jain_index(&self.accumulator.delivered_f64())?,
            class_counts: self.accumulator.delivered.clone(),
            scheduled_per_rsu: scheduled,
            delivered_per_rsu,
            pending: self.pending_packets(),
            f1_online,
            schedule: self.dump_schedule.then(|| q.to_grid()),
        };
        self.interval += 1;
        Ok(record)
    }

    /// Fills each RSU's free scheduled slots with newly selected samples.
    fn enqueue_new_packets(&mut self, scheduled: &[usize]) -> Result<u64> {
        let spp = self.config.samples_per_packet;
        let classes = self.data.classes();
        let active: Vec<usize> = (0..scheduled.len())
            .filter(|&i| scheduled[i] > self.queues[i].len() && self.inventories[i].total() > 0)
            .collect();
        if active.is_empty() {
            return Ok(0);
        }
        // Samples already in flight count as received for balancing.
        let mut level = self.accumulator.delivered.clone();
        for queue in &self.queues {
            for p in queue {
                for &s in &p.samples {
                    level[self.data.label(s)] += 1;
                }
            }
        }
        let stock: Vec<Vec<usize>> = active.iter().map(|&i| self.inventories[i].counts()).collect();
        let budgets: Vec<usize> = active
            .iter()
            .map(|&i| (scheduled[i] - self.queues[i].len()) * spp)
            .collect();
        let quotas = class_quota_per_rsu(&stock, &level, &budgets);

        let mut enqueued = 0;
        for (slot, &i) in active.iter().enumerate() {
            let mut chosen = Vec::new();
            for j in 0..classes {
                let k = quotas[slot][j];
                if k == 0 {
                    continue;
                }
                let picks = min_margin_select(
                    self.inventories[i].pool(j),
                    &self.data,
                    self.model.as_ref(),
                    k,
                    &mut self.streams.selection,
                )?;
                self.inventories[i].take(j, &picks);
                chosen.extend(picks);
            }
            for samples in chosen.chunks(spp) {
                self.queues[i].push_back(Packet {
                    samples: samples.to_vec(),
                    attempts: 0,
                    delay: 0.0,
                    first_interval: self.interval,
                });
                enqueued += 1;
            }
        }
        self.enqueued_total += enqueued;
        Ok(enqueued)
    }

    fn current_f1(&self) -> f64 {
        match &self.model {
            Some(m) => macro_f1(m, &self.test),
            None => macro_f1(&ProxyClassifier::untrained(self.test.classes(), self.test.dim()), &self.test),
        }
    }

    pub fn finish(self) -> (u64, u64, Vec<u64>, Vec<f64>, f64) {
        let f1 = self.current_f1();
        (
            self.delivered_total,
            self.pending_packets(),
            self.accumulator.delivered,
            self.accumulator.expected,
            f1,
        )
    }

    pub fn test_set(&self) -> &Dataset {
        &self.test
    }
}

/// Training pool, held-out balanced test set and per-RSU inventories.
fn build_population(config: &SimConfig) -> Result<(Dataset, Dataset, Vec<RsuInventory>)> {
    let counts = config.partition.counts(config.rsus, config.classes, config.samples_per_rsu)?;
    match &config.dataset {
        None => {
            let spec = BlobSpec {
                classes: config.classes,
                dim: config.feature_dim,
                separation: config.class_separation,
                sigma: 1.0,
            };
            spec.validate()?;
            let mut rng = stream_rng(config.seed, Stream::Dataset);
            let mut data = Dataset::new(config.feature_dim, config.classes);
            let mut inventories = Vec::with_capacity(config.rsus);
            for row in &counts {
                let mut pools = vec![Vec::new(); config.classes];
                for (j, &c) in row.iter().enumerate() {
                    for _ in 0..c {
                        pools[j].push(spec.sample_into(&mut data, j, &mut rng)?);
                    }
                }
                inventories.push(RsuInventory::new(pools));
            }
            let test = spec.generate(
                &vec![config.test_per_class; config.classes],
                &mut stream_rng(config.seed, Stream::TestSet),
            )?;
            Ok((data, test, inventories))
        }
        Some(path) => {
            let data = load_delimited(path)?;
            if data.classes() > config.classes || data.dim() != config.feature_dim {
                return Err(Error::config(format!(
                    "dataset {} has {} classes and {} features; config says C = {}, d = {}",
                    path.display(),
                    data.classes(),
                    data.dim(),
                    config.classes,
                    config.feature_dim
                )));
            }
            let mut rng = stream_rng(config.seed, Stream::Partition);
            let mut by_class = data.ids_by_class();
            by_class.resize(config.classes, Vec::new());
            for ids in &mut by_class {
                ids.shuffle(&mut rng);
            }
            let mut test = Dataset::new(data.dim(), config.classes);
            let mut train = Dataset::new(data.dim(), config.classes);
            let mut cursor = vec![0usize; config.classes];
            for (j, ids) in by_class.iter().enumerate() {
                let need = config.test_per_class;
                if ids.len() < need {
                    return Err(Error::config(format!(
                        "dataset has {} samples of class {j}, test set needs {need}",
                        ids.len()
                    )));
                }
                for &id in &ids[..need] {
                    test.push(data.feature(id), j)?;
                }
                cursor[j] = need;
            }
            let mut inventories = Vec::with_capacity(config.rsus);
            for row in &counts {
                let mut pools = vec![Vec::new(); config.classes];
                for (j, &c) in row.iter().enumerate() {
                    let ids = &by_class[j];
                    if cursor[j] + c > ids.len() {
                        return Err(Error::config(format!(
                            "dataset has too few samples of class {j} for the configured partition"
                        )));
                    }
                    for &id in &ids[cursor[j]..cursor[j] + c] {
                        pools[j].push(train.push(data.feature(id), j)?);
                    }
                    cursor[j] += c;
                }
                inventories.push(RsuInventory::new(pools));
            }
            Ok((train, test, inventories))
        }
    }
}

/// Runs `config.intervals` intervals from a fresh state.
pub fn run_simulation(config: &SimConfig, policy: &Policy) -> Result<RunSummary> {
    run_simulation_with(config, policy, false)
}

pub fn run_simulation_with(config: &SimConfig, policy: &Policy, dump_schedule: bool) -> Result<RunSummary> {
    let mut sim = Simulation::new(config, policy)?.with_schedule_dump(dump_schedule);
    let records = (0..config.intervals)
        .map(|_| sim.step_interval())
        .collect::<Result<Vec<_>>>()?;
    let total_delivered_packets = sim.delivered_packet_count();
    let (_, pending, counts, expected, f1) = sim.finish();
    Ok(RunSummary {
        policy: policy.kind,
        coalition_size: policy.coalition_size,
        seed: config.seed,
        records,
        total_delivered_samples: counts.iter().sum(),
        final_class_counts: counts,
        expected_ledger: expected,
        final_f1: f1,
        total_delivered_packets,
        pending_packets: pending,
    })
}

const GRID_MAX_RSUS: usize = 4;
const GRID_MAX_STEPS: usize = 20;

/// Exhaustive search of the raw weighted objective over the grid
/// `{0, 1/steps, ..., 1}^N` restricted to `sum alpha <= M`.
///
/// The all-zero point is skipped (the delay objective is undefined there).
/// Ties keep the first point in odometer order.
pub fn grid_search_alpha(
    snapshot: &IntervalSnapshot,
    steps: usize,
    weights: &PolicyWeights,
) -> Result<(AttemptVector, f64)> {
    snapshot.validate()?;
    let n = snapshot.rsus();
    if n > GRID_MAX_RSUS || steps == 0 || steps > GRID_MAX_STEPS {
        return Err(Error::SizeGuard(format!(
            "grid search needs N <= {GRID_MAX_RSUS} and 1 <= N_alpha <= {GRID_MAX_STEPS} (got N = {n}, N_alpha = {steps})"
        )));
    }
    let cap = snapshot.capacity as f64 + 1e-9;
    let mut idx = vec![0usize; n];
    let mut best: Option<(AttemptVector, f64)> = None;
    loop {
        // advance odometer
        let mut pos = 0;
        while pos < n {
            idx[pos] += 1;
            if idx[pos] <= steps {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
        let alpha = AttemptVector(idx.iter().map(|&s| s as f64 / steps as f64).collect());
        if alpha.total() > cap {
            continue;
        }
        let v = weights.combine(&snapshot.components_for(&alpha)?);
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((alpha, v));
        }
    }
    best.ok_or_else(|| Error::domain("grid has no feasible nonzero point"))
}
