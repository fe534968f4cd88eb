//! Objective components and the coalition value function.
//!
//! `f1` is the inverse of the attempt-weighted expected delay, `f2` the sum of
//! effective throughputs and `f3` Jain's index over the class counts the
//! server would hold after the interval. A coalition's value is the weighted
//! sum of the three components after z-scoring them across the candidate
//! coalitions of the current interval.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};

/// Standard deviations at or below this (relative to the mean) count as zero.
const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyWeights {
    pub delay: f64,
    pub throughput: f64,
    pub fairness: f64,
}

impl PolicyWeights {
    pub const fn new(delay: f64, throughput: f64, fairness: f64) -> Self {
        Self {
            delay,
            throughput,
            fairness,
        }
    }

    /// Equal weights on all three components.
    pub const fn with_fairness() -> Self {
        Self::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    }

    /// Delay and throughput only.
    pub const fn without_fairness() -> Self {
        Self::new(0.5, 0.5, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.delay, self.throughput, self.fairness];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::config(format!("weights must be nonnegative, got {w:?}")));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("weights must not all be zero"));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.delay * factor, self.throughput * factor, self.fairness * factor)
    }

    /// Weighted sum of a component triple.
    pub fn combine(&self, c: &Components) -> f64 {
        self.delay * c.delay + self.throughput * c.throughput + self.fairness * c.fairness
    }
}

/// Per-RSU attempt probabilities for one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttemptVector(pub Vec<f64>);

impl AttemptVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `M / |members|` for every member, zero elsewhere.
    pub fn equal_split(n: usize, members: &[usize], capacity: usize) -> Result<Self> {
        if members.len() < capacity {
            return Err(Error::InfeasibleCoalition {
                size: members.len(),
                capacity,
            });
        }
        let share = capacity as f64 / members.len() as f64;
        let mut alpha = vec![0.0; n];
        for &m in members {
            if m >= n {
                return Err(Error::domain(format!("RSU id {m} out of range for N = {n}")));
            }
            alpha[m] = share;
        }
        Ok(Self(alpha))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn validate(&self, capacity: usize) -> Result<()> {
        if let Some((i, a)) = self.0.iter().enumerate().find(|(_, a)| !(0.0..=1.0).contains(*a)) {
            return Err(Error::domain(format!("alpha[{i}] = {a} is outside [0, 1]")));
        }
        let total = self.total();
        if total > capacity as f64 + 1e-9 {
            return Err(Error::domain(format!("sum of alpha = {total} exceeds M = {capacity}")));
        }
        Ok(())
    }
}

/// Received class counts at the server.
///
/// `expected` is the planning ledger (inventory counts times effective
/// throughput, accumulated); `delivered` counts realized samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorState {
    pub expected: Vec<f64>,
    pub delivered: Vec<u64>,
    pub interval: usize,
}

impl AccumulatorState {
    pub fn new(classes: usize) -> Self {
        Self {
            expected: vec![0.0; classes],
            delivered: vec![0; classes],
            interval: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.expected.len()
    }

    pub fn delivered_f64(&self) -> Vec<f64> {
        self.delivered.iter().map(|&c| c as f64).collect()
    }
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`; zero for the all-zero vector.
pub fn jain_index(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::domain("Jain's index of an empty vector"));
    }
    if let Some(v) = x.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!("Jain's index needs nonnegative entries, got {v}")));
    }
    let sum: f64 = x.iter().sum();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Ok(0.0);
    }
    Ok((sum * sum) / (x.len() as f64 * sum_sq))
}

fn check_len(alpha: &AttemptVector, state: &ChannelState) -> Result<()> {
    if alpha.len() != state.len() {
        return Err(Error::config(format!(
            "attempt vector has {} entries but the channel state has {}",
            alpha.len(),
            state.len()
        )));
    }
    Ok(())
}

/// `1 / sum_i alpha_i / (lambda_i (1 - beta_i))`.
pub fn delay_objective(alpha: &AttemptVector, state: &ChannelState) -> Result<f64> {
    check_len(alpha, state)?;
    let mut weighted = 0.0;
    for (i, &a) in alpha.0.iter().enumerate() {
        weighted += a / (state.delay_rates[i] * (1.0 - state.drop_rates[i]));
    }
    if weighted <= 0.0 {
        return Err(Error::UndefinedObjective(
            "delay objective needs at least one RSU with alpha > 0".into(),
        ));
    }
    Ok(1.0 / weighted)
}

/// `sum_i alpha_i * R_ch * (1 - beta_i)`.
pub fn throughput_objective(alpha: &AttemptVector, state: &ChannelState, channel_rate: f64) -> Result<f64> {
    check_len(alpha, state)?;
    let mut total = 0.0;
    for (i, &a) in alpha.0.iter().enumerate() {
        total += a * channel_rate * (1.0 - state.drop_rates[i]);
    }
    Ok(total)
}

/// Class counts after adding each RSU's inventory scaled by its throughput.
pub fn projected_counts(
    received: &[f64],
    alpha: &AttemptVector,
    inventories: &[Vec<f64>],
    state: &ChannelState,
    channel_rate: f64,
) -> Result<Vec<f64>> {
    check_len(alpha, state)?;
    if inventories.len() != alpha.len() {
        return Err(Error::config(format!(
            "{} inventories for {} RSUs",
            inventories.len(),
            alpha.len()
        )));
    }
    let mut counts = received.to_vec();
    for (i, inventory) in inventories.iter().enumerate() {
        if inventory.len() != counts.len() {
            return Err(Error::config(format!(
                "RSU {i} inventory has {} classes, accumulator has {}",
                inventory.len(),
                counts.len()
            )));
        }
        let zeta = alpha.0[i] * channel_rate * (1.0 - state.drop_rates[i]);
        for (j, &c) in inventory.iter().enumerate() {
            counts[j] += c * zeta;
        }
    }
    Ok(counts)
}

/// Jain's index of the projected class counts.
pub fn fairness_objective(
    acc: &AccumulatorState,
    alpha: &AttemptVector,
    inventories: &[Vec<f64>],
    state: &ChannelState,
    channel_rate: f64,
) -> Result<f64> {
    jain_index(&projected_counts(&acc.expected, alpha, inventories, state, channel_rate)?)
}

/// Everything the value function needs about one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSnapshot {
    pub channel: ChannelState,
    /// Planning ledger of received class counts up to the previous interval.
    pub received: Vec<f64>,
    /// Per-RSU per-class sample counts.
    pub inventories: Vec<Vec<f64>>,
    /// Channel count `M`.
    pub capacity: usize,
    pub channel_rate: f64,
}

impl IntervalSnapshot {
    pub fn rsus(&self) -> usize {
        self.channel.len()
    }

    pub fn classes(&self) -> usize {
        self.received.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rsus();
        if self.inventories.len() != n {
            return Err(Error::config(format!("{} inventories for N = {n}", self.inventories.len())));
        }
        if self.received.is_empty() {
            return Err(Error::config("at least one class is required"));
        }
        for (i, inv) in self.inventories.iter().enumerate() {
            if inv.len() != self.classes() {
                return Err(Error::config(format!(
                    "RSU {i} inventory has {} classes, expected {}",
                    inv.len(),
                    self.classes()
                )));
            }
            if inv.iter().any(|c| !(*c >= 0.0)) {
                return Err(Error::config(format!("RSU {i} inventory has a negative count")));
            }
        }
        if self.capacity == 0 {
            return Err(Error::config("M must be at least 1"));
        }
        Ok(())
    }

    /// Raw `(f1, f2, f3)` for `members` sharing `M` channels equally.
    pub fn components(&self, members: &[usize]) -> Result<Components> {
        let alpha = AttemptVector::equal_split(self.rsus(), members, self.capacity)?;
        self.components_for(&alpha)
    }

    pub fn components_for(&self, alpha: &AttemptVector) -> Result<Components> {
        let delay = delay_objective(alpha, &self.channel)?;
        let throughput = throughput_objective(alpha, &self.channel, self.channel_rate)?;
        let counts = projected_counts(&self.received, alpha, &self.inventories, &self.channel, self.channel_rate)?;
        Ok(Components {
            delay,
            throughput,
            fairness: jain_index(&counts)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub delay: f64,
    pub throughput: f64,
    pub fairness: f64,
}

impl Components {
    fn as_array(&self) -> [f64; 3] {
        [self.delay, self.throughput, self.fairness]
    }

    fn from_array(a: [f64; 3]) -> Self {
        Self {
            delay: a[0],
            throughput: a[1],
            fairness: a[2],
        }
    }
}

/// Per-component mean and population standard deviation over a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormalizationStats {
    /// Stats that leave components unchanged.
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }

    pub fn from_components(candidates: &[Components]) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::domain("normalization needs at least one candidate"));
        }
        let n = candidates.len() as f64;
        let mut mean = [0.0; 3];
        for c in candidates {
            for (m, v) in mean.iter_mut().zip(c.as_array()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0; 3];
        for c in candidates {
            for ((s, v), m) in var.iter_mut().zip(c.as_array()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = [0.0; 3];
        for k in 0..3 {
            let s = (var[k] / n).sqrt();
            std[k] = if s <= DEGENERATE_SPREAD * mean[k].abs().max(1.0) { 0.0 } else { s };
        }
        Ok(Self { mean, std })
    }

    /// z-scores; a component with zero spread maps to 0.
    pub fn normalize(&self, c: &Components) -> Components {
        let raw = c.as_array();
        let mut z = [0.0; 3];
        for k in 0..3 {
            if self.std[k] > 0.0 {
                z[k] = (raw[k] - self.mean[k]) / self.std[k];
            }
        }
        Components::from_array(z)
    }
}

/// A scored coalition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionValue {
    pub members: Vec<usize>,
    pub raw: Components,
    pub normalized: Components,
    pub value: f64,
}

/// Scores `members` with equal channel split under the given normalization.
pub fn coalition_value(
    members: &[usize],
    snapshot: &IntervalSnapshot,
    weights: &PolicyWeights,
    norm: &NormalizationStats,
) -> Result<CoalitionValue> {
    let raw = snapshot.components(members)?;
    Ok(score(members.to_vec(), raw, weights, norm))
}

pub(crate) fn score(
    members: Vec<usize>,
    raw: Components,
    weights: &PolicyWeights,
    norm: &NormalizationStats,
) -> CoalitionValue {
    let normalized = norm.normalize(&raw);
    CoalitionValue {
        members,
        raw,
        value: weights.combine(&normalized),
        normalized,
    }
}
