//! The five compared scheduling policies behind one planning interface.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::{binomial, enumerate_best_coalition, greedy_coalition, Coalition, SearchLimits};
use crate::error::{Error, Result};
use crate::metrics::{AttemptVector, CoalitionValue, IntervalSnapshot, PolicyWeights};

/// Relative gap under which two expected delays count as tied.
const DELAY_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "fair")]
    OptimizedFair,
    #[serde(rename = "nofair")]
    OptimizedNoFair,
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "delaymin")]
    DelayMin,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::OptimizedFair,
        PolicyKind::OptimizedNoFair,
        PolicyKind::Uniform,
        PolicyKind::Random,
        PolicyKind::DelayMin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::OptimizedFair => "fair",
            PolicyKind::OptimizedNoFair => "nofair",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Random => "random",
            PolicyKind::DelayMin => "delaymin",
        }
    }

    /// Stable index used in seed derivation.
    pub fn index(&self) -> u64 {
        match self {
            PolicyKind::OptimizedFair => 0,
            PolicyKind::OptimizedNoFair => 1,
            PolicyKind::Uniform => 2,
            PolicyKind::Random => 3,
            PolicyKind::DelayMin => 4,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown policy {s:?} (expected fair, nofair, uniform, random or delaymin)")))
    }
}

/// A policy with its weights and coalition size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub weights: PolicyWeights,
    pub coalition_size: usize,
}

impl Policy {
    /// Default weights: equal thirds for `fair`, halves without fairness otherwise.
    pub fn new(kind: PolicyKind, coalition_size: usize) -> Self {
        let weights = match kind {
            PolicyKind::OptimizedFair => PolicyWeights::with_fairness(),
            _ => PolicyWeights::without_fairness(),
        };
        Self {
            kind,
            weights,
            coalition_size,
        }
    }

    pub fn with_weights(mut self, weights: PolicyWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self, rsus: usize, capacity: usize) -> Result<()> {
        self.weights.validate()?;
        match self.kind {
            PolicyKind::OptimizedFair if self.weights.fairness <= 0.0 => {
                return Err(Error::config("the fair policy needs a positive fairness weight"));
            }
            PolicyKind::OptimizedNoFair if self.weights.fairness != 0.0 => {
                return Err(Error::config("the nofair policy needs a zero fairness weight"));
            }
            _ => {}
        }
        if self.coalition_size < capacity || self.coalition_size > rsus {
            return Err(Error::config(format!(
                "coalition size K = {} must satisfy M = {capacity} <= K <= N = {rsus}",
                self.coalition_size
            )));
        }
        Ok(())
    }
}

/// Active set and attempt probabilities for one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPlan {
    pub coalition: Coalition,
    pub alpha: AttemptVector,
    /// Score of the chosen coalition, for the optimizing policies.
    pub value: Option<CoalitionValue>,
}

/// Best coalition by exhaustive enumeration, or greedily when `C(N, K)` is too large.
pub fn best_coalition(
    snapshot: &IntervalSnapshot,
    k: usize,
    weights: &PolicyWeights,
    limits: &SearchLimits,
) -> Result<CoalitionValue> {
    if binomial(snapshot.rsus(), k) <= limits.enumeration_limit as u128 {
        enumerate_best_coalition(snapshot, k, weights, limits)
    } else {
        greedy_coalition(snapshot, k, weights, limits)
    }
}

/// The `k` RSUs with the smallest expected delay.
///
/// Ties (within a relative 1e-9) go to the smaller mean per-attempt delay
/// `1/lambda`, then to the smaller id.
pub fn delay_ranking(snapshot: &IntervalSnapshot) -> Vec<usize> {
    let ch = &snapshot.channel;
    let mut ids: Vec<usize> = (0..ch.len()).collect();
    ids.sort_by(|&a, &b| {
        let (da, db) = (ch.expected_delay(a), ch.expected_delay(b));
        if (da - db).abs() > DELAY_TIE_TOLERANCE * da.abs().max(db.abs()) {
            return da.total_cmp(&db);
        }
        (1.0 / ch.delay_rates[a])
            .total_cmp(&(1.0 / ch.delay_rates[b]))
            .then(a.cmp(&b))
    });
    ids
}

pub fn plan_interval<R: Rng + ?Sized>(
    policy: &Policy,
    snapshot: &IntervalSnapshot,
    limits: &SearchLimits,
    rng: &mut R,
) -> Result<IntervalPlan> {
    let n = snapshot.rsus();
    let m = snapshot.capacity;
    policy.validate(n, m)?;
    let k = policy.coalition_size;
    let (members, value) = match policy.kind {
        PolicyKind::OptimizedFair | PolicyKind::OptimizedNoFair => {
            let best = best_coalition(snapshot, k, &policy.weights, limits)?;
            (best.members.clone(), Some(best))
        }
        PolicyKind::Uniform => ((0..n).collect(), None),
        PolicyKind::Random => (index::sample(rng, n, k).into_vec(), None),
        PolicyKind::DelayMin => (delay_ranking(snapshot)[..k].to_vec(), None),
    };
    let coalition = Coalition::new(members)?;
    let alpha = AttemptVector::equal_split(n, coalition.members(), m)?;
    Ok(IntervalPlan { coalition, alpha, value })
}
