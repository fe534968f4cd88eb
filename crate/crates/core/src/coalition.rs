//! Active-set selection: exhaustive fixed-size enumeration, greedy
//! marginal-value construction and Shapley ranking.

use itertools::Itertools;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{score, CoalitionValue, Components, IntervalSnapshot, NormalizationStats, PolicyWeights};
use crate::seed::rng_from_seed;

/// Sorted, duplicate-free RSU ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(Vec<usize>);

impl Coalition {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain(format!("duplicate RSU in coalition {members:?}")));
        }
        Ok(Self(members))
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchLimits {
    /// Largest `C(N, K)` the exact enumerator will walk.
    pub enumeration_limit: u64,
    /// Largest `N` for exact Shapley values.
    pub exact_shapley_limit: usize,
    /// Size-`K` coalitions used to estimate normalization stats when
    /// `C(N, K)` is larger than this.
    pub normalization_sample: usize,
    /// Seed for the normalization sample.
    pub pool_seed: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            enumeration_limit: 2_000_000,
            exact_shapley_limit: 12,
            normalization_sample: 4096,
            pool_seed: 0x5eed,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn check_size(snapshot: &IntervalSnapshot, k: usize) -> Result<()> {
    snapshot.validate()?;
    if k < snapshot.capacity {
        return Err(Error::InfeasibleCoalition {
            size: k,
            capacity: snapshot.capacity,
        });
    }
    if k > snapshot.rsus() {
        return Err(Error::domain(format!("K = {k} exceeds N = {}", snapshot.rsus())));
    }
    Ok(())
}

fn components_of(snapshot: &IntervalSnapshot, sets: &[Vec<usize>]) -> Result<Vec<Components>> {
    if sets.len() > 1024 {
        sets.par_iter().map(|s| snapshot.components(s)).collect()
    } else {
        sets.iter().map(|s| snapshot.components(s)).collect()
    }
}

/// Index of the maximum value; the first index wins ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Best size-`k` coalition over all `C(N, k)` subsets.
///
/// Components are z-scored across every size-`k` subset. Equal values go to
/// the lexicographically smallest member list, which is the first one in
/// enumeration order.
pub fn enumerate_best_coalition(
    snapshot: &IntervalSnapshot,
    k: usize,
    weights: &PolicyWeights,
    limits: &SearchLimits,
) -> Result<CoalitionValue> {
    check_size(snapshot, k)?;
    weights.validate()?;
    let count = binomial(snapshot.rsus(), k);
    if count > limits.enumeration_limit as u128 {
        return Err(Error::EnumerationLimit {
            count,
            limit: limits.enumeration_limit as u128,
        });
    }
    let sets: Vec<Vec<usize>> = (0..snapshot.rsus()).combinations(k).collect();
    let raw = components_of(snapshot, &sets)?;
    let stats = NormalizationStats::from_components(&raw)?;
    let values: Vec<f64> = raw.iter().map(|c| weights.combine(&stats.normalize(c))).collect();
    let best = argmax(&values);
    Ok(score(sets[best].clone(), raw[best], weights, &stats))
}

/// Normalization stats over size-`k` coalitions: all of them when there are
/// at most `limits.normalization_sample`, else a seeded uniform sample.
pub fn normalization_for_size(
    snapshot: &IntervalSnapshot,
    k: usize,
    limits: &SearchLimits,
) -> Result<NormalizationStats> {
    check_size(snapshot, k)?;
    let n = snapshot.rsus();
    let sets: Vec<Vec<usize>> = if binomial(n, k) <= limits.normalization_sample as u128 {
        (0..n).combinations(k).collect()
    } else {
        let mut rng = rng_from_seed(limits.pool_seed);
        (0..limits.normalization_sample.max(1))
            .map(|_| {
                let mut s = index::sample(&mut rng, n, k).into_vec();
                s.sort_unstable();
                s
            })
            .collect()
    };
    NormalizationStats::from_components(&components_of(snapshot, &sets)?)
}

/// Greedy marginal-value construction.
///
/// Starts from the best size-`M` coalition (all of them when `C(N, M)` fits
/// the enumeration limit, else the `M` best single RSUs) and repeatedly adds
/// the RSU with the largest `v(S + n) - v(S)` until `|S| = k`. All values use
/// one set of normalization stats for the interval, so marginal values are
/// differences of a single function.
pub fn greedy_coalition(
    snapshot: &IntervalSnapshot,
    k: usize,
    weights: &PolicyWeights,
    limits: &SearchLimits,
) -> Result<CoalitionValue> {
    check_size(snapshot, k)?;
    weights.validate()?;
    let n = snapshot.rsus();
    let m = snapshot.capacity;
    let stats = normalization_for_size(snapshot, k, limits)?;
    let value_of = |members: &[usize]| -> Result<(Components, f64)> {
        let raw = snapshot.components(members)?;
        Ok((raw, weights.combine(&stats.normalize(&raw))))
    };

    let mut current: Vec<usize> = if binomial(n, m) <= limits.enumeration_limit as u128 {
        let sets: Vec<Vec<usize>> = (0..n).combinations(m).collect();
        let raw = components_of(snapshot, &sets)?;
        let values: Vec<f64> = raw.iter().map(|c| weights.combine(&stats.normalize(c))).collect();
        sets[argmax(&values)].clone()
    } else {
        let mut scored = Vec::with_capacity(n);
        for i in 0..n {
            let mut alpha = crate::metrics::AttemptVector::zeros(n);
            alpha.0[i] = 1.0;
            let raw = snapshot.components_for(&alpha)?;
            scored.push((i, weights.combine(&stats.normalize(&raw))));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut top: Vec<usize> = scored[..m].iter().map(|(i, _)| *i).collect();
        top.sort_unstable();
        top
    };

    let (mut raw, _) = value_of(&current)?;
    while current.len() < k {
        let mut best: Option<(Vec<usize>, Components, f64)> = None;
        for cand in (0..n).filter(|c| !current.contains(c)) {
            let mut next = current.clone();
            next.push(cand);
            next.sort_unstable();
            let (r, v) = value_of(&next)?;
            // v(S + n) - v(S) shares the v(S) term, so comparing v(S + n) is enough.
            if best.as_ref().is_none_or(|b| v > b.2) {
                best = Some((next, r, v));
            }
        }
        let (next, r, _) = best.expect("k <= N leaves a candidate");
        current = next;
        raw = r;
    }
    Ok(score(current, raw, weights, &stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapleyMode {
    Exact,
    Sampled { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub values: Vec<f64>,
    pub mode: ShapleyMode,
}

impl ShapleyResult {
    /// RSU ids by decreasing Shapley value, ties by id.
    pub fn ranking(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.values.len()).collect();
        ids.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        ids
    }
}

fn members_of(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Exact Shapley values of an `n`-player game with characteristic function `v`.
///
/// `phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! * (v(S + i) - v(S))`.
pub fn shapley_exact<F>(n: usize, mut v: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if n == 0 || n > 24 {
        return Err(Error::domain(format!("exact Shapley supports 1..=24 players, got {n}")));
    }
    let subsets = 1u64 << n;
    let mut values = Vec::with_capacity(subsets as usize);
    for mask in 0..subsets {
        values.push(v(&members_of(mask, n))?);
    }
    // weight[s] = s! (n - s - 1)! / n!
    let mut weight = vec![0.0; n];
    weight[0] = 1.0 / n as f64;
    for s in 1..n {
        weight[s] = weight[s - 1] * s as f64 / (n - s) as f64;
    }
    let mut phi = vec![0.0; n];
    for mask in 0..subsets {
        let size = mask.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask & (1 << i) == 0 {
                *p += weight[size] * (values[(mask | (1 << i)) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(phi)
}

/// Monte-Carlo Shapley values from uniformly random join orders.
pub fn shapley_sampled<F, R>(n: usize, samples: usize, rng: &mut R, mut v: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Result<f64>,
    R: Rng + ?Sized,
{
    if samples == 0 {
        return Err(Error::domain("sampled Shapley needs at least one permutation"));
    }
    if n == 0 || n > 64 {
        return Err(Error::domain(format!("sampled Shapley supports 1..=64 players, got {n}")));
    }
    let mut cache = std::collections::HashMap::<u64, f64>::new();
    let mut eval = |mask: u64, v: &mut F| -> Result<f64> {
        if let Some(x) = cache.get(&mask) {
            return Ok(*x);
        }
        let x = v(&members_of(mask, n))?;
        cache.insert(mask, x);
        Ok(x)
    };
    let mut phi = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..samples {
        order.shuffle(rng);
        let mut mask = 0u64;
        let mut prev = eval(mask, &mut v)?;
        for &i in &order {
            mask |= 1 << i;
            let next = eval(mask, &mut v)?;
            phi[i] += next - prev;
            prev = next;
        }
    }
    for p in &mut phi {
        *p /= samples as f64;
    }
    Ok(phi)
}

/// Value of an arbitrary-size coalition in the RSU game: the raw weighted
/// objective under equal split, and 0 when `|S| < M`.
pub fn rsu_game_value(snapshot: &IntervalSnapshot, weights: &PolicyWeights, members: &[usize]) -> Result<f64> {
    if members.len() < snapshot.capacity {
        return Ok(0.0);
    }
    Ok(weights.combine(&snapshot.components(members)?))
}

/// Shapley values of every RSU in the interval game (diagnostic).
pub fn shapley_ranking<R: Rng + ?Sized>(
    snapshot: &IntervalSnapshot,
    weights: &PolicyWeights,
    mode: ShapleyMode,
    limits: &SearchLimits,
    rng: &mut R,
) -> Result<ShapleyResult> {
    snapshot.validate()?;
    weights.validate()?;
    let n = snapshot.rsus();
    let v = |s: &[usize]| rsu_game_value(snapshot, weights, s);
    let values = match mode {
        ShapleyMode::Exact => {
            if n > limits.exact_shapley_limit {
                return Err(Error::ShapleyLimit {
                    players: n,
                    limit: limits.exact_shapley_limit,
                });
            }
            shapley_exact(n, v)?
        }
        ShapleyMode::Sampled { samples } => shapley_sampled(n, samples, rng, v)?,
    };
    Ok(ShapleyResult { values, mode })
}
