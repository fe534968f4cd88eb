//! Which samples an active RSU sends: class quotas that keep the server's
//! class counts level, then the least-confident samples within each class
//! under a softmax linear classifier trained on everything delivered so far.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Per-class pools of sample ids held by one RSU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsuInventory {
    pools: Vec<Vec<usize>>,
}

impl RsuInventory {
    pub fn new(pools: Vec<Vec<usize>>) -> Self {
        Self { pools }
    }

    pub fn classes(&self) -> usize {
        self.pools.len()
    }

    pub fn pool(&self, class: usize) -> &[usize] {
        &self.pools[class]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.pools.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.pools.iter().map(Vec::len).sum()
    }

    /// Removes `ids` from the pool of `class`.
    pub fn take(&mut self, class: usize, ids: &[usize]) {
        self.pools[class].retain(|id| !ids.contains(id));
    }
}

/// Water-filling quotas with a single shared budget.
///
/// `stock[r][j]` is the class-`j` stock of active RSU `r`; `counts[j]` the
/// server's current class counts. Returns `quota[r][j]`.
pub fn class_quota(stock: &[Vec<usize>], counts: &[u64], budget: usize) -> Vec<Vec<usize>> {
    water_fill(stock, counts, budget, None)
}

/// Water-filling where RSU `r` can send at most `budgets[r]` samples.
pub fn class_quota_per_rsu(stock: &[Vec<usize>], counts: &[u64], budgets: &[usize]) -> Vec<Vec<usize>> {
    assert_eq!(stock.len(), budgets.len(), "one budget per active RSU");
    water_fill(stock, counts, budgets.iter().sum(), Some(budgets))
}

fn water_fill(stock: &[Vec<usize>], counts: &[u64], budget: usize, caps: Option<&[usize]>) -> Vec<Vec<usize>> {
    let classes = counts.len();
    let mut level: Vec<u64> = counts.to_vec();
    let mut quota = vec![vec![0usize; classes]; stock.len()];
    let mut left: Vec<usize> = match caps {
        Some(c) => c.to_vec(),
        None => vec![usize::MAX; stock.len()],
    };
    for _ in 0..budget {
        let remaining = |r: usize, j: usize| stock[r][j] - quota[r][j];
        // scarcest class that some RSU with budget can still supply
        let class = (0..classes)
            .filter(|&j| (0..stock.len()).any(|r| left[r] > 0 && remaining(r, j) > 0))
            .min_by_key(|&j| (level[j], j));
        let Some(j) = class else { break };
        let mut best = None;
        for r in 0..stock.len() {
            if left[r] == 0 || remaining(r, j) == 0 {
                continue;
            }
            if best.is_none_or(|b| remaining(r, j) > remaining(b, j)) {
                best = Some(r);
            }
        }
        let r = best.expect("class was chosen because a supplier exists");
        quota[r][j] += 1;
        level[j] += 1;
        left[r] -= 1;
    }
    quota
}

/// Top-1 minus top-2 probability.
pub fn margin(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::domain("margin needs at least two classes"));
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &s in scores {
        if s > first {
            second = first;
            first = s;
        } else if s > second {
            second = s;
        }
    }
    Ok(first - second)
}

/// The `k` ids with the smallest margins, ties by id.
pub fn select_by_margin(ids: &[usize], margins: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = margins.iter().copied().zip(ids.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Most uncertain `k` samples of one class pool.
///
/// Without a model the choice is uniformly random.
pub fn min_margin_select<R: Rng + ?Sized>(
    pool: &[usize],
    data: &Dataset,
    model: Option<&ProxyClassifier>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k >= pool.len() {
        return Ok(pool.to_vec());
    }
    match model {
        None => Ok(index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()),
        Some(model) => {
            let margins = pool
                .iter()
                .map(|&id| margin(&model.predict_proba(data.feature(id))))
                .collect::<Result<Vec<_>>>()?;
            Ok(select_by_margin(pool, &margins, k))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weight matrix (not the bias).
    pub l2: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 40,
            l2: 1e-3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::config("training.learning_rate must be > 0 and training.l2 >= 0"));
        }
        Ok(())
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyClassifier {
    classes: usize,
    dim: usize,
    /// `classes x dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ProxyClassifier {
    /// All-zero parameters: uniform scores everywhere.
    pub fn untrained(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Weights followed by biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let w = self.classes * self.dim;
        assert_eq!(p.len(), w + self.classes);
        self.weights.copy_from_slice(&p[..w]);
        self.bias.copy_from_slice(&p[w..]);
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.dim..(c + 1) * self.dim];
                self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.logits(x);
        (0..self.classes).fold(0, |best, c| if p[c] > p[best] { c } else { best })
    }

    /// Mean cross-entropy plus `l2/2 * |W|^2`, and its gradient in
    /// [`params`](Self::params) order.
    pub fn loss_and_gradient(&self, data: &Dataset, ids: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let (c, d) = (self.classes, self.dim);
        let mut grad = vec![0.0; c * d + c];
        let mut loss = 0.0;
        if !ids.is_empty() {
            let scale = 1.0 / ids.len() as f64;
            for &id in ids {
                let x = data.feature(id);
                let y = data.label(id);
                let p = softmax(&self.logits(x));
                loss -= p[y].max(f64::MIN_POSITIVE).ln() * scale;
                for k in 0..c {
                    let err = (p[k] - if k == y { 1.0 } else { 0.0 }) * scale;
                    for (g, v) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *g += err * v;
                    }
                    grad[c * d + k] += err;
                }
            }
        }
        for (g, w) in grad[..c * d].iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (loss, grad)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Full-batch gradient descent on the delivered samples `ids`.
///
/// Starts from `warm_start` when given, else from zero. An empty `ids`
/// returns the starting model unchanged.
pub fn train_proxy_classifier(
    data: &Dataset,
    ids: &[usize],
    config: &TrainingConfig,
    warm_start: Option<&ProxyClassifier>,
) -> ProxyClassifier {
    let mut model = warm_start
        .cloned()
        .unwrap_or_else(|| ProxyClassifier::untrained(data.classes(), data.dim()));
    if ids.is_empty() {
        return model;
    }
    let mut params = model.params();
    for _ in 0..config.epochs {
        let (_, grad) = model.loss_and_gradient(data, ids, config.l2);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        model.set_params(&params);
    }
    model
}

/// Unweighted mean of per-class F1 over all classes of `data`.
pub fn macro_f1(model: &ProxyClassifier, data: &Dataset) -> f64 {
    let c = data.classes();
    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fneg = vec![0usize; c];
    for i in 0..data.len() {
        let (pred, truth) = (model.predict(data.feature(i)), data.label(i));
        if pred == truth {
            tp[truth] += 1;
        } else {
            fp[pred] += 1;
            fneg[truth] += 1;
        }
    }
    let f1: f64 = (0..c)
        .map(|k| {
            let denom = 2 * tp[k] + fp[k] + fneg[k];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[k] as f64 / denom as f64
            }
        })
        .sum();
    f1 / c as f64
}

pub fn accuracy(model: &ProxyClassifier, data: &Dataset, ids: &[usize]) -> f64 {
    let hits = ids.iter().filter(|&&i| model.predict(data.feature(i)) == data.label(i)).count();
    hits as f64 / ids.len().max(1) as f64
}
