//! Labeled feature vectors: a synthetic Gaussian-blob generator and a
//! loader for delimited text files.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major feature storage with one label per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize, classes: usize) -> Self {
        Self {
            dim,
            classes,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], label: usize) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::domain(format!("feature vector of length {} for dimension {}", x.len(), self.dim)));
        }
        if label >= self.classes {
            return Err(Error::domain(format!("label {label} out of range for {} classes", self.classes)));
        }
        self.features.extend_from_slice(x);
        self.labels.push(label);
        Ok(self.labels.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Sample ids grouped by label.
    pub fn ids_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Isotropic Gaussian classes whose nearest means are `separation * sigma` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("at least two classes are required"));
        }
        if self.dim == 0 {
            return Err(Error::config("feature dimension must be at least 1"));
        }
        if self.classes > 2 * self.dim {
            return Err(Error::config(format!(
                "blob generator places at most 2 * d = {} class means, got C = {}",
                2 * self.dim,
                self.classes
            )));
        }
        if !(self.separation > 0.0 && self.sigma > 0.0) {
            return Err(Error::config("blob separation and sigma must be positive"));
        }
        Ok(())
    }

    /// Mean of class `j`: `+a e_j` for `j < d`, `-a e_(j-d)` otherwise,
    /// with `a = separation * sigma / sqrt(2)`.
    pub fn class_mean(&self, j: usize) -> Vec<f64> {
        let a = self.separation * self.sigma / std::f64::consts::SQRT_2;
        let mut mean = vec![0.0; self.dim];
        if j < self.dim {
            mean[j] = a;
        } else {
            mean[j - self.dim] = -a;
        }
        mean
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, data: &mut Dataset, class: usize, rng: &mut R) -> Result<usize> {
        let mean = self.class_mean(class);
        let x: Vec<f64> = mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.sigma * z
            })
            .collect();
        data.push(&x, class)
    }

    /// `counts[j]` samples of each class `j`, class by class.
    pub fn generate<R: Rng + ?Sized>(&self, counts: &[usize], rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let mut data = Dataset::new(self.dim, self.classes);
        for (class, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                self.sample_into(&mut data, class, rng)?;
            }
        }
        Ok(data)
    }
}

/// Reads comma-separated rows of `d` floats followed by an integer label.
///
/// `classes` is one more than the largest label seen.
pub fn load_delimited(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut dim = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
        if fields.len() < 2 {
            return Err(Error::Parse(format!("{} row {}: need features and a label", path.display(), line + 1)));
        }
        let (label_field, feature_fields) = fields.split_last().expect("nonempty");
        let label: usize = label_field
            .parse()
            .map_err(|_| Error::Parse(format!("{} row {}: bad label {label_field:?}", path.display(), line + 1)))?;
        let x = feature_fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("{} row {}: {e}", path.display(), line + 1)))?;
        match dim {
            None => dim = Some(x.len()),
            Some(d) if d != x.len() => {
                return Err(Error::Parse(format!(
                    "{} row {}: {} features, earlier rows have {d}",
                    path.display(),
                    line + 1,
                    x.len()
                )))
            }
            _ => {}
        }
        rows.push((x, label));
    }
    let dim = dim.ok_or_else(|| Error::Parse(format!("{}: no samples", path.display())))?;
    let classes = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    let mut data = Dataset::new(dim, classes);
    for (x, l) in rows {
        data.push(&x, l)?;
    }
    Ok(data)
}
