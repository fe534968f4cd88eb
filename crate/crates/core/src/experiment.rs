//! Experiment specs, policy x seed x sweep grids and their flat-file outputs.
//!
//! Every grid cell is an independent run. Cells execute on the rayon pool and
//! all files are written afterwards by the calling thread, so outputs do not
//! depend on scheduling.
//!
//! Seeds: a cell's scenario seed is `derive_seed(base.seed, [seed, sweep_index])`.
//! Dataset, test set and channel draws come from that seed and are shared by
//! every policy in the cell; each policy's own streams additionally mix in
//! the policy index, so adding a policy never changes another policy's run.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::seed::derive_seed;
use crate::sim::{run_simulation_with, RunSummary, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    /// Mean of the per-interval drop-rate distribution.
    DropRateMean,
    /// Number of intervals per run.
    Intervals,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

fn d_policies() -> Vec<PolicyKind> {
    PolicyKind::ALL.to_vec()
}
fn d_seeds() -> Vec<u64> {
    vec![0]
}
fn d_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub base: SimConfig,
    #[serde(default = "d_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    /// Attach slot matrices to the per-run JSON.
    #[serde(default)]
    pub dump_schedule: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// One cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub run_id: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub sweep_index: usize,
    pub sweep_value: Option<f64>,
    pub config: SimConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::config("policies: at least one policy is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds: at least one seed is required"));
        }
        if self.base.intervals == 0 {
            return Err(Error::config("base.intervals: invariant intervals >= 1 violated"));
        }
        self.base.validate().map_err(|e| prefix("base", e))?;
        match self.sweep.axis {
            SweepAxis::None => {
                if !self.sweep.values.is_empty() {
                    return Err(Error::config("sweep.values given without a sweep.axis"));
                }
            }
            SweepAxis::DropRateMean | SweepAxis::Intervals => {
                if self.sweep.values.is_empty() {
                    return Err(Error::config("sweep.values: at least one value is required"));
                }
            }
        }
        if self.sweep.axis == SweepAxis::DropRateMean && self.base.fixed_channels.is_some() {
            return Err(Error::config(
                "sweep.axis drop_rate_mean has no effect with base.fixed_channels set",
            ));
        }
        for (i, _) in self.sweep.values.iter().enumerate() {
            self.config_for(i)?;
        }
        Ok(())
    }

    /// Base config with sweep value `index` applied (seed untouched).
    fn config_for(&self, index: usize) -> Result<SimConfig> {
        let mut cfg = self.base.clone();
        let Some(&v) = self.sweep.values.get(index) else {
            return Ok(cfg);
        };
        match self.sweep.axis {
            SweepAxis::None => {}
            SweepAxis::DropRateMean => {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::config(format!(
                        "sweep.values[{index}]: drop-rate mean must lie in (0, 1), got {v}"
                    )));
                }
                cfg.channel = cfg.channel.with_mean_drop_rate(v).map_err(|e| prefix("sweep", e))?;
            }
            SweepAxis::Intervals => {
                if !(v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                    return Err(Error::config(format!(
                        "sweep.values[{index}]: interval count must be a positive integer, got {v}"
                    )));
                }
                cfg.intervals = v as usize;
            }
        }
        Ok(cfg)
    }

    fn sweep_points(&self) -> Vec<(usize, Option<f64>)> {
        if self.sweep.axis == SweepAxis::None {
            vec![(0, None)]
        } else {
            self.sweep.values.iter().copied().map(Some).enumerate().collect()
        }
    }

    /// Cells in output order: sweep value, then policy, then seed.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        for (si, value) in self.sweep_points() {
            let swept = self.config_for(si)?;
            for &policy in &self.policies {
                for &seed in &self.seeds {
                    let mut config = swept.clone();
                    config.seed = derive_seed(self.base.seed, &[seed, si as u64]);
                    out.push(Cell {
                        run_id: format!("{}-s{}-v{}", policy.name(), seed, si),
                        policy,
                        seed,
                        sweep_index: si,
                        sweep_value: value,
                        config,
                    });
                }
            }
        }
        Ok(out)
    }
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{field}: {msg}")),
        other => other,
    }
}

/// Reads and validates an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new leading digit (9.999996 -> 10.00000)
    if s.trim_start_matches('-').parse::<f64>().is_ok_and(|v| v >= 10f64.powi(mag + 1)) && decimals > 0 {
        return format!("{x:.prec$}", prec = decimals - 1);
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

pub struct CellOutcome {
    pub cell: Cell,
    pub result: Result<RunSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub runs: usize,
    pub failures: Vec<(String, String)>,
    pub output_dir: PathBuf,
}

/// Runs every cell and writes the output files.
///
/// Failed cells are reported in the returned value; the files still hold
/// every successful run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let cells = spec.cells()?;
    let outcomes: Vec<CellOutcome> = cells
        .into_par_iter()
        .map(|cell| {
            let policy = cell.config.policy(cell.policy);
            let result = run_simulation_with(&cell.config, &policy, spec.dump_schedule);
            CellOutcome { cell, result }
        })
        .collect();
    write_outputs(&spec.output_dir, &outcomes)?;
    let failures = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().err().map(|e| (o.cell.run_id.clone(), e.to_string())))
        .collect();
    Ok(ExperimentReport {
        runs: outcomes.len(),
        failures,
        output_dir: spec.output_dir.clone(),
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_outputs(dir: &Path, outcomes: &[CellOutcome]) -> Result<()> {
    fs::create_dir_all(dir.join("runs"))?;

    let mut intervals = csv::Writer::from_path(dir.join("intervals.csv")).map_err(csv_err)?;
    intervals
        .write_record([
            "run_id",
            "policy",
            "seed",
            "sweep_value",
            "interval",
            "delay_mean",
            "goodput",
            "jain_delivered",
            "delivered_total",
            "f1_online",
        ])
        .map_err(csv_err)?;
    let mut runs = csv::Writer::from_path(dir.join("runs.csv")).map_err(csv_err)?;
    runs.write_record([
        "run_id",
        "policy",
        "seed",
        "sweep_value",
        "status",
        "final_f1",
        "final_jain",
        "mean_goodput",
        "mean_delay",
        "delivered_packets",
        "delivered_samples",
        "pending_packets",
    ])
    .map_err(csv_err)?;

    for o in outcomes {
        let c = &o.cell;
        let sv = opt(c.sweep_value);
        match &o.result {
            Ok(s) => {
                let mut cumulative = 0u64;
                for r in &s.records {
                    cumulative += r.delivered;
                    intervals
                        .write_record([
                            c.run_id.clone(),
                            c.policy.name().into(),
                            c.seed.to_string(),
                            sv.clone(),
                            r.interval.to_string(),
                            opt(r.mean_delay),
                            sig6(r.goodput),
                            sig6(r.jain_delivered),
                            cumulative.to_string(),
                            sig6(r.f1_online),
                        ])
                        .map_err(csv_err)?;
                }
                runs.write_record([
                    c.run_id.clone(),
                    c.policy.name().into(),
                    c.seed.to_string(),
                    sv.clone(),
                    "ok".into(),
                    sig6(s.final_f1),
                    sig6(s.final_jain()),
                    sig6(s.mean_goodput()),
                    opt(s.mean_delay()),
                    s.total_delivered_packets.to_string(),
                    s.total_delivered_samples.to_string(),
                    s.pending_packets.to_string(),
                ])
                .map_err(csv_err)?;
                let json = serde_json::to_string_pretty(s).map_err(|e| Error::Io(e.into()))?;
                fs::write(dir.join("runs").join(format!("{}.json", c.run_id)), json + "\n")?;
            }
            Err(e) => {
                let mut row = vec![
                    c.run_id.clone(),
                    c.policy.name().into(),
                    c.seed.to_string(),
                    sv.clone(),
                    format!("error: {e}"),
                ];
                row.resize(12, String::new());
                runs.write_record(&row).map_err(csv_err)?;
            }
        }
    }
    intervals.flush()?;
    runs.flush()?;
    write_summary(dir, outcomes)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn write_summary(dir: &Path, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
    let metrics = ["final_f1", "final_jain", "goodput", "delay", "delivered_packets"];
    let mut header = vec!["policy".to_string(), "sweep_value".into(), "runs".into()];
    for m in metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header).map_err(csv_err)?;

    // groups in first-appearance order
    type Group<'a> = ((PolicyKind, usize), Vec<&'a RunSummary>, Option<f64>);
    let mut groups: Vec<Group> = Vec::new();
    for o in outcomes {
        let key = (o.cell.policy, o.cell.sweep_index);
        let pos = match groups.iter().position(|g| g.0 == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new(), o.cell.sweep_value));
                groups.len() - 1
            }
        };
        if let Ok(s) = &o.result {
            groups[pos].1.push(s);
        }
    }
    for ((policy, _), runs, value) in groups {
        let mut row = vec![policy.name().to_string(), opt(value), runs.len().to_string()];
        let columns: [Vec<f64>; 5] = [
            runs.iter().map(|s| s.final_f1).collect(),
            runs.iter().map(|s| s.final_jain()).collect(),
            runs.iter().map(|s| s.mean_goodput()).collect(),
            runs.iter().filter_map(|s| s.mean_delay()).collect(),
            runs.iter().map(|s| s.total_delivered_packets as f64).collect(),
        ];
        for col in columns {
            if col.is_empty() {
                row.extend([String::new(), String::new()]);
            } else {
                let (m, s) = mean_std(&col);
                row.extend([sig6(m), sig6(s)]);
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
