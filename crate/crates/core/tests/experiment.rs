use std::collections::BTreeMap;

use divsched::experiment::{run_experiment, ExperimentSpec, Sweep, SweepAxis};
use divsched::sim::SimConfig;

#[test]
fn goodput_falls_with_drop_rate_for_every_policy() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        base: SimConfig {
            rsus: 6,
            channels: 3,
            coalition_size: 3,
            slots: 100,
            intervals: 3,
            classes: 4,
            feature_dim: 2,
            samples_per_rsu: 400,
            test_per_class: 20,
            ..SimConfig::default()
        },
        seeds: (0..4).collect(),
        sweep: Sweep {
            axis: SweepAxis::DropRateMean,
            values: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        },
        output_dir: dir.path().to_path_buf(),
        ..ExperimentSpec::default()
    };
    let report = run_experiment(&spec).unwrap();
    assert_eq!(report.runs, 5 * 4 * 5);
    assert!(report.failures.is_empty());

    let mut rdr = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (p, v, g) = (col("policy"), col("sweep_value"), col("goodput_mean"));
    let mut by_policy: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        by_policy
            .entry(rec[p].to_string())
            .or_default()
            .push((rec[v].parse().unwrap(), rec[g].parse().unwrap()));
    }
    assert_eq!(rows, 25);
    for (policy, mut pts) in by_policy {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pts.windows(2).all(|w| w[1].1 <= w[0].1), "{policy}: {pts:?}");
    }

    let intervals = std::fs::read_to_string(dir.path().join("intervals.csv")).unwrap();
    assert_eq!(intervals.lines().count(), 1 + 100 * 3);
}
