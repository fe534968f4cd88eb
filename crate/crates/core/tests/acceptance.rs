//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so every line is printed
//! whether it passes or not; the process exits nonzero if any check fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;

use divsched::channel::{sample_packet_service, ChannelState};
use divsched::coalition::{enumerate_best_coalition, greedy_coalition, rsu_game_value, shapley_exact, SearchLimits};
use divsched::dataset::{BlobSpec, Dataset};
use divsched::experiment::{run_experiment, ExperimentSpec, Sweep, SweepAxis};
use divsched::metrics::{AttemptVector, IntervalSnapshot, NormalizationStats, PolicyWeights};
use divsched::policy::{Policy, PolicyKind};
use divsched::schedule::{build_matrix, verify_matrix};
use divsched::seed::rng_from_seed;
use divsched::select::ProxyClassifier;
use divsched::sim::{grid_search_alpha, run_simulation, ClassPartition, FixedChannels, RunSummary, SimConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_budget(o: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match budget {
        Some(b) if elapsed > b => outcome(false, format!("{} [over time budget {:.0?}]", o.detail, b)),
        _ => o,
    }
}

// 1. sampled end-to-end delay against its closed form
fn delay_monte_carlo() -> Outcome {
    let mut rng = rng_from_seed(101);
    let mut worst: f64 = 0.0;
    for beta in [0.1, 0.3, 0.5] {
        for lambda in [0.5, 1.0, 2.0] {
            let n = 100_000;
            let mut sum = 0.0;
            for _ in 0..n {
                sum += sample_packet_service(&mut rng, beta, lambda, 0.0).unwrap().delay;
            }
            let oracle = (1.0 / lambda) * (1.0 / (1.0 - beta));
            worst = worst.max((sum / n as f64 - oracle).abs() / oracle);
        }
    }
    outcome(worst < 0.02, format!("max relative error {worst:.4} (< 0.02)"))
}

fn lone_rsu_config(beta: f64, slots: usize) -> SimConfig {
    // RSU 1 is strictly worse so delay-min with K = 1 always picks RSU 0 at alpha = 1.
    SimConfig {
        rsus: 2,
        channels: 1,
        coalition_size: 1,
        slots,
        intervals: 1,
        classes: 2,
        feature_dim: 1,
        samples_per_rsu: slots + 10,
        test_per_class: 10,
        fixed_channels: Some(FixedChannels {
            drop_rates: vec![beta, 0.95],
            delay_rates: vec![1.0, 0.5],
        }),
        partition: ClassPartition::Balanced,
        ..SimConfig::default()
    }
}

// 2. goodput declines linearly in the drop rate
fn throughput_linearity() -> Outcome {
    let betas: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let mut goodput = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, &beta) in betas.iter().enumerate() {
        let cfg = SimConfig { seed: 200 + k as u64, ..lone_rsu_config(beta, 10_000) };
        let s = run_simulation(&cfg, &cfg.policy(PolicyKind::DelayMin)).unwrap();
        let r = &s.records[0];
        assert_eq!(r.alpha, vec![1.0, 0.0]);
        let g = r.delivered_per_rsu[0] as f64 / cfg.slots as f64;
        worst = worst.max((g - (1.0 - beta)).abs() / (1.0 - beta));
        goodput.push(g);
    }
    let n = betas.len() as f64;
    let mb = betas.iter().sum::<f64>() / n;
    let mg = goodput.iter().sum::<f64>() / n;
    let slope = betas.iter().zip(&goodput).map(|(b, g)| (b - mb) * (g - mg)).sum::<f64>()
        / betas.iter().map(|b| (b - mb).powi(2)).sum::<f64>();
    let pass = worst <= 0.03 && (slope + 1.0).abs() <= 0.05;
    outcome(pass, format!("max relative goodput error {worst:.4} (<= 0.03), slope {slope:.4} (-1 +- 0.05)"))
}

// 3. every built matrix satisfies row targets and column capacity
fn schedule_feasibility() -> Outcome {
    let (n, m, t) = (10, 5, 100);
    let mut rng = rng_from_seed(303);
    let mut bad = 0;
    let mut fallback = 0;
    for k in 0..1000 {
        let mut alpha: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = alpha.iter().sum();
        let cap = m as f64 * rng.random::<f64>();
        if total > cap {
            alpha.iter_mut().for_each(|a| *a *= cap / total);
        }
        let max_iters = if k % 2 == 0 { 0 } else { 10_000 };
        if max_iters == 0 {
            fallback += 1;
        }
        let q = build_matrix(&AttemptVector(alpha), t, m, &mut rng, max_iters).unwrap();
        if !verify_matrix(&q).is_empty() {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad} of 1000 matrices with violations ({fallback} forced fallback)"))
}

fn random_snapshot<R: Rng>(rng: &mut R, n: usize, m: usize, classes: usize) -> IntervalSnapshot {
    let betas = (0..n).map(|_| rng.random_range(0.02..0.6)).collect();
    let lambdas = (0..n).map(|_| rng.random_range(0.3..2.5)).collect();
    IntervalSnapshot {
        channel: ChannelState::new(betas, lambdas, 0).unwrap(),
        received: (0..classes).map(|_| rng.random_range(0.0..50.0)).collect(),
        inventories: (0..n)
            .map(|_| (0..classes).map(|_| rng.random_range(0..40) as f64).collect())
            .collect(),
        capacity: m,
        channel_rate: 1.0,
    }
}

/// Independent scorer: walks bitmasks, rebuilds every component by hand.
fn brute_force_best(s: &IntervalSnapshot, k: usize, w: &PolicyWeights) -> (Vec<usize>, f64) {
    let n = s.rsus();
    let mut sets: Vec<Vec<usize>> = (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    sets.sort();
    let share = s.capacity as f64 / k as f64;
    let raw: Vec<[f64; 3]> = sets
        .iter()
        .map(|set| {
            let mut inv_delay = 0.0;
            let mut thr = 0.0;
            let mut counts = s.received.clone();
            for &i in set {
                let (b, l) = (s.channel.drop_rates[i], s.channel.delay_rates[i]);
                inv_delay += share / (l * (1.0 - b));
                thr += share * s.channel_rate * (1.0 - b);
                let zeta = share * s.channel_rate * (1.0 - b);
                for (c, &x) in counts.iter_mut().zip(&s.inventories[i]) {
                    *c += x * zeta;
                }
            }
            let sum: f64 = counts.iter().sum();
            let sq: f64 = counts.iter().map(|c| c * c).sum();
            let jain = if sq == 0.0 { 0.0 } else { sum * sum / (counts.len() as f64 * sq) };
            [1.0 / inv_delay, thr, jain]
        })
        .collect();
    let cnt = raw.len() as f64;
    let mut z = vec![[0.0; 3]; raw.len()];
    for d in 0..3 {
        let mut mean = 0.0;
        for r in &raw {
            mean += r[d];
        }
        mean /= cnt;
        let mut var = 0.0;
        for r in &raw {
            var += (r[d] - mean) * (r[d] - mean);
        }
        let sd = (var / cnt).sqrt();
        if sd > 1e-12 * mean.abs().max(1.0) {
            for (zi, r) in z.iter_mut().zip(&raw) {
                zi[d] = (r[d] - mean) / sd;
            }
        }
    }
    let values: Vec<f64> = z
        .iter()
        .map(|z| w.delay * z[0] + w.throughput * z[1] + w.fairness * z[2])
        .collect();
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    (sets[best].clone(), values[best])
}

// 4. exhaustive search matches a hand-written oracle; greedy stays close
fn coalition_oracle() -> Outcome {
    let mut rng = rng_from_seed(404);
    let w = PolicyWeights::with_fairness();
    let limits = SearchLimits::default();
    let mut mismatches = 0;
    let mut ratios = Vec::new();
    for _ in 0..100 {
        let s = random_snapshot(&mut rng, 8, 2, 4);
        let exact = enumerate_best_coalition(&s, 4, &w, &limits).unwrap();
        let (members, value) = brute_force_best(&s, 4, &w);
        if exact.members != members || exact.value.to_bits() != value.to_bits() {
            mismatches += 1;
        }
        // Normalized values are z-scores with an arbitrary origin, so measure
        // the greedy value on the [worst, best] range of all size-4 coalitions.
        let greedy = greedy_coalition(&s, 4, &w, &limits).unwrap();
        let worst = worst_value(&s, 4, &w);
        let ratio = if exact.value > worst { (greedy.value - worst) / (exact.value - worst) } else { 1.0 };
        ratios.push(ratio);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        mismatches == 0 && mean >= 0.9 && min >= 0.75,
        format!("{mismatches} oracle mismatches; greedy ratio mean {mean:.4} (>= 0.90), min {min:.4} (>= 0.75)"),
    )
}

/// Smallest normalized value over all size-`k` coalitions.
fn worst_value(s: &IntervalSnapshot, k: usize, w: &PolicyWeights) -> f64 {
    let sets = (0..s.rsus()).combinations(k);
    let raw: Vec<_> = sets.map(|m| s.components(&m).unwrap()).collect();
    let stats = NormalizationStats::from_components(&raw).unwrap();
    raw.iter().map(|c| w.combine(&stats.normalize(c))).fold(f64::INFINITY, f64::min)
}

// 5. symmetry, efficiency and dummy axioms of exact Shapley values
fn shapley_axioms() -> Outcome {
    // RSUs 1 and 4 are identical; M = 2.
    let betas = vec![0.1, 0.3, 0.2, 0.45, 0.3, 0.15];
    let lambdas = vec![1.2, 0.8, 1.5, 0.6, 0.8, 1.0];
    let inv = vec![
        vec![10.0, 0.0, 5.0],
        vec![3.0, 8.0, 1.0],
        vec![0.0, 4.0, 12.0],
        vec![7.0, 7.0, 0.0],
        vec![3.0, 8.0, 1.0],
        vec![2.0, 2.0, 2.0],
    ];
    let s = IntervalSnapshot {
        channel: ChannelState::new(betas, lambdas, 0).unwrap(),
        received: vec![5.0, 1.0, 3.0],
        inventories: inv.clone(),
        capacity: 2,
        channel_rate: 1.0,
    };
    let w = PolicyWeights::with_fairness();
    let phi = shapley_exact(6, |m| rsu_game_value(&s, &w, m)).unwrap();
    let symmetry = (phi[1] - phi[4]).abs();
    let grand = rsu_game_value(&s, &w, &[0, 1, 2, 3, 4, 5]).unwrap();
    let efficiency = (phi.iter().sum::<f64>() - grand).abs();

    // Diversity-only game, M = 1, empty ledger: RSU 5 holds nothing, and
    // Jain's index ignores the uniform rescaling its presence causes.
    let mut inv_dummy = inv;
    inv_dummy[5] = vec![0.0; 3];
    let d = IntervalSnapshot {
        received: vec![0.0; 3],
        inventories: inv_dummy,
        capacity: 1,
        ..s.clone()
    };
    let wf = PolicyWeights::new(0.0, 0.0, 1.0);
    let phi_d = shapley_exact(6, |m| rsu_game_value(&d, &wf, m)).unwrap();
    let dummy = phi_d[5].abs();
    let grand_d = rsu_game_value(&d, &wf, &[0, 1, 2, 3, 4, 5]).unwrap();
    let efficiency_d = (phi_d.iter().sum::<f64>() - grand_d).abs();
    let pass = symmetry < 1e-9 && efficiency < 1e-9 && efficiency_d < 1e-9 && dummy < 1e-9;
    outcome(
        pass,
        format!(
            "symmetry gap {symmetry:.1e}, efficiency gaps {efficiency:.1e} / {efficiency_d:.1e}, dummy value {dummy:.1e} (all < 1e-9)"
        ),
    )
}

const THREE_RSU_BETA: [f64; 3] = [0.1, 0.22, 0.44];
const THREE_RSU_LAMBDA: [f64; 3] = [1.3, 1.5, 1.1];

fn three_rsu_config(seed: u64) -> SimConfig {
    SimConfig {
        rsus: 3,
        channels: 1,
        coalition_size: 2,
        slots: 100,
        intervals: 10,
        classes: 3,
        feature_dim: 2,
        seed,
        fixed_channels: Some(FixedChannels {
            drop_rates: THREE_RSU_BETA.to_vec(),
            delay_rates: THREE_RSU_LAMBDA.to_vec(),
        }),
        // each RSU mostly holds one class
        partition: ClassPartition::Explicit {
            counts: vec![vec![600, 100, 0], vec![0, 600, 100], vec![100, 0, 600]],
        },
        test_per_class: 50,
        ..SimConfig::default()
    }
}

fn three_rsu_policy(cfg: &SimConfig, kind: PolicyKind) -> Policy {
    // the delay-min baseline hands the single channel to one RSU
    let k = if kind == PolicyKind::DelayMin { 1 } else { cfg.coalition_size };
    Policy { coalition_size: k, ..cfg.policy(kind) }
}

// 6. qualitative orderings of the three-RSU example
fn three_rsu_orderings() -> Outcome {
    let seeds = 20;
    let mut util = [[0.0; 3]; 5];
    let mut delivered = [0.0; 5];
    let mut jain = [0.0; 5];
    let (mut fair_intervals, mut fair_on_best_pair) = (0, 0);
    for seed in 0..seeds {
        let cfg = three_rsu_config(600 + seed);
        for kind in PolicyKind::ALL {
            let s: RunSummary = run_simulation(&cfg, &three_rsu_policy(&cfg, kind)).unwrap();
            let p = kind.index() as usize;
            for (u, x) in util[p].iter_mut().zip(s.utilization(cfg.slots)) {
                *u += x / seeds as f64;
            }
            delivered[p] += s.total_delivered_packets as f64 / seeds as f64;
            jain[p] += s.final_jain() / seeds as f64;
            if kind == PolicyKind::OptimizedFair {
                fair_intervals += s.records.len();
                fair_on_best_pair += s.records.iter().filter(|r| r.coalition == [0, 1]).count();
            }
        }
    }
    let (fair, nofair, delaymin) = (0, 1, 4);
    let a = util[nofair][0] > util[nofair][1] && util[nofair][1] > util[nofair][2];
    let b = util[delaymin][1] > util[delaymin][0] && util[delaymin][1] > util[delaymin][2];
    let c = delivered[fair] < delivered[nofair];
    let d = (1..5).all(|p| jain[fair] > jain[p]);
    let fmt = |u: &[f64; 3]| format!("{:.3}/{:.3}/{:.3}", u[0], u[1], u[2]);
    outcome(
        a && b && c && d,
        format!(
            "fair chose RSUs 1+2 in {}/{} intervals; (a) nofair utilization {} {}; (b) delaymin {} {}; (c) delivered fair {:.1} vs nofair {:.1} {}; (d) Jain fair {:.4} vs others {:.4}/{:.4}/{:.4}/{:.4} {}",
            fair_on_best_pair,
            fair_intervals,
            fmt(&util[nofair]),
            ok(a),
            fmt(&util[delaymin]),
            ok(b),
            delivered[fair],
            delivered[nofair],
            ok(c),
            jain[fair],
            jain[1],
            jain[2],
            jain[3],
            jain[4],
            ok(d)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

// 7. final macro-F1 ordering on unbalanced blobs
fn learning_quality() -> Outcome {
    let seeds = 10u64;
    let mut f1 = [0.0; 5];
    let base = SimConfig {
        rsus: 10,
        channels: 5,
        coalition_size: 5,
        slots: 100,
        intervals: 10,
        classes: 10,
        feature_dim: 8,
        class_separation: 4.0,
        partition: ClassPartition::RoundRobin { classes_per_rsu: 2 },
        ..SimConfig::default()
    };
    let base = SimConfig { channel: base.channel.with_mean_drop_rate(0.2).unwrap(), ..base };
    let runs: Vec<(usize, f64)> = {
        let jobs: Vec<(u64, PolicyKind)> = (0..seeds)
            .flat_map(|s| PolicyKind::ALL.into_iter().map(move |k| (s, k)))
            .collect();
        jobs.par_iter()
            .map(|&(seed, kind)| {
                let cfg = SimConfig { seed: 700 + seed, ..base.clone() };
                let s = run_simulation(&cfg, &cfg.policy(kind)).unwrap();
                (kind.index() as usize, s.final_f1)
            })
            .collect()
    };
    for (p, v) in runs {
        f1[p] += v / seeds as f64;
    }
    let margin = (1..5).map(|p| f1[0] - f1[p]).fold(f64::INFINITY, f64::min);
    outcome(
        margin >= 0.02,
        format!(
            "mean F1 fair {:.4}, nofair {:.4}, uniform {:.4}, random {:.4}, delaymin {:.4}; smallest lead {:.4} (>= 0.02)",
            f1[0], f1[1], f1[2], f1[3], f1[4], margin
        ),
    )
}

// 8. grid optimum against the equal-split coalition
fn grid_consistency() -> Outcome {
    let mut rng = rng_from_seed(808);
    let w = PolicyWeights::new(0.5, 0.5, 0.0);
    let limits = SearchLimits::default();
    let mut dominated = 0;
    let mut ratios = Vec::new();
    for _ in 0..50 {
        let s = random_snapshot(&mut rng, 3, 2, 3);
        let (_, grid) = grid_search_alpha(&s, 10, &w).unwrap();
        let best = enumerate_best_coalition(&s, 2, &w, &limits).unwrap();
        let coalition = w.combine(&best.raw);
        if grid < coalition {
            dominated += 1;
        }
        ratios.push(coalition / grid);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    outcome(
        dominated == 0 && mean >= 0.85,
        format!("grid below coalition on {dominated} of 50; mean coalition/grid {mean:.4} (>= 0.85)"),
    )
}

// 9. analytic gradient against central differences
fn gradient_check() -> Outcome {
    let mut rng = rng_from_seed(909);
    let spec = BlobSpec { classes: 3, dim: 4, separation: 2.0, sigma: 1.0 };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut data = Dataset::new(4, 3);
        for i in 0..10 {
            spec.sample_into(&mut data, i % 3, &mut rng).unwrap();
        }
        let ids: Vec<usize> = (0..10).collect();
        let mut model = ProxyClassifier::untrained(3, 4);
        let p: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        model.set_params(&p);
        let l2 = 0.01;
        let (_, grad) = model.loss_and_gradient(&data, &ids, l2);
        let h = 1e-5;
        for k in 0..p.len() {
            let mut plus = p.clone();
            plus[k] += h;
            let mut minus = p.clone();
            minus[k] -= h;
            model.set_params(&plus);
            let (lp, _) = model.loss_and_gradient(&data, &ids, l2);
            model.set_params(&minus);
            let (lm, _) = model.loss_and_gradient(&data, &ids, l2);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        model.set_params(&p);
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} (< 1e-5)"))
}

// 10. identical specs give identical files
fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = |out: &str| ExperimentSpec {
        base: SimConfig {
            rsus: 5,
            channels: 2,
            coalition_size: 3,
            slots: 30,
            intervals: 3,
            classes: 4,
            feature_dim: 2,
            samples_per_rsu: 60,
            test_per_class: 20,
            ..SimConfig::default()
        },
        seeds: vec![1, 2, 3],
        sweep: Sweep { axis: SweepAxis::DropRateMean, values: vec![0.1, 0.4] },
        output_dir: dir.path().join(out),
        ..ExperimentSpec::default()
    };
    let (a, b) = (spec("a"), spec("b"));
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    let mut files = vec!["intervals.csv".to_string(), "runs.csv".into(), "summary.csv".into()];
    for entry in std::fs::read_dir(a.output_dir.join("runs")).unwrap() {
        files.push(format!("runs/{}", entry.unwrap().file_name().to_string_lossy()));
    }
    files.sort();
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(a.output_dir.join(f)).ok() != std::fs::read(b.output_dir.join(f)).ok())
        .collect();
    outcome(
        differing.is_empty(),
        format!("{} files compared, {} differ", files.len(), differing.len()),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let checks: [(&str, Check, Option<u64>); 10] = [
        ("closed-form delay vs Monte Carlo", delay_monte_carlo, Some(2)),
        ("throughput linearity", throughput_linearity, Some(5)),
        ("schedule-matrix feasibility", schedule_feasibility, Some(10)),
        ("coalition oracle equivalence", coalition_oracle, Some(30)),
        ("Shapley axioms", shapley_axioms, Some(5)),
        ("three-RSU qualitative orderings", three_rsu_orderings, None),
        ("learning-quality ordering", learning_quality, Some(120)),
        ("grid-search consistency", grid_consistency, Some(30)),
        ("gradient check", gradient_check, None),
        ("end-to-end determinism", end_to_end_determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let o = within_budget(o, elapsed, budget.map(Duration::from_secs));
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<34} {} ({:.2?}): {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            elapsed,
            o.detail
        );
    }
    println!("acceptance: {} passed, {} failed", 10 - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
