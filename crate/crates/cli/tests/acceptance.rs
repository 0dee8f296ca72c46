//! Acceptance gate: each check prints one PASS/FAIL line; the process exits
//! non-zero if any check fails.

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use clustcv::gabriel::{cross_validate_plan, FoldPlan, GabrielConfig};
use clustcv::kmeans::{kmeans_fit, kmeans_fit_missing, KMeansParams};
use clustcv::rng::seeded;
use clustcv::selector::{KSelector, SelectorRegistry};
use clustcv::simgen::{Setting, SimSpec};
use clustcv::theory::{
    single_cluster_general_prefers_one, std_normal_pdf, truncated_normal_mean, truncated_normal_sqdev, BlockCovariance,
};
use clustcv::wold::WoldConfig;
use clustcv::DataMatrix;
use clustcv_cli::args::Cli;
use clustcv_cli::commands::{benchmark_dataset, run, simulate_selections};
use clustcv_cli::datasets;
use clustcv_cli::verify::{single_cluster_row, two_cluster_grid, two_cluster_row};
use ndarray::{array, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Four noiseless clusters whose coordinates differ in every column, so
/// any column split leaves distinct centers in both blocks.
fn noiseless_clusters(seed: u64) -> (DataMatrix, Vec<usize>) {
    let mut rng = seeded(seed);
    let (k, p, size) = (4, 6, 20);
    let mut centers = Array2::zeros((k, p));
    for j in 0..p {
        let mut levels: Vec<f64> = (0..k).map(|g| 3.0 * g as f64 + rng.random_range(-1.0..1.0)).collect();
        levels.shuffle(&mut rng);
        for g in 0..k {
            centers[[g, j]] = levels[g];
        }
    }
    let labels: Vec<usize> = (0..k * size).map(|i| i % k).collect();
    let values = Array2::from_shape_fn((k * size, p), |(i, j)| centers[[labels[i], j]]);
    (DataMatrix::new(values).unwrap(), labels)
}

fn self_consistency() -> Outcome {
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in 0..20 {
        let (data, labels) = noiseless_clusters(seed);
        let mut rng = seeded(1000 + seed);
        // redraw until every cluster appears in every held-out row subset
        let plan = loop {
            let plan = FoldPlan::random(data.nrows(), data.ncols(), 5, 2, &mut rng).unwrap();
            let covered = plan.row_subsets().iter().all(|s| (0..4).all(|g| s.iter().any(|&i| labels[i] == g)));
            if covered {
                break plan;
            }
        };
        let report = cross_validate_plan(&data, &plan, &plan.folds(), &(1..=8).collect::<Vec<_>>(), KMeansParams::default(), seed)
            .unwrap();
        let zero_above = (4..=8).all(|k| report.mean_error_for(k) == Some(0.0));
        let positive_below = (1..4).all(|k| report.mean_error_for(k).unwrap() > 0.0);
        if report.selected_k == 4 && zero_above && positive_below {
            good += 1;
        } else {
            notes.push(format!("seed {seed}: k̂={} errors {:?}", report.selected_k, report.mean_error));
        }
    }
    outcome(good == 20, format!("{good}/20 seeds exact {}", notes.join("; ")))
}

fn single_cluster_boundary() -> Outcome {
    let params = KMeansParams::default();
    let low = single_cluster_row(0.2, 20000, 10, 5, params, 11).unwrap();
    let high = single_cluster_row(0.8, 20000, 10, 5, params, 11).unwrap();
    let ones = low.selections.iter().filter(|&&k| k == 1).count();
    let many = high.selections.iter().filter(|&&k| k >= 2).count();
    outcome(
        ones >= 9 && many >= 9,
        format!("rho=0.2: k̂=1 in {ones}/10 {:?}; rho=0.8: k̂>=2 in {many}/10 {:?}", low.selections, high.selections),
    )
}

/// Twelve grid points at least 0.5 from the boundary, spread over the grid.
fn far_points() -> Vec<(f64, f64)> {
    let candidates = two_cluster_grid(0.25, 0.5);
    let stride = candidates.len() as f64 / 12.0;
    (0..12).map(|i| candidates[(i as f64 * stride) as usize]).collect()
}

fn two_cluster_agreement() -> Outcome {
    let mut worst = 1.0f64;
    let mut parts = Vec::new();
    for (x, y) in far_points() {
        let row = two_cluster_row(x, y, 20000, 10, KMeansParams::default(), 12).unwrap();
        worst = worst.min(row.rate());
        parts.push(format!("({x},{y})->{}:{}/10", row.expected, row.agree));
    }
    outcome(worst >= 0.8, format!("min agreement {worst}; {}", parts.join(" ")))
}

fn correlation_correction() -> Outcome {
    let registry = SelectorRegistry::with_defaults(GabrielConfig::default(), WoldConfig::default());
    let selectors: Vec<&dyn KSelector> = vec![registry.get("gabriel").unwrap(), registry.get("corrected").unwrap()];
    let spec = SimSpec::new(Setting::Correlated { rho: 0.8 }, 2024);
    let reps = simulate_selections(&spec, 20, &selectors, &(1..=10).collect::<Vec<_>>()).unwrap();
    let plain = reps.iter().filter(|r| r[0] == 6).count();
    let corrected = reps.iter().filter(|r| r[1] == 6).count();
    let rate = corrected as f64 / 20.0;
    let plain_k: Vec<usize> = reps.iter().map(|r| r[0]).collect();
    let corr_k: Vec<usize> = reps.iter().map(|r| r[1]).collect();
    outcome(
        corrected > plain && rate >= 0.6,
        format!("correct: uncorrected {plain}/20 {plain_k:?}, corrected {corrected}/20 {corr_k:?}"),
    )
}

fn benchmarks() -> Outcome {
    let expected = [
        ("congress_voting", [2, 2, 2]),
        ("breast_cancer", [3, 2, 3]),
        ("brain_tumours", [5, 5, 4]),
    ];
    let methods: Vec<String> = ["gabriel", "corrected", "wold"].map(String::from).to_vec();
    let grid: Vec<usize> = (1..=10).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, want) in expected {
        let data = match datasets::load(&data_dir(), name) {
            Ok(d) => d,
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: unavailable ({e:#})"));
                continue;
            }
        };
        let rows = benchmark_dataset(name, &data, &methods, &grid, 5, 10).unwrap();
        for (row, w) in rows.iter().zip(want) {
            let ok = row.modal_k == w;
            pass &= ok;
            parts.push(format!(
                "{name}/{}: modal {} want {w} {:?} {}",
                row.method,
                row.modal_k,
                row.selections,
                if ok { "ok" } else { "MISMATCH" }
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..panels {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn truncated_moments_vs_quadrature() -> Outcome {
    let mut rng = seeded(6);
    let mut worst = 0.0f64;
    let mut kinds = [0usize; 3];
    for i in 0..50 {
        let delta = rng.random_range(-3.0..3.0);
        let (mut a, mut b): (f64, f64) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b = b.max(a + 0.05);
        match i % 3 {
            1 => a = f64::NEG_INFINITY,
            2 => b = f64::INFINITY,
            _ => {}
        }
        kinds[i % 3] += 1;
        // the density is negligible beyond 40 standard deviations
        let (lo, hi) = (a.max(-40.0), b.min(40.0));
        let n = 200_000;
        let mass = simpson(std_normal_pdf, lo, hi, n);
        let mean = simpson(|z| z * std_normal_pdf(z), lo, hi, n) / mass;
        let sq = simpson(|z| (z - delta).powi(2) * std_normal_pdf(z), lo, hi, n) / mass;
        worst = worst
            .max((truncated_normal_mean(a, b).unwrap() - mean).abs())
            .max((truncated_normal_sqdev(delta, a, b).unwrap() - sq).abs());
    }
    outcome(worst <= 1e-6, format!("max abs deviation {worst:.3e} over 50 triples ({} bounded, {} lower-open, {} upper-open)", kinds[0], kinds[1], kinds[2]))
}

fn general_condition_reduction() -> Outcome {
    let mismatches: Vec<f64> = (0..=20)
        .map(|i| (i as f64 - 10.0) / 10.0)
        .filter(|&rho| {
            let cov = BlockCovariance::new(array![[1.0]], array![[rho]], array![[1.0]]).unwrap();
            single_cluster_general_prefers_one(&cov).unwrap() != (rho.abs() < 0.5)
        })
        .collect();
    outcome(mismatches.is_empty(), format!("21 correlations, mismatches {mismatches:?}"))
}

/// Smallest dispersion over every labeling into at most `k` groups.
fn exhaustive_optimum(points: &Array2<f64>, k: usize) -> f64 {
    let n = points.nrows();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut total = 0.0;
        for g in 0..k {
            let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == g).collect();
            if rows.is_empty() {
                continue;
            }
            for j in 0..points.ncols() {
                let mean = rows.iter().map(|&i| points[[i, j]]).sum::<f64>() / rows.len() as f64;
                total += rows.iter().map(|&i| (points[[i, j]] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
        // odometer increment over k^n labelings
        let mut pos = 0;
        while pos < n && labels[pos] == k - 1 {
            labels[pos] = 0;
            pos += 1;
        }
        if pos == n {
            return best;
        }
        labels[pos] += 1;
    }
}

fn kmeans_vs_exhaustive() -> Outcome {
    let mut rng = seeded(8);
    let mut hits = 0;
    for inst in 0..100u64 {
        let n = rng.random_range(1..=8usize);
        let d = rng.random_range(1..=2usize);
        let k = rng.random_range(1..=3usize).min(n);
        let points = Array2::from_shape_simple_fn((n, d), || rng.random_range(-5.0..5.0));
        let model = kmeans_fit(points.view(), k, KMeansParams::default(), &mut seeded(inst)).unwrap();
        let opt = exhaustive_optimum(&points, k);
        if model.dispersion <= opt + 1e-9 * (1.0 + opt) {
            hits += 1;
        }
    }
    outcome(hits >= 95, format!("optimum reached in {hits}/100 instances"))
}

fn wold_reduction() -> Outcome {
    let mut same = 0;
    for inst in 0..10u64 {
        let mut rng = seeded(900 + inst);
        let values = Array2::from_shape_simple_fn((40, 3), || rng.random_range(-3.0..3.0));
        let masked = DataMatrix::with_mask(values.clone(), Array2::from_elem((40, 3), true)).unwrap();
        let a = kmeans_fit(values.view(), 3, KMeansParams::default(), &mut seeded(inst)).unwrap();
        let b = kmeans_fit_missing(&masked, 3, KMeansParams::default(), &mut seeded(inst)).unwrap();
        if a.labels == b.labels {
            same += 1;
        }
    }
    outcome(same == 10, format!("identical labels in {same}/10 instances"))
}

fn determinism() -> Outcome {
    let input = data_dir().join("congress_voting.csv");
    let input = input.to_str().unwrap();
    let runs: [Vec<&str>; 3] = [
        vec!["clustcv", "select", "--input", input, "--seed", "3"],
        vec!["clustcv", "select", "--input", input, "--corrected", "--format", "json"],
        vec!["clustcv", "simulate", "--setting", "var-hetero", "--param", "5", "--replicates", "4", "--k-max", "5", "--seed", "9"],
    ];
    let mut identical = 0;
    for argv in &runs {
        let cli = Cli::try_parse_from(argv).unwrap();
        let first = run(&cli.command, cli.format).unwrap();
        let second = run(&cli.command, cli.format).unwrap();
        if first == second && !first.is_empty() {
            identical += 1;
        }
    }
    outcome(identical == runs.len(), format!("{identical}/{} command reruns byte-identical", runs.len()))
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let checks: [Check; 10] = [
        ("self-consistency on noiseless clusters", self_consistency),
        ("single correlated cluster boundary", single_cluster_boundary),
        ("two-cluster boundary agreement", two_cluster_agreement),
        ("correlation correction on correlated setting", correlation_correction),
        ("benchmark datasets", benchmarks),
        ("truncated-normal moments vs quadrature", truncated_moments_vs_quadrature),
        ("general single-cluster condition in 2-d", general_condition_reduction),
        ("k-means vs exhaustive search", kmeans_vs_exhaustive),
        ("missing-data k-means with full mask", wold_reduction),
        ("deterministic command output", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.1}s] {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            name,
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {}/{} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
