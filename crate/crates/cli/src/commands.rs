//! One function per subcommand. Each returns the full output text so the
//! caller decides where it goes.

use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context};
use clustcv::evaluation::{write_summaries_csv, SelectionSummary, SUMMARY_HEADER};
use clustcv::fmt::sig6;
use clustcv::gabriel::{gabriel_select_k_corrected, GabrielConfig};
use clustcv::kmeans::{dispersion_curve, KMeansParams};
use clustcv::rng::{derive_seed, seeded};
use clustcv::selector::{KSelector, SelectorRegistry};
use clustcv::simgen::{generate_setting, Setting, SimSpec};
use clustcv::wold::WoldConfig;
use clustcv::{CvReport, DataMatrix};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BenchmarkArgs, Command, ElbowArgs, Experiment, Format, SelectArgs, SettingName, SimulateArgs, VerifyArgs, WoldArgs,
};
use crate::datasets;
use crate::output::{config_comment, csv_text, json_document};
use crate::verify::{single_cluster_row, two_cluster_grid, two_cluster_row, VerifyRow};

pub fn run(command: &Command, format: Format) -> anyhow::Result<String> {
    match command {
        Command::Select(a) => cmd_select(a, format),
        Command::Wold(a) => cmd_wold(a, format),
        Command::Elbow(a) => cmd_elbow(a, format),
        Command::Simulate(a) => cmd_simulate(a, format),
        Command::Verify(a) => cmd_verify(a, format),
        Command::Benchmark(a) => cmd_benchmark(a, format),
    }
}

fn kmeans_params(restarts: usize) -> anyhow::Result<KMeansParams> {
    anyhow::ensure!(restarts >= 1, "--restarts must be at least 1");
    Ok(KMeansParams { restarts, ..KMeansParams::default() })
}

fn load_input(path: &std::path::Path, complete_cases: bool) -> anyhow::Result<DataMatrix> {
    let data = DataMatrix::from_csv_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if complete_cases { data.complete_cases()? } else { data })
}

fn report_output<C: Serialize>(command: &str, config: &C, report: &CvReport, long: bool, format: Format, extra: serde_json::Value) -> anyhow::Result<String> {
    match format {
        Format::Json => {
            let mut body = json!({ "selected_k": report.selected_k, "report": report });
            if let (Some(b), serde_json::Value::Object(e)) = (body.as_object_mut(), extra) {
                b.extend(e);
            }
            json_document(command, config, &body)
        }
        Format::Csv => {
            let mut text = config_comment(command, config)?;
            if let Some(w) = &report.warning {
                text.push_str(&format!("# warning: {w}\n"));
            }
            text += &if long {
                csv_text(|buf| report.write_long_csv(buf))?
            } else {
                csv_text(|buf| report.write_summary_csv(buf))?
            };
            Ok(text)
        }
    }
}

pub fn cmd_select(args: &SelectArgs, format: Format) -> anyhow::Result<String> {
    let grid = args.grid.grid()?;
    let data = load_input(&args.input, args.complete_cases)?;
    let method = if args.corrected { "corrected" } else { args.method.as_str() };
    let gabriel = GabrielConfig {
        row_folds: args.folds.row_folds,
        col_folds: args.folds.col_folds,
        kmeans: kmeans_params(args.folds.restarts)?,
        ..GabrielConfig::default()
    };
    if method == "corrected" {
        // keep the first stage and the covariance estimate in the output
        let out = gabriel_select_k_corrected(&data, &grid, &gabriel, &mut seeded(args.folds.seed))?;
        let sigma_rows: Option<Vec<Vec<f64>>> =
            out.sigma_hat.as_ref().map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect());
        let extra = json!({ "first_stage": out.first_stage, "sigma_hat": sigma_rows });
        return report_output("select", args, &out.report, args.long, format, extra);
    }
    let wold = WoldConfig { kmeans: gabriel.kmeans, ..WoldConfig::default() };
    let registry = SelectorRegistry::with_defaults(gabriel, wold);
    let report = registry.get(method)?.select(&data, &grid, args.folds.seed)?;
    report_output("select", args, &report, args.long, format, json!({}))
}

pub fn cmd_wold(args: &WoldArgs, format: Format) -> anyhow::Result<String> {
    let grid = args.grid.grid()?;
    let data = load_input(&args.input, false)?;
    let config = WoldConfig { folds: args.folds, holdout_fraction: args.holdout, kmeans: kmeans_params(args.restarts)? };
    let registry = SelectorRegistry::with_defaults(GabrielConfig::default(), config);
    let report = registry.get("wold")?.select(&data, &grid, args.seed)?;
    report_output("wold", args, &report, args.long, format, json!({}))
}

pub fn cmd_elbow(args: &ElbowArgs, format: Format) -> anyhow::Result<String> {
    anyhow::ensure!(args.k_max >= 1, "--k-max must be at least 1");
    let data = load_input(&args.input, args.complete_cases)?;
    data.require_complete("elbow")?;
    let curve = dispersion_curve(data.values().view(), args.k_max, kmeans_params(args.restarts)?, &mut seeded(args.seed))?;
    match format {
        Format::Json => json_document("elbow", args, &curve),
        Format::Csv => {
            let mut text = config_comment("elbow", args)?;
            if curve.non_monotone {
                text.push_str("# warning: dispersion increases somewhere along the curve\n");
            }
            text.push_str("k,dispersion\n");
            for (k, w) in &curve.points {
                text.push_str(&format!("{k},{}\n", sig6(*w)));
            }
            Ok(text)
        }
    }
}

fn setting_from(name: SettingName, param: f64) -> anyhow::Result<Setting> {
    let whole = |what: &str| -> anyhow::Result<usize> {
        anyhow::ensure!(param >= 0.0 && param.fract() == 0.0, "{what} must be a non-negative integer, got {param}");
        Ok(param as usize)
    };
    Ok(match name {
        SettingName::Correlated => Setting::Correlated { rho: param },
        SettingName::NoiseDims => Setting::NoiseDims { r: whole("noise dimension count")? },
        SettingName::HighDim => Setting::HighDim { dims: whole("dimension")? },
        SettingName::VarHetero => Setting::VarHetero { ratio: param },
        SettingName::HeavyTail => Setting::HeavyTail { nu: param },
    })
}

/// Setting name and its swept parameter, for summary rows.
fn setting_label(setting: &Setting) -> (&'static str, f64) {
    match *setting {
        Setting::Correlated { rho } => ("correlated", rho),
        Setting::NoiseDims { r } => ("noise_dims", r as f64),
        Setting::HighDim { dims } => ("high_dim", dims as f64),
        Setting::VarHetero { ratio } => ("var_hetero", ratio),
        Setting::HeavyTail { nu } => ("heavy_tail", nu),
        Setting::Custom { noise_var, .. } => ("custom", noise_var),
    }
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    spec: &'a SimSpec,
    replicates: usize,
    methods: &'a [String],
    k_grid: &'a [usize],
    row_folds: usize,
    col_folds: usize,
    restarts: usize,
}

/// `k` chosen by each selector on each replicate. Replicate `r` draws data
/// with seed `derive(spec.seed, r)`; all selectors share one selection seed.
pub fn simulate_selections(
    spec: &SimSpec,
    replicates: usize,
    selectors: &[&dyn KSelector],
    grid: &[usize],
) -> anyhow::Result<Vec<Vec<usize>>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> anyhow::Result<Vec<usize>> {
            let mut rep = spec.clone();
            rep.seed = derive_seed(spec.seed, &[r]);
            let sim = generate_setting(&rep)?;
            let select_seed = derive_seed(spec.seed, &[r, 1]);
            Ok(selectors
                .iter()
                .map(|s| s.select(&sim.data, grid, select_seed).map(|rep| rep.selected_k))
                .collect::<clustcv::Result<_>>()?)
        })
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs, format: Format) -> anyhow::Result<String> {
    let mut spec = match (&args.config, args.setting, args.param) {
        (Some(path), _, _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimSpec::from_json(&text).with_context(|| format!("parsing simulation spec {}", path.display()))?
        }
        (None, Some(name), Some(param)) => SimSpec::new(setting_from(name, param)?, 0),
        _ => bail!("give either --config or both --setting and --param"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.tau.is_some() {
        spec.tau = args.tau;
    }
    spec.validate()?;
    let grid = args.grid.grid()?;
    let gabriel = GabrielConfig {
        row_folds: args.row_folds,
        col_folds: args.col_folds,
        kmeans: kmeans_params(args.restarts)?,
        ..GabrielConfig::default()
    };
    let registry = SelectorRegistry::with_defaults(gabriel, WoldConfig { kmeans: gabriel.kmeans, ..WoldConfig::default() });
    let selectors = args.methods.iter().map(|m| registry.get(m)).collect::<clustcv::Result<Vec<_>>>()?;

    let per_replicate = simulate_selections(&spec, args.replicates, &selectors, &grid)?;

    let (setting_name, param) = setting_label(&spec.setting);
    let k_true = spec.k_true();
    let mut selections: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut summaries = Vec::new();
    for (i, method) in args.methods.iter().enumerate() {
        let ks: Vec<usize> = per_replicate.iter().map(|row| row[i]).collect();
        if !ks.is_empty() {
            summaries.push(SelectionSummary::from_selections(method.as_str(), setting_name, param, k_true, &ks)?);
        }
        selections.insert(method.as_str(), ks);
    }
    let config = SimulateConfig {
        spec: &spec,
        replicates: args.replicates,
        methods: &args.methods,
        k_grid: &grid,
        row_folds: args.row_folds,
        col_folds: args.col_folds,
        restarts: args.restarts,
    };
    match format {
        Format::Json => json_document(
            "simulate",
            &config,
            &json!({ "k_true": k_true, "summaries": summaries, "selections": selections }),
        ),
        Format::Csv => {
            let mut text = config_comment("simulate", &config)?;
            if summaries.is_empty() {
                text.push_str(&SUMMARY_HEADER.join(","));
                text.push('\n');
            } else {
                text += &csv_text(|buf| write_summaries_csv(&summaries, buf))?;
            }
            Ok(text)
        }
    }
}

pub fn cmd_verify(args: &VerifyArgs, format: Format) -> anyhow::Result<String> {
    anyhow::ensure!(args.n >= 4, "--n must be at least 4");
    anyhow::ensure!(args.step > 0.0, "--step must be positive");
    let params = kmeans_params(args.restarts)?;
    let mut rows: Vec<VerifyRow> = Vec::new();
    if matches!(args.experiment, Experiment::Single | Experiment::All) {
        for &rho in &args.rhos {
            anyhow::ensure!(rho.abs() < 1.0, "correlations must lie in (-1, 1), got {rho}");
            rows.push(single_cluster_row(rho, args.n, args.reps, args.k_max, params, args.seed)?);
        }
    }
    if matches!(args.experiment, Experiment::Two | Experiment::All) {
        for (x, y) in two_cluster_grid(args.step, args.min_distance) {
            rows.push(two_cluster_row(x, y, args.n, args.reps, params, args.seed)?);
        }
    }
    match format {
        Format::Json => json_document("verify", args, &json!({ "rows": rows })),
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
            let mut text = config_comment("verify", args)?;
            text.push_str("experiment,rho,mu_x,mu_y,boundary_distance,expected,agree,total,rate\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.experiment,
                    opt(r.rho),
                    opt(r.mu_x),
                    opt(r.mu_y),
                    opt(r.boundary_distance),
                    r.expected,
                    r.agree,
                    r.total,
                    sig6(r.rate())
                ));
            }
            Ok(text)
        }
    }
}

/// Most frequent value, smallest on ties.
pub fn modal(values: &[usize]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(v, _)| v)
}

#[derive(Debug, Serialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub selections: Vec<usize>,
    pub modal_k: usize,
}

/// Selections of every method on one dataset for seeds `0..seeds`.
pub fn benchmark_dataset(
    name: &str,
    data: &DataMatrix,
    methods: &[String],
    grid: &[usize],
    seeds: u64,
    restarts: usize,
) -> anyhow::Result<Vec<BenchmarkRow>> {
    anyhow::ensure!(seeds >= 1, "--seeds must be at least 1");
    let kmeans = kmeans_params(restarts)?;
    let registry = SelectorRegistry::with_defaults(
        GabrielConfig { kmeans, ..GabrielConfig::default() },
        WoldConfig { kmeans, ..WoldConfig::default() },
    );
    methods
        .iter()
        .map(|m| {
            let selector = registry.get(m)?;
            let selections: Vec<usize> = (0..seeds)
                .map(|s| selector.select(data, grid, s).map(|r| r.selected_k))
                .collect::<clustcv::Result<_>>()?;
            Ok(BenchmarkRow {
                dataset: name.to_owned(),
                method: m.clone(),
                n: data.nrows(),
                p: data.ncols(),
                modal_k: modal(&selections).expect("at least one seed"),
                selections,
            })
        })
        .collect()
}

pub fn cmd_benchmark(args: &BenchmarkArgs, format: Format) -> anyhow::Result<String> {
    let grid = args.grid.grid()?;
    let names = if args.datasets.is_empty() { datasets::list(&args.data_dir)? } else { args.datasets.clone() };
    anyhow::ensure!(!names.is_empty(), "no datasets found in {}", args.data_dir.display());
    let mut rows = Vec::new();
    for name in &names {
        let data = datasets::load(&args.data_dir, name)?;
        rows.extend(benchmark_dataset(name, &data, &args.methods, &grid, args.seeds, args.restarts)?);
    }
    match format {
        Format::Json => json_document("benchmark", args, &json!({ "rows": rows })),
        Format::Csv => {
            let mut text = config_comment("benchmark", args)?;
            text.push_str("dataset,method,n,p,selections,modal_k\n");
            for r in &rows {
                let sel: Vec<String> = r.selections.iter().map(usize::to_string).collect();
                text.push_str(&format!("{},{},{},{},{},{}\n", r.dataset, r.method, r.n, r.p, sel.join(";"), r.modal_k));
            }
            Ok(text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::modal;

    #[test]
    fn modal_prefers_smallest_on_ties() {
        assert_eq!(modal(&[3, 2, 3, 2, 5]), Some(2));
        assert_eq!(modal(&[4, 4, 1]), Some(4));
        assert_eq!(modal(&[]), None);
    }
}
