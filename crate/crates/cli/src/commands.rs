use std::path::{Path, PathBuf};

use ndarray::Array1;
use softrank::experiment::{self, Statistic};
use softrank::filter::{knockoff_stats, lasso, select, selected_set, threshold};
use softrank::generator::{load_model, sample_knockoffs, save_model, train, TrainingLog};
use softrank::io::{default_header, format_f64, read_matrix, write_matrix};
use softrank::synth::{self, SynthSpec};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::RunDir;

/// Global settings after merging flags over the config file.
pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
}

pub struct StatArgs {
    pub x: PathBuf,
    pub y: PathBuf,
    pub statistic: Option<Statistic>,
    pub epsilon: Option<f64>,
}

pub fn stat(cfg: &ExperimentConfig, args: &StatArgs) -> Result<f64, CliError> {
    let mut section = cfg.stat.clone();
    if let Some(s) = args.statistic {
        section.statistic = s;
    }
    if let Some(e) = args.epsilon {
        section.epsilon = e;
    }
    let x = read_matrix(&args.x)?;
    let y = read_matrix(&args.y)?;
    Ok(section
        .statistic
        .compute(x.view(), y.view(), section.epsilon, &section.kernel, &section.sinkhorn)?)
}

pub fn saturate(cfg: &ExperimentConfig, g: &Globals) -> Result<PathBuf, CliError> {
    let mut section = cfg.saturate.clone();
    section.seed = g.seed;
    let rows = experiment::saturate(&section)?;
    let mut dir = RunDir::create(&g.out, "saturate", g.seed, g.threads)?;
    dir.write_config(&section)?;
    dir.write_csv(
        "saturation.csv",
        &["s", "n", "d", "epsilon", "statistic", "std_error"],
        rows.iter()
            .map(|r| {
                vec![
                    format_f64(r.s),
                    r.n.to_string(),
                    r.d.to_string(),
                    format_f64(r.epsilon),
                    format_f64(r.statistic),
                    format_f64(r.std_error),
                ]
            })
            .collect(),
    )?;
    dir.finish()
}

fn log_rows(log: &TrainingLog) -> Vec<Vec<String>> {
    log.epochs
        .iter()
        .enumerate()
        .map(|(e, l)| {
            vec![
                e.to_string(),
                format_f64(l.total),
                format_f64(l.srmmd_term),
                format_f64(l.second_order_term),
                format_f64(l.decorrelation_term),
            ]
        })
        .collect()
}

const LOG_HEADER: [&str; 5] = ["epoch", "total", "srmmd_term", "second_order_term", "decorrelation_term"];

pub fn train_cmd(cfg: &ExperimentConfig, g: &Globals, data: &Path, epochs: Option<usize>) -> Result<PathBuf, CliError> {
    let mut section = cfg.train.clone();
    section.seed = g.seed;
    if let Some(e) = epochs {
        section.epochs = e;
    }
    let x = read_matrix(data)?;
    let (model, log) = train(x.view(), &section)?;
    let mut dir = RunDir::create(&g.out, "train", g.seed, g.threads)?;
    dir.write_config(&section)?;
    save_model(&model, &dir.path("model.json"))?;
    dir.write_csv("training_log.csv", &LOG_HEADER, log_rows(&log))?;
    dir.finish()
}

pub fn generate(
    cfg: &ExperimentConfig,
    g: &Globals,
    model: Option<&Path>,
    data: Option<&Path>,
) -> Result<PathBuf, CliError> {
    match (model, data) {
        (Some(model), Some(data)) => {
            let m = load_model(model)?;
            let x = read_matrix(data)?;
            let k = sample_knockoffs(&m, x.view(), g.seed)?;
            let mut dir = RunDir::create(&g.out, "generate", g.seed, g.threads)?;
            dir.write_config(&toml::Table::from_iter([
                ("model".to_string(), toml::Value::String(model.display().to_string())),
                ("data".to_string(), toml::Value::String(data.display().to_string())),
            ]))?;
            write_matrix(&dir.path("knockoffs.csv"), &default_header("xk", k.ncols()), k.view())?;
            dir.finish()
        }
        (None, None) => {
            let section = cfg.generate.clone();
            let x = synth::generate(&SynthSpec {
                setting: section.setting.clone(),
                n: section.n,
                d: section.d,
                seed: g.seed,
            })?;
            let mut dir = RunDir::create(&g.out, "generate", g.seed, g.threads)?;
            dir.write_config(&section)?;
            write_matrix(&dir.path("features.csv"), &default_header("x", x.ncols()), x.view())?;
            dir.finish()
        }
        _ => Err(CliError::Usage("generate needs both --model and --data, or neither".into())),
    }
}

pub struct FilterArgs {
    pub x: PathBuf,
    pub knockoffs: PathBuf,
    pub y: PathBuf,
    pub support: Option<Vec<usize>>,
}

pub fn filter(cfg: &ExperimentConfig, g: &Globals, args: &FilterArgs) -> Result<PathBuf, CliError> {
    let section = cfg.filter.clone();
    let x = read_matrix(&args.x)?;
    let xk = read_matrix(&args.knockoffs)?;
    let y = read_matrix(&args.y)?;
    if y.ncols() != 1 {
        return Err(softrank::Error::Dimension(format!("response file must have one column, got {}", y.ncols())).into());
    }
    if x.dim() != xk.dim() {
        return Err(softrank::Error::Dimension(format!(
            "features {:?} and knockoffs {:?} differ in shape",
            x.dim(),
            xk.dim()
        ))
        .into());
    }
    let design = ndarray::concatenate(ndarray::Axis(1), &[x.view(), xk.view()])
        .map_err(|e| softrank::Error::Dimension(e.to_string()))?;
    let y: Array1<f64> = y.column(0).to_owned();
    let fit = lasso(
        design.view(),
        y.view(),
        section.lasso_alpha,
        section.lasso_tolerance,
        section.lasso_max_iters,
    )?;
    let w = knockoff_stats(&fit)?;
    let tau = threshold(w.view(), section.fdr_level)?;
    let selected = selected_set(w.view(), tau);
    let mut dir = RunDir::create(&g.out, "filter", g.seed, g.threads)?;
    dir.write_config(&section)?;
    dir.write_csv(
        "selection.csv",
        &["feature", "w", "selected"],
        w.iter()
            .enumerate()
            .map(|(j, v)| vec![j.to_string(), format_f64(*v), (selected.contains(&j) as u8).to_string()])
            .collect(),
    )?;
    let mut summary = vec![vec![format_f64(tau), selected.len().to_string(), String::new(), String::new()]];
    if let Some(support) = &args.support {
        let out = select(w.view(), section.fdr_level, support)?;
        summary[0][2] = format_f64(out.fdp);
        summary[0][3] = format_f64(out.power);
    }
    dir.write_csv("summary.csv", &["tau", "n_selected", "fdp", "power"], summary)?;
    println!("tau={} selected={:?}", format_f64(tau), selected);
    dir.finish()
}

pub fn bench(
    cfg: &ExperimentConfig,
    g: &Globals,
    repetitions: Option<usize>,
    epochs: Option<usize>,
) -> Result<PathBuf, CliError> {
    let mut section = cfg.bench.clone();
    section.seed = g.seed;
    if let Some(r) = repetitions {
        section.repetitions = r;
    }
    if let Some(e) = epochs {
        section.training.epochs = e;
    }
    let result = experiment::bench(&section)?;
    let mut dir = RunDir::create(&g.out, "bench", g.seed, g.threads)?;
    dir.write_config(&section)?;
    dir.write_csv(
        "bench_detail.csv",
        &["setting", "amplitude", "repetition", "fdp", "power", "tau", "n_selected"],
        result
            .detail
            .iter()
            .map(|r| {
                vec![
                    r.setting.clone(),
                    format_f64(r.amplitude),
                    r.repetition.to_string(),
                    format_f64(r.fdp),
                    format_f64(r.power),
                    format_f64(r.tau),
                    r.n_selected.to_string(),
                ]
            })
            .collect(),
    )?;
    dir.write_csv(
        "bench_aggregate.csv",
        &[
            "setting",
            "amplitude",
            "repetitions",
            "mean_fdr",
            "fdr_std_error",
            "mean_power",
            "power_std_error",
        ],
        result
            .aggregate
            .iter()
            .map(|a| {
                vec![
                    a.setting.clone(),
                    format_f64(a.amplitude),
                    a.repetitions.to_string(),
                    format_f64(a.mean_fdr),
                    format_f64(a.fdr_std_error),
                    format_f64(a.mean_power),
                    format_f64(a.power_std_error),
                ]
            })
            .collect(),
    )?;
    dir.write_csv("training_log.csv", &LOG_HEADER, log_rows(&result.log))?;
    save_model(&result.model, &dir.path("model.json"))?;
    dir.finish()
}
