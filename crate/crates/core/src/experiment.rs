//! Batch experiments: the shift-saturation sweep and the knockoff
//! FDR/power benchmark. Units of work run in parallel on independent seeded
//! streams and are collected in index order, so results do not depend on the
//! thread count.

use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{knockoff_stats, lasso, select};
use crate::generator::{sample_knockoffs, train, KnockoffGenerator, TrainingConfig, TrainingLog};
use crate::ot::SinkhornConfig;
use crate::rng::{derive_seed, seeded};
use crate::stats::{self, KernelSpec};
use crate::synth::{self, ResponseSpec, Setting, SynthSpec};

/// Two-sample statistic selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Energy,
    Mmd,
    Re,
    Sre,
    Srmmd,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Energy => "energy",
            Statistic::Mmd => "mmd",
            Statistic::Re => "re",
            Statistic::Sre => "sre",
            Statistic::Srmmd => "srmmd",
        }
    }

    /// Evaluates the statistic. `epsilon` is ignored by `energy`, `mmd` and
    /// `re`; `epsilon = 0` gives the exact-rank variant of `sre`/`srmmd`.
    pub fn compute(
        self,
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        epsilon: f64,
        kernel: &KernelSpec,
        sinkhorn: &SinkhornConfig,
    ) -> Result<f64> {
        match self {
            Statistic::Energy => stats::energy_distance(x, y),
            Statistic::Mmd => stats::mmd_unbiased(x, y, kernel),
            Statistic::Re => stats::re(x, y),
            Statistic::Sre => stats::sre(x, y, epsilon, sinkhorn),
            Statistic::Srmmd => stats::srmmd(x, y, epsilon, kernel, sinkhorn),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "energy" => Statistic::Energy,
            "mmd" => Statistic::Mmd,
            "re" => Statistic::Re,
            "sre" => Statistic::Sre,
            "srmmd" => Statistic::Srmmd,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown statistic `{other}` (expected energy, mmd, re, sre or srmmd)"
                )))
            }
        })
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaturationConfig {
    pub statistic: Statistic,
    pub shifts: Vec<f64>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub sinkhorn: SinkhornConfig,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        Self {
            statistic: Statistic::Srmmd,
            shifts: vec![-10.0, -5.0, -3.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 3.0, 5.0, 10.0],
            n: vec![256],
            d: vec![2, 8],
            epsilon: vec![0.0, 1.0, 10.0],
            repetitions: 20,
            seed: 0,
            kernel: KernelSpec::default(),
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl SaturationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shifts.is_empty() || self.n.is_empty() || self.d.is_empty() || self.epsilon.is_empty() {
            return Err(Error::InvalidInput("saturation grid has an empty axis".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidInput("repetitions must be positive".into()));
        }
        if self.n.iter().any(|&n| n < 2) || self.d.contains(&0) {
            return Err(Error::InvalidInput("n must be >= 2 and d >= 1".into()));
        }
        if self.epsilon.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput("epsilon values must be finite and >= 0".into()));
        }
        if self.shifts.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("shifts must be finite".into()));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationRow {
    pub s: f64,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub statistic: f64,
    pub std_error: f64,
}

/// `U[0,1]^d` against `U[s,s+1]^d`, both with `n` rows.
pub fn shifted_uniform_pair<R: Rng + ?Sized>(n: usize, d: usize, s: f64, rng: &mut R) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
    let y = Array2::from_shape_simple_fn((n, d), || s + rng.random::<f64>());
    (x, y)
}

/// One row per `(n, d, epsilon, s)`, in that nesting order (`s` fastest).
///
/// Repetition `r` of grid point `(n, d)` draws from the same stream for
/// every `s` and `epsilon`, so curves share their base samples.
pub fn saturate(cfg: &SaturationConfig) -> Result<Vec<SaturationRow>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        for (di, &d) in cfg.d.iter().enumerate() {
            for &eps in &cfg.epsilon {
                for &s in &cfg.shifts {
                    points.push((ni, n, di, d, eps, s));
                }
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.repetitions).map(move |r| (p, r)))
        .collect();
    let values: Vec<f64> = tasks
        .par_iter()
        .map(|&(p, r)| {
            let (ni, n, di, d, eps, s) = points[p];
            let stream = derive_seed(derive_seed(cfg.seed, (ni * cfg.d.len() + di) as u64), r as u64);
            let (x, y) = shifted_uniform_pair(n, d, s, &mut seeded(stream));
            cfg.statistic
                .compute(x.view(), y.view(), eps, &cfg.kernel, &cfg.sinkhorn)
                .map_err(|e| e.in_stage("statistic", r))
        })
        .collect::<Result<_>>()?;
    Ok(points
        .iter()
        .zip(values.chunks(cfg.repetitions))
        .map(|(&(_, n, _, d, epsilon, s), vals)| {
            let (statistic, std_error) = mean_and_se(vals);
            SaturationRow {
                s,
                n,
                d,
                epsilon,
                statistic,
                std_error,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub setting: Setting,
    pub d: usize,
    /// Rows used to train the generator.
    pub n_train: usize,
    /// Rows of each fresh design matrix passed to the filter.
    pub n_test: usize,
    pub num_nonzero: usize,
    pub amplitudes: Vec<f64>,
    pub repetitions: usize,
    pub fdr_level: f64,
    pub lasso_alpha: f64,
    pub lasso_tolerance: f64,
    pub lasso_max_iters: usize,
    pub random_signs: bool,
    pub seed: u64,
    pub training: TrainingConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            setting: Setting::GaussianAr1 { rho: 0.5 },
            d: 30,
            n_train: 1000,
            n_test: 100,
            num_nonzero: 10,
            amplitudes: vec![5.0, 10.0, 15.0, 20.0],
            repetitions: 50,
            fdr_level: 0.1,
            lasso_alpha: 0.1,
            lasso_tolerance: 1e-8,
            lasso_max_iters: 10_000,
            random_signs: true,
            seed: 0,
            training: TrainingConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_train < 4 || self.n_test < 2 {
            return Err(Error::InvalidInput("need d >= 1, n_train >= 4 and n_test >= 2".into()));
        }
        if self.num_nonzero > self.d {
            return Err(Error::InvalidInput("num_nonzero exceeds d".into()));
        }
        if self.amplitudes.is_empty() || self.amplitudes.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput("amplitudes must be a nonempty list of values >= 0".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidInput("repetitions must be positive".into()));
        }
        if !(self.fdr_level > 0.0 && self.fdr_level < 1.0) {
            return Err(Error::InvalidInput("fdr_level must lie in (0, 1)".into()));
        }
        if !(self.lasso_alpha > 0.0) || !(self.lasso_tolerance > 0.0) {
            return Err(Error::InvalidInput("lasso_alpha and lasso_tolerance must be positive".into()));
        }
        SynthSpec {
            setting: self.setting.clone(),
            n: self.n_train,
            d: self.d,
            seed: 0,
        }
        .validate()?;
        self.training.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub setting: String,
    pub amplitude: f64,
    pub repetition: usize,
    pub fdp: f64,
    pub power: f64,
    pub tau: f64,
    pub n_selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub setting: String,
    pub amplitude: f64,
    pub repetitions: usize,
    pub mean_fdr: f64,
    pub fdr_std_error: f64,
    pub mean_power: f64,
    pub power_std_error: f64,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub detail: Vec<BenchRow>,
    pub aggregate: Vec<BenchAggregate>,
    pub model: KnockoffGenerator,
    pub log: TrainingLog,
}

/// Features, knockoffs and per-amplitude filter outcomes for one repetition.
fn run_repetition(cfg: &BenchConfig, model: &KnockoffGenerator, rep: usize) -> Result<Vec<BenchRow>> {
    let base = derive_seed(derive_seed(cfg.seed, 3), rep as u64);
    let x = synth::generate(&SynthSpec {
        setting: cfg.setting.clone(),
        n: cfg.n_test,
        d: cfg.d,
        seed: derive_seed(base, 0),
    })
    .map_err(|e| e.in_stage("synth", rep))?;
    let knock = sample_knockoffs(model, x.view(), derive_seed(base, 1)).map_err(|e| e.in_stage("knockoffs", rep))?;
    let design = concatenate(Axis(1), &[x.view(), knock.view()]).expect("equal heights");
    cfg.amplitudes
        .iter()
        .enumerate()
        .map(|(ai, &amplitude)| {
            let resp = synth::response(
                x.view(),
                &ResponseSpec {
                    num_nonzero: cfg.num_nonzero,
                    amplitude,
                    noise_sd: 1.0,
                    random_signs: cfg.random_signs,
                    seed: derive_seed(derive_seed(base, 2), ai as u64),
                },
            )
            .map_err(|e| e.in_stage("response", rep))?;
            let fit = lasso(
                design.view(),
                resp.y.view(),
                cfg.lasso_alpha,
                cfg.lasso_tolerance,
                cfg.lasso_max_iters,
            )
            .map_err(|e| e.in_stage("lasso", rep))?;
            let w = knockoff_stats(&fit).map_err(|e| e.in_stage("statistics", rep))?;
            let out = select(w.view(), cfg.fdr_level, &resp.support).map_err(|e| e.in_stage("threshold", rep))?;
            Ok(BenchRow {
                setting: cfg.setting.name().to_string(),
                amplitude,
                repetition: rep,
                fdp: out.fdp,
                power: out.power,
                tau: out.tau,
                n_selected: out.selected.len(),
            })
        })
        .collect()
}

/// Per-amplitude means over repetitions, in amplitude order.
pub fn aggregate(rows: &[BenchRow], amplitudes: &[f64]) -> Vec<BenchAggregate> {
    amplitudes
        .iter()
        .map(|&a| {
            let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.amplitude == a).collect();
            let (mean_fdr, fdr_std_error) = mean_and_se(&sel.iter().map(|r| r.fdp).collect::<Vec<_>>());
            let (mean_power, power_std_error) = mean_and_se(&sel.iter().map(|r| r.power).collect::<Vec<_>>());
            BenchAggregate {
                setting: sel.first().map_or_else(String::new, |r| r.setting.clone()),
                amplitude: a,
                repetitions: sel.len(),
                mean_fdr,
                fdr_std_error,
                mean_power,
                power_std_error,
            }
        })
        .collect()
}

/// Runs the filter benchmark with an already trained generator.
pub fn bench_with_model(cfg: &BenchConfig, model: &KnockoffGenerator) -> Result<(Vec<BenchRow>, Vec<BenchAggregate>)> {
    cfg.validate()?;
    let per_rep: Vec<Vec<BenchRow>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, model, rep))
        .collect::<Result<_>>()?;
    let mut detail: Vec<BenchRow> = per_rep.into_iter().flatten().collect();
    // amplitude-major, then repetition
    detail.sort_by(|a, b| {
        let ai = cfg.amplitudes.iter().position(|v| *v == a.amplitude);
        let bi = cfg.amplitudes.iter().position(|v| *v == b.amplitude);
        ai.cmp(&bi).then(a.repetition.cmp(&b.repetition))
    });
    let aggregate = aggregate(&detail, &cfg.amplitudes);
    Ok((detail, aggregate))
}

/// Draws the training sample for [`bench`].
pub fn training_data(cfg: &BenchConfig) -> Result<Array2<f64>> {
    synth::generate(&SynthSpec {
        setting: cfg.setting.clone(),
        n: cfg.n_train,
        d: cfg.d,
        seed: derive_seed(cfg.seed, 1),
    })
}

/// synth -> train -> knockoffs -> LASSO -> threshold -> FDP/power.
pub fn bench(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let data = training_data(cfg).map_err(|e| e.in_stage("synth", 0))?;
    let mut tcfg = cfg.training.clone();
    tcfg.seed = derive_seed(cfg.seed, 2);
    let (model, log) = train(data.view(), &tcfg).map_err(|e| e.in_stage("train", 0))?;
    let (detail, aggregate) = bench_with_model(cfg, &model)?;
    Ok(BenchResult {
        detail,
        aggregate,
        model,
        log,
    })
}
