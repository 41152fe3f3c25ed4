use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{architecture, forward, GeneratorParams, ParamArrays};
use super::{gradient, LossBreakdown, Optimizer, TrainingConfig};
use crate::decorrelation::{correlation_matrix, solve_sdp, SdpSolution};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// Per-column affine map to mean 0, variance 1 (population variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Column standard deviations; constant columns keep scale 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InsufficientSamples("cannot standardize an empty matrix".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let scale = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            mean: mean.to_vec(),
            scale,
        })
    }

    fn check(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "expected {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut out = x.to_owned();
        for (j, mut c) in out.axis_iter_mut(Axis(1)).enumerate() {
            c.mapv_inplace(|v| (v - self.mean[j]) / self.scale[j]);
        }
        Ok(out)
    }

    pub fn invert(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(z)?;
        let mut out = z.to_owned();
        for (j, mut c) in out.axis_iter_mut(Axis(1)).enumerate() {
            c.mapv_inplace(|v| v * self.scale[j] + self.mean[j]);
        }
        Ok(out)
    }
}

/// A trained knockoff sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct KnockoffGenerator {
    pub params: GeneratorParams,
    pub standardizer: Standardizer,
    pub config: TrainingConfig,
    pub s_star: SdpSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Component-wise mean over the batches of each epoch.
    pub epochs: Vec<LossBreakdown>,
    pub steps: Vec<StepRecord>,
}

struct Adam {
    m: ParamArrays,
    v: ParamArrays,
    t: i32,
}

fn apply_update(
    params: &mut GeneratorParams,
    grad: &ParamArrays,
    cfg: &TrainingConfig,
    adam: &mut Option<Adam>,
) {
    match cfg.optimizer {
        Optimizer::Sgd => params.add_scaled(grad, -cfg.learning_rate),
        Optimizer::Adam { beta1, beta2, eps } => {
            let state = adam.get_or_insert_with(|| Adam {
                m: ParamArrays::zeros_like(params),
                v: ParamArrays::zeros_like(params),
                t: 0,
            });
            state.t += 1;
            let c1 = 1.0 - beta1.powi(state.t);
            let c2 = 1.0 - beta2.powi(state.t);
            let step = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            for l in 0..params.weights.len() {
                ndarray::Zip::from(&mut params.weights[l])
                    .and(&grad.weights[l])
                    .and(&mut state.m.weights[l])
                    .and(&mut state.v.weights[l])
                    .for_each(|p, &g, m, v| step(p, g, m, v));
                ndarray::Zip::from(&mut params.biases[l])
                    .and(&grad.biases[l])
                    .and(&mut state.m.biases[l])
                    .and(&mut state.v.biases[l])
                    .for_each(|p, &g, m, v| step(p, g, m, v));
            }
        }
    }
}

fn mean_breakdown(steps: &[StepRecord], cfg: &TrainingConfig) -> LossBreakdown {
    let k = steps.len() as f64;
    let avg = |f: fn(&LossBreakdown) -> f64| steps.iter().map(|s| f(&s.loss)).sum::<f64>() / k;
    LossBreakdown::assemble(
        avg(|l| l.srmmd_term),
        avg(|l| l.second_order_term),
        avg(|l| l.decorrelation_term),
        cfg,
    )
}

/// Minibatch training on standardized `data`.
///
/// Rows are reshuffled every epoch; each epoch runs `floor(n / batch)`
/// batches, where the batch is `cfg.batch_size` capped at the largest even
/// count not above `n`. Initialization and training draw from separate
/// streams derived from `cfg.seed`.
pub fn train(data: ArrayView2<f64>, cfg: &TrainingConfig) -> Result<(KnockoffGenerator, TrainingLog)> {
    cfg.validate()?;
    let (n, d) = data.dim();
    if n < 4 || d == 0 {
        return Err(Error::InsufficientSamples(format!(
            "training needs at least 4 rows and 1 column, got {n} x {d}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("training data must be finite".into()));
    }
    let standardizer = Standardizer::fit(data)?;
    let z = standardizer.apply(data)?;
    let s_star = solve_sdp(correlation_matrix(z.view())?.view(), cfg.sdp_tolerance)?;

    let dims = architecture(d, cfg.hidden_layers, cfg.width_factor);
    let mut params = GeneratorParams::init(&dims, cfg.activation, &mut seeded(derive_seed(cfg.seed, 0)))?;
    let mut rng = seeded(derive_seed(cfg.seed, 1));

    let batch = cfg.batch_size.min(n - n % 2);
    let per_epoch = n / batch;
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = None;
    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let start = log.steps.len();
        for b in 0..per_epoch {
            let rows = &order[b * batch..(b + 1) * batch];
            let x = z.select(Axis(0), rows);
            let diverged = Error::TrainingDiverged { epoch, batch: b };
            let (loss, grad) = match gradient(&params, x.view(), cfg, &s_star, &mut rng) {
                Ok(r) => r,
                Err(e) if e.is_numeric() => return Err(diverged),
                Err(e) => return Err(e),
            };
            if !loss.total.is_finite() || !grad.all_finite() {
                return Err(diverged);
            }
            apply_update(&mut params, &grad, cfg, &mut adam);
            log.steps.push(StepRecord { epoch, batch: b, loss });
        }
        log.epochs.push(mean_breakdown(&log.steps[start..], cfg));
    }
    Ok((
        KnockoffGenerator {
            params,
            standardizer,
            config: cfg.clone(),
            s_star,
        },
        log,
    ))
}

/// Knockoffs for `x` in its original scale; noise is drawn from `seed`.
pub fn sample_knockoffs(model: &KnockoffGenerator, x: ArrayView2<f64>, seed: u64) -> Result<Array2<f64>> {
    let z = model.standardizer.apply(x)?;
    let mut rng = seeded(seed);
    let noise = Array2::from_shape_simple_fn(z.raw_dim(), || rng.sample(StandardNormal));
    let out = forward(&model.params, z.view(), noise.view())?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { stage: "network" });
    }
    model.standardizer.invert(out.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::srmmd;
    use crate::synth::{self, Setting, SynthSpec};

    fn ar1(n: usize, d: usize, seed: u64) -> Array2<f64> {
        synth::generate(&SynthSpec {
            setting: Setting::GaussianAr1 { rho: 0.5 },
            n,
            d,
            seed,
        })
        .unwrap()
    }

    fn quick_cfg() -> TrainingConfig {
        TrainingConfig {
            hidden_layers: 2,
            width_factor: 3,
            sinkhorn_iters: 20,
            batch_size: 16,
            epochs: 2,
            seed: 4,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn standardizer_round_trip() {
        let x = ar1(50, 3, 1) * 3.0 + 2.0;
        let st = Standardizer::fit(x.view()).unwrap();
        let z = st.apply(x.view()).unwrap();
        for c in z.axis_iter(Axis(1)) {
            assert!(c.mean().unwrap().abs() < 1e-12);
            assert!((c.pow2().mean().unwrap() - 1.0).abs() < 1e-12);
        }
        let back = st.invert(z.view()).unwrap();
        assert!(back.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = TrainingConfig { epochs: 0, ..quick_cfg() };
        let x = ar1(32, 2, 2);
        let (model, log) = train(x.view(), &cfg).unwrap();
        let init = GeneratorParams::init(
            &architecture(2, cfg.hidden_layers, cfg.width_factor),
            cfg.activation,
            &mut seeded(derive_seed(cfg.seed, 0)),
        )
        .unwrap();
        assert_eq!(model.params, init);
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_logged() {
        let cfg = quick_cfg();
        let x = ar1(40, 2, 3);
        let (a, la) = train(x.view(), &cfg).unwrap();
        let (b, lb) = train(x.view(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!(la.epochs.len(), 2);
        assert_eq!(la.steps.len(), 4);
        for l in la.steps.iter().map(|s| s.loss).chain(la.epochs.iter().copied()) {
            assert_eq!(
                l.total,
                l.srmmd_term + cfg.lambda_so * l.second_order_term + cfg.delta_corr * l.decorrelation_term
            );
        }
    }

    #[test]
    fn knockoffs_are_reproducible_and_shaped() {
        let cfg = quick_cfg();
        let x = ar1(40, 3, 5);
        let (model, _) = train(x.view(), &cfg).unwrap();
        let k1 = sample_knockoffs(&model, x.view(), 9).unwrap();
        let k2 = sample_knockoffs(&model, x.view(), 9).unwrap();
        assert_eq!(k1, k2);
        assert_eq!(k1.dim(), x.dim());
        assert_ne!(k1, sample_knockoffs(&model, x.view(), 10).unwrap());
        assert!(matches!(
            sample_knockoffs(&model, x.slice(ndarray::s![.., ..2]), 9),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn adam_runs() {
        let cfg = TrainingConfig {
            optimizer: Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 },
            learning_rate: 1e-3,
            ..quick_cfg()
        };
        let x = ar1(32, 2, 6);
        let (model, _) = train(x.view(), &cfg).unwrap();
        model.params.validate().unwrap();
        let k = sample_knockoffs(&model, x.view(), 1).unwrap();
        assert!(srmmd(x.view(), k.view(), 10.0, &cfg.kernel, &Default::default()).unwrap().is_finite());
    }
}
