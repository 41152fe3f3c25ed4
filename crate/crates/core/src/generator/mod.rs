//! Knockoff generator `f(X, V)`: a fully connected network trained on the
//! swap-invariance sRMMD loss plus moment and decorrelation penalties.

mod loss;
mod network;
mod persist;
mod train;
mod unrolled;

pub use loss::second_order_loss;
pub use network::{architecture, forward, Activation, GeneratorParams, ParamArrays};
pub use persist::{load_model, save_model, ModelDocument};
pub use train::{sample_knockoffs, train, KnockoffGenerator, Standardizer, StepRecord, TrainingLog};

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::decorrelation::{d_corr_with_grad, SdpSolution};
use crate::error::{Error, Result};
use crate::stats::swap::swap_blocks;
use crate::stats::{KernelSpec, SwapPattern};

/// Parameter update rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Entropic regularization inside the loss.
    pub epsilon: f64,
    /// Weight of the second-order moment penalty.
    pub lambda_so: f64,
    /// Weight of the decorrelation penalty.
    pub delta_corr: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    /// Number of Sinkhorn sweeps unrolled inside the loss.
    pub sinkhorn_iters: usize,
    pub hidden_layers: usize,
    /// Hidden width as a multiple of `d`.
    pub width_factor: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub sdp_tolerance: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            lambda_so: 1.0,
            delta_corr: 1.0,
            learning_rate: 0.01,
            batch_size: 500,
            epochs: 100,
            seed: 0,
            kernel: KernelSpec::default(),
            sinkhorn_iters: 100,
            hidden_layers: 6,
            width_factor: 5,
            activation: Activation::default(),
            optimizer: Optimizer::default(),
            sdp_tolerance: 1e-6,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size < 4 || self.batch_size % 2 != 0 {
            return bad(format!("batch_size must be even and >= 4, got {}", self.batch_size));
        }
        for (name, w) in [("lambda_so", self.lambda_so), ("delta_corr", self.delta_corr)] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {w}"));
            }
        }
        if self.width_factor == 0 {
            return bad("width_factor must be positive".into());
        }
        if !(self.sdp_tolerance > 0.0) {
            return bad("sdp_tolerance must be positive".into());
        }
        let Activation::LeakyRelu { slope } = self.activation;
        if !slope.is_finite() {
            return bad("activation slope must be finite".into());
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return bad("adam needs betas in [0, 1) and eps > 0".into());
            }
        }
        self.kernel.validate()
    }
}

/// Loss value and its three components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub srmmd_term: f64,
    pub second_order_term: f64,
    pub decorrelation_term: f64,
}

impl LossBreakdown {
    /// Builds the breakdown with `total` computed from the components.
    pub fn assemble(srmmd_term: f64, second_order_term: f64, decorrelation_term: f64, cfg: &TrainingConfig) -> Self {
        Self {
            total: srmmd_term + cfg.lambda_so * second_order_term + cfg.delta_corr * decorrelation_term,
            srmmd_term,
            second_order_term,
            decorrelation_term,
        }
    }
}

/// Random inputs of one loss evaluation: generator noise `V` and swap set `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDraws {
    pub noise: Array2<f64>,
    pub pattern: SwapPattern,
}

impl LossDraws {
    /// Noise first (row-major standard normals), then the swap set.
    pub fn sample<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Self {
        let noise = Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal));
        let pattern = SwapPattern::random(d, rng);
        Self { noise, pattern }
    }
}

fn check_batch(params: &GeneratorParams, batch: ArrayView2<f64>, s_star: &SdpSolution) -> Result<()> {
    let d = params.dim();
    if batch.ncols() != d || s_star.s.len() != d {
        return Err(Error::Dimension(format!(
            "batch has {} columns and s* {} entries, network expects {d}",
            batch.ncols(),
            s_star.s.len()
        )));
    }
    if batch.nrows() < 4 || batch.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "batch row count must be even and >= 4, got {}",
            batch.nrows()
        )));
    }
    Ok(())
}

fn finite_or(v: f64, stage: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericOverflow { stage })
    }
}

/// Swap loss on fixed blocks and, optionally, its gradient with respect to the knockoffs.
fn swap_term(
    batch: ArrayView2<f64>,
    knock: ArrayView2<f64>,
    pattern: &SwapPattern,
    cfg: &TrainingConfig,
    want_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    let [first, flipped, swapped] = swap_blocks(batch, knock, pattern)?;
    let run = |other: &Array2<f64>| {
        unrolled::srmmd_unrolled(
            first.view(),
            other.view(),
            cfg.epsilon,
            &cfg.kernel,
            cfg.sinkhorn_iters,
            want_grad,
        )
    };
    let (v1, g1) = run(&flipped)?;
    let (v2, g2) = run(&swapped)?;
    let value = v1 + v2;
    let (Some((gf1, gflip)), Some((gf2, gswap))) = (g1, g2) else {
        return Ok((value, None));
    };
    let (n, d) = batch.dim();
    let h = n / 2;
    let mut grad = Array2::zeros((n, d));
    // (X', X~'): knockoffs in the right half of both `first` copies.
    let first_grad = gf1 + gf2;
    grad.slice_mut(s![..h, ..]).assign(&first_grad.slice(s![.., d..]));
    // (X~'', X''): knockoffs in the left half.
    grad.slice_mut(s![h.., ..]).assign(&gflip.slice(s![.., ..d]));
    // (X'', X~'') with B swapped: knockoff column j sits at j if j in B, else at d + j.
    let mut in_b = vec![false; d];
    for &j in pattern.indices() {
        in_b[j] = true;
    }
    let mut lower = grad.slice_mut(s![h.., ..]);
    for j in 0..d {
        let src = if in_b[j] { j } else { d + j };
        let mut col = lower.column_mut(j);
        col += &gswap.column(src);
    }
    Ok((value, Some(grad)))
}

fn evaluate(
    params: &GeneratorParams,
    batch: ArrayView2<f64>,
    cfg: &TrainingConfig,
    s_star: &SdpSolution,
    draws: &LossDraws,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<ParamArrays>)> {
    check_batch(params, batch, s_star)?;
    let (knock, cache) = network::forward_cached(params, batch, draws.noise.view())?;
    if knock.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { stage: "network" });
    }
    let (srmmd, g_swap) = swap_term(batch, knock.view(), &draws.pattern, cfg, want_grad)?;
    let srmmd = finite_or(srmmd, "srmmd")?;
    let (so, g_so) = loss::second_order_with_grad(batch, knock.view())?;
    let so = finite_or(so, "second-order")?;
    // The decorrelation term needs non-constant knockoff columns; with zero
    // weight it is skipped and reported as 0.
    let (dc, g_dc) = if cfg.delta_corr != 0.0 {
        let (v, g) = d_corr_with_grad(batch, knock.view(), &s_star.s)?;
        (finite_or(v, "decorrelation")?, Some(g))
    } else {
        (0.0, None)
    };
    let breakdown = LossBreakdown::assemble(srmmd, so, dc, cfg);
    let Some(mut out_grad) = g_swap else {
        return Ok((breakdown, None));
    };
    out_grad.scaled_add(cfg.lambda_so, &g_so);
    if let Some(g) = g_dc {
        out_grad.scaled_add(cfg.delta_corr, &g);
    }
    if out_grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { stage: "loss gradient" });
    }
    Ok((breakdown, Some(network::backward(params, &cache, out_grad))))
}

/// Loss on `batch` with explicit random draws.
pub fn total_loss_with(
    params: &GeneratorParams,
    batch: ArrayView2<f64>,
    cfg: &TrainingConfig,
    s_star: &SdpSolution,
    draws: &LossDraws,
) -> Result<LossBreakdown> {
    evaluate(params, batch, cfg, s_star, draws, false).map(|(l, _)| l)
}

/// Loss and exact gradient of the unrolled computation with explicit draws.
pub fn gradient_with(
    params: &GeneratorParams,
    batch: ArrayView2<f64>,
    cfg: &TrainingConfig,
    s_star: &SdpSolution,
    draws: &LossDraws,
) -> Result<(LossBreakdown, ParamArrays)> {
    let (l, g) = evaluate(params, batch, cfg, s_star, draws, true)?;
    Ok((l, g.expect("gradient requested")))
}

/// Swap sRMMD + `lambda_so` * second-order + `delta_corr` * decorrelation on
/// `batch` (rows split into halves) and its generated knockoffs. Draws noise
/// and the swap set from `rng`.
pub fn total_loss<R: Rng + ?Sized>(
    params: &GeneratorParams,
    batch: ArrayView2<f64>,
    cfg: &TrainingConfig,
    s_star: &SdpSolution,
    rng: &mut R,
) -> Result<LossBreakdown> {
    let draws = LossDraws::sample(batch.nrows(), batch.ncols(), rng);
    total_loss_with(params, batch, cfg, s_star, &draws)
}

/// Gradient of [`total_loss`]; consumes the same draws from `rng`.
pub fn gradient<R: Rng + ?Sized>(
    params: &GeneratorParams,
    batch: ArrayView2<f64>,
    cfg: &TrainingConfig,
    s_star: &SdpSolution,
    rng: &mut R,
) -> Result<(LossBreakdown, ParamArrays)> {
    let draws = LossDraws::sample(batch.nrows(), batch.ncols(), rng);
    gradient_with(params, batch, cfg, s_star, &draws)
}
