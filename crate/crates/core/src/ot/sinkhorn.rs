use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::{marginal_violation, CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Stopping rule for [`sinkhorn`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinkhornConfig {
    pub max_iters: usize,
    /// Target for the largest absolute row/column marginal violation.
    pub tolerance: f64,
    /// Warm-start small-epsilon problems through a decreasing epsilon schedule.
    pub epsilon_scaling: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            tolerance: 1e-6,
            epsilon_scaling: true,
        }
    }
}

impl SinkhornConfig {
    /// Exactly `iters` plain sweeps: no early stop, no epsilon schedule.
    pub fn fixed(iters: usize) -> Self {
        Self {
            max_iters: iters,
            tolerance: f64::MIN_POSITIVE,
            epsilon_scaling: false,
        }
    }
}

/// `log(sum(exp(x)))` without overflow.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

// Below this many rows the rayon dispatch costs more than it saves.
const PAR_ROWS: usize = 64;

/// `out[i] = LSE_j (pot[j] - cost[i, j]) / eps`, one entry per row of `cost`.
///
/// Each row is reduced sequentially, so results do not depend on the thread
/// count.
pub(crate) fn row_lse(cost: ArrayView2<f64>, pot: &[f64], eps: f64) -> Vec<f64> {
    let one_row = |i: usize| {
        let row = cost.row(i);
        log_sum_exp(row.iter().zip(pot).map(|(c, p)| (p - c) / eps))
    };
    if cost.nrows() >= PAR_ROWS {
        (0..cost.nrows()).into_par_iter().map(one_row).collect()
    } else {
        (0..cost.nrows()).map(one_row).collect()
    }
}

/// Log-domain dual potentials after a fixed number of Sinkhorn sweeps.
///
/// `cost_t` is the transpose of `cost` in standard layout.
#[derive(Debug, Clone)]
pub(crate) struct Potentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

pub(crate) fn update_g(cost_t: ArrayView2<f64>, f: &[f64], eps: f64) -> Vec<f64> {
    let log_b = -(cost_t.nrows() as f64).ln();
    row_lse(cost_t, f, eps)
        .into_iter()
        .map(|l| eps * (log_b - l))
        .collect()
}

pub(crate) fn plan_from_potentials(cost: ArrayView2<f64>, pots: &Potentials, eps: f64) -> Array2<f64> {
    let (m, n) = cost.dim();
    Array2::from_shape_fn((m, n), |(i, j)| {
        ((pots.f[i] + pots.g[j] - cost[[i, j]]) / eps).exp()
    })
}

const SCALING_FACTOR: f64 = 4.0;
const STAGE_ITERS: usize = 200;

/// Alternating potential updates until the row marginals are within `tol`.
fn run_sweeps(
    c: ArrayView2<f64>,
    c_t: ArrayView2<f64>,
    eps: f64,
    pots: &mut Potentials,
    max_iters: usize,
    tol: f64,
) -> (usize, bool) {
    let row_mass = 1.0 / c.nrows() as f64;
    let log_a = row_mass.ln();
    let mut it = 0;
    loop {
        let lse = row_lse(c, &pots.g, eps);
        if it > 0 {
            let viol = pots
                .f
                .iter()
                .zip(&lse)
                .map(|(f, l)| ((f / eps + l).exp() - row_mass).abs())
                .fold(0.0, f64::max);
            if viol < tol {
                return (it, true);
            }
        }
        if it >= max_iters {
            return (it, false);
        }
        pots.f = lse.iter().map(|l| eps * (log_a - l)).collect();
        pots.g = update_g(c_t, &pots.f, eps);
        it += 1;
    }
}

/// Entropic transport plan with uniform marginals, solved in the log domain.
///
/// Iterates until the largest row-sum deviation from `1/m` drops below
/// `cfg.tolerance` (column sums are exact after each column update) or until
/// `cfg.max_iters` sweeps. Non-convergence is reported through
/// [`TransportPlan::converged`] and `marginal_tolerance`, not as an error.
pub fn sinkhorn(cost: &CostMatrix, epsilon: f64, cfg: &SinkhornConfig) -> Result<TransportPlan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sinkhorn needs a positive finite epsilon, got {epsilon}"
        )));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sinkhorn tolerance must be positive, got {}",
            cfg.tolerance
        )));
    }
    if cost.values.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
    }
    let (m, n) = cost.values.dim();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("empty cost matrix".into()));
    }
    let c = cost.values.view();
    let c_t = cost.values.t().as_standard_layout().into_owned();

    let mut pots = Potentials {
        f: vec![0.0; m],
        g: vec![0.0; n],
    };
    // Warm start through a geometric epsilon schedule when the target is small
    // relative to the cost range; the final fixed point is unchanged.
    let spread = cost.values.iter().fold(0.0f64, |a, &v| a.max(v))
        - cost.values.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let mut iterations = 0;
    let mut stage_eps = spread;
    while cfg.epsilon_scaling && stage_eps > epsilon * SCALING_FACTOR && iterations < cfg.max_iters {
        let budget = STAGE_ITERS.min(cfg.max_iters - iterations);
        let (used, _) = run_sweeps(c, c_t.view(), stage_eps, &mut pots, budget, cfg.tolerance);
        iterations += used;
        stage_eps /= SCALING_FACTOR;
    }
    let (used, converged) = run_sweeps(
        c,
        c_t.view(),
        epsilon,
        &mut pots,
        cfg.max_iters - iterations,
        cfg.tolerance,
    );
    iterations += used;

    let weights = plan_from_potentials(c, &pots, epsilon);
    let achieved = marginal_violation(&weights);
    Ok(TransportPlan {
        weights,
        epsilon,
        marginal_tolerance: achieved,
        iterations,
        converged: converged || achieved < cfg.tolerance,
        permutation: None,
    })
}
