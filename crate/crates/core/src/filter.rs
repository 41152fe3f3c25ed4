//! Model-X knockoff selection: LASSO coefficient-difference statistics, the
//! data-dependent threshold, and realized FDP/power against a known support.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients of the original features, in the caller's column scale.
    pub beta: Array1<f64>,
    /// Coefficients of the knockoff features.
    pub beta_knock: Array1<f64>,
    pub alpha: f64,
    pub iterations: usize,
    /// Largest KKT stationarity violation of the standardized problem.
    pub max_kkt_violation: f64,
    /// False when `max_iters` ran out before the coefficient change fell below tolerance.
    pub converged: bool,
}

#[inline]
pub fn soft_threshold(z: f64, alpha: f64) -> f64 {
    if z > alpha {
        z - alpha
    } else if z < -alpha {
        z + alpha
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on
/// `(1/2m) ||y - X b - X~ b~||^2 + alpha (||b||_1 + ||b~||_1)`.
///
/// `design` holds the originals in columns `0..d` and the knockoffs in
/// `d..2d`. Columns are centred and scaled to unit variance and `y` is centred
/// before solving (an unpenalized intercept); coefficients are mapped back to
/// the original column scale. Constant columns get a zero coefficient.
pub fn lasso(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    tolerance: f64,
    max_iters: usize,
) -> Result<LassoFit> {
    let (m, p) = design.dim();
    if p % 2 != 0 {
        return Err(Error::Dimension(format!(
            "augmented design must have an even number of columns, got {p}"
        )));
    }
    if y.len() != m {
        return Err(Error::Dimension(format!("design has {m} rows but y has {}", y.len())));
    }
    if m < 2 {
        return Err(Error::InsufficientSamples("LASSO needs at least two rows".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if design.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("LASSO inputs must be finite".into()));
    }
    let mf = m as f64;

    // Standardized columns, stored column-major for the inner loop.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let c = design.column(j);
        let mean = c.sum() / mf;
        let sd = (c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / mf).sqrt();
        if sd > 1e-12 * (1.0 + mean.abs()) {
            cols.push(c.iter().map(|v| (v - mean) / sd).collect());
            scales.push(sd);
        } else {
            cols.push(vec![0.0; m]);
            scales.push(0.0);
        }
    }
    let y_mean = y.sum() / mf;
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut b = vec![0.0f64; p];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if scales[j] == 0.0 {
                continue;
            }
            let col = &cols[j];
            let grad: f64 = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / mf;
            let new = soft_threshold(b[j] + grad, alpha);
            let delta = new - b[j];
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                b[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tolerance {
            converged = true;
            break;
        }
    }

    let mut kkt = 0.0f64;
    for j in 0..p {
        if scales[j] == 0.0 {
            continue;
        }
        let g: f64 = cols[j].iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / mf;
        let v = if b[j] == 0.0 {
            (g.abs() - alpha).max(0.0)
        } else {
            (g - alpha * b[j].signum()).abs()
        };
        kkt = kkt.max(v);
    }

    let d = p / 2;
    let unscale = |j: usize| if scales[j] == 0.0 { 0.0 } else { b[j] / scales[j] };
    Ok(LassoFit {
        beta: (0..d).map(unscale).collect(),
        beta_knock: (d..p).map(unscale).collect(),
        alpha,
        iterations,
        max_kkt_violation: kkt,
        converged,
    })
}

/// `W_j = |beta_j| - |beta~_j|`.
pub fn knockoff_stats(fit: &LassoFit) -> Result<Array1<f64>> {
    if fit.beta.len() != fit.beta_knock.len() {
        return Err(Error::Dimension("coefficient blocks differ in length".into()));
    }
    Ok(fit
        .beta
        .iter()
        .zip(fit.beta_knock.iter())
        .map(|(a, b)| a.abs() - b.abs())
        .collect())
}

/// Knockoff threshold
/// `min { t > 0 : (1 + #{W_j <= -t}) / max(1, #{W_j >= t}) <= q }`,
/// searched over `{|W_j| : W_j != 0}`; `+inf` when no candidate qualifies.
pub fn threshold(w: ArrayView1<f64>, q: f64) -> Result<f64> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("knockoff statistics must be finite".into()));
    }
    let mut pos: Vec<f64> = w.iter().copied().filter(|v| *v > 0.0).collect();
    let mut neg: Vec<f64> = w.iter().filter(|v| **v < 0.0).map(|v| -v).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = pos.iter().chain(neg.iter()).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Sweep t upwards; counts of W >= t and W <= -t only shrink.
    let (mut ip, mut ineg) = (0usize, 0usize);
    for t in candidates {
        while ip < pos.len() && pos[ip] < t {
            ip += 1;
        }
        while ineg < neg.len() && neg[ineg] < t {
            ineg += 1;
        }
        let above = (pos.len() - ip) as f64;
        let below = (neg.len() - ineg) as f64;
        if (1.0 + below) / above.max(1.0) <= q {
            return Ok(t);
        }
    }
    Ok(f64::INFINITY)
}

/// Zero-based indices with `W_j >= tau`.
pub fn selected_set(w: ArrayView1<f64>, tau: f64) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, v)| **v >= tau)
        .map(|(j, _)| j)
        .collect()
}

/// Realized false discovery proportion and power.
pub fn evaluate(selected: &[usize], true_support: &[usize], d: usize) -> Result<(f64, f64)> {
    if let Some(bad) = selected.iter().chain(true_support).find(|&&j| j >= d) {
        return Err(Error::InvalidInput(format!("index {bad} out of range for d={d}")));
    }
    let mut is_true = vec![false; d];
    for &j in true_support {
        is_true[j] = true;
    }
    let hits = selected.iter().filter(|&&j| is_true[j]).count();
    let false_hits = selected.len() - hits;
    let fdp = false_hits as f64 / selected.len().max(1) as f64;
    let power = hits as f64 / true_support.len().max(1) as f64;
    Ok((fdp, power))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub w: Vec<f64>,
    pub tau: f64,
    pub selected: Vec<usize>,
    pub fdp: f64,
    pub power: f64,
    pub q: f64,
}

/// Threshold `w` at level `q` and score against `true_support`.
pub fn select(w: ArrayView1<f64>, q: f64, true_support: &[usize]) -> Result<SelectionOutcome> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInput(format!("q must lie in (0, 1), got {q}")));
    }
    let tau = threshold(w, q)?;
    let selected = selected_set(w, tau);
    let (fdp, power) = evaluate(&selected, true_support, w.len())?;
    Ok(SelectionOutcome {
        w: w.to_vec(),
        tau,
        selected,
        fdp,
        power,
        q,
    })
}
