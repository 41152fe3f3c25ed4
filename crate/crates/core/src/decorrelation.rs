//! Knockoff decorrelation target `s*` and the penalty that steers the
//! per-feature correlation between `X_j` and its knockoff towards `1 - s*_j`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Ridge added to near-singular covariances before solving.
pub const RIDGE: f64 = 1e-4;
const RIDGE_TRIGGER: f64 = 1e-6;
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Result of the `max sum s_j  s.t. 2 Sigma >= diag(s), 0 <= s <= 1` program.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SdpSolution {
    pub s: Vec<f64>,
    /// Smallest eigenvalue of `2 Sigma - diag(s)`.
    pub feasibility_gap: f64,
    /// `sum_j |1 - s_j|`.
    pub objective: f64,
    /// Objective after initialization and after each coordinate sweep.
    pub objective_trace: Vec<f64>,
}

/// Number of coordinate sweeps run by [`solve_sdp`].
pub const DEFAULT_SWEEPS: usize = 3;

fn to_nalgebra(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn gap_for(two_sigma: &DMatrix<f64>, s: &[f64]) -> f64 {
    let mut m = two_sigma.clone();
    for (j, sj) in s.iter().enumerate() {
        m[(j, j)] -= sj;
    }
    min_eigenvalue(&m)
}

/// Solves for `s*` by coordinate ascent.
///
/// Starts from the equicorrelated point `s_j = min(1, 2 lambda_min)`, then
/// raises each coordinate in turn as far as positive semidefiniteness of
/// `2 Sigma - diag(s)` allows, locating the boundary by bisection to width
/// `tolerance`.
pub fn solve_sdp(sigma: ArrayView2<f64>, tolerance: f64) -> Result<SdpSolution> {
    solve_sdp_with_sweeps(sigma, tolerance, DEFAULT_SWEEPS)
}

pub fn solve_sdp_with_sweeps(
    sigma: ArrayView2<f64>,
    tolerance: f64,
    sweeps: usize,
) -> Result<SdpSolution> {
    let (d, d2) = sigma.dim();
    if d != d2 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "covariance must be square and nonempty, got {d}x{d2}"
        )));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("covariance has non-finite entries".into()));
    }
    let scale = sigma.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for i in 0..d {
        for j in 0..i {
            if (sigma[[i, j]] - sigma[[j, i]]).abs() > 1e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut sig = to_nalgebra(sigma);
    sig = (&sig + sig.transpose()) * 0.5;
    let mut lambda_min = min_eigenvalue(&sig);
    if lambda_min < RIDGE_TRIGGER {
        for j in 0..d {
            sig[(j, j)] += RIDGE;
        }
        lambda_min = min_eigenvalue(&sig);
        if lambda_min <= 0.0 {
            return Err(Error::SingularCovariance(lambda_min));
        }
    }
    let two_sigma = sig * 2.0;
    let objective = |s: &[f64]| s.iter().map(|v| (1.0 - v).abs()).sum::<f64>();

    let mut s = vec![(2.0 * lambda_min).min(1.0); d];
    // Guard the starting point against eigen-solver round-off.
    while gap_for(&two_sigma, &s) < -FEASIBILITY_SLACK {
        s.iter_mut().for_each(|v| *v *= 1.0 - 1e-12);
    }
    let mut trace = vec![objective(&s)];

    let tol = tolerance.max(1e-15);
    for _ in 0..sweeps {
        for j in 0..d {
            let feasible = |t: f64, s: &mut Vec<f64>| {
                let old = s[j];
                s[j] = t;
                let ok = gap_for(&two_sigma, s) >= -FEASIBILITY_SLACK;
                s[j] = old;
                ok
            };
            if feasible(1.0, &mut s) {
                s[j] = 1.0;
                continue;
            }
            let (mut lo, mut hi) = (s[j], 1.0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if feasible(mid, &mut s) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            s[j] = lo;
        }
        trace.push(objective(&s));
    }

    Ok(SdpSolution {
        feasibility_gap: gap_for(&two_sigma, &s),
        objective: objective(&s),
        s,
        objective_trace: trace,
    })
}

/// Empirical correlation matrix with `1/n` normalization.
pub fn correlation_matrix(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientSamples("correlation needs at least two rows".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let sd: Array1<f64> = cov.diag().mapv(f64::sqrt);
    if let Some(j) = sd.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("column {j} has zero variance")));
    }
    let d = x.ncols();
    Ok(Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            1.0
        } else {
            cov[[i, j]] / (sd[i] * sd[j])
        }
    }))
}

/// Per-column Pearson correlations between `x_j` and `x_knock_j`.
pub fn paired_correlations(x: ArrayView2<f64>, x_knock: ArrayView2<f64>) -> Result<Vec<f64>> {
    Ok(paired_stats(x, x_knock)?.into_iter().map(|p| p.r).collect())
}

pub(crate) struct PairStat {
    pub r: f64,
    pub xc: Array1<f64>,
    pub yc: Array1<f64>,
    pub sx: f64,
    pub sy: f64,
}

pub(crate) fn paired_stats(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Vec<PairStat>> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "features {:?} and knockoffs {:?} differ in shape",
            x.dim(),
            y.dim()
        )));
    }
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let (xj, yj) = (x.column(j), y.column(j));
            let xc = &xj - xj.mean().unwrap_or(0.0);
            let yc = &yj - yj.mean().unwrap_or(0.0);
            let sx = (xc.dot(&xc) / n).sqrt();
            let sy = (yc.dot(&yc) / n).sqrt();
            if !(sx > 0.0 && sy > 0.0) {
                return Err(Error::NumericOverflow { stage: "decorrelation" });
            }
            let r = xc.dot(&yc) / n / (sx * sy);
            Ok(PairStat { r, xc, yc, sx, sy })
        })
        .collect()
}

/// `sum_j (corr(x_j, x_knock_j) - 1 + s*_j)^2`.
pub fn d_corr(x: ArrayView2<f64>, x_knock: ArrayView2<f64>, s_star: &SdpSolution) -> Result<f64> {
    if s_star.s.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "s* has {} entries for {} columns",
            s_star.s.len(),
            x.ncols()
        )));
    }
    let stats = paired_stats(x, x_knock)?;
    Ok(stats
        .iter()
        .zip(&s_star.s)
        .map(|(p, s)| {
            let e = p.r - 1.0 + s;
            e * e
        })
        .sum())
}

/// [`d_corr`] and its gradient with respect to `x_knock`.
pub(crate) fn d_corr_with_grad(
    x: ArrayView2<f64>,
    x_knock: ArrayView2<f64>,
    s_star: &[f64],
) -> Result<(f64, Array2<f64>)> {
    let stats = paired_stats(x, x_knock)?;
    let n = x.nrows() as f64;
    let mut grad = Array2::zeros(x_knock.raw_dim());
    let mut value = 0.0;
    for (j, (p, s)) in stats.iter().zip(s_star).enumerate() {
        let e = p.r - 1.0 + s;
        value += e * e;
        // dr/dy_i = (xc_i / (sx sy) - r yc_i / sy^2) / n
        let dr = (&p.xc / (p.sx * p.sy) - &(&p.yc * (p.r / (p.sy * p.sy)))) / n;
        grad.column_mut(j).assign(&(dr * (2.0 * e)));
    }
    Ok((value, grad))
}
