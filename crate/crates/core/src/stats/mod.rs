//! Two-sample statistics on raw samples and on their joint (soft) ranks.
//!
//! Energy terms are V-statistics (diagonal included); MMD terms are
//! U-statistics (diagonal excluded). Every statistic is exactly symmetric in
//! its two arguments: inputs are processed in a canonical order so that
//! `stat(a, b)` and `stat(b, a)` run the same floating-point operations.

mod kernel;
pub(crate) mod swap;

pub use kernel::KernelSpec;
pub(crate) use kernel::sq_dist;
pub use swap::{apply_swap, swap_loss_srmmd, swap_loss_srmmd_with, SwapPattern};

use std::cmp::Ordering;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ot::{joint_soft_ranks, SinkhornConfig};

const PAR_ROWS: usize = 128;

/// Total order on matrices used to pick a canonical argument order.
pub(crate) fn canonical_cmp(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Ordering {
    a.dim().cmp(&b.dim()).then_with(|| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn canonical<'a>(
    a: ArrayView2<'a, f64>,
    b: ArrayView2<'a, f64>,
) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>) {
    if canonical_cmp(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

fn sum_rows(n: usize, row: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = if n >= PAR_ROWS {
        (0..n).into_par_iter().map(&row).collect()
    } else {
        (0..n).map(&row).collect()
    };
    partial.iter().sum()
}

/// `sum_{i<j} f(||a_i - a_j||^2)`.
fn within_sum(a: ArrayView2<f64>, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    sum_rows(a.nrows(), |i| {
        let ai = a.row(i);
        ((i + 1)..a.nrows())
            .map(|j| f(sq_dist(ai.iter(), a.row(j).iter())))
            .sum()
    })
}

/// `sum_{i,j} f(||a_i - b_j||^2)`.
fn cross_sum(a: ArrayView2<f64>, b: ArrayView2<f64>, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    sum_rows(a.nrows(), |i| {
        let ai = a.row(i);
        b.rows()
            .into_iter()
            .map(|bj| f(sq_dist(ai.iter(), bj.iter())))
            .sum()
    })
}

fn check_pair(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "samples have different widths: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::InsufficientSamples("both samples must be nonempty".into()));
    }
    Ok(())
}

/// V-statistic energy distance
/// `2/(mn) sum ||a_i - b_j|| - 1/m^2 sum ||a_i - a_j|| - 1/n^2 sum ||b_i - b_j||`.
pub fn energy_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    check_pair(a, b)?;
    if canonical_cmp(a, b) == Ordering::Equal {
        return Ok(0.0);
    }
    let (a, b) = canonical(a, b);
    let (m, n) = (a.nrows() as f64, b.nrows() as f64);
    let cross = cross_sum(a, b, f64::sqrt);
    let wa = 2.0 * within_sum(a, f64::sqrt) / (m * m);
    let wb = 2.0 * within_sum(b, f64::sqrt) / (n * n);
    Ok(2.0 * cross / (m * n) - (wa + wb))
}

/// Unbiased MMD^2 estimate with the given kernel.
pub fn mmd_unbiased(a: ArrayView2<f64>, b: ArrayView2<f64>, kernel: &KernelSpec) -> Result<f64> {
    check_pair(a, b)?;
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "unbiased MMD needs at least two rows per sample, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    kernel.validate()?;
    let (a, b) = canonical(a, b);
    let (m, n) = (a.nrows() as f64, b.nrows() as f64);
    let k = |r: f64| kernel.eval_sq(r);
    let wa = 2.0 * within_sum(a, k) / (m * (m - 1.0));
    let wb = 2.0 * within_sum(b, k) / (n * (n - 1.0));
    let cross = cross_sum(a, b, k);
    Ok((wa + wb) - 2.0 * cross / (m * n))
}

fn ranks_canonical(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    epsilon: f64,
    cfg: &SinkhornConfig,
) -> Result<(ndarray::Array2<f64>, ndarray::Array2<f64>)> {
    let swapped = canonical_cmp(x, y) == Ordering::Greater;
    let (first, second) = if swapped { (y, x) } else { (x, y) };
    let (r1, r2) = joint_soft_ranks(first, second, epsilon, cfg)?;
    Ok(if swapped {
        (r2.ranks, r1.ranks)
    } else {
        (r1.ranks, r2.ranks)
    })
}

/// Soft rank energy: energy distance between joint soft ranks.
pub fn sre(x: ArrayView2<f64>, y: ArrayView2<f64>, epsilon: f64, cfg: &SinkhornConfig) -> Result<f64> {
    let (rx, ry) = ranks_canonical(x, y, epsilon, cfg)?;
    energy_distance(rx.view(), ry.view())
}

/// Rank energy: [`sre`] on the exact (unregularized) rank map.
pub fn re(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    sre(x, y, 0.0, &SinkhornConfig::default())
}

/// Soft rank MMD: unbiased MMD between joint soft ranks. `epsilon = 0`
/// gives the hard-rank variant.
pub fn srmmd(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    epsilon: f64,
    kernel: &KernelSpec,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    if x.nrows() < 2 || y.nrows() < 2 {
        return Err(Error::InsufficientSamples(
            "sRMMD needs at least two rows per sample".into(),
        ));
    }
    let (rx, ry) = ranks_canonical(x, y, epsilon, cfg)?;
    mmd_unbiased(rx.view(), ry.view(), kernel)
}
