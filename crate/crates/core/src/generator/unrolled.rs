//! sRMMD through a fixed number of Sinkhorn sweeps, with reverse-mode
//! gradients with respect to both samples.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halton::{self, HaltonGrid, DEFAULT_START_INDEX};
use crate::ot::pairwise_sq_dists;
use crate::ot::sinkhorn::{row_lse, update_g};
use crate::stats::{sq_dist, KernelSpec};

const PAR_ROWS: usize = 64;

fn par_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n >= PAR_ROWS {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Forward state of the unrolled transport problem.
struct Unrolled {
    cost: Array2<f64>,
    /// `f[t]` and `g[t]` after sweep `t`; `g[0]` is the zero start.
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    ranks: Array2<f64>,
}

fn forward(pooled: ArrayView2<f64>, grid: &HaltonGrid, eps: f64, iters: usize) -> Result<Unrolled> {
    let cost = pairwise_sq_dists(pooled, grid.points.view())?;
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericOverflow { stage: "sinkhorn" });
    }
    let cost_t = cost.t().as_standard_layout().into_owned();
    let n = cost.nrows();
    let log_a = -(n as f64).ln();
    let mut f = vec![vec![0.0; n]];
    let mut g = vec![vec![0.0; n]];
    for t in 1..=iters {
        let ft: Vec<f64> = row_lse(cost.view(), &g[t - 1], eps)
            .into_iter()
            .map(|l| eps * (log_a - l))
            .collect();
        let gt = update_g(cost_t.view(), &ft, eps);
        f.push(ft);
        g.push(gt);
    }
    let g_last = &g[iters];
    let rows = par_rows(n, |i| {
        let c = cost.row(i);
        let logits: Vec<f64> = c.iter().zip(g_last).map(|(c, g)| (g - c) / eps).collect();
        let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut r = vec![0.0; grid.dim()];
        for (j, wj) in w.iter().enumerate() {
            let p = wj / total;
            for (rk, hk) in r.iter_mut().zip(grid.points.row(j)) {
                *rk += p * hk;
            }
        }
        r
    });
    let ranks = Array2::from_shape_vec((n, grid.dim()), rows.concat()).expect("row lengths");
    if ranks.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { stage: "soft ranks" });
    }
    Ok(Unrolled { cost, f, g, ranks })
}

/// Gradient of the loss with respect to the pooled points given `d loss / d ranks`.
fn backward(
    state: &Unrolled,
    pooled: ArrayView2<f64>,
    grid: &HaltonGrid,
    eps: f64,
    rank_grad: &Array2<f64>,
) -> Array2<f64> {
    let n = state.cost.nrows();
    let nf = n as f64;
    let iters = state.f.len() - 1;
    let g_last = &state.g[iters];

    // Soft-assignment layer: rank_i = sum_j w_ij h_j, w = softmax_j((g_j - C_ij)/eps).
    let rows = par_rows(n, |i| {
        let c = state.cost.row(i);
        let logits: Vec<f64> = c.iter().zip(g_last).map(|(c, g)| (g - c) / eps).collect();
        let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let r = state.ranks.row(i);
        let rb = rank_grad.row(i);
        let rb_dot_r: f64 = r.iter().zip(rb).map(|(a, b)| a * b).sum();
        (0..n)
            .map(|j| {
                let hb: f64 = grid.points.row(j).iter().zip(rb).map(|(a, b)| a * b).sum();
                w[j] / total * (hb - rb_dot_r) / eps
            })
            .collect::<Vec<f64>>()
    });
    // rows[i][j] = d loss / d g_j contribution = -d loss / d C_ij
    let mut cost_bar = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            cost_bar[[i, j]] = -v;
        }
    }
    let mut g_bar: Vec<f64> = par_rows(n, |j| rows.iter().map(|r| r[j]).sum());

    let mut pi_f = Array2::<f64>::zeros((n, n));
    for t in (1..=iters).rev() {
        let (ft, gt, gp) = (&state.f[t], &state.g[t], &state.g[t - 1]);
        // g_t = eps log b - eps LSE_i((f_t - C)/eps): column-stochastic weights.
        // f_t = eps log a - eps LSE_j((g_{t-1} - C)/eps): row-stochastic weights.
        let gb = &g_bar;
        let f_bar: Vec<f64> = {
            let cb = cost_bar.as_slice_mut().expect("standard layout");
            let pf = pi_f.as_slice_mut().expect("standard layout");
            let work = |(i, (cb_row, pf_row)): (usize, (&mut [f64], &mut [f64]))| {
                let c = state.cost.row(i);
                let mut fb = 0.0;
                for j in 0..n {
                    let pg = ((ft[i] + gt[j] - c[j]) / eps).exp() * nf;
                    cb_row[j] += pg * gb[j];
                    fb -= pg * gb[j];
                }
                for j in 0..n {
                    let p = ((ft[i] + gp[j] - c[j]) / eps).exp() * nf;
                    pf_row[j] = p;
                    cb_row[j] += p * fb;
                }
                fb
            };
            if n >= PAR_ROWS {
                cb.par_chunks_mut(n)
                    .zip(pf.par_chunks_mut(n))
                    .enumerate()
                    .map(work)
                    .collect()
            } else {
                cb.chunks_mut(n).zip(pf.chunks_mut(n)).enumerate().map(work).collect()
            }
        };
        let pf = &pi_f;
        g_bar = par_rows(n, |j| -(0..n).map(|i| pf[[i, j]] * f_bar[i]).sum::<f64>());
    }

    // C_ij = ||p_i - h_j||^2
    let d = pooled.ncols();
    let rows = par_rows(n, |i| {
        let cb = cost_bar.row(i);
        let p = pooled.row(i);
        let mut out = vec![0.0; d];
        for (j, &w) in cb.iter().enumerate() {
            for (k, hk) in grid.points.row(j).iter().enumerate() {
                out[k] += 2.0 * w * (p[k] - hk);
            }
        }
        out
    });
    Array2::from_shape_vec((n, d), rows.concat()).expect("row lengths")
}

/// Unbiased MMD between `a` and `b` and its gradients.
fn mmd_with_grad(a: ArrayView2<f64>, b: ArrayView2<f64>, kernel: &KernelSpec) -> (f64, Array2<f64>, Array2<f64>) {
    let (m, n) = (a.nrows() as f64, b.nrows() as f64);
    let cw_a = 1.0 / (m * (m - 1.0));
    let cw_b = 1.0 / (n * (n - 1.0));
    let cx = 2.0 / (m * n);
    // Each row of each block: (value contribution, gradient row).
    let side = |own: ArrayView2<f64>, other: ArrayView2<f64>, cw: f64| {
        par_rows(own.nrows(), |i| {
            let oi = own.row(i);
            let mut val = 0.0;
            let mut grad = vec![0.0; own.ncols()];
            for (j, oj) in own.rows().into_iter().enumerate() {
                if j == i {
                    continue;
                }
                let r = sq_dist(oi.iter(), oj.iter());
                val += cw * kernel.eval_sq(r);
                // both (i, j) and (j, i) terms depend on row i
                let dk = 2.0 * cw * kernel.deriv_sq(r);
                for (k, gk) in grad.iter_mut().enumerate() {
                    *gk += dk * 2.0 * (oi[k] - oj[k]);
                }
            }
            let mut cross = 0.0;
            for oj in other.rows() {
                let r = sq_dist(oi.iter(), oj.iter());
                cross += kernel.eval_sq(r);
                let dk = -cx * kernel.deriv_sq(r);
                for (k, gk) in grad.iter_mut().enumerate() {
                    *gk += dk * 2.0 * (oi[k] - oj[k]);
                }
            }
            (val, cross, grad)
        })
    };
    let ra = side(a, b, cw_a);
    let rb = side(b, a, cw_b);
    let within_a: f64 = ra.iter().map(|r| r.0).sum();
    let within_b: f64 = rb.iter().map(|r| r.0).sum();
    let cross: f64 = ra.iter().map(|r| r.1).sum();
    let value = (within_a + within_b) - cx * cross;
    let to_array = |rows: Vec<(f64, f64, Vec<f64>)>, d: usize| {
        let n = rows.len();
        Array2::from_shape_vec((n, d), rows.into_iter().flat_map(|r| r.2).collect()).expect("row lengths")
    };
    let d = a.ncols();
    (value, to_array(ra, d), to_array(rb, d))
}

/// sRMMD between `a` and `b` from `iters` plain Sinkhorn sweeps and, when
/// requested, its gradients with respect to `a` and `b`.
pub(crate) fn srmmd_unrolled(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    eps: f64,
    kernel: &KernelSpec,
    iters: usize,
    want_grad: bool,
) -> Result<(f64, Option<(Array2<f64>, Array2<f64>)>)> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension("samples have different widths".into()));
    }
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::InsufficientSamples("sRMMD needs at least two rows per sample".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
    }
    let m = a.nrows();
    let pooled = concatenate(Axis(0), &[a, b]).expect("widths checked");
    let grid = halton::generate(pooled.nrows(), pooled.ncols(), DEFAULT_START_INDEX)?;
    let state = forward(pooled.view(), &grid, eps, iters)?;
    let (ra, rb) = (state.ranks.slice(s![..m, ..]), state.ranks.slice(s![m.., ..]));
    let (value, ga, gb) = mmd_with_grad(ra, rb, kernel);
    if !want_grad {
        return Ok((value, None));
    }
    let rank_grad = concatenate(Axis(0), &[ga.view(), gb.view()]).expect("widths");
    let pg = backward(&state, pooled.view(), &grid, eps, &rank_grad);
    Ok((
        value,
        Some((pg.slice(s![..m, ..]).to_owned(), pg.slice(s![m.., ..]).to_owned())),
    ))
}
