use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::{cost_matrix, exact_assignment, sinkhorn, SinkhornConfig, TransportPlan};
use crate::error::{Error, Result};
use crate::halton::{self, HaltonGrid, DEFAULT_START_INDEX};

/// Rank vectors in `[0,1]^d`, one per source row.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftRankAssignment {
    pub ranks: Array2<f64>,
    pub epsilon: f64,
    /// `(m, n)` block sizes of the pooled sample the ranks were computed from.
    pub source_sizes: (usize, usize),
}

/// Barycentric projection: `rank_i = sum_j P_ij h_j / sum_j P_ij`.
pub fn soft_rank(plan: &TransportPlan, target: &HaltonGrid) -> Result<SoftRankAssignment> {
    let (m, n) = plan.weights.dim();
    if n != target.len() {
        return Err(Error::Dimension(format!(
            "plan has {n} columns but the grid has {} points",
            target.len()
        )));
    }
    let d = target.dim();
    let mut ranks = Array2::zeros((m, d));
    for (i, row) in plan.weights.rows().into_iter().enumerate() {
        let mass: f64 = row.sum();
        if !(mass > 0.0) {
            return Err(Error::DegeneratePlan(i));
        }
        let mut out = ranks.row_mut(i);
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                out.scaled_add(w / mass, &target.points.row(j));
            }
        }
    }
    Ok(SoftRankAssignment {
        ranks,
        epsilon: plan.epsilon,
        source_sizes: (m, 0),
    })
}

/// Hard ranks `h_{sigma(i)}` from an exact plan.
pub fn hard_ranks(plan: &TransportPlan, target: &HaltonGrid) -> Result<Array2<f64>> {
    let perm = plan
        .permutation
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("hard ranks need an exact (permutation) plan".into()))?;
    if perm.len() != target.len() {
        return Err(Error::Dimension("plan and grid sizes differ".into()));
    }
    Ok(target.points.select(Axis(0), perm))
}

/// Pools `x` and `y`, transports the pooled sample onto an `(m+n)`-point
/// Halton grid and splits the resulting ranks back into the two blocks.
///
/// `epsilon = 0` uses the exact assignment, otherwise Sinkhorn.
pub fn joint_soft_ranks(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    epsilon: f64,
    cfg: &SinkhornConfig,
) -> Result<(SoftRankAssignment, SoftRankAssignment)> {
    if x.ncols() != y.ncols() {
        return Err(Error::Dimension(format!(
            "samples have different widths: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::InsufficientSamples("both samples must be nonempty".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let (m, n) = (x.nrows(), y.nrows());
    let pooled = concatenate(Axis(0), &[x, y]).expect("widths checked");
    let grid = halton::generate(m + n, x.ncols(), DEFAULT_START_INDEX)?;
    let split = |all: &Array2<f64>, range: std::ops::Range<usize>| SoftRankAssignment {
        ranks: all.slice(s![range, ..]).to_owned(),
        epsilon,
        source_sizes: (m, n),
    };
    if epsilon == 0.0 && x.ncols() == 1 {
        let all = sorted_ranks_1d(pooled.view(), &grid);
        return Ok((split(&all, 0..m), split(&all, m..m + n)));
    }
    let cost = cost_matrix(pooled.view(), &grid)?;
    let plan = if epsilon == 0.0 {
        exact_assignment(&cost)?
    } else {
        sinkhorn(&cost, epsilon, cfg)?
    };
    let all = soft_rank(&plan, &grid)?.ranks;
    Ok((split(&all, 0..m), split(&all, m..m + n)))
}

/// In one dimension the monotone matching is optimal for squared cost: the
/// k-th smallest point gets the k-th smallest grid value. Ties are broken by
/// row index; any tie order has the same cost.
fn sorted_ranks_1d(points: ArrayView2<f64>, grid: &HaltonGrid) -> Array2<f64> {
    let order = |v: ArrayView2<f64>| {
        let mut idx: Vec<usize> = (0..v.nrows()).collect();
        idx.sort_by(|&a, &b| v[[a, 0]].total_cmp(&v[[b, 0]]).then(a.cmp(&b)));
        idx
    };
    let mut ranks = Array2::zeros((points.nrows(), 1));
    for (p, h) in order(points).into_iter().zip(order(grid.points.view())) {
        ranks[[p, 0]] = grid.points[[h, 0]];
    }
    ranks
}
