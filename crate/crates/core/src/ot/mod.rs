//! Discrete optimal transport between a sample and a Halton grid.
//!
//! Exact transport (`epsilon = 0`) reduces to a linear assignment problem; the
//! entropic problem is solved by log-domain Sinkhorn iterations. Either plan is
//! turned into ranks by barycentric projection onto the grid.

mod assignment;
mod rank;
pub(crate) mod sinkhorn;

pub use assignment::{exact_assignment, solve_assignment};
pub use rank::{hard_ranks, joint_soft_ranks, soft_rank, SoftRankAssignment};
pub use sinkhorn::{log_sum_exp, sinkhorn, SinkhornConfig};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::halton::HaltonGrid;

/// Squared Euclidean costs between source rows and grid rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub values: Array2<f64>,
}

impl CostMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    /// Wraps an arbitrary nonnegative cost table.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
        }
        Ok(Self { values })
    }
}

/// Builds `C[i, j] = ||source_i - target_j||^2`.
pub fn cost_matrix(source: ArrayView2<f64>, target: &HaltonGrid) -> Result<CostMatrix> {
    pairwise_sq_dists(source, target.points.view()).map(|values| CostMatrix { values })
}

pub(crate) fn pairwise_sq_dists(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "cost matrix needs equal shapes, got {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let (m, d) = a.dim();
    let n = b.nrows();
    let mut out = Array2::zeros((m, n));
    for i in 0..m {
        let ai = a.row(i);
        for j in 0..n {
            let bj = b.row(j);
            let mut s = 0.0;
            for k in 0..d {
                let diff = ai[k] - bj[k];
                s += diff * diff;
            }
            out[[i, j]] = s;
        }
    }
    Ok(out)
}

/// A coupling between sample rows and grid rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub weights: Array2<f64>,
    pub epsilon: f64,
    /// Largest absolute deviation of a row or column sum from its target mass.
    pub marginal_tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Row-to-column assignment for exact plans.
    pub permutation: Option<Vec<usize>>,
}

impl TransportPlan {
    /// `<C, P>`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.weights
            .iter()
            .zip(cost.values.iter())
            .map(|(p, c)| p * c)
            .sum()
    }

    /// `-sum P log P` with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    pub fn max_marginal_violation(&self) -> f64 {
        marginal_violation(&self.weights)
    }
}

pub(crate) fn marginal_violation(p: &Array2<f64>) -> f64 {
    let (m, n) = p.dim();
    let row_target = 1.0 / m as f64;
    let col_target = 1.0 / n as f64;
    let rows = p
        .rows()
        .into_iter()
        .map(|r| (r.sum() - row_target).abs())
        .fold(0.0, f64::max);
    let cols = p
        .columns()
        .into_iter()
        .map(|c| (c.sum() - col_target).abs())
        .fold(0.0, f64::max);
    rows.max(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halton;
    use ndarray::array;

    #[test]
    fn cost_one_dimensional() {
        let grid = HaltonGrid {
            points: array![[1.0]],
            bases: vec![2],
            start_index: 1,
        };
        let c = cost_matrix(array![[0.0]].view(), &grid).unwrap();
        assert_eq!(c.values, array![[1.0]]);
    }

    #[test]
    fn cost_sum_of_squares() {
        let grid = HaltonGrid {
            points: array![[1.0, 1.0]],
            bases: vec![2, 3],
            start_index: 1,
        };
        let c = cost_matrix(array![[0.0, 0.0]].view(), &grid).unwrap();
        assert_eq!(c.values, array![[2.0]]);
    }

    #[test]
    fn cost_zero_diagonal_on_identity() {
        let grid = halton::generate(6, 3, 1).unwrap();
        let c = cost_matrix(grid.points.view(), &grid).unwrap();
        for i in 0..6 {
            assert_eq!(c.values[[i, i]], 0.0);
            for j in 0..6 {
                if i != j {
                    assert!(c.values[[i, j]] > 0.0);
                }
            }
        }
    }

    #[test]
    fn cost_shape_mismatch() {
        let grid = halton::generate(3, 2, 1).unwrap();
        assert!(matches!(
            cost_matrix(Array2::zeros((3, 3)).view(), &grid),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            cost_matrix(Array2::zeros((2, 2)).view(), &grid),
            Err(Error::Dimension(_))
        ));
    }
}
