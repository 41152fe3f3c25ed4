use ndarray::{Array2, ArrayView2};

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost table.
///
/// Shortest augmenting paths with dual potentials, O(m^3). Returns
/// `assignment[row] = column`. Among equal reduced costs the lowest column
/// index is taken, so the result is deterministic under ties.
pub fn solve_assignment(cost: ArrayView2<f64>) -> Result<Vec<usize>> {
    let (m, n) = cost.dim();
    if m != n {
        return Err(Error::Dimension(format!(
            "assignment needs a square cost matrix, got {m}x{n}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidInput("empty cost matrix".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
    }

    // 1-based bookkeeping; slot 0 is the virtual source column.
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=m {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; m];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Optimal scaled-permutation plan for a square cost matrix.
pub fn exact_assignment(cost: &CostMatrix) -> Result<TransportPlan> {
    let perm = solve_assignment(cost.values.view())?;
    let m = perm.len();
    let mut weights = Array2::zeros((m, m));
    let mass = 1.0 / m as f64;
    for (i, &j) in perm.iter().enumerate() {
        weights[[i, j]] = mass;
    }
    Ok(TransportPlan {
        weights,
        epsilon: 0.0,
        marginal_tolerance: 0.0,
        iterations: 0,
        converged: true,
        permutation: Some(perm),
    })
}
