use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{srmmd, KernelSpec};
use crate::error::{Error, Result};
use crate::ot::SinkhornConfig;

/// A set of feature columns exchanged with their knockoff counterparts.
///
/// Indices are zero-based column positions in `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapPattern {
    indices: Vec<usize>,
    d: usize,
}

impl SwapPattern {
    pub fn new(mut indices: Vec<usize>, d: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("swap indices must be unique".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= d) {
            return Err(Error::InvalidInput(format!("swap index {bad} out of range for d={d}")));
        }
        Ok(Self { indices, d })
    }

    pub fn empty(d: usize) -> Self {
        Self { indices: vec![], d }
    }

    pub fn full(d: usize) -> Self {
        Self {
            indices: (0..d).collect(),
            d,
        }
    }

    /// Each column is included independently with probability 1/2.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self {
            indices: (0..d).filter(|_| rng.random_bool(0.5)).collect(),
            d,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Exchanges columns `j` and `d + j` for every `j` in the pattern.
pub fn apply_swap(joint: ArrayView2<f64>, pattern: &SwapPattern) -> Result<Array2<f64>> {
    if joint.ncols() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "joint matrix must have even width, got {}",
            joint.ncols()
        )));
    }
    let d = joint.ncols() / 2;
    if pattern.d != d {
        return Err(Error::Dimension(format!(
            "pattern is for d={}, joint matrix has d={d}",
            pattern.d
        )));
    }
    let mut out = joint.to_owned();
    for &j in &pattern.indices {
        out.column_mut(j).assign(&joint.column(d + j));
        out.column_mut(d + j).assign(&joint.column(j));
    }
    Ok(out)
}

/// The three joint blocks compared by the swap loss:
/// `(X', X~')`, `(X~'', X'')` and `(X'', X~'')` with `pattern` applied.
pub(crate) fn swap_blocks(
    x: ArrayView2<f64>,
    x_knock: ArrayView2<f64>,
    pattern: &SwapPattern,
) -> Result<[Array2<f64>; 3]> {
    if x.dim() != x_knock.dim() {
        return Err(Error::Dimension(format!(
            "features {:?} and knockoffs {:?} differ in shape",
            x.dim(),
            x_knock.dim()
        )));
    }
    let n = x.nrows();
    if n % 2 != 0 || n < 4 {
        return Err(Error::Dimension(format!(
            "swap loss needs an even row count >= 4, got {n}"
        )));
    }
    let h = n / 2;
    let (x1, x2) = (x.slice(s![..h, ..]), x.slice(s![h.., ..]));
    let (k1, k2) = (x_knock.slice(s![..h, ..]), x_knock.slice(s![h.., ..]));
    let cat = |a, b| concatenate(Axis(1), &[a, b]).expect("equal heights");
    let first = cat(x1, k1);
    let flipped = cat(k2, x2);
    let swapped = apply_swap(cat(x2, k2).view(), pattern)?;
    Ok([first, flipped, swapped])
}

/// `sRMMD[(X',X~'), (X~'',X'')] + sRMMD[(X',X~'), (X'',X~'')_swap(B)]` for a
/// given swap set `B`. Rows are split into first and second halves.
pub fn swap_loss_srmmd_with(
    x: ArrayView2<f64>,
    x_knock: ArrayView2<f64>,
    epsilon: f64,
    kernel: &KernelSpec,
    cfg: &SinkhornConfig,
    pattern: &SwapPattern,
) -> Result<f64> {
    let [first, flipped, swapped] = swap_blocks(x, x_knock, pattern)?;
    let a = srmmd(first.view(), flipped.view(), epsilon, kernel, cfg)?;
    let b = srmmd(first.view(), swapped.view(), epsilon, kernel, cfg)?;
    Ok(a + b)
}

/// Swap loss with `B` drawn from `rng` (each column with probability 1/2).
pub fn swap_loss_srmmd<R: Rng + ?Sized>(
    x: ArrayView2<f64>,
    x_knock: ArrayView2<f64>,
    epsilon: f64,
    kernel: &KernelSpec,
    cfg: &SinkhornConfig,
    rng: &mut R,
) -> Result<f64> {
    let pattern = SwapPattern::random(x.ncols(), rng);
    swap_loss_srmmd_with(x, x_knock, epsilon, kernel, cfg, &pattern)
}
