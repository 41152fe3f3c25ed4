use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

struct Moments {
    mean: Array1<f64>,
    centered: Array2<f64>,
}

fn moments(x: ArrayView2<f64>) -> Moments {
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &mean;
    Moments { mean, centered }
}

fn check(x: ArrayView2<f64>, x_knock: ArrayView2<f64>) -> Result<()> {
    if x.dim() != x_knock.dim() {
        return Err(Error::Dimension(format!(
            "features {:?} and knockoffs {:?} differ in shape",
            x.dim(),
            x_knock.dim()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InsufficientSamples("second-order loss needs a nonempty sample".into()));
    }
    Ok(())
}

/// Moment-matching penalty for a knockoff batch:
///
/// `(|mean(X~) - mean(X)|^2 + |G(X~,X~) - G(X,X)|_F^2 + |offdiag(G(X,X~) - G(X,X))|_F^2) / d`
///
/// where `G(A,B) = A_c^T B_c / n` is the centered cross-covariance.
pub fn second_order_loss(x: ArrayView2<f64>, x_knock: ArrayView2<f64>) -> Result<f64> {
    second_order_with_grad(x, x_knock).map(|(v, _)| v)
}

pub(crate) fn second_order_with_grad(x: ArrayView2<f64>, x_knock: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    check(x, x_knock)?;
    let (n, d) = x.dim();
    let (nf, df) = (n as f64, d as f64);
    let mx = moments(x);
    let my = moments(x_knock);
    let gxx = mx.centered.t().dot(&mx.centered) / nf;
    let gyy = my.centered.t().dot(&my.centered) / nf;
    let gxy = mx.centered.t().dot(&my.centered) / nf;

    let dmean = &my.mean - &mx.mean;
    let dgram = &gyy - &gxx;
    let mut dcross = &gxy - &gxx;
    dcross.diag_mut().fill(0.0);

    let sq = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>();
    let value = (dmean.dot(&dmean) + sq(&dgram) + sq(&dcross)) / df;

    let mut grad = my.centered.dot(&dgram) * (4.0 / (nf * df));
    grad += &(mx.centered.dot(&dcross) * (2.0 / (nf * df)));
    grad += &(dmean * (2.0 / (nf * df)));
    Ok((value, grad))
}
