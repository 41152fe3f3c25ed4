use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    /// `max(z, slope * z)`; `slope = 0` is the plain rectifier.
    LeakyRelu { slope: f64 },
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu { slope: 0.01 }
    }
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

/// Weights and biases of the knockoff network `f(X, V)`.
///
/// `layer_dims = [2d, h_1, ..., h_L, d]`; `weights[l]` maps layer `l` to
/// `l + 1` and has shape `(layer_dims[l], layer_dims[l + 1])`. Every layer
/// but the last is followed by the activation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
}

/// A parameter-shaped array set (gradients, optimizer moments).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamArrays {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ParamArrays {
    pub fn zeros_like(p: &GeneratorParams) -> Self {
        Self {
            weights: p.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: p.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Flat view in the order of [`GeneratorParams::get`].
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// `[2d, width_factor * d (x hidden_layers), d]`.
pub fn architecture(d: usize, hidden_layers: usize, width_factor: usize) -> Vec<usize> {
    let mut dims = vec![2 * d];
    dims.extend(std::iter::repeat_n(width_factor * d, hidden_layers));
    dims.push(d);
    dims
}

impl GeneratorParams {
    /// Uniform `(-sqrt(6/fan_in), sqrt(6/fan_in))` weights and zero biases, which
    /// keeps the activation scale roughly constant through rectifier layers.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::InvalidInput(format!("invalid layer sizes {layer_dims:?}")));
        }
        if layer_dims[0] != 2 * layer_dims[layer_dims.len() - 1] {
            return Err(Error::InvalidInput(format!(
                "input width must be twice the output width, got {layer_dims:?}"
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..bound)));
            biases.push(Array1::zeros(w[1]));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Self {
        Self {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims
                .windows(2)
                .map(|w| Array2::zeros((w[0], w[1])))
                .collect(),
            biases: layer_dims[1..].iter().map(|&n| Array1::zeros(n)).collect(),
            activation,
        }
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        *self.layer_dims.last().expect("nonempty")
    }

    /// Checks that stored arrays match `layer_dims` and are finite.
    pub fn validate(&self) -> Result<()> {
        let n = self.layer_dims.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::InvalidInput("layer count does not match the architecture".into()));
        }
        for (l, w) in self.layer_dims.windows(2).enumerate() {
            if self.weights[l].dim() != (w[0], w[1]) || self.biases[l].len() != w[1] {
                return Err(Error::InvalidInput(format!("layer {l} has the wrong shape")));
            }
        }
        if self.layer_dims[0] != 2 * self.dim() {
            return Err(Error::InvalidInput("input width must be 2d".into()));
        }
        if !self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            || !self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    fn locate(&self, mut k: usize) -> (usize, bool, usize) {
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if k < w.len() {
                return (l, true, k);
            }
            k -= w.len();
            if k < b.len() {
                return (l, false, k);
            }
            k -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter `k` in flat order: layer by layer, weights (row-major) then biases.
    pub fn get(&self, k: usize) -> f64 {
        match self.locate(k) {
            (l, true, i) => self.weights[l].as_slice().expect("standard layout")[i],
            (l, false, i) => self.biases[l][i],
        }
    }

    pub fn set(&mut self, k: usize, v: f64) {
        match self.locate(k) {
            (l, true, i) => self.weights[l].as_slice_mut().expect("standard layout")[i] = v,
            (l, false, i) => self.biases[l][i] = v,
        }
    }

    /// `self += scale * delta`.
    pub fn add_scaled(&mut self, delta: &ParamArrays, scale: f64) {
        for (w, g) in self.weights.iter_mut().zip(&delta.weights) {
            w.scaled_add(scale, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&delta.biases) {
            b.scaled_add(scale, g);
        }
    }
}

/// Pre-activations of every layer, kept for the backward pass.
pub(crate) struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

fn check_inputs(params: &GeneratorParams, x: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<()> {
    let d = params.dim();
    if x.ncols() != d || noise.dim() != x.dim() {
        return Err(Error::Dimension(format!(
            "network expects n x {d} features and noise, got {:?} and {:?}",
            x.dim(),
            noise.dim()
        )));
    }
    Ok(())
}

pub(crate) fn forward_cached(
    params: &GeneratorParams,
    x: ArrayView2<f64>,
    noise: ArrayView2<f64>,
) -> Result<(Array2<f64>, ForwardCache)> {
    check_inputs(params, x, noise)?;
    let mut h = concatenate(Axis(1), &[x, noise]).expect("equal heights");
    let last = params.weights.len() - 1;
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(last + 1),
        pre: Vec::with_capacity(last + 1),
    };
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let z = h.dot(w) + b;
        let next = if l == last {
            z.clone()
        } else {
            z.mapv(|v| params.activation.apply(v))
        };
        cache.inputs.push(std::mem::replace(&mut h, next));
        cache.pre.push(z);
    }
    Ok((h, cache))
}

/// Knockoffs `f(X, V)` for features `x` and noise `noise` (both `n x d`).
pub fn forward(params: &GeneratorParams, x: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<Array2<f64>> {
    forward_cached(params, x, noise).map(|(out, _)| out)
}

/// Parameter gradient given `d loss / d output`.
pub(crate) fn backward(params: &GeneratorParams, cache: &ForwardCache, out_grad: Array2<f64>) -> ParamArrays {
    let layers = params.weights.len();
    let mut grads = ParamArrays::zeros_like(params);
    let mut delta = out_grad;
    for l in (0..layers).rev() {
        if l != layers - 1 {
            let act = params.activation;
            delta.zip_mut_with(&cache.pre[l], |g, &z| *g *= act.derivative(z));
        }
        grads.weights[l] = cache.inputs[l].t().dot(&delta);
        grads.biases[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            delta = delta.dot(&params.weights[l].t());
        }
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn architecture_shape() {
        assert_eq!(architecture(3, 6, 5), vec![6, 15, 15, 15, 15, 15, 15, 3]);
        let p = GeneratorParams::init(&architecture(3, 6, 5), Activation::default(), &mut seeded(1)).unwrap();
        assert_eq!(p.weights.len(), 7);
        p.validate().unwrap();
        assert_eq!(p.num_params(), 6 * 15 + 15 + 5 * (15 * 15 + 15) + 15 * 3 + 3);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = GeneratorParams::zeros(&architecture(2, 2, 5), Activation::default());
        let x = array![[1.0, 2.0], [3.0, -4.0]];
        let out = forward(&p, x.view(), x.view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let p = GeneratorParams::init(&architecture(2, 3, 5), Activation::default(), &mut seeded(2)).unwrap();
        let x = array![[1.0, 2.0], [3.0, -4.0]];
        let v = array![[0.1, 0.2], [-0.3, 0.4]];
        assert_eq!(forward(&p, x.view(), v.view()).unwrap(), forward(&p, x.view(), v.view()).unwrap());
    }

    #[test]
    fn hand_traced_two_layer_network() {
        // d = 1, one hidden unit: out = w2 * act(w1 . (x, v) + b1) + b2
        let p = GeneratorParams {
            layer_dims: vec![2, 1, 1],
            weights: vec![array![[0.5], [-1.0]], array![[2.0]]],
            biases: vec![array![0.25], array![-0.1]],
            activation: Activation::LeakyRelu { slope: 0.1 },
        };
        let x = array![[2.0], [0.0]];
        let v = array![[0.5], [1.0]];
        let out = forward(&p, x.view(), v.view()).unwrap();
        // row 0: z = 1 - 0.5 + 0.25 = 0.75 -> 2 * 0.75 - 0.1 = 1.4
        // row 1: z = -1 + 0.25 = -0.75 -> 2 * (-0.075) - 0.1 = -0.25
        assert!((out[[0, 0]] - 1.4).abs() < 1e-15);
        assert!((out[[1, 0]] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let p = GeneratorParams::zeros(&architecture(2, 1, 2), Activation::default());
        let x = Array2::zeros((3, 3));
        assert!(matches!(forward(&p, x.view(), x.view()), Err(Error::Dimension(_))));
        assert!(GeneratorParams::init(&[4, 3, 3], Activation::default(), &mut seeded(0)).is_err());
    }

    #[test]
    fn flat_indexing_round_trips() {
        let mut p = GeneratorParams::init(&architecture(2, 2, 2), Activation::default(), &mut seeded(3)).unwrap();
        let n = p.num_params();
        for k in 0..n {
            let v = p.get(k);
            p.set(k, v + 1.0);
            assert_eq!(p.get(k), v + 1.0);
        }
        let mut g = ParamArrays::zeros_like(&p);
        g.biases[0][1] = 7.0;
        let flat = g.flat();
        assert_eq!(flat.len(), n);
        assert_eq!(flat[p.weights[0].len() + 1], 7.0);
    }

    #[test]
    fn backward_matches_differences_for_linear_readout() {
        // loss = sum(out * c): gradient via backward vs central differences
        let mut p = GeneratorParams::init(&architecture(2, 2, 3), Activation::default(), &mut seeded(4)).unwrap();
        let x = array![[0.3, -1.2], [1.1, 0.4], [-0.7, 0.9]];
        let v = array![[0.2, 0.1], [-0.5, 0.3], [0.8, -0.6]];
        let c = array![[1.0, -2.0], [0.5, 0.25], [-1.5, 3.0]];
        let loss = |p: &GeneratorParams| (forward(p, x.view(), v.view()).unwrap() * &c).sum();
        let (_, cache) = forward_cached(&p, x.view(), v.view()).unwrap();
        let g = backward(&p, &cache, c.clone()).flat();
        for k in 0..p.num_params() {
            let base = p.get(k);
            p.set(k, base + 1e-6);
            let up = loss(&p);
            p.set(k, base - 1e-6);
            let dn = loss(&p);
            p.set(k, base);
            assert!(((up - dn) / 2e-6 - g[k]).abs() < 1e-7, "param {k}");
        }
    }
}
