//! Synthetic feature distributions with known structure, and the Gaussian
//! linear response model used to score variable selection.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Distributional setting of the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Setting {
    /// `N(0, Sigma)` with `Sigma_ij = rho^|i-j|`.
    GaussianAr1 { rho: f64 },
    /// Mixture of AR(1) Gaussians, component `k` centred at `means[k] * 1`.
    Gmm3 {
        rhos: Vec<f64>,
        weights: Vec<f64>,
        means: Vec<f64>,
    },
    /// Multivariate t with `dof` degrees of freedom, scaled to unit variance.
    StudentT { rho: f64, dof: f64 },
    /// Each row is `c * eta` on a random support of size `sparsity`.
    SparseGaussian { sparsity: usize },
}

impl Setting {
    pub fn name(&self) -> &'static str {
        match self {
            Setting::GaussianAr1 { .. } => "gaussian_ar1",
            Setting::Gmm3 { .. } => "gmm3",
            Setting::StudentT { .. } => "student_t",
            Setting::SparseGaussian { .. } => "sparse_gaussian",
        }
    }

    /// Equal-weight, zero-mean mixture with AR(1) correlations 0.3/0.5/0.7.
    pub fn gmm3_default() -> Self {
        Setting::Gmm3 {
            rhos: vec![0.3, 0.5, 0.7],
            weights: vec![1.0 / 3.0; 3],
            means: vec![0.0; 3],
        }
    }

    /// Well-separated three-mode variant used to probe mode collapse.
    pub fn gmm3_separated() -> Self {
        Setting::Gmm3 {
            rhos: vec![0.6, 0.4, 0.2],
            weights: vec![0.4, 0.2, 0.4],
            means: vec![0.0, 20.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub setting: Setting,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidInput("n and d must be at least 1".into()));
        }
        let check_rho = |rho: f64| {
            if rho > -1.0 && rho < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("rho must lie in (-1, 1), got {rho}")))
            }
        };
        match &self.setting {
            Setting::GaussianAr1 { rho } => check_rho(*rho),
            Setting::Gmm3 {
                rhos,
                weights,
                means,
            } => {
                if rhos.is_empty() || rhos.len() != weights.len() || rhos.len() != means.len() {
                    return Err(Error::InvalidInput(
                        "mixture needs equally many rhos, weights and means".into(),
                    ));
                }
                rhos.iter().try_for_each(|r| check_rho(*r))?;
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidInput("mixture weights must be >= 0".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            Setting::StudentT { rho, dof } => {
                check_rho(*rho)?;
                if !(*dof > 2.0) {
                    return Err(Error::InvalidInput(format!("dof must exceed 2, got {dof}")));
                }
                Ok(())
            }
            Setting::SparseGaussian { sparsity } => {
                if *sparsity == 0 || *sparsity > self.d {
                    return Err(Error::InvalidInput(format!(
                        "sparsity must lie in 1..={}, got {sparsity}",
                        self.d
                    )));
                }
                Ok(())
            }
        }
    }
}

/// `Sigma_ij = rho^|i-j|`.
pub fn ar1_covariance(d: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |(i, j)| rho.powi(i.abs_diff(j) as i32))
}

fn cholesky(sigma: &Array2<f64>) -> Result<Array2<f64>> {
    let d = sigma.nrows();
    let m = DMatrix::from_fn(d, d, |i, j| sigma[[i, j]]);
    let l = m
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?
        .l();
    Ok(Array2::from_shape_fn((d, d), |(i, j)| l[(i, j)]))
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| StandardNormal.sample(rng))
}

/// `n` draws from `N(0, ar1(rho))`.
fn ar1_draws<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, rho: f64) -> Result<Array2<f64>> {
    let l = cholesky(&ar1_covariance(d, rho))?;
    Ok(standard_normal(rng, n, d).dot(&l.t()))
}

pub fn gaussian_ar1(spec: &SynthSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let Setting::GaussianAr1 { rho } = spec.setting else {
        return Err(Error::InvalidInput("expected a gaussian_ar1 setting".into()));
    };
    ar1_draws(&mut seeded(spec.seed), spec.n, spec.d, rho)
}

/// Mixture draws; also returns the component label of every row.
pub fn gmm3_labeled(spec: &SynthSpec) -> Result<(Array2<f64>, Vec<usize>)> {
    spec.validate()?;
    let Setting::Gmm3 {
        rhos,
        weights,
        means,
    } = &spec.setting
    else {
        return Err(Error::InvalidInput("expected a gmm3 setting".into()));
    };
    let mut rng = seeded(spec.seed);
    let labels: Vec<usize> = (0..spec.n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return k;
                }
            }
            weights.len() - 1
        })
        .collect();
    let factors = rhos
        .iter()
        .map(|&r| cholesky(&ar1_covariance(spec.d, r)))
        .collect::<Result<Vec<_>>>()?;
    let z = standard_normal(&mut rng, spec.n, spec.d);
    let mut x = Array2::zeros((spec.n, spec.d));
    for (i, &k) in labels.iter().enumerate() {
        let row = factors[k].dot(&z.row(i)) + means[k];
        x.row_mut(i).assign(&row);
    }
    Ok((x, labels))
}

pub fn gmm3(spec: &SynthSpec) -> Result<Array2<f64>> {
    gmm3_labeled(spec).map(|(x, _)| x)
}

pub fn student_t(spec: &SynthSpec) -> Result<Array2<f64>> {
    student_t_with_gamma(spec, None)
}

/// Student-t draws; `gamma_override` pins the per-row Gamma variable.
pub fn student_t_with_gamma(spec: &SynthSpec, gamma_override: Option<f64>) -> Result<Array2<f64>> {
    spec.validate()?;
    let Setting::StudentT { rho, dof } = spec.setting else {
        return Err(Error::InvalidInput("expected a student_t setting".into()));
    };
    let mut rng = seeded(spec.seed);
    let mut z = ar1_draws(&mut rng, spec.n, spec.d, rho)?;
    let gamma = Gamma::new(dof / 2.0, 2.0 / dof).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let scale = ((dof - 2.0) / dof).sqrt();
    for mut row in z.rows_mut() {
        let g: f64 = match gamma_override {
            Some(v) => v,
            None => gamma.sample(&mut rng),
        };
        row *= scale / g.sqrt();
    }
    Ok(z)
}

pub fn sparse_gaussian(spec: &SynthSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let Setting::SparseGaussian { sparsity } = spec.setting else {
        return Err(Error::InvalidInput("expected a sparse_gaussian setting".into()));
    };
    let mut rng = seeded(spec.seed);
    let c = (spec.d as f64 / sparsity as f64).sqrt();
    let mut x = Array2::zeros((spec.n, spec.d));
    for i in 0..spec.n {
        let eta: f64 = StandardNormal.sample(&mut rng);
        for j in sample(&mut rng, spec.d, sparsity).iter() {
            x[[i, j]] = c * eta;
        }
    }
    Ok(x)
}

/// Draws from whichever setting `spec` names.
pub fn generate(spec: &SynthSpec) -> Result<Array2<f64>> {
    match spec.setting {
        Setting::GaussianAr1 { .. } => gaussian_ar1(spec),
        Setting::Gmm3 { .. } => gmm3(spec),
        Setting::StudentT { .. } => student_t(spec),
        Setting::SparseGaussian { .. } => sparse_gaussian(spec),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSpec {
    pub num_nonzero: usize,
    /// Each nonzero coefficient has magnitude `amplitude / sqrt(m)`.
    pub amplitude: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
    #[serde(default = "yes")]
    pub random_signs: bool,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub y: Array1<f64>,
    /// Zero-based, ascending.
    pub support: Vec<usize>,
    pub beta: Array1<f64>,
}

/// `y = X beta + z` with a uniformly drawn support.
pub fn response(x: ArrayView2<f64>, spec: &ResponseSpec) -> Result<Response> {
    let (m, d) = x.dim();
    if spec.num_nonzero > d {
        return Err(Error::InvalidInput(format!(
            "{} nonzero coefficients requested for d={d}",
            spec.num_nonzero
        )));
    }
    if !(spec.amplitude >= 0.0) || !(spec.noise_sd >= 0.0) {
        return Err(Error::InvalidInput("amplitude and noise_sd must be >= 0".into()));
    }
    let mut rng = seeded(spec.seed);
    let mut support: Vec<usize> = sample(&mut rng, d, spec.num_nonzero).into_vec();
    support.sort_unstable();
    let magnitude = spec.amplitude / (m as f64).sqrt();
    let mut beta = Array1::zeros(d);
    for &j in &support {
        let sign = if spec.random_signs && rng.random_bool(0.5) { -1.0 } else { 1.0 };
        beta[j] = sign * magnitude;
    }
    let noise: Array1<f64> = Array1::from_shape_fn(m, |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * spec.noise_sd
    });
    let y = x.dot(&beta) + noise;
    Ok(Response { y, support, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    fn spec(setting: Setting, n: usize, d: usize) -> SynthSpec {
        SynthSpec {
            setting,
            n,
            d,
            seed: 17,
        }
    }

    fn covariance(x: &Array2<f64>) -> Array2<f64> {
        let mean = x.mean_axis(Axis(0)).unwrap();
        let c = x - &mean;
        c.t().dot(&c) / x.nrows() as f64
    }

    #[test]
    fn ar1_entries() {
        let s = ar1_covariance(5, 0.5);
        assert_eq!(s[[0, 2]], 0.25);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(s[[i, j]], 0.5f64.powi((i as i32 - j as i32).abs()));
            }
        }
    }

    #[test]
    fn independent_gaussian_covariance() {
        let x = gaussian_ar1(&spec(Setting::GaussianAr1 { rho: 0.0 }, 50_000, 3)).unwrap();
        let c = covariance(&x);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c[[i, j]] - want).abs() < 0.05);
            }
        }
    }

    #[test]
    fn ar1_empirical_covariance() {
        let x = gaussian_ar1(&spec(Setting::GaussianAr1 { rho: 0.5 }, 40_000, 4)).unwrap();
        let c = covariance(&x);
        let s = ar1_covariance(4, 0.5);
        for (a, b) in c.iter().zip(s.iter()) {
            assert!((a - b).abs() < 0.04);
        }
    }

    #[test]
    fn seeded_reproducibility() {
        for setting in [
            Setting::GaussianAr1 { rho: 0.5 },
            Setting::gmm3_default(),
            Setting::StudentT { rho: 0.5, dof: 3.0 },
            Setting::SparseGaussian { sparsity: 3 },
        ] {
            let s = spec(setting, 20, 6);
            assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        }
    }

    #[test]
    fn single_component_mixture_is_ar1() {
        let mix = spec(
            Setting::Gmm3 {
                rhos: vec![0.5],
                weights: vec![1.0],
                means: vec![0.0],
            },
            200,
            4,
        );
        let x = gmm3(&mix).unwrap();
        // same covariance factor, same normals after the label draws
        let mut rng = seeded(17);
        for _ in 0..200 {
            let _: f64 = rng.random();
        }
        let want = ar1_draws(&mut rng, 200, 4, 0.5).unwrap();
        for (a, b) in x.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_proportions() {
        let s = spec(Setting::gmm3_separated(), 30_000, 2);
        let (_, labels) = gmm3_labeled(&s).unwrap();
        for (k, w) in [0.4, 0.2, 0.4].iter().enumerate() {
            let p = labels.iter().filter(|&&l| l == k).count() as f64 / 30_000.0;
            assert!((p - w).abs() < 0.02);
            assert!((p - w).abs() < 3.0 * (w * (1.0 - w) / 30_000.0f64).sqrt());
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let s = spec(
            Setting::Gmm3 {
                rhos: vec![0.1, 0.2],
                weights: vec![0.5, 0.6],
                means: vec![0.0, 1.0],
            },
            10,
            2,
        );
        assert!(matches!(gmm3(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn student_t_unit_variance() {
        let x = student_t(&spec(Setting::StudentT { rho: 0.0, dof: 3.0 }, 100_000, 2)).unwrap();
        // heavy tails (infinite 4th moment) make this a loose check
        for j in 0..2 {
            let v = x.column(j).mapv(|a| a * a).mean().unwrap();
            assert!((v - 1.0).abs() < 0.1, "variance {v}");
        }
    }

    #[test]
    fn student_t_with_unit_gamma_is_scaled_gaussian() {
        let s = spec(Setting::StudentT { rho: 0.3, dof: 3.0 }, 10, 3);
        let x = student_t_with_gamma(&s, Some(1.0)).unwrap();
        let z = ar1_draws(&mut seeded(17), 10, 3, 0.3).unwrap();
        let scale = (1.0f64 / 3.0).sqrt();
        for (a, b) in x.iter().zip(z.iter()) {
            assert!((a - b * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn student_t_needs_dof_above_two() {
        let s = spec(Setting::StudentT { rho: 0.3, dof: 2.0 }, 10, 3);
        assert!(student_t(&s).is_err());
    }

    #[test]
    fn sparse_rows_have_sparsity_nonzeros() {
        let x = sparse_gaussian(&spec(Setting::SparseGaussian { sparsity: 4 }, 500, 10)).unwrap();
        for row in x.rows() {
            assert_eq!(row.iter().filter(|v| **v != 0.0).count(), 4);
        }
    }

    #[test]
    fn sparse_full_support() {
        let x = sparse_gaussian(&spec(Setting::SparseGaussian { sparsity: 5 }, 50, 5)).unwrap();
        for row in x.rows() {
            assert!(row.iter().all(|v| *v == row[0]));
        }
    }

    #[test]
    fn sparse_unit_variance() {
        let x = sparse_gaussian(&spec(Setting::SparseGaussian { sparsity: 3 }, 100_000, 12)).unwrap();
        for j in 0..12 {
            let v = x.column(j).mapv(|a| a * a).mean().unwrap();
            assert!((v - 1.0).abs() < 0.05, "column {j}: {v}");
        }
        assert!(sparse_gaussian(&spec(Setting::SparseGaussian { sparsity: 13 }, 1, 12)).is_err());
    }

    #[test]
    fn response_without_signal_or_noise() {
        let x = Array2::from_shape_fn((6, 3), |(i, j)| (i + j) as f64);
        let r = response(
            x.view(),
            &ResponseSpec {
                num_nonzero: 2,
                amplitude: 0.0,
                noise_sd: 1.0,
                random_signs: true,
                seed: 1,
            },
        )
        .unwrap();
        assert!(r.beta.iter().all(|b| *b == 0.0));
        assert_eq!(r.support.len(), 2);
    }

    #[test]
    fn response_hand_substitution() {
        let x = Array2::from_shape_fn((4, 1), |_| 1.0);
        let r = response(
            x.view(),
            &ResponseSpec {
                num_nonzero: 1,
                amplitude: 2.0, // a / sqrt(4) = 1
                noise_sd: 0.0,
                random_signs: false,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(r.beta[0], 1.0);
        assert_eq!(r.y.to_vec(), vec![1.0; 4]);
        assert_eq!(r.support, vec![0]);
    }

    #[test]
    fn response_reproducible() {
        let x = gaussian_ar1(&spec(Setting::GaussianAr1 { rho: 0.5 }, 30, 8)).unwrap();
        let rs = ResponseSpec {
            num_nonzero: 3,
            amplitude: 5.0,
            noise_sd: 1.0,
            random_signs: true,
            seed: 9,
        };
        assert_eq!(response(x.view(), &rs).unwrap(), response(x.view(), &rs).unwrap());
        assert!(response(x.view(), &ResponseSpec { num_nonzero: 9, ..rs }).is_err());
    }
}
