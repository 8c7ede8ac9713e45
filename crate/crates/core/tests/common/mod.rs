//! Test-only numerical oracles, independent of the EP code path.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use stance_gp::kernels::{CoregionalizationParams, KernelParams, LinearKernelParams, TaskedInput};
use stance_gp::textproc::SparseFeatureVector;
use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Random PSD matrix `s · A Aᵀ / n` with standard normal `A`.
pub fn random_psd<R: Rng>(n: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let k = &a * a.transpose() * (scale / n as f64);
    (&k + k.transpose()) * 0.5
}

pub fn random_labels<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Evidence and posterior mean of probit GP classification by the GHK
/// sequential-conditioning sampler.
///
/// With `g = f + ε`, `ε ~ N(0, I)`, the probit likelihood is the indicator
/// `y ⊙ g > 0`, so `Z = P(y ⊙ g > 0)` is an orthant probability of
/// `N(0, K + I)` and `E[f | y] = K (K + I)⁻¹ E[g | y]`.
pub fn ghk_oracle<R: Rng>(k: &DMatrix<f64>, y: &[f64], samples: usize, rng: &mut R) -> (f64, DVector<f64>) {
    let (log_z, mean, _) = ghk_oracle_with_error(k, y, samples, rng);
    (log_z, mean)
}

/// [`ghk_oracle`] plus the delta-method standard error of `log Z`.
pub fn ghk_oracle_with_error<R: Rng>(k: &DMatrix<f64>, y: &[f64], samples: usize, rng: &mut R) -> (f64, DVector<f64>, f64) {
    let n = y.len();
    let phi = std_normal();
    let cov_g = k + DMatrix::identity(n, n);
    let c = DMatrix::from_fn(n, n, |i, j| y[i] * cov_g[(i, j)] * y[j]);
    let l = c.cholesky().expect("K + I is positive definite").unpack();

    let mut sum_w = 0.0;
    let mut sum_w2 = 0.0;
    let mut sum_wh = DVector::zeros(n);
    let mut e = vec![0.0; n];
    for _ in 0..samples {
        let mut w = 1.0;
        for i in 0..n {
            let partial: f64 = (0..i).map(|j| l[(i, j)] * e[j]).sum();
            let a = -partial / l[(i, i)];
            let p = phi.cdf(-a);
            w *= p;
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            e[i] = -phi.inverse_cdf((u * p).clamp(1e-300, 1.0 - 1e-16));
        }
        let ev = DVector::from_column_slice(&e);
        let h = &l * ev;
        sum_w += w;
        sum_w2 += w * w;
        sum_wh += h * w;
    }
    let ns = samples as f64;
    let z = sum_w / ns;
    let var_w = (sum_w2 / ns - z * z).max(0.0);
    let se = (var_w / ns).sqrt() / z;
    let mean_h = sum_wh / sum_w;
    let mean_g = DVector::from_fn(n, |i, _| y[i] * mean_h[i]);
    let mean_f = k * cov_g.cholesky().unwrap().solve(&mean_g);
    (z.ln(), mean_f, se)
}

/// Plain Monte Carlo of `∫ Φ(f) N(f | μ, σ²) df`.
pub fn mc_predictive<R: Rng>(mu: f64, var: f64, samples: usize, rng: &mut R) -> f64 {
    let phi = std_normal();
    let sd = var.sqrt();
    let mut acc = 0.0;
    for _ in 0..samples {
        let eps: f64 = rng.sample(StandardNormal);
        acc += phi.cdf(mu + sd * eps);
    }
    acc / samples as f64
}

/// Sparse nonnegative count vectors with roughly 40% nonzeros.
pub fn random_sparse<R: Rng>(dims: usize, rng: &mut R) -> SparseFeatureVector {
    let dense: Vec<f64> = (0..dims)
        .map(|_| if rng.random_bool(0.4) { rng.random_range(1..4) as f64 } else { 0.0 })
        .collect();
    SparseFeatureVector::from_dense(&dense).unwrap()
}

pub fn random_inputs<R: Rng>(n: usize, dims: usize, tasks: usize, rng: &mut R) -> Vec<TaskedInput> {
    (0..n)
        .map(|_| TaskedInput::new(random_sparse(dims, rng), rng.random_range(0..tasks)))
        .collect()
}

/// Random kernel parameters; ICM when `tasks > 1`, ARD with probability 1/2.
pub fn random_params<R: Rng>(dims: usize, tasks: usize, rng: &mut R) -> KernelParams {
    let log_uniform = |rng: &mut R| rng.random_range(-3.0f64..3.0).exp();
    let data = if rng.random_bool(0.5) {
        LinearKernelParams::ard((0..dims).map(|_| log_uniform(rng)).collect())
    } else {
        LinearKernelParams::new(log_uniform(rng))
    };
    let coreg = (tasks > 1).then(|| {
        CoregionalizationParams::new(
            (0..tasks).map(|_| log_uniform(rng)).collect(),
            (0..tasks).map(|_| rng.random_range(-3.0..3.0)).collect(),
        )
        .unwrap()
    });
    KernelParams { data, coreg }
}

pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    k.clone().symmetric_eigen().eigenvalues.min()
}
