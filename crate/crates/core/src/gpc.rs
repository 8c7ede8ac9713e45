//! Binary GP classification with a probit likelihood, approximated by
//! Expectation Propagation.
//!
//! Site updates are sequential within a sweep (rank-one updates of the
//! posterior covariance); after every sweep the posterior is rebuilt from the
//! sites through the Cholesky factor of `B = I + S½ K S½`, which also serves
//! prediction.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use libm::erfc;

use crate::error::{Error, Result};
use crate::kernels::TaskedInput;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Below this, erfc loses relative accuracy and the asymptotic series is used.
const LOG_PROBIT_TAIL: f64 = -25.0;

const MAX_JITTER_ESCALATIONS: usize = 6;

/// Standard normal CDF.
pub fn probit(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn log_probit(z: f64) -> f64 {
    if z < LOG_PROBIT_TAIL {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln()
    } else if z > 5.0 {
        (-probit(-z)).ln_1p()
    } else {
        probit(z).ln()
    }
}

/// `φ(z) / Φ(z)`.
fn inverse_mills(z: f64) -> f64 {
    if z < LOG_PROBIT_TAIL {
        (-0.5 * z * z - LN_SQRT_2PI - log_probit(z)).exp()
    } else {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt() / probit(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpConfig {
    /// Convergence threshold on the largest site-parameter change in a sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Weight on the new site value when an update has to be damped.
    pub damping: f64,
}

impl Default for EpConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_sweeps: 100,
            damping: 0.5,
        }
    }
}

/// Training inputs with ±1 targets.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub inputs: Vec<TaskedInput>,
    pub targets: Vec<f64>,
}

impl BinaryDataset {
    pub fn new(inputs: Vec<TaskedInput>, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("a binary dataset needs at least one point".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        check_targets(&targets)?;
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

fn check_targets(y: &[f64]) -> Result<()> {
    match y.iter().find(|&&t| t != 1.0 && t != -1.0) {
        Some(bad) => Err(Error::InvalidInput(format!("targets must be +1 or -1, got {bad}"))),
        None => Ok(()),
    }
}

/// Gaussian EP approximation of the latent posterior of one binary problem.
#[derive(Debug, Clone)]
pub struct EpApproximation {
    /// Site natural means ν̃.
    pub site_nu: DVector<f64>,
    /// Site precisions τ̃ (nonnegative).
    pub site_tau: DVector<f64>,
    pub post_mean: DVector<f64>,
    pub post_cov: DMatrix<f64>,
    pub log_evidence: f64,
    pub sweeps: usize,
    /// False when `max_sweeps` ran out before the tolerance was met.
    pub converged: bool,
    /// Diagonal jitter added on top of the given Gram to factorize it.
    pub extra_jitter: f64,
    chol: DMatrix<f64>,
    sqrt_tau: DVector<f64>,
    mean_weights: DVector<f64>,
}

/// Predictive latent Gaussian at a test input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentPrediction {
    pub mean: f64,
    pub variance: f64,
}

struct Posterior {
    cov: DMatrix<f64>,
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    sqrt_tau: DVector<f64>,
    mean_weights: DVector<f64>,
    extra_jitter: f64,
}

/// Ensures `k` admits a Cholesky factorization, adding escalating diagonal
/// jitter if needed. Returns the matrix to use and the jitter added.
fn prepare_gram(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let scale = (k.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut k_used = k.clone();
    let mut extra_jitter = 0.0;
    for attempt in 0..=MAX_JITTER_ESCALATIONS {
        if k_used.clone().cholesky().is_some() {
            return Ok((k_used, extra_jitter));
        }
        let step = scale * 1e-6 * 10f64.powi(attempt as i32);
        extra_jitter += step;
        for i in 0..n {
            k_used[(i, i)] += step;
        }
    }
    Err(Error::NotPositiveDefinite { jitter: extra_jitter })
}

fn posterior_from_sites(k_used: &DMatrix<f64>, extra_jitter: f64, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<Posterior> {
    let n = k_used.nrows();
    let sw = tau.map(f64::sqrt);
    let b = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id + sw[i] * k_used[(i, j)] * sw[j]
    });
    let chol = b
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { jitter: extra_jitter })?
        .unpack();

    // V = L⁻¹ S½ K, Σ = K − VᵀV
    let mut sk = k_used.clone();
    for (i, mut row) in sk.row_iter_mut().enumerate() {
        row *= sw[i];
    }
    let v = chol
        .solve_lower_triangular(&sk)
        .ok_or(Error::NotPositiveDefinite { jitter: extra_jitter })?;
    let mut cov = k_used - v.transpose() * &v;
    cov = (&cov + cov.transpose()) * 0.5;
    let mean = &cov * nu;

    // mean prediction weights: ν̃ − S½ B⁻¹ S½ K ν̃
    let sk_nu = sw.component_mul(&(k_used * nu));
    let t = chol
        .solve_lower_triangular(&sk_nu)
        .and_then(|t| chol.tr_solve_lower_triangular(&t))
        .ok_or(Error::NotPositiveDefinite { jitter: extra_jitter })?;
    let mean_weights = nu - sw.component_mul(&t);

    Ok(Posterior {
        cov,
        mean,
        chol,
        sqrt_tau: sw,
        mean_weights,
        extra_jitter,
    })
}

/// EP estimate of `ln p(y | X)`, evaluated from the cavities of the final
/// posterior.
fn ep_log_evidence(post: &Posterior, y: &[f64], tau: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    let n = y.len();
    let mut sum_lz = 0.0;
    let mut t3 = 0.0;
    let mut t4 = 0.0;
    let mut t5 = 0.0;
    for i in 0..n {
        let s = post.cov[(i, i)];
        let tau_c = 1.0 / s - tau[i];
        if !(tau_c > 0.0 && tau_c.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let nu_c = post.mean[i] / s - nu[i];
        let mu_c = nu_c / tau_c;
        sum_lz += log_probit(y[i] * mu_c / (1.0 + 1.0 / tau_c).sqrt());
        t3 += nu_c * (tau[i] / tau_c * nu_c - 2.0 * nu[i]) / (tau[i] + tau_c);
        t4 += nu[i] * nu[i] / (tau_c + tau[i]);
        t5 += (tau[i] / tau_c).ln_1p();
    }
    let log_det = post.chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = nu.dot(&(&post.cov * nu));
    let neg = log_det - sum_lz - 0.5 * quad - 0.5 * t3 + 0.5 * t4 - 0.5 * t5;
    // EP's estimate of a probability of ±1 labels cannot exceed 1 in exact
    // arithmetic; trim round-off so the reported value respects that.
    (-neg).min(0.0)
}

impl EpApproximation {
    /// Rebuilds the approximation from stored site parameters without running
    /// any EP sweeps.
    pub fn from_sites(
        k: &DMatrix<f64>,
        y: &[f64],
        site_tau: DVector<f64>,
        site_nu: DVector<f64>,
        sweeps: usize,
        converged: bool,
    ) -> Result<Self> {
        let n = check_square(k, y.len())?;
        if site_tau.len() != n || site_nu.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: site_tau.len().min(site_nu.len()),
            });
        }
        let (k_used, jitter) = prepare_gram(k)?;
        let post = posterior_from_sites(&k_used, jitter, &site_tau, &site_nu)?;
        let log_evidence = ep_log_evidence(&post, y, &site_tau, &site_nu);
        Ok(Self {
            site_nu,
            site_tau,
            post_mean: post.mean,
            post_cov: post.cov,
            log_evidence,
            sweeps,
            converged,
            extra_jitter: post.extra_jitter,
            chol: post.chol,
            sqrt_tau: post.sqrt_tau,
            mean_weights: post.mean_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.site_nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site_nu.is_empty()
    }
}

fn check_square(k: &DMatrix<f64>, n: usize) -> Result<usize> {
    if k.nrows() != k.ncols() || k.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("EP needs at least one training point".into()));
    }
    Ok(n)
}

/// Moments of `Φ(y f) N(f | μ, σ²)` normalized: `(mean, variance)`.
fn probit_tilted_moments(y: f64, mu: f64, s2: f64) -> (f64, f64) {
    let denom = (1.0 + s2).sqrt();
    let z = y * mu / denom;
    let lam = inverse_mills(z);
    let mean = mu + y * s2 * lam / denom;
    let var = s2 - s2 * s2 * lam * (z + lam) / (1.0 + s2);
    (mean, var)
}

/// Fits the EP approximation for Gram `k` and ±1 targets `y`.
pub fn ep_fit(k: &DMatrix<f64>, y: &[f64], cfg: &EpConfig) -> Result<EpApproximation> {
    let n = check_square(k, y.len())?;
    check_targets(y)?;

    let mut tau = DVector::<f64>::zeros(n);
    let mut nu = DVector::<f64>::zeros(n);
    let (k_used, jitter) = prepare_gram(k)?;
    let mut post = posterior_from_sites(&k_used, jitter, &tau, &nu)?;
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut sigma = post.cov.clone();
        let mut mu = post.mean.clone();
        let mut max_change: f64 = 0.0;

        for i in 0..n {
            let s_ii = sigma[(i, i)];
            let tau_c = 1.0 / s_ii - tau[i];
            let nu_c = mu[i] / s_ii - nu[i];
            if !(tau_c > 0.0 && tau_c.is_finite()) {
                continue;
            }
            let (m_hat, v_hat) = probit_tilted_moments(y[i], nu_c / tau_c, 1.0 / tau_c);
            if !(v_hat > 0.0 && v_hat.is_finite() && m_hat.is_finite()) {
                continue;
            }
            let mut new_tau = 1.0 / v_hat - tau_c;
            let mut new_nu = m_hat / v_hat - nu_c;
            let keeps_valid = |t: f64| t >= 0.0 && 1.0 + (t - tau[i]) * s_ii > 0.0;
            if !keeps_valid(new_tau) {
                new_tau = cfg.damping * new_tau + (1.0 - cfg.damping) * tau[i];
                new_nu = cfg.damping * new_nu + (1.0 - cfg.damping) * nu[i];
                if !keeps_valid(new_tau) {
                    new_tau = tau[i].max(0.0);
                    new_nu = nu[i];
                }
            }
            let d_tau = new_tau - tau[i];
            max_change = max_change.max(d_tau.abs()).max((new_nu - nu[i]).abs());
            tau[i] = new_tau;
            nu[i] = new_nu;

            let c = d_tau / (1.0 + d_tau * s_ii);
            let si = sigma.column(i).into_owned();
            sigma.ger(-c, &si, &si, 1.0);
            mu = &sigma * &nu;
        }

        post = posterior_from_sites(&k_used, jitter, &tau, &nu)?;
        if max_change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let log_evidence = ep_log_evidence(&post, y, &tau, &nu);
    Ok(EpApproximation {
        site_nu: nu,
        site_tau: tau,
        post_mean: post.mean,
        post_cov: post.cov,
        log_evidence,
        sweeps,
        converged,
        extra_jitter: post.extra_jitter,
        chol: post.chol,
        sqrt_tau: post.sqrt_tau,
        mean_weights: post.mean_weights,
    })
}

/// Predictive latent mean and variance at a test point with cross-covariances
/// `k_star` and prior variance `k_ss`.
pub fn predict_latent(approx: &EpApproximation, k: &DMatrix<f64>, k_star: &[f64], k_ss: f64) -> Result<LatentPrediction> {
    let n = approx.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    if k_star.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k_star.len(),
        });
    }
    let ks = DVector::from_column_slice(k_star);
    let mean = ks.dot(&approx.mean_weights);
    let v = approx
        .chol
        .solve_lower_triangular(&approx.sqrt_tau.component_mul(&ks))
        .ok_or(Error::NotPositiveDefinite { jitter: approx.extra_jitter })?;
    let variance = k_ss - v.dot(&v);
    if variance < -1e-10 * k_ss.abs().max(1.0) {
        return Err(Error::NegativeVariance(variance));
    }
    Ok(LatentPrediction {
        mean,
        variance: variance.max(0.0),
    })
}

/// `p(y* = +1) = Φ(μ* / √(1 + σ*²))`.
pub fn predict_prob(lp: &LatentPrediction) -> f64 {
    probit(lp.mean / (1.0 + lp.variance).sqrt())
}
