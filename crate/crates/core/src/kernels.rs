//! Linear (optionally ARD) and ICM coregionalization kernels over sparse inputs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::textproc::SparseFeatureVector;

/// Relative diagonal jitter used when none is given explicitly.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-6;

/// `k(x, x') = σ² xᵀx'`, or `Σ aᵢ xᵢ x'ᵢ` when per-feature variances are set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearKernelParams {
    pub variance: f64,
    pub ard_variances: Option<Vec<f64>>,
}

impl LinearKernelParams {
    pub fn new(variance: f64) -> Self {
        Self {
            variance,
            ard_variances: None,
        }
    }

    pub fn ard(variances: Vec<f64>) -> Self {
        Self {
            variance: 1.0,
            ard_variances: Some(variances),
        }
    }

    pub fn validate(&self, dims: Option<usize>) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!("variance must be positive, got {}", self.variance)));
        }
        if let Some(ard) = &self.ard_variances {
            if let Some(d) = dims.filter(|&d| d != ard.len()) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: ard.len(),
                });
            }
            if let Some(bad) = ard.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                return Err(Error::InvalidParameter(format!("ARD variances must be positive, got {bad}")));
            }
        }
        Ok(())
    }
}

/// Coregionalization matrix `B = diag(κ) + v vᵀ` over `D` tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct CoregionalizationParams {
    pub kappa: Vec<f64>,
    pub v: Vec<f64>,
}

impl CoregionalizationParams {
    pub fn new(kappa: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let p = Self { kappa, v };
        p.validate()?;
        Ok(p)
    }

    pub fn num_tasks(&self) -> usize {
        self.kappa.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa.is_empty() {
            return Err(Error::InvalidParameter("at least one task is required".into()));
        }
        if self.kappa.len() != self.v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kappa.len(),
                actual: self.v.len(),
            });
        }
        if self.kappa.iter().any(|k| !(*k >= 0.0 && k.is_finite())) || self.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("kappa must be nonnegative and v finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn entry(&self, d: usize, d2: usize) -> f64 {
        let diag = if d == d2 { self.kappa[d] } else { 0.0 };
        diag + self.v[d] * self.v[d2]
    }
}

/// A feature vector tagged with its task (rumour) index.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskedInput {
    pub x: SparseFeatureVector,
    pub task: usize,
}

impl TaskedInput {
    pub fn new(x: SparseFeatureVector, task: usize) -> Self {
        Self { x, task }
    }

    pub fn single_task(x: SparseFeatureVector) -> Self {
        Self { x, task: 0 }
    }
}

pub fn linear_kernel(x: &SparseFeatureVector, x2: &SparseFeatureVector, p: &LinearKernelParams) -> Result<f64> {
    if x.dims() != x2.dims() {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            actual: x2.dims(),
        });
    }
    match &p.ard_variances {
        Some(ard) => {
            if ard.len() != x.dims() {
                return Err(Error::DimensionMismatch {
                    expected: x.dims(),
                    actual: ard.len(),
                });
            }
            Ok(x.weighted_dot(x2, Some(ard)))
        }
        None => Ok(p.variance * x.dot(x2)),
    }
}

pub fn coreg_matrix(p: &CoregionalizationParams) -> DMatrix<f64> {
    let d = p.num_tasks();
    DMatrix::from_fn(d, d, |i, j| p.entry(i, j))
}

pub fn icm_kernel(
    a: &TaskedInput,
    b: &TaskedInput,
    p_data: &LinearKernelParams,
    p_coreg: &CoregionalizationParams,
) -> Result<f64> {
    let tasks = p_coreg.num_tasks();
    for t in [a.task, b.task] {
        if t >= tasks {
            return Err(Error::TaskOutOfRange { task: t, tasks });
        }
    }
    Ok(linear_kernel(&a.x, &b.x, p_data)? * p_coreg.entry(a.task, b.task))
}

/// Full hyperparameter set of one binary classifier: a linear data kernel,
/// optionally wrapped in an ICM coregionalization.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub data: LinearKernelParams,
    pub coreg: Option<CoregionalizationParams>,
}

impl KernelParams {
    pub fn linear(variance: f64) -> Self {
        Self {
            data: LinearKernelParams::new(variance),
            coreg: None,
        }
    }

    pub fn eval(&self, a: &TaskedInput, b: &TaskedInput) -> Result<f64> {
        match &self.coreg {
            Some(c) => icm_kernel(a, b, &self.data, c),
            None => {
                if a.task != 0 || b.task != 0 {
                    return Err(Error::TaskOutOfRange {
                        task: a.task.max(b.task),
                        tasks: 1,
                    });
                }
                linear_kernel(&a.x, &b.x, &self.data)
            }
        }
    }

    /// Kernel values between `x` and each training input.
    pub fn cross(&self, inputs: &[TaskedInput], x: &TaskedInput) -> Result<Vec<f64>> {
        inputs.iter().map(|xi| self.eval(xi, x)).collect()
    }
}

/// Symmetric Gram matrix with `jitter` added to the diagonal. Only the upper
/// triangle is evaluated; the lower one is mirrored so symmetry is exact.
pub fn gram<T, F>(inputs: &[T], kernel: F, jitter: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&T, &T) -> Result<f64>,
{
    let n = inputs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let k = kernel(&inputs[i], &inputs[j])?;
            g[(i, j)] = k;
            g[(j, i)] = k;
        }
        g[(i, i)] += jitter;
    }
    Ok(g)
}

/// Absolute jitter for a Gram matrix: `relative` times its mean diagonal, or
/// `relative` itself when the diagonal is all zero.
pub fn relative_jitter(g: &DMatrix<f64>, relative: f64) -> f64 {
    let n = g.nrows();
    if n == 0 {
        return relative;
    }
    let mean = g.diagonal().sum() / n as f64;
    if mean > 0.0 {
        relative * mean
    } else {
        relative
    }
}

/// Training Gram for `params` with the default relative jitter.
pub fn training_gram(inputs: &[TaskedInput], params: &KernelParams, relative: f64) -> Result<DMatrix<f64>> {
    let mut g = gram(inputs, |a, b| params.eval(a, b), 0.0)?;
    let jitter = relative_jitter(&g, relative);
    for i in 0..g.nrows() {
        g[(i, i)] += jitter;
    }
    Ok(g)
}
