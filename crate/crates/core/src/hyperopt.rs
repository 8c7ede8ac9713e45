//! Hyperparameter selection by maximizing the EP log evidence.
//!
//! Positive parameters (σ², κ, ARD variances) are searched in log space and
//! the coregionalization vector `v` in linear space, all inside box bounds.
//! Each restart runs a bounded Nelder–Mead simplex search; ARD variances are
//! fitted afterwards by coordinate passes around the scalar solution.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gpc::{ep_fit, BinaryDataset, EpConfig};
use crate::kernels::{training_gram, CoregionalizationParams, KernelParams, LinearKernelParams, DEFAULT_RELATIVE_JITTER};

/// Kernel family whose hyperparameters are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Linear { ard: bool },
    /// ICM over a linear data kernel with `tasks` tasks.
    Icm { tasks: usize, ard: bool },
}

impl KernelFamily {
    pub fn is_ard(&self) -> bool {
        match *self {
            KernelFamily::Linear { ard } | KernelFamily::Icm { ard, .. } => ard,
        }
    }

    pub fn tasks(&self) -> usize {
        match *self {
            KernelFamily::Linear { .. } => 1,
            KernelFamily::Icm { tasks, .. } => tasks,
        }
    }

    pub fn without_ard(self) -> Self {
        match self {
            KernelFamily::Linear { .. } => KernelFamily::Linear { ard: false },
            KernelFamily::Icm { tasks, .. } => KernelFamily::Icm { tasks, ard: false },
        }
    }

    pub fn name(&self) -> String {
        match *self {
            KernelFamily::Linear { ard: false } => "linear".into(),
            KernelFamily::Linear { ard: true } => "linear-ard".into(),
            KernelFamily::Icm { tasks, ard: false } => format!("icm:{tasks}"),
            KernelFamily::Icm { tasks, ard: true } => format!("icm-ard:{tasks}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown kernel family '{s}'"));
        match s {
            "linear" => Ok(KernelFamily::Linear { ard: false }),
            "linear-ard" => Ok(KernelFamily::Linear { ard: true }),
            _ => {
                let (head, tasks) = s.split_once(':').ok_or_else(bad)?;
                let tasks: usize = tasks.parse().map_err(|_| bad())?;
                if tasks == 0 {
                    return Err(bad());
                }
                match head {
                    "icm" => Ok(KernelFamily::Icm { tasks, ard: false }),
                    "icm-ard" => Ok(KernelFamily::Icm { tasks, ard: true }),
                    _ => Err(bad()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Evidence evaluations per restart.
    pub max_evals: usize,
    /// Bounds on the logarithm of every positive parameter.
    pub log_bounds: (f64, f64),
    /// Bounds on every entry of `v`.
    pub v_bounds: (f64, f64),
    /// Simplex stops once its objective spread falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Coordinate passes over the ARD variances.
    pub ard_passes: usize,
    /// Evidence evaluations per ARD coordinate and pass.
    pub ard_evals_per_coord: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_evals: 200,
            log_bounds: (-4.0, 4.0),
            v_bounds: (-3.0, 3.0),
            tolerance: 1e-3,
            seed: 0,
            ard_passes: 2,
            ard_evals_per_coord: 8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_evals == 0 {
            return Err(Error::InvalidParameter("restarts and max_evals must be at least 1".into()));
        }
        for (lo, hi) in [self.log_bounds, self.v_bounds] {
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!("bound ({lo}, {hi}) must satisfy lo < hi")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One evidence evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub eval: usize,
    /// Restart index, or `None` for the ARD coordinate stage.
    pub restart: Option<usize>,
    /// Parameters in the search space (log for positive ones).
    pub point: Vec<f64>,
    /// Log evidence, `-inf` when EP failed at this point.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub params: KernelParams,
    pub log_evidence: f64,
    pub trace: Vec<TraceEntry>,
}

impl OptimizeResult {
    /// Tab-separated trace: eval index, restart, comma-joined point, objective.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("eval\trestart\tparams\tobjective\n");
        for t in &self.trace {
            let restart = t.restart.map_or_else(|| "ard".to_string(), |r| r.to_string());
            let point: Vec<String> = t.point.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", t.eval, restart, point.join(","), t.objective);
        }
        out
    }
}

/// Maps between the search vector and kernel parameters of a non-ARD family.
struct Layout {
    tasks: Option<usize>,
}

impl Layout {
    fn new(family: KernelFamily) -> Self {
        match family {
            KernelFamily::Linear { .. } => Self { tasks: None },
            KernelFamily::Icm { tasks, .. } => Self { tasks: Some(tasks) },
        }
    }

    fn bounds(&self, cfg: &OptimizerConfig) -> Vec<(f64, f64)> {
        let mut b = vec![cfg.log_bounds];
        if let Some(d) = self.tasks {
            b.extend(std::iter::repeat(cfg.log_bounds).take(d));
            b.extend(std::iter::repeat(cfg.v_bounds).take(d));
        }
        b
    }

    /// First restart: positive parameters at the centre of their log bounds,
    /// `v` at one (shared and task-specific covariance in equal parts).
    fn initial(&self, cfg: &OptimizerConfig) -> Vec<f64> {
        let mid = 0.5 * (cfg.log_bounds.0 + cfg.log_bounds.1);
        let mut x = vec![mid];
        if let Some(d) = self.tasks {
            x.extend(std::iter::repeat(mid).take(d));
            x.extend(std::iter::repeat(1.0f64.clamp(cfg.v_bounds.0, cfg.v_bounds.1)).take(d));
        }
        x
    }

    fn params(&self, theta: &[f64]) -> KernelParams {
        let coreg = self.tasks.map(|d| CoregionalizationParams {
            kappa: theta[1..1 + d].iter().map(|t| t.exp()).collect(),
            v: theta[1 + d..1 + 2 * d].to_vec(),
        });
        KernelParams {
            data: LinearKernelParams::new(theta[0].exp()),
            coreg,
        }
    }
}

fn evidence(data: &BinaryDataset, params: &KernelParams, ep: &EpConfig) -> f64 {
    let Ok(k) = training_gram(&data.inputs, params, DEFAULT_RELATIVE_JITTER) else {
        return f64::NEG_INFINITY;
    };
    match ep_fit(&k, &data.targets, ep) {
        Ok(a) if a.log_evidence.is_finite() => a.log_evidence,
        _ => f64::NEG_INFINITY,
    }
}

fn clamp_to(point: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, &(lo, hi)) in point.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
}

/// Bounded Nelder–Mead maximization. Every evaluation is reported to `f`.
fn nelder_mead<F>(mut f: F, x0: Vec<f64>, bounds: &[(f64, f64)], max_evals: usize, tolerance: f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    // minimize the negated objective
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for i in 0..n {
        if evals >= max_evals {
            return;
        }
        let (lo, hi) = bounds[i];
        let step = 0.125 * (hi - lo);
        let mut x = x0.clone();
        x[i] = if x0[i] + step <= hi { x0[i] + step } else { x0[i] - step };
        clamp_to(&mut x, bounds);
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && (worst - best).abs() < tolerance {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect();
            clamp_to(&mut p, bounds);
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= max_evals {
                break;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink towards the best vertex
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let mut x: Vec<f64> = best_x.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    clamp_to(&mut x, bounds);
                    let v = eval(&x, &mut evals);
                    *vertex = (x, v);
                }
            }
        }
    }
}

fn restart_start(restart: usize, initial: &[f64], bounds: &[(f64, f64)], seed: u64) -> Vec<f64> {
    if restart == 0 {
        return initial.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
}

/// Maximizes the EP log evidence of `data` over the hyperparameters of
/// `family`. Returns the best point seen across all restarts (ties go to the
/// earliest evaluation).
pub fn optimize_evidence(
    data: &BinaryDataset,
    family: KernelFamily,
    cfg: &OptimizerConfig,
    ep: &EpConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    let dims = data.inputs[0].x.dims();
    if let Some(bad) = data.inputs.iter().find(|i| i.x.dims() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: bad.x.dims(),
        });
    }
    let tasks = family.tasks();
    if let Some(bad) = data.inputs.iter().find(|i| i.task >= tasks) {
        return Err(Error::TaskOutOfRange { task: bad.task, tasks });
    }

    let layout = Layout::new(family);
    let bounds = layout.bounds(cfg);
    let initial = layout.initial(cfg);
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for restart in 0..cfg.restarts {
        let x0 = restart_start(restart, &initial, &bounds, cfg.seed);
        nelder_mead(
            |theta| {
                let obj = evidence(data, &layout.params(theta), ep);
                trace.push(TraceEntry {
                    eval: trace.len(),
                    restart: Some(restart),
                    point: theta.to_vec(),
                    objective: obj,
                });
                if obj.is_finite() && best.as_ref().is_none_or(|(b, _)| obj > *b) {
                    best = Some((obj, theta.to_vec()));
                }
                obj
            },
            x0,
            &bounds,
            cfg.max_evals,
            cfg.tolerance,
        );
    }

    let Some((mut best_obj, theta)) = best else {
        return Err(Error::OptimizationFailed {
            failures: trace.into_iter().map(|t| t.point).collect(),
        });
    };
    let mut params = layout.params(&theta);

    if family.is_ard() {
        let (obj, ard) = ard_coordinate_search(data, &params, dims, cfg, ep, &mut trace, best_obj);
        best_obj = obj;
        params.data = LinearKernelParams::ard(ard);
    }

    Ok(OptimizeResult {
        params,
        log_evidence: best_obj,
        trace,
    })
}

/// Golden-section passes over each ARD log-variance in turn, starting from
/// the scalar variance in `base`. Features that never occur in the data do
/// not affect the evidence and keep the starting value.
fn ard_coordinate_search(
    data: &BinaryDataset,
    base: &KernelParams,
    dims: usize,
    cfg: &OptimizerConfig,
    ep: &EpConfig,
    trace: &mut Vec<TraceEntry>,
    base_obj: f64,
) -> (f64, Vec<f64>) {
    let mut log_ard = vec![base.data.variance.ln(); dims];
    let mut present = vec![false; dims];
    for input in &data.inputs {
        for &(i, _) in input.x.pairs() {
            present[i] = true;
        }
    }
    let active: Vec<usize> = (0..dims).filter(|&i| present[i]).collect();
    let mut current = base_obj;
    let (lo, hi) = cfg.log_bounds;
    let golden = 0.5 * (5f64.sqrt() - 1.0);

    let objective = |log_ard: &[f64], trace: &mut Vec<TraceEntry>| {
        let params = KernelParams {
            data: LinearKernelParams::ard(log_ard.iter().map(|a| a.exp()).collect()),
            coreg: base.coreg.clone(),
        };
        let obj = evidence(data, &params, ep);
        trace.push(TraceEntry {
            eval: trace.len(),
            restart: None,
            point: log_ard.to_vec(),
            objective: obj,
        });
        obj
    };

    for _ in 0..cfg.ard_passes {
        for &j in &active {
            let mut probe = log_ard.clone();
            let mut eval_at = |x: f64, trace: &mut Vec<TraceEntry>| {
                probe[j] = x;
                (objective(&probe, trace), x)
            };
            let (mut a, mut b) = (lo, hi);
            let mut c = b - golden * (b - a);
            let mut d = a + golden * (b - a);
            let mut fc = eval_at(c, trace);
            let mut fd = eval_at(d, trace);
            let mut best_here = if fd.0 > fc.0 { fd } else { fc };
            for _ in 2..cfg.ard_evals_per_coord {
                if fc.0 >= fd.0 {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - golden * (b - a);
                    fc = eval_at(c, trace);
                    if fc.0 > best_here.0 {
                        best_here = fc;
                    }
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + golden * (b - a);
                    fd = eval_at(d, trace);
                    if fd.0 > best_here.0 {
                        best_here = fd;
                    }
                }
            }
            if best_here.0 > current {
                current = best_here.0;
                log_ard[j] = best_here.1;
            }
        }
    }
    (current, log_ard.iter().map(|a| a.exp()).collect())
}
