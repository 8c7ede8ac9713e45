use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stance_gp::gpc::{BinaryDataset, EpConfig};
use stance_gp::hyperopt::{optimize_evidence, KernelFamily, OptimizerConfig};
use stance_gp::kernels::{coreg_matrix, TaskedInput};
use stance_gp::textproc::SparseFeatureVector;

/// Two tasks over features `[bias, cue]`. The cue marks the positive class in
/// task 0 and, depending on `flip`, the positive or negative class in task 1.
fn two_task_data(flip: bool, seed: u64) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for task in 0..2 {
        for _ in 0..24 {
            let positive = rng.random_bool(0.5);
            let cue = if rng.random_bool(0.9) { positive } else { !positive };
            let x = SparseFeatureVector::from_dense(&[1.0, if cue { 1.0 } else { 0.0 }]).unwrap();
            inputs.push(TaskedInput::new(x, task));
            let y = if task == 1 && flip { !positive } else { positive };
            targets.push(if y { 1.0 } else { -1.0 });
        }
    }
    BinaryDataset::new(inputs, targets).unwrap()
}

fn pooled(mut data: BinaryDataset) -> BinaryDataset {
    for input in &mut data.inputs {
        input.task = 0;
    }
    data
}

fn small_cfg(restarts: usize) -> OptimizerConfig {
    OptimizerConfig {
        restarts,
        max_evals: 80,
        seed: 9,
        ..OptimizerConfig::default()
    }
}

fn correlation(data: &BinaryDataset) -> f64 {
    let res = optimize_evidence(data, KernelFamily::Icm { tasks: 2, ard: false }, &small_cfg(2), &EpConfig::default()).unwrap();
    let b = coreg_matrix(res.params.coreg.as_ref().unwrap());
    b[(0, 1)] / (b[(0, 0)] * b[(1, 1)]).sqrt()
}

#[test]
fn shared_tasks_learn_stronger_coupling_than_opposed_tasks() {
    for seed in 0..3 {
        let same = correlation(&two_task_data(false, seed));
        let anti = correlation(&two_task_data(true, seed));
        assert!(same > anti, "seed {seed}: same {same} vs anti {anti}");
    }
}

#[test]
fn more_restarts_never_lower_the_optimum() {
    let data = two_task_data(false, 1);
    let fam = KernelFamily::Icm { tasks: 2, ard: false };
    let mut prev = f64::NEG_INFINITY;
    for r in 1..=4 {
        let res = optimize_evidence(&data, fam, &small_cfg(r), &EpConfig::default()).unwrap();
        assert!(res.log_evidence >= prev, "restarts {r}: {} < {prev}", res.log_evidence);
        prev = res.log_evidence;
    }
}

#[test]
fn returned_parameters_respect_bounds() {
    let cfg = OptimizerConfig {
        log_bounds: (-1.0, 0.5),
        v_bounds: (-0.5, 0.5),
        ..small_cfg(3)
    };
    for family in [
        KernelFamily::Linear { ard: false },
        KernelFamily::Linear { ard: true },
        KernelFamily::Icm { tasks: 2, ard: false },
        KernelFamily::Icm { tasks: 2, ard: true },
    ] {
        let data = match family {
            KernelFamily::Linear { .. } => pooled(two_task_data(false, 2)),
            KernelFamily::Icm { .. } => two_task_data(false, 2),
        };
        let res = optimize_evidence(&data, family, &cfg, &EpConfig::default()).unwrap();
        let (lo, hi) = (cfg.log_bounds.0.exp(), cfg.log_bounds.1.exp());
        let inside = |v: f64| v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12);
        assert!(inside(res.params.data.variance) || res.params.data.ard_variances.is_some());
        for a in res.params.data.ard_variances.iter().flatten() {
            assert!(inside(*a), "{family:?}: ard {a}");
        }
        if let Some(c) = &res.params.coreg {
            assert!(c.kappa.iter().all(|k| inside(*k)));
            assert!(c.v.iter().all(|v| (-0.5..=0.5).contains(v)));
        }
        let trace_max = res.trace.iter().map(|t| t.objective).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.log_evidence, trace_max);
    }
}

#[test]
fn trace_is_tab_separated() {
    let res = optimize_evidence(&pooled(two_task_data(false, 3)), KernelFamily::Linear { ard: false }, &small_cfg(1), &EpConfig::default()).unwrap();
    let tsv = res.trace_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), res.trace.len() + 1);
    assert!(lines[1..].iter().all(|l| l.split('\t').count() >= 3));
}
