mod common;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stance_gp::gpc::{ep_fit, predict_prob, EpConfig, LatentPrediction};

fn tight() -> EpConfig {
    EpConfig {
        tolerance: 1e-13,
        max_sweeps: 1000,
        ..EpConfig::default()
    }
}

#[test]
fn label_flip_negates_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..40 {
        let n = 2 + trial % 10;
        let k = common::random_psd(n, 0.5 + (trial % 4) as f64, &mut rng) + DMatrix::identity(n, n) * 1e-6;
        let y = common::random_labels(n, &mut rng);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = ep_fit(&k, &y, &EpConfig::default()).unwrap();
        let b = ep_fit(&k, &neg, &EpConfig::default()).unwrap();
        assert!((&a.post_mean + &b.post_mean).amax() < 1e-9);
        assert!((a.log_evidence - b.log_evidence).abs() < 1e-9);
    }
}

#[test]
fn permutation_leaves_evidence_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for trial in 0..40 {
        let n = 2 + trial % 10;
        let k = common::random_psd(n, 0.5 + (trial % 4) as f64, &mut rng) + DMatrix::identity(n, n) * 1e-6;
        let y = common::random_labels(n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let kp = DMatrix::from_fn(n, n, |i, j| k[(perm[i], perm[j])]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let a = ep_fit(&k, &y, &tight()).unwrap();
        let b = ep_fit(&kp, &yp, &tight()).unwrap();
        assert!(a.converged && b.converged);
        worst = worst.max((a.log_evidence - b.log_evidence).abs());
        for (i, &p) in perm.iter().enumerate() {
            assert!((b.post_mean[i] - a.post_mean[p]).abs() < 1e-8);
        }
    }
    assert!(worst < 1e-9, "worst evidence deviation {worst:e}");
}

#[test]
fn site_precisions_stay_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..30 {
        let n = 1 + trial % 12;
        let k = common::random_psd(n, 10.0, &mut rng) + DMatrix::identity(n, n) * 1e-6;
        let y = common::random_labels(n, &mut rng);
        let ep = ep_fit(&k, &y, &EpConfig::default()).unwrap();
        assert!(ep.site_tau.iter().all(|&t| t >= 0.0));
        assert!(ep.log_evidence <= 0.0);
        assert!(ep.post_cov.diagonal().iter().all(|&v| v >= 0.0));
        assert_eq!(ep.post_cov, ep.post_cov.transpose());
    }
}

#[test]
fn predictive_probability_is_monotone_and_flattens() {
    for var in [0.0, 0.5, 3.0] {
        let mut prev = 0.0;
        for i in -40..=40 {
            let p = predict_prob(&LatentPrediction { mean: i as f64 * 0.1, variance: var });
            assert!(p >= prev);
            prev = p;
        }
    }
    let p = predict_prob(&LatentPrediction { mean: 2.0, variance: 1e12 });
    assert!((p - 0.5).abs() < 1e-5);
}
