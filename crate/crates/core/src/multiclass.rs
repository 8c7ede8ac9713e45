//! One-vs-all stance classifier built from three binary GP classifiers.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gpc::{ep_fit, predict_latent, predict_prob, BinaryDataset, EpApproximation, EpConfig};
use crate::hyperopt::{optimize_evidence, KernelFamily, OptimizerConfig};
use crate::kernels::{training_gram, KernelParams, TaskedInput, DEFAULT_RELATIVE_JITTER};
use crate::textproc::{featurize_bow, featurize_brown, BrownLexicon, SparseFeatureVector, StanceLabel, TokenSequence, Vocabulary};

/// What the feature indices of a model mean.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSpace {
    Bow(Vocabulary),
    Brown(BrownLexicon),
}

impl FeatureSpace {
    pub fn kind(&self) -> &'static str {
        match self {
            FeatureSpace::Bow(_) => "bow",
            FeatureSpace::Brown(_) => "brown",
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            FeatureSpace::Bow(v) => v.len(),
            FeatureSpace::Brown(l) => l.num_clusters(),
        }
    }

    pub fn featurize(&self, tokens: &TokenSequence) -> SparseFeatureVector {
        match self {
            FeatureSpace::Bow(v) => featurize_bow(tokens, v),
            FeatureSpace::Brown(l) => featurize_brown(tokens, l),
        }
    }

    /// Token (BOW) or cluster bitstring (Brown) behind a feature index.
    pub fn feature_key(&self, index: usize) -> Option<&str> {
        match self {
            FeatureSpace::Bow(v) => v.token(index),
            FeatureSpace::Brown(l) => l.bitstring(index),
        }
    }

    pub fn feature_keys(&self) -> &[String] {
        match self {
            FeatureSpace::Bow(v) => v.tokens(),
            FeatureSpace::Brown(l) => l.clusters(),
        }
    }

    /// Hex SHA-256 over the kind and the ordered feature keys.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind().as_bytes());
        for key in self.feature_keys() {
            h.update(b"\n");
            h.update(key.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// How hyperparameters are chosen for each binary problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Hyperparameters {
    Optimize(OptimizerConfig),
    /// The same fixed parameters for all three problems.
    Fixed(KernelParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hyper: Hyperparameters,
    pub ep: EpConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper: Hyperparameters::Optimize(OptimizerConfig::default()),
            ep: EpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub x: SparseFeatureVector,
    pub task: usize,
    pub label: StanceLabel,
}

/// One fitted class-vs-rest classifier.
#[derive(Debug, Clone)]
pub struct BinaryModel {
    pub label: StanceLabel,
    pub params: KernelParams,
    pub targets: Vec<f64>,
    pub approx: EpApproximation,
    gram: DMatrix<f64>,
}

impl BinaryModel {
    fn fit(label: StanceLabel, inputs: &[TaskedInput], targets: Vec<f64>, params: KernelParams, ep: &EpConfig) -> Result<Self> {
        let gram = training_gram(inputs, &params, DEFAULT_RELATIVE_JITTER)?;
        let approx = ep_fit(&gram, &targets, ep)?;
        Ok(Self {
            label,
            params,
            targets,
            approx,
            gram,
        })
    }

    /// Rebuilds a model from stored sites without running EP.
    pub(crate) fn from_sites(
        label: StanceLabel,
        inputs: &[TaskedInput],
        targets: Vec<f64>,
        params: KernelParams,
        site_tau: Vec<f64>,
        site_nu: Vec<f64>,
        sweeps: usize,
        converged: bool,
    ) -> Result<Self> {
        let gram = training_gram(inputs, &params, DEFAULT_RELATIVE_JITTER)?;
        let approx = EpApproximation::from_sites(
            &gram,
            &targets,
            site_tau.into(),
            site_nu.into(),
            sweeps,
            converged,
        )?;
        Ok(Self {
            label,
            params,
            targets,
            approx,
            gram,
        })
    }

    /// `p(label | x)` against the rest.
    pub fn probability(&self, inputs: &[TaskedInput], x: &TaskedInput) -> Result<f64> {
        let k_star = self.params.cross(inputs, x)?;
        let k_ss = self.params.eval(x, x)?;
        let lp = predict_latent(&self.approx, &self.gram, &k_star, k_ss)?;
        Ok(predict_prob(&lp))
    }
}

/// Independent one-vs-all probabilities; they need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPosterior {
    pub probs: [f64; 3],
}

impl ClassPosterior {
    /// Label with the highest probability; ties go to the lowest code.
    pub fn argmax(&self) -> StanceLabel {
        let mut best = 0;
        for c in 1..3 {
            if self.probs[c] > self.probs[best] {
                best = c;
            }
        }
        StanceLabel::from_code(best).expect("three labels")
    }

    pub fn prob(&self, label: StanceLabel) -> f64 {
        self.probs[label.code()]
    }
}

#[derive(Debug, Clone)]
pub struct OneVsAllModel {
    pub binary_models: [BinaryModel; 3],
    pub feature_space: FeatureSpace,
    pub kernel_family: KernelFamily,
    /// Rumour id → task index; empty for single-task models.
    pub task_map: BTreeMap<String, usize>,
    pub inputs: Vec<TaskedInput>,
}

pub fn train_ova(
    train: &[TrainExample],
    feature_space: FeatureSpace,
    family: KernelFamily,
    task_map: BTreeMap<String, usize>,
    cfg: &TrainConfig,
) -> Result<OneVsAllModel> {
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty training set".into()));
    }
    let dims = feature_space.dims();
    if let Some(bad) = train.iter().find(|e| e.x.dims() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: bad.x.dims(),
        });
    }
    let tasks = family.tasks();
    if let KernelFamily::Icm { .. } = family {
        if task_map.len() != tasks {
            return Err(Error::InvalidInput(format!(
                "task map has {} rumours but the kernel expects {tasks} tasks",
                task_map.len()
            )));
        }
    }
    if let Some(bad) = train.iter().find(|e| e.task >= tasks) {
        return Err(Error::TaskOutOfRange { task: bad.task, tasks });
    }

    let inputs: Vec<TaskedInput> = train.iter().map(|e| TaskedInput::new(e.x.clone(), e.task)).collect();
    let fit_one = |label: StanceLabel| -> Result<BinaryModel> {
        let targets: Vec<f64> = train.iter().map(|e| if e.label == label { 1.0 } else { -1.0 }).collect();
        let params = match &cfg.hyper {
            Hyperparameters::Fixed(p) => p.clone(),
            Hyperparameters::Optimize(opt) => {
                let data = BinaryDataset::new(inputs.clone(), targets.clone())?;
                optimize_evidence(&data, family, opt, &cfg.ep)?.params
            }
        };
        BinaryModel::fit(label, &inputs, targets, params, &cfg.ep)
    };
    let binary_models = [
        fit_one(StanceLabel::Supporting)?,
        fit_one(StanceLabel::Denying)?,
        fit_one(StanceLabel::Questioning)?,
    ];
    Ok(OneVsAllModel {
        binary_models,
        feature_space,
        kernel_family: family,
        task_map,
        inputs,
    })
}

impl OneVsAllModel {
    /// Task index for a rumour. Single-task models map everything to 0; ICM
    /// models refuse rumours they were not trained on.
    pub fn task_for(&self, rumour_id: &str) -> Result<usize> {
        match self.kernel_family {
            KernelFamily::Linear { .. } => Ok(0),
            KernelFamily::Icm { .. } => self
                .task_map
                .get(rumour_id)
                .copied()
                .ok_or_else(|| Error::UnknownTask(rumour_id.to_string())),
        }
    }
}

pub fn classify(model: &OneVsAllModel, x: &SparseFeatureVector, task: usize) -> Result<(StanceLabel, ClassPosterior)> {
    let dims = model.feature_space.dims();
    if x.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: x.dims(),
        });
    }
    let tasks = model.kernel_family.tasks();
    if task >= tasks {
        return Err(Error::TaskOutOfRange { task, tasks });
    }
    let query = TaskedInput::new(x.clone(), task);
    let mut probs = [0.0; 3];
    for (p, m) in probs.iter_mut().zip(&model.binary_models) {
        *p = m.probability(&model.inputs, &query)?;
    }
    let posterior = ClassPosterior { probs };
    Ok((posterior.argmax(), posterior))
}

/// One feature of an ARD ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub index: usize,
    /// BOW token or Brown cluster bitstring.
    pub key: String,
    /// Most frequent member word for Brown clusters.
    pub representative: Option<String>,
    pub weight: f64,
}

/// Features of each label's classifier sorted by descending learned ARD
/// variance (ties by index).
pub fn ard_relevance(model: &OneVsAllModel) -> Result<[Vec<RankedFeature>; 3]> {
    let rank = |m: &BinaryModel| -> Result<Vec<RankedFeature>> {
        let ard = m
            .params
            .data
            .ard_variances
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("model was not trained with ARD variances".into()))?;
        let mut ranked: Vec<RankedFeature> = ard
            .iter()
            .enumerate()
            .map(|(i, &w)| RankedFeature {
                index: i,
                key: model.feature_space.feature_key(i).unwrap_or_default().to_string(),
                representative: match &model.feature_space {
                    FeatureSpace::Brown(l) => l.representative_word(i).map(str::to_string),
                    FeatureSpace::Bow(_) => None,
                },
                weight: w,
            })
            .collect();
        ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.index.cmp(&b.index)));
        Ok(ranked)
    };
    let [a, b, c] = &model.binary_models;
    Ok([rank(a)?, rank(b)?, rank(c)?])
}
