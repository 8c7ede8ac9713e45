pub mod error;
pub mod experiments;
pub mod gpc;
pub mod hyperopt;
pub mod kernels;
pub mod multiclass;
pub mod persist;
pub mod textproc;

pub use error::{Error, Result};
pub use experiments::{Corpus, EvalMode, EvalResult, FeatureKind, FoldSpec, MethodSpec, ModelVariant, Resources};
pub use gpc::{ep_fit, predict_latent, predict_prob, probit, BinaryDataset, EpApproximation, EpConfig, LatentPrediction};
pub use hyperopt::{optimize_evidence, KernelFamily, OptimizerConfig};
pub use kernels::{CoregionalizationParams, KernelParams, LinearKernelParams, TaskedInput};
pub use multiclass::{classify, train_ova, ClassPosterior, FeatureSpace, OneVsAllModel, TrainConfig};
pub use textproc::{BrownLexicon, Preprocessor, SparseFeatureVector, StanceLabel, TokenSequence, TweetRecord, Vocabulary};
