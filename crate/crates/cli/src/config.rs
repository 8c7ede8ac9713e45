//! Flat `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use stance_gp::experiments::{DEFAULT_HOLDOUT, DEFAULT_K_GRID};
use stance_gp::multiclass::{Hyperparameters, TrainConfig};
use stance_gp::textproc::{load_brown_lexicon, BrownLexicon, Preprocessor};
use stance_gp::{EpConfig, EvalMode, FeatureKind, MethodSpec, ModelVariant, OptimizerConfig, Resources};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub brown: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub emoticons: Option<PathBuf>,
    /// Directory for outputs not given an explicit file.
    pub output: Option<PathBuf>,
    pub method: MethodSpec,
    pub mode: EvalMode,
    pub k: usize,
    pub l: usize,
    pub k_values: Vec<usize>,
    pub optimizer: OptimizerConfig,
    pub ep: EpConfig,
    pub top_n: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            brown: None,
            stopwords: None,
            emoticons: None,
            output: None,
            method: MethodSpec::new(ModelVariant::GpPooled, FeatureKind::Bow),
            mode: EvalMode::Loo,
            k: 0,
            l: DEFAULT_HOLDOUT,
            k_values: DEFAULT_K_GRID.to_vec(),
            optimizer: OptimizerConfig::default(),
            ep: EpConfig::default(),
            top_n: 5,
            seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    /// Defaults overlaid with the settings of `path`, if given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
                cfg.set(key.trim(), value.trim())
                    .map_err(|e| CliError::Usage(format!("{}:{}: {}", path.display(), i + 1, e.message())))?;
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let core = |e: stance_gp::Error| CliError::Usage(e.to_string());
        match key {
            "paths.corpus" => self.corpus = Some(value.into()),
            "paths.brown" => self.brown = Some(value.into()),
            "paths.stopwords" => self.stopwords = Some(value.into()),
            "paths.emoticons" => self.emoticons = Some(value.into()),
            "paths.output" => self.output = Some(value.into()),
            "method.variant" => self.method.variant = value.parse().map_err(core)?,
            "method.features" => self.method.features = value.parse().map_err(core)?,
            "fold.mode" => self.mode = value.parse().map_err(core)?,
            "fold.k" => self.k = parse_num(key, value)?,
            "fold.l" => self.l = parse_num(key, value)?,
            "fold.k_values" => {
                self.k_values = value
                    .split(',')
                    .map(|v| parse_num(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "optimizer.restarts" => self.optimizer.restarts = parse_num(key, value)?,
            "optimizer.max_evals" => self.optimizer.max_evals = parse_num(key, value)?,
            "optimizer.log_lo" => self.optimizer.log_bounds.0 = parse_num(key, value)?,
            "optimizer.log_hi" => self.optimizer.log_bounds.1 = parse_num(key, value)?,
            "optimizer.v_lo" => self.optimizer.v_bounds.0 = parse_num(key, value)?,
            "optimizer.v_hi" => self.optimizer.v_bounds.1 = parse_num(key, value)?,
            "optimizer.tolerance" => self.optimizer.tolerance = parse_num(key, value)?,
            "optimizer.ard_passes" => self.optimizer.ard_passes = parse_num(key, value)?,
            "optimizer.ard_evals_per_coord" => self.optimizer.ard_evals_per_coord = parse_num(key, value)?,
            "ep.tolerance" => self.ep.tolerance = parse_num(key, value)?,
            "ep.max_sweeps" => self.ep.max_sweeps = parse_num(key, value)?,
            "ep.damping" => self.ep.damping = parse_num(key, value)?,
            "report.top_n" => self.top_n = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    /// Sorted `key=value` lines of every setting except the seed.
    pub fn canonical(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let o = &self.optimizer;
        let entries: BTreeMap<&str, String> = [
            ("paths.corpus", path(&self.corpus)),
            ("paths.brown", path(&self.brown)),
            ("paths.stopwords", path(&self.stopwords)),
            ("paths.emoticons", path(&self.emoticons)),
            ("paths.output", path(&self.output)),
            ("method.variant", self.method.variant.as_str().to_string()),
            ("method.features", self.method.features.as_str().to_string()),
            ("fold.mode", self.mode.to_string()),
            ("fold.k", self.k.to_string()),
            ("fold.l", self.l.to_string()),
            (
                "fold.k_values",
                self.k_values.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            ),
            ("optimizer.restarts", o.restarts.to_string()),
            ("optimizer.max_evals", o.max_evals.to_string()),
            ("optimizer.log_lo", o.log_bounds.0.to_string()),
            ("optimizer.log_hi", o.log_bounds.1.to_string()),
            ("optimizer.v_lo", o.v_bounds.0.to_string()),
            ("optimizer.v_hi", o.v_bounds.1.to_string()),
            ("optimizer.tolerance", o.tolerance.to_string()),
            ("optimizer.ard_passes", o.ard_passes.to_string()),
            ("optimizer.ard_evals_per_coord", o.ard_evals_per_coord.to_string()),
            ("ep.tolerance", self.ep.tolerance.to_string()),
            ("ep.max_sweeps", self.ep.max_sweeps.to_string()),
            ("ep.damping", self.ep.damping.to_string()),
            ("report.top_n", self.top_n.to_string()),
        ]
        .into_iter()
        .collect();
        entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn header(&self) -> String {
        format!(
            "# stance-gp {} config={} seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.hash(),
            self.seed
        )
    }

    /// Fails on any configured path that does not exist.
    pub fn check_paths(&self) -> Result<(), CliError> {
        for p in [&self.corpus, &self.brown, &self.stopwords, &self.emoticons].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Data(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hyper: Hyperparameters::Optimize(OptimizerConfig {
                seed: self.seed,
                ..self.optimizer.clone()
            }),
            ep: self.ep.clone(),
        }
    }

    pub fn lexicon(&self) -> Result<Option<BrownLexicon>, CliError> {
        Ok(self.brown.as_deref().map(load_brown_lexicon).transpose()?)
    }

    pub fn resources(&self) -> Result<Resources, CliError> {
        let pre = Preprocessor::from_files(self.emoticons.as_deref(), self.stopwords.as_deref())?;
        Ok(Resources::new(pre, self.lexicon()?))
    }

    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Usage("no corpus given (use --corpus or paths.corpus)".into()))
    }
}
