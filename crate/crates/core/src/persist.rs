//! Plain-text model files.
//!
//! A model file is line oriented: a `stance-gp-model <version>` header, a few
//! `key value` lines describing the kernel family and feature space, then
//! named numeric blocks (`name count values...`). Every float is written with
//! 17 significant digits so that a load reproduces it bit for bit. Posterior
//! quantities are not stored; they are rebuilt from the site parameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hyperopt::KernelFamily;
use crate::kernels::{CoregionalizationParams, KernelParams, LinearKernelParams, TaskedInput};
use crate::multiclass::{BinaryModel, FeatureSpace, OneVsAllModel};
use crate::textproc::{BrownLexicon, SparseFeatureVector, StanceLabel, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "stance-gp-model";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_block(out: &mut String, name: &str, values: &[f64]) {
    let _ = write!(out, "{name} {}", values.len());
    for v in values {
        out.push(' ');
        out.push_str(&num(*v));
    }
    out.push('\n');
}

/// Serializes a model. `seed` is recorded in the header for provenance.
pub fn save_model(model: &OneVsAllModel, seed: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "seed {seed}");
    let _ = writeln!(out, "kernel_family {}", model.kernel_family.name());
    let _ = writeln!(out, "feature_space {}", model.feature_space.kind());
    let _ = writeln!(out, "feature_space_hash {}", model.feature_space.hash());
    let keys = model.feature_space.feature_keys();
    let _ = writeln!(out, "features {}", keys.len());
    for k in keys {
        let _ = writeln!(out, "{k}");
    }
    let _ = writeln!(out, "tasks {}", model.task_map.len());
    for (rumour, idx) in &model.task_map {
        let _ = writeln!(out, "{idx}\t{rumour}");
    }
    let _ = writeln!(out, "inputs {}", model.inputs.len());
    for input in &model.inputs {
        let _ = write!(out, "{}", input.task);
        for &(i, v) in input.x.pairs() {
            let _ = write!(out, " {i}:{}", num(v));
        }
        out.push('\n');
    }
    for m in &model.binary_models {
        let _ = writeln!(out, "model {}", m.label.as_str());
        write_block(&mut out, "variance", &[m.params.data.variance]);
        write_block(&mut out, "ard", m.params.data.ard_variances.as_deref().unwrap_or(&[]));
        let (kappa, v) = m
            .params
            .coreg
            .as_ref()
            .map_or((&[][..], &[][..]), |c| (&c.kappa[..], &c.v[..]));
        write_block(&mut out, "kappa", kappa);
        write_block(&mut out, "v", v);
        write_block(&mut out, "targets", &m.targets);
        write_block(&mut out, "site_tau", m.approx.site_tau.as_slice());
        write_block(&mut out, "site_nu", m.approx.site_nu.as_slice());
        let _ = writeln!(out, "sweeps {} {}", m.approx.sweeps, m.approx.converged);
        write_block(&mut out, "log_evidence", &[m.approx.log_evidence]);
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(Error::ModelFormat("unexpected end of file".into())),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::ModelFormat(format!("line {}: {msg}", self.line))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ => Err(self.err(format!("expected '{key} ...'"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let rest = self.keyed(key)?;
        rest.trim().parse().map_err(|_| self.err(format!("bad count for {key}")))
    }

    fn block(&mut self, key: &str) -> Result<Vec<f64>> {
        let rest = self.keyed(key)?;
        let mut parts = rest.split(' ');
        let n: usize = parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| self.err(format!("bad count for {key}")))?;
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|_| self.err(format!("bad number '{p}' in {key}"))))
            .collect::<Result<_>>()?;
        if values.len() != n {
            return Err(self.err(format!("{key}: expected {n} values, found {}", values.len())));
        }
        Ok(values)
    }
}

/// Parses a model file. Brown models need the lexicon they were built from.
/// Leading `#` comment lines are skipped.
pub fn load_model(text: &str, lexicon: Option<&BrownLexicon>) -> Result<OneVsAllModel> {
    let mut iter = text.lines().enumerate().peekable();
    while iter.next_if(|(_, l)| l.starts_with('#')).is_some() {}
    let mut lines = Lines { iter, line: 0 };
    let version = lines.keyed(MAGIC)?;
    if version.trim() != FORMAT_VERSION.to_string() {
        return Err(lines.err(format!("unsupported format version {version}")));
    }
    lines.keyed("seed")?;
    let family = KernelFamily::parse(lines.keyed("kernel_family")?.trim())?;
    let kind = lines.keyed("feature_space")?.trim().to_string();
    let hash = lines.keyed("feature_space_hash")?.trim().to_string();
    let n_features = lines.count("features")?;
    let mut keys = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        keys.push(lines.next()?.to_string());
    }
    let feature_space = match kind.as_str() {
        "bow" => FeatureSpace::Bow(Vocabulary::from_tokens(keys)),
        "brown" => {
            let lex = lexicon.ok_or_else(|| Error::ModelFormat("a Brown model needs its cluster lexicon to load".into()))?;
            FeatureSpace::Brown(lex.restrict(keys.iter().map(String::as_str))?)
        }
        other => return Err(lines.err(format!("unknown feature space '{other}'"))),
    };
    if feature_space.hash() != hash {
        return Err(Error::ModelFormat("feature space hash mismatch".into()));
    }
    let dims = feature_space.dims();

    let n_tasks = lines.count("tasks")?;
    let mut task_map = BTreeMap::new();
    for _ in 0..n_tasks {
        let line = lines.next()?;
        let (idx, rumour) = line.split_once('\t').ok_or_else(|| lines.err("expected 'index<TAB>rumour'"))?;
        let idx: usize = idx.parse().map_err(|_| lines.err("bad task index"))?;
        task_map.insert(rumour.to_string(), idx);
    }

    let n_inputs = lines.count("inputs")?;
    let mut inputs = Vec::with_capacity(n_inputs);
    for _ in 0..n_inputs {
        let line = lines.next()?;
        let mut parts = line.split(' ');
        let task: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| lines.err("bad task"))?;
        let mut pairs = Vec::new();
        for p in parts {
            let (i, v) = p.split_once(':').ok_or_else(|| lines.err(format!("bad feature '{p}'")))?;
            let i: usize = i.parse().map_err(|_| lines.err("bad feature index"))?;
            let v: f64 = v.parse().map_err(|_| lines.err("bad feature value"))?;
            pairs.push((i, v));
        }
        inputs.push(TaskedInput::new(SparseFeatureVector::from_pairs(dims, pairs)?, task));
    }

    let mut models = Vec::with_capacity(3);
    for expected in StanceLabel::ALL {
        let label: StanceLabel = lines.keyed("model")?.trim().parse()?;
        if label != expected {
            return Err(lines.err(format!("expected model for {expected}, found {label}")));
        }
        let variance = lines.block("variance")?;
        let ard = lines.block("ard")?;
        let kappa = lines.block("kappa")?;
        let v = lines.block("v")?;
        let targets = lines.block("targets")?;
        let site_tau = lines.block("site_tau")?;
        let site_nu = lines.block("site_nu")?;
        let sweeps_line = lines.keyed("sweeps")?;
        let (sweeps, converged) = sweeps_line
            .split_once(' ')
            .and_then(|(s, c)| Some((s.parse::<usize>().ok()?, c.parse::<bool>().ok()?)))
            .ok_or_else(|| lines.err("bad sweeps line"))?;
        let stored_evidence = lines.block("log_evidence")?;

        let [variance] = variance[..] else {
            return Err(lines.err("variance must hold one value"));
        };
        let params = KernelParams {
            data: LinearKernelParams {
                variance,
                ard_variances: (!ard.is_empty()).then_some(ard),
            },
            coreg: if kappa.is_empty() {
                None
            } else {
                Some(CoregionalizationParams::new(kappa, v)?)
            },
        };
        params.data.validate(Some(dims))?;
        if targets.len() != inputs.len() {
            return Err(lines.err("targets length does not match inputs"));
        }
        let model = BinaryModel::from_sites(label, &inputs, targets, params, site_tau, site_nu, sweeps, converged)?;
        let stored = stored_evidence.first().copied().unwrap_or(f64::NAN);
        let rebuilt = model.approx.log_evidence;
        if !(stored == rebuilt || (stored - rebuilt).abs() <= 1e-9 * stored.abs().max(1.0)) {
            return Err(Error::ModelFormat(format!(
                "{label} model: stored log evidence {stored} does not match rebuilt {rebuilt}"
            )));
        }
        models.push(model);
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected 'end'"));
    }
    let binary_models: [BinaryModel; 3] = models.try_into().map_err(|_| Error::ModelFormat("three models expected".into()))?;
    Ok(OneVsAllModel {
        binary_models,
        feature_space,
        kernel_family: family,
        task_map,
        inputs,
    })
}
