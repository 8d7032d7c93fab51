//! Subcommand implementations and the input plumbing they share.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use impress::io::{read_feature_store, read_tag_records, read_text, ScoreTable};
use impress::vocab::canonicalize_counting;
use impress::{load_exemplars, nearest_exemplar_scores, ExemplarSet, MergeRules, ScoreVector64, TagSet, TagVocabulary};

use crate::output::check_input;

pub mod correlate;
pub mod estimate;
pub mod eval;
pub mod simulate;
pub mod sweep;
pub mod vocab;

pub fn required(value: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    value.ok_or_else(|| anyhow!("missing --{name} (or `{}` in the config)", name.replace('-', "_")))
}

pub fn load_rules(path: Option<&Path>) -> Result<MergeRules> {
    match path {
        Some(p) => {
            let rules = MergeRules::from_toml_str(&read_text(p)?).with_context(|| format!("rules {}", p.display()))?;
            rules.validate()?;
            Ok(rules)
        }
        None => Ok(MergeRules::default()),
    }
}

pub fn warn_dropped(count: usize, what: &str) {
    if count > 0 {
        eprintln!("warning: {count} out-of-vocabulary tags dropped from {what}");
    }
}

pub fn load_exemplar_set(path: &Path, rules: &MergeRules, vocab: &TagVocabulary) -> Result<ExemplarSet> {
    let records = read_tag_records(path)?;
    let (set, dropped) =
        load_exemplars(&records, rules, vocab).with_context(|| format!("exemplars {}", path.display()))?;
    warn_dropped(dropped, &path.display().to_string());
    Ok(set)
}

/// Where the per-exemplar scores of each query come from.
pub enum ScoreSource {
    /// Precomputed matrix with one column per exemplar id.
    Matrix(PathBuf),
    /// Built-in nearest-exemplar scorer over feature vectors.
    Features {
        exemplars: PathBuf,
        queries: PathBuf,
        temperature: f64,
    },
}

impl ScoreSource {
    pub fn resolve(
        scores: Option<PathBuf>,
        features: Option<PathBuf>,
        queries: Option<PathBuf>,
        temperature: Option<f64>,
    ) -> Result<Self> {
        match (scores, features, queries) {
            (Some(m), None, None) => {
                if temperature.is_some() {
                    bail!("--temperature only applies to the feature backend");
                }
                check_input(&m, "score matrix")?;
                Ok(Self::Matrix(m))
            }
            (None, Some(f), Some(q)) => {
                let temperature = temperature.unwrap_or(1.0);
                if !(temperature > 0.0 && temperature.is_finite()) {
                    bail!("temperature must be positive, got {temperature}");
                }
                check_input(&f, "exemplar features")?;
                check_input(&q, "query features")?;
                Ok(Self::Features {
                    exemplars: f,
                    queries: q,
                    temperature,
                })
            }
            (None, None, None) => bail!("give either --scores or both --features and --queries"),
            (Some(_), _, _) => bail!("--scores cannot be combined with --features/--queries"),
            _ => bail!("the feature backend needs both --features and --queries"),
        }
    }

    /// Sample ids and their score vectors in exemplar order.
    pub fn score_rows(&self, exemplars: &ExemplarSet) -> Result<(Vec<String>, Vec<ScoreVector64>)> {
        match self {
            Self::Matrix(path) => {
                let table = ScoreTable::<f64>::read(path)?;
                let rows = table
                    .exemplar_scores(exemplars)
                    .with_context(|| format!("score matrix {}", path.display()))?;
                Ok((table.row_ids, rows))
            }
            Self::Features {
                exemplars: fpath,
                queries,
                temperature,
            } => {
                let store = read_feature_store::<f64>(fpath)?;
                let aligned = store
                    .aligned_to(exemplars)
                    .with_context(|| format!("exemplar features {}", fpath.display()))?;
                let qs = read_feature_store::<f64>(queries)?;
                let rows = qs
                    .vectors()
                    .iter()
                    .map(|q| nearest_exemplar_scores(q, &aligned, *temperature))
                    .collect::<impress::Result<Vec<_>>>()
                    .with_context(|| format!("query features {}", queries.display()))?;
                Ok((qs.ids().to_vec(), rows))
            }
        }
    }
}

/// Reads ground-truth tag records, canonicalizing them with `rules`.
pub fn load_truth(path: &Path, rules: &MergeRules, vocab: &TagVocabulary) -> Result<Vec<(String, TagSet)>> {
    let records = read_tag_records(path)?;
    let mut dropped = 0;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.font_id.clone()) {
            bail!("duplicate sample id `{}` in {}", r.font_id, path.display());
        }
        let (set, d) = canonicalize_counting(&r.tags, rules, vocab);
        dropped += d;
        out.push((r.font_id, set));
    }
    warn_dropped(dropped, &path.display().to_string());
    Ok(out)
}

/// Reorders labelled sets to follow `ids`; both sides must name the same
/// samples.
pub fn align(ids: &[String], labelled: Vec<(String, TagSet)>, what: &str) -> Result<Vec<TagSet>> {
    if labelled.len() != ids.len() {
        bail!("{what} has {} samples but {} were expected", labelled.len(), ids.len());
    }
    let mut by_id: BTreeMap<String, TagSet> = labelled.into_iter().collect();
    ids.iter()
        .map(|id| {
            by_id
                .remove(id)
                .ok_or_else(|| anyhow!("{what} has no entry for sample `{id}`"))
        })
        .collect()
}
