use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use impress::estimator::{threshold_tags, DEFAULT_THETA};
use impress::io::{
    format_count_line, format_tag_records, read_vocabulary, tag_set_records, EstimateRecord, ScoreTable,
};
use impress::{estimate_ensemble, EnsembleParams, MultiLabelParams64};

use super::{load_exemplar_set, load_rules, required, ScoreSource};
use crate::config::RunConfig;
use crate::output::{check_input, check_output, Staged};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    /// Pool the tags of the top-scoring exemplars
    Ensemble,
    /// Threshold per-tag scores from a multi-label model
    Multilabel,
}

#[derive(clap::Args)]
pub struct Args {
    /// Vocabulary file (`tag,count`)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Exemplar tag records
    #[arg(long)]
    exemplars: Option<PathBuf>,
    /// Merge rules applied to exemplar tags
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Score matrix: `sample_id` then one column per exemplar id
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Exemplar feature vectors (`id,v1,...`)
    #[arg(long)]
    features: Option<PathBuf>,
    /// Query feature vectors (`id,v1,...`)
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Per-tag scores: `sample_id` then one column per vocabulary tag
    #[arg(long)]
    tag_scores: Option<PathBuf>,
    /// Softmax temperature of the feature backend [default: 1]
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Number of top exemplars pooled [default: 11]
    #[arg(long)]
    n_tilde: Option<usize>,
    /// Minimum occurrences for a pooled tag [default: 3]
    #[arg(long)]
    p: Option<usize>,
    /// Per-tag score threshold of the multi-label method [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Selected tags, one `sample_id,tag,...` line per query
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Pooled counts, one `sample_id,tag:count,...` line per query
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Full estimates as JSON lines
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_method(name: &str) -> Result<Method> {
    match name {
        "ensemble" => Ok(Method::Ensemble),
        "multilabel" => Ok(Method::Multilabel),
        other => bail!("unknown method `{other}` (expected `ensemble` or `multilabel`)"),
    }
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.estimate;
    let method = match (args.method, &sec.method) {
        (Some(m), _) => m,
        (None, Some(name)) => parse_method(name)?,
        (None, None) => Method::Ensemble,
    };
    let vocab_path = required(cfg.path(args.vocab, &sec.vocab), "vocab")?;
    let output = required(cfg.path(args.output, &sec.output), "output")?;
    let counts = cfg.path(args.counts, &sec.counts);
    let json = cfg.path(args.json, &sec.json);
    check_input(&vocab_path, "vocabulary")?;
    check_output(&output, "output")?;
    for p in counts.iter().chain(&json) {
        check_output(p, "output")?;
    }
    let vocab = read_vocabulary(&vocab_path)?;
    let mut staged = Staged::new();

    match method {
        Method::Ensemble => {
            if args.tag_scores.is_some() || sec.tag_scores.is_some() {
                bail!("--tag-scores belongs to the multilabel method");
            }
            let exemplars_path = required(cfg.path(args.exemplars, &sec.exemplars), "exemplars")?;
            let rules_path = cfg.path(args.rules, &sec.rules);
            check_input(&exemplars_path, "exemplars")?;
            if let Some(p) = &rules_path {
                check_input(p, "rules")?;
            }
            let source = ScoreSource::resolve(
                cfg.path(args.scores, &sec.scores),
                cfg.path(args.features, &sec.features),
                cfg.path(args.queries, &sec.queries),
                args.temperature.or(sec.temperature),
            )?;
            let defaults = EnsembleParams::default();
            let params = EnsembleParams::new(
                args.n_tilde.or(sec.n_tilde).unwrap_or(defaults.n_tilde()),
                args.p.or(sec.p).unwrap_or(defaults.p()),
            )?;

            let rules = load_rules(rules_path.as_deref())?;
            let exemplars = load_exemplar_set(&exemplars_path, &rules, &vocab)?;
            if params.n_tilde() > exemplars.len() {
                bail!("n_tilde {} exceeds the {} exemplars", params.n_tilde(), exemplars.len());
            }
            let (ids, rows) = source.score_rows(&exemplars)?;
            let estimates = rows
                .iter()
                .zip(&ids)
                .map(|(s, id)| estimate_ensemble(s, &exemplars, params).with_context(|| format!("sample `{id}`")))
                .collect::<Result<Vec<_>>>()?;

            let selected: Vec<_> = estimates.iter().map(|e| e.selected.clone()).collect();
            staged.add(&output, format_tag_records(&tag_set_records(&ids, &selected, &vocab)))?;
            if let Some(path) = &counts {
                let mut text = String::new();
                for (id, e) in ids.iter().zip(&estimates) {
                    text.push_str(&format_count_line(id, e, &vocab));
                    text.push('\n');
                }
                staged.add(path, text)?;
            }
            if let Some(path) = &json {
                let mut text = String::new();
                for (id, e) in ids.iter().zip(&estimates) {
                    text.push_str(&serde_json::to_string(&EstimateRecord::new(id, e, &vocab, &exemplars))?);
                    text.push('\n');
                }
                staged.add(path, text)?;
            }
            eprintln!(
                "estimated {} samples (n_tilde={}, p={})",
                ids.len(),
                params.n_tilde(),
                params.p()
            );
        }
        Method::Multilabel => {
            if counts.is_some() || json.is_some() {
                bail!("--counts and --json belong to the ensemble method");
            }
            let path = required(cfg.path(args.tag_scores, &sec.tag_scores), "tag-scores")?;
            check_input(&path, "tag scores")?;
            let params = MultiLabelParams64::new(args.theta.or(sec.theta).unwrap_or(DEFAULT_THETA))?;
            let table = ScoreTable::<f64>::read(&path)?;
            let dense = table
                .tag_scores(&vocab)
                .with_context(|| format!("tag scores {}", path.display()))?;
            let selected: Vec<_> = dense.iter().map(|row| threshold_tags(row, params.theta())).collect();
            staged.add(
                &output,
                format_tag_records(&tag_set_records(&table.row_ids, &selected, &vocab)),
            )?;
            eprintln!("thresholded {} samples (theta={})", table.row_ids.len(), params.theta());
        }
    }
    staged.commit()
}
