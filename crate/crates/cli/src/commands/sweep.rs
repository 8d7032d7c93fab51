use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use impress::io::read_vocabulary;
use impress::SweepResult64;

use super::{align, load_exemplar_set, load_rules, load_truth, required, ScoreSource};
use crate::config::RunConfig;
use crate::output::{check_input, check_output, Staged};

const DEFAULT_N_TILDE_RANGE: &str = "1..21";
const DEFAULT_P_RANGE: &str = "1,2,3,5";

#[derive(clap::Args)]
pub struct Args {
    /// Vocabulary file (`tag,count`)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Exemplar tag records
    #[arg(long)]
    exemplars: Option<PathBuf>,
    /// Merge rules applied to exemplar and ground-truth tags
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
    /// Softmax temperature of the feature backend [default: 1]
    #[arg(long)]
    temperature: Option<f64>,
    /// Ground-truth tag records for the queries
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Values of n_tilde: `a..b` (inclusive) or a comma list [default: 1..21]
    #[arg(long)]
    n_tilde_range: Option<String>,
    /// Values of p: `a..b` (inclusive) or a comma list [default: 1,2,3,5]
    #[arg(long)]
    p_range: Option<String>,
    /// Grid to write (`n_tilde,p,macro_f1`)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Best parameters to write as TOML
    #[arg(long)]
    best: Option<PathBuf>,
}

/// Parses `a..b` (inclusive) or `a,b,c` into positive integers.
pub fn parse_range(text: &str) -> Result<Vec<usize>> {
    let bad = || anyhow!("invalid range `{text}`: use `a..b` or a comma-separated list of positive integers");
    let values: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn format_best(result: &SweepResult64) -> String {
    format!(
        "n_tilde = {}\np = {}\nmacro_f1 = {}\n",
        result.best.n_tilde, result.best.p, result.best.macro_f1
    )
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.sweep;
    let vocab_path = required(cfg.path(args.vocab, &sec.vocab), "vocab")?;
    let exemplars_path = required(cfg.path(args.exemplars, &sec.exemplars), "exemplars")?;
    let truth_path = required(cfg.path(args.truth, &sec.truth), "truth")?;
    let rules_path = cfg.path(args.rules, &sec.rules);
    let output = required(cfg.path(args.output, &sec.output), "output")?;
    let best = cfg.path(args.best, &sec.best);
    let n_range = parse_range(
        args.n_tilde_range
            .as_deref()
            .or(sec.n_tilde_range.as_deref())
            .unwrap_or(DEFAULT_N_TILDE_RANGE),
    )?;
    let p_range = parse_range(
        args.p_range
            .as_deref()
            .or(sec.p_range.as_deref())
            .unwrap_or(DEFAULT_P_RANGE),
    )?;
    for (p, what) in [
        (&vocab_path, "vocabulary"),
        (&exemplars_path, "exemplars"),
        (&truth_path, "truth"),
    ] {
        check_input(p, what)?;
    }
    if let Some(p) = &rules_path {
        check_input(p, "rules")?;
    }
    let source = ScoreSource::resolve(
        cfg.path(args.scores, &sec.scores),
        cfg.path(args.features, &sec.features),
        cfg.path(args.queries, &sec.queries),
        args.temperature.or(sec.temperature),
    )?;
    check_output(&output, "output")?;
    if let Some(p) = &best {
        check_output(p, "best")?;
    }

    let vocab = read_vocabulary(&vocab_path)?;
    let rules = load_rules(rules_path.as_deref())?;
    let exemplars = load_exemplar_set(&exemplars_path, &rules, &vocab)?;
    if !n_range.iter().any(|&n| n <= exemplars.len()) {
        bail!("no n_tilde value fits the {} exemplars", exemplars.len());
    }
    let (ids, rows) = source.score_rows(&exemplars)?;
    let truth = align(&ids, load_truth(&truth_path, &rules, &vocab)?, "truth")?;
    let result: SweepResult64 = impress::sweep(&rows, &truth, &exemplars, &n_range, &p_range)?;

    let mut staged = Staged::new();
    staged.add(&output, result.to_csv())?;
    if let Some(p) = &best {
        staged.add(p, format_best(&result))?;
    }
    staged.commit()?;
    print!("{}", format_best(&result));
    Ok(())
}
