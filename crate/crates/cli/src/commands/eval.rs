use std::path::PathBuf;

use anyhow::Result;
use impress::io::{parse_labelled_sets, read_text, read_vocabulary};
use impress::EvalReport64;

use super::{align, load_rules, load_truth, required};
use crate::config::RunConfig;
use crate::output::{check_input, check_output, Staged};

#[derive(clap::Args)]
pub struct Args {
    /// Predicted tag sets (`sample_id,tag,...`, canonical tags)
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Ground-truth tag records
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Vocabulary file (`tag,count`)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Merge rules applied to ground-truth tags
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Text report to write
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Per-tag rows (`tag,tp,fp,fn,precision,recall,f1`)
    #[arg(long)]
    rows: Option<PathBuf>,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.eval;
    let predictions = required(cfg.path(args.predictions, &sec.predictions), "predictions")?;
    let truth_path = required(cfg.path(args.truth, &sec.truth), "truth")?;
    let vocab_path = required(cfg.path(args.vocab, &sec.vocab), "vocab")?;
    let rules_path = cfg.path(args.rules, &sec.rules);
    let output = required(cfg.path(args.output, &sec.output), "output")?;
    let rows = cfg.path(args.rows, &sec.rows);
    check_input(&predictions, "predictions")?;
    check_input(&truth_path, "truth")?;
    check_input(&vocab_path, "vocabulary")?;
    if let Some(p) = &rules_path {
        check_input(p, "rules")?;
    }
    check_output(&output, "output")?;
    if let Some(p) = &rows {
        check_output(p, "rows")?;
    }

    let vocab = read_vocabulary(&vocab_path)?;
    let rules = load_rules(rules_path.as_deref())?;
    let preds = parse_labelled_sets(&read_text(&predictions)?, &predictions.display().to_string(), &vocab)?;
    let truth = load_truth(&truth_path, &rules, &vocab)?;
    let ids: Vec<String> = truth.iter().map(|(id, _)| id.clone()).collect();
    let truth_sets: Vec<_> = truth.into_iter().map(|(_, s)| s).collect();
    let pred_sets = align(&ids, preds, "predictions")?;
    let report: EvalReport64 = impress::evaluate(&pred_sets, &truth_sets, &vocab)?;

    let mut staged = Staged::new();
    staged.add(&output, report.to_text(&vocab))?;
    if let Some(p) = &rows {
        staged.add(p, report.to_rows(&vocab))?;
    }
    staged.commit()?;
    println!(
        "macro precision {:.4}  recall {:.4}  f1 {:.4}  ({} samples)",
        report.macro_precision, report.macro_recall, report.macro_f1, report.n_samples
    );
    Ok(())
}
