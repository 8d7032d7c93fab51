use std::path::PathBuf;

use anyhow::{Context, Result};
use impress::build_vocabulary;
use impress::io::{format_vocabulary, read_tag_records};
use impress::vocab::{DEFAULT_MIN_COUNT, DEFAULT_TOP_N};

use super::{load_rules, required};
use crate::config::RunConfig;
use crate::output::{check_input, check_output, Staged};

#[derive(clap::Args)]
pub struct Args {
    /// Raw tag records (`font_id,tag,...` or JSON lines)
    #[arg(long)]
    records: Option<PathBuf>,
    /// Merge rules (TOML with `variants` and `compounds` tables)
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Number of most frequent raw tags considered
    #[arg(long)]
    top_n: Option<usize>,
    /// Minimum number of fonts carrying a kept tag
    #[arg(long)]
    min_count: Option<usize>,
    /// Vocabulary file to write (`tag,count`)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.vocab;
    let records_path = required(cfg.path(args.records, &sec.records), "records")?;
    let rules_path = cfg.path(args.rules, &sec.rules);
    let output = required(cfg.path(args.output, &sec.output), "output")?;
    let top_n = args.top_n.or(sec.top_n).unwrap_or(DEFAULT_TOP_N);
    let min_count = args.min_count.or(sec.min_count).unwrap_or(DEFAULT_MIN_COUNT);
    check_input(&records_path, "records")?;
    if let Some(p) = &rules_path {
        check_input(p, "rules")?;
    }
    check_output(&output, "output")?;

    let rules = load_rules(rules_path.as_deref())?;
    let records = read_tag_records(&records_path)?;
    let vocab = build_vocabulary(&records, &rules, top_n, min_count)
        .with_context(|| format!("building vocabulary from {}", records_path.display()))?;

    let mut staged = Staged::new();
    staged.add(&output, format_vocabulary(&vocab))?;
    staged.commit()?;
    eprintln!("vocabulary: {} tags from {} records", vocab.len(), records.len());
    Ok(())
}
