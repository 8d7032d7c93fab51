use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use impress::io::{format_feature_rows, format_tag_records, format_vocabulary, tag_set_records};
use impress::simulate::{
    CorruptionParams, SimulationConfig, DEFAULT_FEATURE_DIM, DEFAULT_MISS_RATE, DEFAULT_NOISE_RATE,
    DEFAULT_TAGS_PER_FONT, DEFAULT_TARGET_ACCURACY, DEFAULT_THETA,
};
use impress::{EnsembleParams, EvalReport64, Simulation64};

use super::required;
use crate::config::RunConfig;
use crate::output::Staged;

const DEFAULT_N_FONTS: usize = 300;
const DEFAULT_VOCAB_SIZE: usize = 84;
const DEFAULT_QUERIES_PER_FONT: usize = 3;

#[derive(clap::Args)]
pub struct Args {
    /// Number of latent fonts [default: 300]
    #[arg(long)]
    n_fonts: Option<usize>,
    /// Number of synthetic tags [default: 84]
    #[arg(long)]
    vocab_size: Option<usize>,
    /// True tags per font [default: 4]
    #[arg(long)]
    tags_per_font: Option<usize>,
    /// Dimension of the latent feature space [default: 2]
    #[arg(long)]
    feature_dim: Option<usize>,
    /// Probability that a true tag is dropped [default: 0.3]
    #[arg(long)]
    miss_rate: Option<f64>,
    /// Probability that a font gains one wrong tag [default: 0.1]
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Perturbed renderings per font [default: 3]
    #[arg(long)]
    queries_per_font: Option<usize>,
    /// Perturbation scale; calibrated from --target-accuracy when absent
    #[arg(long)]
    sigma: Option<f64>,
    /// Top-1 accuracy the calibrated scale aims for [default: 0.8]
    #[arg(long)]
    target_accuracy: Option<f64>,
    /// Softmax temperature of the scorer [default: sigma]
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    n_tilde: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Baseline per-tag score threshold [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Directory receiving the corpus files and the report
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn report_line(name: &str, r: &EvalReport64) -> String {
    format!(
        "{name:<9} precision {:.6}  recall {:.6}  f1 {:.6}\n",
        r.macro_precision, r.macro_recall, r.macro_f1
    )
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.simulate;
    let out_dir = required(cfg.path(args.out_dir, &sec.out_dir), "out-dir")?;
    let seed = args.seed.or(sec.seed).unwrap_or(0);
    let corruption = CorruptionParams::new(
        args.miss_rate.or(sec.miss_rate).unwrap_or(DEFAULT_MISS_RATE),
        args.noise_rate.or(sec.noise_rate).unwrap_or(DEFAULT_NOISE_RATE),
        seed,
    )?;
    let mut config = SimulationConfig::new(
        args.n_fonts.or(sec.n_fonts).unwrap_or(DEFAULT_N_FONTS),
        args.vocab_size.or(sec.vocab_size).unwrap_or(DEFAULT_VOCAB_SIZE),
        corruption,
    );
    config.tags_per_font = args
        .tags_per_font
        .or(sec.tags_per_font)
        .unwrap_or(DEFAULT_TAGS_PER_FONT);
    config.feature_dim = args.feature_dim.or(sec.feature_dim).unwrap_or(DEFAULT_FEATURE_DIM);
    config.queries_per_font = args
        .queries_per_font
        .or(sec.queries_per_font)
        .unwrap_or(DEFAULT_QUERIES_PER_FONT);
    config.sigma = args.sigma.or(sec.sigma);
    config.target_accuracy = args
        .target_accuracy
        .or(sec.target_accuracy)
        .unwrap_or(DEFAULT_TARGET_ACCURACY);
    config.temperature = args.temperature.or(sec.temperature);
    let defaults = EnsembleParams::default();
    let params = EnsembleParams::new(
        args.n_tilde.or(sec.n_tilde).unwrap_or(defaults.n_tilde()),
        args.p.or(sec.p).unwrap_or(defaults.p()),
    )?;
    let theta = args.theta.or(sec.theta).unwrap_or(DEFAULT_THETA);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let sim = Simulation64::generate(&config)?;
    let comparison = sim.compare(params, theta)?;
    let model = &sim.model;
    let vocab = model.vocabulary();

    let per_font = config.queries_per_font.max(1);
    let query_ids: Vec<String> = sim
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| q.sample_id(i % per_font))
        .collect();
    let query_rows: Vec<_> = query_ids
        .iter()
        .zip(&sim.queries)
        .map(|(id, q)| (id.clone(), q.feature.clone()))
        .collect();
    let query_truth: Vec<_> = sim.queries.iter().map(|q| q.true_tags.clone()).collect();

    let mut report = String::new();
    writeln!(report, "seed {seed}")?;
    writeln!(
        report,
        "fonts {}  tags {}  tags_per_font {}  feature_dim {}",
        model.n_fonts(),
        vocab.len(),
        config.tags_per_font,
        config.feature_dim
    )?;
    writeln!(
        report,
        "miss_rate {}  noise_rate {}",
        corruption.miss_rate, corruption.noise_rate
    )?;
    writeln!(
        report,
        "queries {}  sigma {}  temperature {}  top1_accuracy {:.6}",
        sim.queries.len(),
        sim.sigma,
        sim.temperature,
        sim.top1_accuracy
    )?;
    writeln!(
        report,
        "ensemble n_tilde {}  p {}  baseline theta {theta}",
        params.n_tilde(),
        params.p()
    )?;
    report.push_str(&report_line("ensemble", &comparison.ensemble));
    report.push_str(&report_line("baseline", &comparison.baseline));

    let mut staged = Staged::new();
    staged.add(&out_dir.join("vocab.csv"), format_vocabulary(&vocab))?;
    staged.add(
        &out_dir.join("observed_tags.csv"),
        format_tag_records(&model.observed_records()),
    )?;
    staged.add(
        &out_dir.join("true_tags.csv"),
        format_tag_records(&model.true_records()),
    )?;
    staged.add(
        &out_dir.join("features.csv"),
        format_feature_rows(&model.feature_rows()),
    )?;
    staged.add(&out_dir.join("queries.csv"), format_feature_rows(&query_rows))?;
    staged.add(
        &out_dir.join("query_truth.csv"),
        format_tag_records(&tag_set_records(&query_ids, &query_truth, &vocab)),
    )?;
    staged.add(&out_dir.join("report.txt"), &report)?;
    staged.add(
        &out_dir.join("comparison.json"),
        serde_json::to_string_pretty(&comparison)? + "\n",
    )?;
    staged.commit()?;
    print!("{report}");
    Ok(())
}
