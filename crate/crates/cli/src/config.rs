//! Versioned TOML run configuration. Each subcommand reads its own table;
//! command-line flags take precedence over file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use impress::corpus::ColumnScaling;
use serde::Deserialize;

pub const FORMAT_VERSION: u32 = 1;

/// The only generator the toolkit uses.
pub const RNG_NAME: &str = "chacha20";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub rng: Option<String>,
    #[serde(default)]
    pub vocab: VocabSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub correlate: CorrelateSection,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabSection {
    pub records: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub top_n: Option<usize>,
    pub min_count: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub vocab: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub tag_scores: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub method: Option<String>,
    pub n_tilde: Option<usize>,
    pub p: Option<usize>,
    pub theta: Option<f64>,
    pub output: Option<PathBuf>,
    pub counts: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub predictions: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub rows: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub vocab: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub truth: Option<PathBuf>,
    pub n_tilde_range: Option<String>,
    pub p_range: Option<String>,
    pub output: Option<PathBuf>,
    pub best: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_fonts: Option<usize>,
    pub vocab_size: Option<usize>,
    pub tags_per_font: Option<usize>,
    pub feature_dim: Option<usize>,
    pub miss_rate: Option<f64>,
    pub noise_rate: Option<f64>,
    pub seed: Option<u64>,
    pub queries_per_font: Option<usize>,
    pub sigma: Option<f64>,
    pub target_accuracy: Option<f64>,
    pub temperature: Option<f64>,
    pub n_tilde: Option<usize>,
    pub p: Option<usize>,
    pub theta: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateSection {
    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub genres: Option<PathBuf>,
    pub normalize: Option<ColumnScaling>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        if cfg.format_version != FORMAT_VERSION {
            bail!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                cfg.format_version
            );
        }
        if let Some(rng) = &cfg.rng {
            if rng != RNG_NAME {
                bail!("unsupported rng `{rng}` (expected `{RNG_NAME}`)");
            }
        }
        Ok(cfg)
    }

    /// Flag value if given, else the config value resolved against the
    /// config file's directory.
    pub fn path(&self, flag: Option<PathBuf>, file: &Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| file.as_ref().map(|p| self.base_dir.join(p)))
    }
}
