use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use impress::corpus::{genres_of, heatmap_svg, parse_corpus, ColumnScaling};
use impress::io::{read_text, read_vocabulary};
use impress::GenreImpressionMatrix64;

use super::required;
use crate::config::RunConfig;
use crate::output::{check_input, Staged};

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum Normalize {
    /// Divide each genre column by its total tag occurrences
    TagTotal,
    /// Divide each genre column by its number of items
    ItemCount,
}

impl From<Normalize> for ColumnScaling {
    fn from(n: Normalize) -> Self {
        match n {
            Normalize::TagTotal => ColumnScaling::TagTotal,
            Normalize::ItemCount => ColumnScaling::ItemCount,
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Items as JSON lines: `{"item_id", "genre", "words": [[tag, ...], ...]}`
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vocabulary file (`tag,count`)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Genre list, one per line [default: genres found in the corpus, sorted]
    #[arg(long)]
    genres: Option<PathBuf>,
    /// Column scaling before the per-tag z-score [default: tag-total]
    #[arg(long, value_enum)]
    normalize: Option<Normalize>,
    /// Directory receiving matrix.csv, heatmap.svg, tags.txt and genres.txt
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn read_genres(path: &std::path::Path) -> Result<Vec<String>> {
    let mut genres = Vec::new();
    for line in read_text(path)?.lines() {
        let g = line.trim();
        if g.is_empty() || g.starts_with('#') {
            continue;
        }
        if genres.iter().any(|x| x == g) {
            bail!("genre `{g}` listed twice in {}", path.display());
        }
        genres.push(g.to_string());
    }
    Ok(genres)
}

fn lines(items: &[String]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.correlate;
    let corpus_path = required(cfg.path(args.corpus, &sec.corpus), "corpus")?;
    let vocab_path = required(cfg.path(args.vocab, &sec.vocab), "vocab")?;
    let genres_path = cfg.path(args.genres, &sec.genres);
    let out_dir = required(cfg.path(args.out_dir, &sec.out_dir), "out-dir")?;
    let scaling: ColumnScaling = args.normalize.map(Into::into).or(sec.normalize).unwrap_or_default();
    check_input(&corpus_path, "corpus")?;
    check_input(&vocab_path, "vocabulary")?;
    if let Some(p) = &genres_path {
        check_input(p, "genres")?;
    }

    let vocab = read_vocabulary(&vocab_path)?;
    let items = parse_corpus(&read_text(&corpus_path)?, &corpus_path.display().to_string())?;
    let genres = match &genres_path {
        Some(p) => read_genres(p)?,
        None => genres_of(&items),
    };
    let matrix = GenreImpressionMatrix64::build(&items, &vocab, &genres, scaling)
        .with_context(|| format!("corpus {}", corpus_path.display()))?;
    let ordered = matrix.ordered();

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut staged = Staged::new();
    staged.add(&out_dir.join("matrix.csv"), ordered.to_csv())?;
    staged.add(&out_dir.join("heatmap.svg"), heatmap_svg(&ordered))?;
    staged.add(&out_dir.join("tags.txt"), lines(&ordered.row_labels))?;
    staged.add(&out_dir.join("genres.txt"), lines(&ordered.col_labels))?;
    staged.commit()?;
    eprintln!("{} items, {} tags x {} genres", items.len(), vocab.len(), genres.len());
    Ok(())
}
