//! Text formats shared by the library and the command line.
//!
//! * tag records: `font_id,tag,tag,...` per line, or one JSON object
//!   `{"font_id": .., "tags": [..]}` per line
//! * vocabulary: `tag,count` with a header, in vocabulary order
//! * score tables: header `sample_id,<column ids>`, one row per sample
//! * feature stores: `id,v1,...,vD` per line, no header

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Estimate;
use crate::exemplar::{score_from_matrix, ExemplarSet, FeatureStore, FeatureVector, ScoreVector};
use crate::metrics::csv_field;
use crate::scalar::Scalar;
use crate::vocab::{RawTagRecord, TagSet, TagVocabulary};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn csv_reader(text: &str, headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    font_id: String,
    #[serde(default)]
    tags: Vec<String>,
}

/// Parses tag records in either the delimited or the JSON-lines layout.
pub fn parse_tag_records(text: &str, source: &str) -> Result<Vec<RawTagRecord>> {
    let json = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with('{'));
    let mut records = Vec::new();
    if json {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let r: JsonRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(source, format!("line {}: {e}", i + 1)))?;
            records.push(RawTagRecord::new(r.font_id, &r.tags).map_err(|_| Error::EmptyFontId { line: i + 1 })?);
        }
    } else {
        for rec in csv_reader(text, false).records() {
            let rec = rec.map_err(|e| Error::parse(source, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let id = rec.get(0).unwrap_or_default();
            let tags: Vec<&str> = rec.iter().skip(1).collect();
            records.push(RawTagRecord::new(id, &tags).map_err(|_| Error::EmptyFontId { line })?);
        }
    }
    Ok(records)
}

pub fn read_tag_records(path: &Path) -> Result<Vec<RawTagRecord>> {
    parse_tag_records(&read_text(path)?, &source_name(path))
}

pub fn format_tag_records(records: &[RawTagRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&csv_field(&r.font_id));
        for t in &r.tags {
            out.push(',');
            out.push_str(&csv_field(t));
        }
        out.push('\n');
    }
    out
}

/// Records naming the tags of each set, in vocabulary order.
pub fn tag_set_records(ids: &[String], sets: &[TagSet], vocab: &TagVocabulary) -> Vec<RawTagRecord> {
    ids.iter()
        .zip(sets)
        .map(|(id, s)| RawTagRecord {
            font_id: id.clone(),
            tags: vocab.names(s).into_iter().map(str::to_string).collect(),
        })
        .collect()
}

/// Reads records whose tags are already canonical; unknown tags are an error.
pub fn parse_labelled_sets(text: &str, source: &str, vocab: &TagVocabulary) -> Result<Vec<(String, TagSet)>> {
    let records = parse_tag_records(text, source)?;
    let mut seen = BTreeMap::new();
    records
        .into_iter()
        .map(|r| {
            if seen.insert(r.font_id.clone(), ()).is_some() {
                return Err(Error::DuplicateId(r.font_id));
            }
            let set = vocab.resolve(&r.tags)?;
            Ok((r.font_id, set))
        })
        .collect()
}

pub fn format_vocabulary(vocab: &TagVocabulary) -> String {
    let mut out = String::from("tag,count\n");
    for (t, c) in vocab.tags().iter().zip(vocab.counts()) {
        let _ = writeln!(out, "{},{c}", csv_field(t));
    }
    out
}

pub fn parse_vocabulary(text: &str, source: &str) -> Result<TagVocabulary> {
    let mut entries = Vec::new();
    for rec in csv_reader(text, true).records() {
        let rec = rec.map_err(|e| Error::parse(source, e))?;
        if rec.len() != 2 {
            return Err(Error::parse(
                source,
                format!("expected `tag,count`, got {} fields", rec.len()),
            ));
        }
        let count = rec[1].parse::<usize>().map_err(|e| Error::parse(source, e))?;
        entries.push((rec[0].to_string(), count));
    }
    TagVocabulary::from_entries(entries)
}

pub fn read_vocabulary(path: &Path) -> Result<TagVocabulary> {
    parse_vocabulary(&read_text(path)?, &source_name(path))
}

/// Numeric table with a `sample_id` header row naming its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<F> {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub rows: Vec<Vec<F>>,
}

impl<F: Scalar> ScoreTable<F> {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv_reader(text, true);
        let header = reader.headers().map_err(|e| Error::parse(source, e))?.clone();
        if header.get(0) != Some("sample_id") {
            return Err(Error::parse(source, "header must start with `sample_id`"));
        }
        let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_ids = Vec::new();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::parse(source, e))?;
            if rec.len() != col_ids.len() + 1 {
                return Err(Error::LengthMismatch {
                    expected: col_ids.len(),
                    actual: rec.len().saturating_sub(1),
                });
            }
            row_ids.push(rec[0].to_string());
            rows.push(parse_values(rec.iter().skip(1), source)?);
        }
        Ok(Self { row_ids, col_ids, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &source_name(path))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id");
        for c in &self.col_ids {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (id, row) in self.row_ids.iter().zip(&self.rows) {
            out.push_str(&csv_field(id));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Score vectors with columns rearranged into exemplar order. The table
    /// must have exactly one column per exemplar.
    pub fn exemplar_scores(&self, exemplars: &ExemplarSet) -> Result<Vec<ScoreVector<F>>> {
        let positions = column_positions(&self.col_ids, exemplars.ids().into_iter(), exemplars.len())?;
        self.rows
            .iter()
            .map(|row| {
                let aligned: Vec<F> = positions.iter().map(|&c| row[c]).collect();
                score_from_matrix(&aligned, exemplars.len())
            })
            .collect()
    }

    /// Per-sample dense tag scores in vocabulary order.
    pub fn tag_scores(&self, vocab: &TagVocabulary) -> Result<Vec<Vec<F>>> {
        let positions = column_positions(&self.col_ids, vocab.tags().iter().map(String::as_str), vocab.len())?;
        self.rows
            .iter()
            .map(|row| {
                let dense: Vec<F> = positions.iter().map(|&c| row[c]).collect();
                match dense.iter().position(|v| !v.is_finite()) {
                    Some(index) => Err(Error::NonFinite { index }),
                    None => Ok(dense),
                }
            })
            .collect()
    }
}

fn column_positions<'a>(
    columns: &[String],
    wanted: impl Iterator<Item = &'a str>,
    expected: usize,
) -> Result<Vec<usize>> {
    if columns.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: columns.len(),
        });
    }
    let index: BTreeMap<&str, usize> = columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    if index.len() != columns.len() {
        return Err(Error::DuplicateId("score table column".into()));
    }
    wanted
        .map(|id| index.get(id).copied().ok_or_else(|| Error::MissingId(id.to_string())))
        .collect()
}

fn parse_values<'a, F: Scalar>(fields: impl Iterator<Item = &'a str>, source: &str) -> Result<Vec<F>> {
    fields
        .map(|v| {
            v.parse::<f64>()
                .map(F::from_f64_lossy)
                .map_err(|e| Error::parse(source, format!("`{v}`: {e}")))
        })
        .collect()
}

pub fn parse_feature_store<F: Scalar>(text: &str, source: &str) -> Result<FeatureStore<F>> {
    let mut rows = Vec::new();
    for rec in csv_reader(text, false).records() {
        let rec = rec.map_err(|e| Error::parse(source, e))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::EmptyFontId {
                line: rec.position().map_or(0, |p| p.line() as usize),
            });
        }
        rows.push((id, FeatureVector::new(parse_values(rec.iter().skip(1), source)?)?));
    }
    FeatureStore::new(rows)
}

pub fn read_feature_store<F: Scalar>(path: &Path) -> Result<FeatureStore<F>> {
    parse_feature_store(&read_text(path)?, &source_name(path))
}

pub fn format_feature_rows<F: Scalar>(rows: &[(String, FeatureVector<F>)]) -> String {
    let mut out = String::new();
    for (id, v) in rows {
        out.push_str(&csv_field(id));
        for x in v.values() {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// One line per sample: `sample_id,tag:count,...`, by descending count.
pub fn format_count_line(sample_id: &str, estimate: &Estimate, vocab: &TagVocabulary) -> String {
    let mut line = csv_field(sample_id);
    for (t, c) in estimate.ranked_counts() {
        line.push(',');
        line.push_str(&csv_field(&format!("{}:{c}", vocab.name(t))));
    }
    line
}

/// Machine-readable mirror of an [`Estimate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub sample_id: String,
    pub selected: Vec<String>,
    pub tag_counts: BTreeMap<String, usize>,
    pub contributing: Vec<String>,
}

impl EstimateRecord {
    pub fn new(sample_id: &str, estimate: &Estimate, vocab: &TagVocabulary, exemplars: &ExemplarSet) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            selected: vocab
                .names(&estimate.selected)
                .into_iter()
                .map(str::to_string)
                .collect(),
            tag_counts: estimate
                .tag_counts
                .iter()
                .map(|(&t, &c)| (vocab.name(t).to_string(), c))
                .collect(),
            contributing: estimate
                .contributing_ids(exemplars)
                .into_iter()
                .map(str::to_string)
                .collect(),
        }
    }
}
