//! Genre-vs-impression correlation over a corpus of items (e.g. books),
//! each holding tag estimates for several words.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::csv_field;
use crate::scalar::{cmp_scalar, euclidean, mean, population_variance, Scalar};
use crate::vocab::{normalize_tag, TagSet, TagVocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusItem {
    pub item_id: String,
    pub genre: String,
    /// One canonical tag list per detected word.
    #[serde(default)]
    pub words: Vec<Vec<String>>,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                actual: bad.len(),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<F> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn values(&self) -> &[F] {
        &self.data
    }

    /// Rows and columns rearranged: entry `(i, j)` is `self[row_order[i], col_order[j]]`.
    pub fn permuted(&self, row_order: &[usize], col_order: &[usize]) -> Self {
        let mut out = Self::zeros(row_order.len(), col_order.len());
        for (i, &r) in row_order.iter().enumerate() {
            for (j, &c) in col_order.iter().enumerate() {
                out.set(i, j, self.get(r, c));
            }
        }
        out
    }
}

/// Tag-by-genre counts together with the number of items per genre.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulated<F> {
    pub counts: Matrix<F>,
    pub items_per_genre: Vec<usize>,
}

/// OR-accumulates word-level tag sets per item, then counts items per
/// `(tag, genre)` cell. Items with no tags contribute nothing.
pub fn accumulate<F: Scalar>(items: &[CorpusItem], vocab: &TagVocabulary, genres: &[String]) -> Result<Accumulated<F>> {
    if genres.is_empty() {
        return Err(Error::InvalidParameter("genre list is empty".into()));
    }
    let genre_index: HashMap<&str, usize> = genres.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let mut counts = Matrix::zeros(vocab.len(), genres.len());
    let mut items_per_genre = vec![0; genres.len()];
    for item in items {
        let g = *genre_index
            .get(item.genre.as_str())
            .ok_or_else(|| Error::UnknownGenre {
                item: item.item_id.clone(),
                genre: item.genre.clone(),
            })?;
        items_per_genre[g] += 1;
        let mut union = TagSet::new();
        for word in &item.words {
            let set = vocab.resolve(word).map_err(|e| Error::Item {
                item: item.item_id.clone(),
                source: Box::new(e),
            })?;
            union.extend(set);
        }
        for t in union {
            counts.set(t, g, counts.get(t, g) + F::one());
        }
    }
    Ok(Accumulated {
        counts,
        items_per_genre,
    })
}

/// Genres in the order they first appear after sorting by name.
pub fn genres_of(items: &[CorpusItem]) -> Vec<String> {
    items
        .iter()
        .map(|i| i.genre.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// How the first normalization step scales each genre column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnScaling {
    /// Divide by the column's total tag occurrences.
    #[default]
    TagTotal,
    /// Divide by the number of items in the genre.
    ItemCount,
}

/// Step one scales genre columns, step two z-scores each tag row with the
/// population variance. All-zero columns and constant rows become zeros.
pub fn normalize<F: Scalar>(
    raw: &Matrix<F>,
    scaling: ColumnScaling,
    items_per_genre: &[usize],
) -> Result<(Matrix<F>, Matrix<F>)> {
    if let Some(&bad) = raw.values().iter().find(|v| !v.is_finite() || **v < F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "raw counts must be finite and nonnegative, got {bad}"
        )));
    }
    if scaling == ColumnScaling::ItemCount && items_per_genre.len() != raw.cols() {
        return Err(Error::LengthMismatch {
            expected: raw.cols(),
            actual: items_per_genre.len(),
        });
    }
    let mut per_genre = Matrix::zeros(raw.rows(), raw.cols());
    let denoms: Vec<F> = match scaling {
        ColumnScaling::TagTotal => (0..raw.cols()).map(|c| raw.column(c).into_iter().sum()).collect(),
        ColumnScaling::ItemCount => items_per_genre.iter().map(|&n| F::from_usize_lossy(n)).collect(),
    };
    for (c, &denom) in denoms.iter().enumerate() {
        if denom > F::zero() {
            for r in 0..raw.rows() {
                per_genre.set(r, c, raw.get(r, c) / denom);
            }
        }
    }
    let mut zscored = Matrix::zeros(raw.rows(), raw.cols());
    for r in 0..raw.rows() {
        let row = per_genre.row(r);
        let m = mean(row);
        let sd = population_variance(row, m).sqrt();
        if sd > F::zero() && row.iter().any(|&v| v != row[0]) {
            for c in 0..raw.cols() {
                zscored.set(r, c, (per_genre.get(r, c) - m) / sd);
            }
        }
    }
    Ok((per_genre, zscored))
}

/// Average-linkage agglomerative clustering on Euclidean distance, returning
/// the dendrogram's leaf order.
///
/// The closest pair of clusters merges first; equal distances go to the pair
/// with the smallest member indices. When two clusters merge, the one whose
/// centroid has the lexicographically smaller sorted values goes first.
/// Neither rule looks at positions within a vector, so renumbering rows or
/// columns of a matrix does not change the resulting display.
pub fn leaf_order<F: Scalar>(points: &[&[F]]) -> Vec<usize> {
    let n = points.len();
    if n <= 1 {
        return (0..n).collect();
    }
    struct Cluster<F> {
        leaves: Vec<usize>,
        centroid: Vec<F>,
        min_index: usize,
    }
    let mut clusters: Vec<Option<Cluster<F>>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Some(Cluster {
                leaves: vec![i],
                centroid: p.to_vec(),
                min_index: i,
            })
        })
        .collect();
    let mut dist = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(points[i], points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    for _ in 1..n {
        let mut best: Option<(F, usize, usize, usize, usize)> = None;
        for i in 0..n {
            let Some(ci) = &clusters[i] else { continue };
            for j in i + 1..n {
                let Some(cj) = &clusters[j] else { continue };
                let (lo, hi) = (ci.min_index.min(cj.min_index), ci.min_index.max(cj.min_index));
                let cand = (dist[i][j], lo, hi, i, j);
                let better = match &best {
                    None => true,
                    Some(b) => cmp_scalar(&cand.0, &b.0)
                        .then((cand.1, cand.2).cmp(&(b.1, b.2)))
                        .is_lt(),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (_, _, _, i, j) = best.expect("at least two clusters remain");
        let a = clusters[i].take().expect("live cluster");
        let b = clusters[j].take().expect("live cluster");
        let (na, nb) = (F::from_usize_lossy(a.leaves.len()), F::from_usize_lossy(b.leaves.len()));
        for k in 0..n {
            if clusters[k].is_some() {
                let d = (na * dist[i][k] + nb * dist[j][k]) / (na + nb);
                dist[i][k] = d;
                dist[k][i] = d;
            }
        }
        let centroid: Vec<F> = a
            .centroid
            .iter()
            .zip(&b.centroid)
            .map(|(&x, &y)| (na * x + nb * y) / (na + nb))
            .collect();
        let (ka, kb) = (sorted_values(&a.centroid), sorted_values(&b.centroid));
        let a_first = ka
            .iter()
            .zip(&kb)
            .map(|(x, y)| cmp_scalar(x, y))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.min_index.cmp(&b.min_index))
            .is_lt();
        let (first, second) = if a_first { (a, b) } else { (b, a) };
        let mut leaves = first.leaves;
        leaves.extend(second.leaves);
        clusters[i] = Some(Cluster {
            leaves,
            centroid,
            min_index: first.min_index.min(second.min_index),
        });
    }
    clusters
        .into_iter()
        .flatten()
        .next()
        .map(|c| c.leaves)
        .unwrap_or_default()
}

fn sorted_values<F: Scalar>(v: &[F]) -> Vec<F> {
    let mut s = v.to_vec();
    s.sort_by(cmp_scalar);
    s
}

/// Independent leaf orderings of the rows and of the columns.
pub fn bicluster_order<F: Scalar>(zscored: &Matrix<F>) -> (Vec<usize>, Vec<usize>) {
    let rows: Vec<&[F]> = (0..zscored.rows()).map(|r| zscored.row(r)).collect();
    let t = zscored.transpose();
    let cols: Vec<&[F]> = (0..t.rows()).map(|r| t.row(r)).collect();
    (leaf_order(&rows), leaf_order(&cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenreImpressionMatrix<F> {
    pub tags: Vec<String>,
    pub genres: Vec<String>,
    pub raw: Matrix<F>,
    pub per_genre: Matrix<F>,
    pub zscored: Matrix<F>,
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
}

impl<F: Scalar> GenreImpressionMatrix<F> {
    /// Accumulate, normalize and order in one pass.
    pub fn build(
        items: &[CorpusItem],
        vocab: &TagVocabulary,
        genres: &[String],
        scaling: ColumnScaling,
    ) -> Result<Self> {
        let acc = accumulate::<F>(items, vocab, genres)?;
        let (per_genre, zscored) = normalize(&acc.counts, scaling, &acc.items_per_genre)?;
        let (row_order, col_order) = bicluster_order(&zscored);
        Ok(Self {
            tags: vocab.tags().to_vec(),
            genres: genres.to_vec(),
            raw: acc.counts,
            per_genre,
            zscored,
            row_order,
            col_order,
        })
    }

    /// The z-scored matrix with rows and columns in display order.
    pub fn ordered(&self) -> OrderedMatrix<F> {
        OrderedMatrix {
            row_labels: self.row_order.iter().map(|&r| self.tags[r].clone()).collect(),
            col_labels: self.col_order.iter().map(|&c| self.genres[c].clone()).collect(),
            values: self.zscored.permuted(&self.row_order, &self.col_order),
        }
    }
}

/// A labelled matrix as written to and read from delimiter-separated text.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMatrix<F> {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Matrix<F>,
}

impl<F: Scalar> OrderedMatrix<F> {
    /// Header `tag,<genre>...` then one row per tag. Values use the
    /// shortest representation that parses back to the same number.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tag");
        for c in &self.col_labels {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (r, label) in self.row_labels.iter().enumerate() {
            out.push_str(&csv_field(label));
            for &v in self.values.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse("matrix", e))?.clone();
        let col_labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::parse("matrix", e))?;
            row_labels.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>().map(F::from_f64_lossy))
                .collect::<std::result::Result<Vec<F>, _>>()
                .map_err(|e| Error::parse("matrix", e))?;
            rows.push(row);
        }
        Ok(Self {
            row_labels,
            col_labels,
            values: Matrix::from_rows(rows)?,
        })
    }
}

/// Diverging colour for `v` on a scale symmetric around zero with extreme
/// `max_abs`: white at zero, pure red at `+max_abs`, pure blue at `-max_abs`.
pub fn diverging_color<F: Scalar>(v: F, max_abs: F) -> (u8, u8, u8) {
    if max_abs.is_nan() || max_abs <= F::zero() {
        return (255, 255, 255);
    }
    let t = (v / max_abs).max(-F::one()).min(F::one()).to_f64_lossy();
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t > 0.0 {
        (255, fade, fade)
    } else if t < 0.0 {
        (fade, fade, 255)
    } else {
        (255, 255, 255)
    }
}

const CELL: usize = 14;

/// Renders an ordered matrix as an SVG heatmap with row and column labels.
pub fn heatmap_svg<F: Scalar>(m: &OrderedMatrix<F>) -> String {
    let max_abs = m.values.values().iter().fold(F::zero(), |acc, v| acc.max(v.abs()));
    let label_w = 8 * m.row_labels.iter().map(String::len).max().unwrap_or(0) + 10;
    let label_h = 7 * m.col_labels.iter().map(String::len).max().unwrap_or(0) + 10;
    let width = label_w + CELL * m.values.cols() + 10;
    let height = label_h + CELL * m.values.rows() + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (j, label) in m.col_labels.iter().enumerate() {
        let x = label_w + j * CELL + CELL / 2;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" transform="rotate(-90 {x} {y})">{text}</text>"#,
            y = label_h - 4,
            text = xml_escape(label)
        );
    }
    for (i, label) in m.row_labels.iter().enumerate() {
        let y = label_h + i * CELL;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{ty}" text-anchor="end">{text}</text>"#,
            x = label_w - 4,
            ty = y + CELL - 3,
            text = xml_escape(label)
        );
        for j in 0..m.values.cols() {
            let (r, g, b) = diverging_color(m.values.get(i, j), max_abs);
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                x = label_w + j * CELL
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Per-item word tag lists read from line-delimited JSON.
pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<CorpusItem>> {
    let mut items = Vec::new();
    let mut seen = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut item: CorpusItem =
            serde_json::from_str(line).map_err(|e| Error::parse(source, format!("line {}: {e}", line_no + 1)))?;
        item.words = item
            .words
            .into_iter()
            .map(|w| w.iter().map(|t| normalize_tag(t)).collect())
            .collect();
        if seen.insert(item.item_id.clone(), ()).is_some() {
            return Err(Error::DuplicateId(item.item_id));
        }
        items.push(item);
    }
    Ok(items)
}
