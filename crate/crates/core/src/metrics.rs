//! Macro-averaged multi-label evaluation and the (n_tilde, p) grid sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{select_tags, EnsembleParams};
use crate::exemplar::{top_n_indices, ExemplarSet, ScoreVector};
use crate::scalar::{f1, Scalar};
use crate::vocab::{TagSet, TagVocabulary};

/// Per-tag confusion counts. Merging two tables is associative and
/// commutative, so samples can be accumulated in any grouping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub n_samples: usize,
}

impl Confusion {
    pub fn new(k: usize) -> Self {
        Self {
            tp: vec![0; k],
            fp: vec![0; k],
            fn_: vec![0; k],
            n_samples: 0,
        }
    }

    pub fn add(&mut self, predicted: &TagSet, truth: &TagSet) {
        for &t in predicted {
            if truth.contains(&t) {
                self.tp[t] += 1;
            } else {
                self.fp[t] += 1;
            }
        }
        for &t in truth.difference(predicted) {
            self.fn_[t] += 1;
        }
        self.n_samples += 1;
    }

    pub fn merge(mut self, other: &Confusion) -> Self {
        for (a, b) in [
            (&mut self.tp, &other.tp),
            (&mut self.fp, &other.fp),
            (&mut self.fn_, &other.fn_),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.n_samples += other.n_samples;
        self
    }

    pub fn report<F: Scalar>(&self) -> EvalReport<F> {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                F::zero()
            } else {
                F::from_usize_lossy(num) / F::from_usize_lossy(den)
            }
        };
        let per_tag: Vec<TagStats<F>> = (0..self.tp.len())
            .map(|t| {
                let (tp, fp, fn_) = (self.tp[t], self.fp[t], self.fn_[t]);
                let precision = ratio(tp, tp + fp);
                let recall = ratio(tp, tp + fn_);
                TagStats {
                    tp,
                    fp,
                    fn_,
                    precision,
                    recall,
                    f1: f1(precision, recall),
                }
            })
            .collect();
        let k = per_tag.len();
        let avg = |f: fn(&TagStats<F>) -> F| {
            if k == 0 {
                F::zero()
            } else {
                per_tag.iter().map(f).sum::<F>() / F::from_usize_lossy(k)
            }
        };
        EvalReport {
            macro_recall: avg(|s| s.recall),
            macro_precision: avg(|s| s.precision),
            macro_f1: avg(|s| s.f1),
            per_tag,
            n_samples: self.n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagStats<F> {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<F> {
    /// Indexed by vocabulary position.
    pub per_tag: Vec<TagStats<F>>,
    pub macro_recall: F,
    pub macro_precision: F,
    pub macro_f1: F,
    pub n_samples: usize,
}

impl<F: Scalar> EvalReport<F> {
    /// Machine-readable rows `tag,tp,fp,fn,precision,recall,f1`.
    pub fn to_rows(&self, vocab: &TagVocabulary) -> String {
        let mut out = String::from("tag,tp,fp,fn,precision,recall,f1\n");
        for (i, s) in self.per_tag.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(vocab.name(i)),
                s.tp,
                s.fp,
                s.fn_,
                s.precision,
                s.recall,
                s.f1
            );
        }
        out
    }

    /// Aligned per-tag table followed by the macro summary.
    pub fn to_text(&self, vocab: &TagVocabulary) -> String {
        let width = vocab.tags().iter().map(String::len).max().unwrap_or(3).max(3);
        let mut out = format!(
            "{:<width$}  {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}\n",
            "tag", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        for (i, s) in self.per_tag.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6} {:>6} {:>6}  {:>9.4} {:>9.4} {:>9.4}",
                vocab.name(i),
                s.tp,
                s.fp,
                s.fn_,
                s.precision.to_f64_lossy(),
                s.recall.to_f64_lossy(),
                s.f1.to_f64_lossy()
            );
        }
        let _ = writeln!(out, "\nsamples          {}", self.n_samples);
        let _ = writeln!(out, "macro recall     {:.4}", self.macro_recall.to_f64_lossy());
        let _ = writeln!(out, "macro precision  {:.4}", self.macro_precision.to_f64_lossy());
        let _ = writeln!(out, "macro f1         {:.4}", self.macro_f1.to_f64_lossy());
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Macro-averaged recall, precision and F1 over every vocabulary tag.
///
/// A tag with no predictions has precision 0, a tag with no positives has
/// recall 0, and F1 is 0 when both are 0. Tags absent from both sides still
/// count in the average.
pub fn evaluate<F: Scalar>(
    predictions: &[TagSet],
    ground_truth: &[TagSet],
    vocab: &TagVocabulary,
) -> Result<EvalReport<F>> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            expected: ground_truth.len(),
            actual: predictions.len(),
        });
    }
    let mut confusion = Confusion::new(vocab.len());
    for (p, t) in predictions.iter().zip(ground_truth) {
        vocab.check_set(p)?;
        vocab.check_set(t)?;
        confusion.add(p, t);
    }
    Ok(confusion.report())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint<F> {
    pub n_tilde: usize,
    pub p: usize,
    pub macro_f1: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult<F> {
    /// Ordered by n_tilde, then p.
    pub grid: Vec<GridPoint<F>>,
    pub best: GridPoint<F>,
}

impl<F: Scalar> SweepResult<F> {
    pub fn best_params(&self) -> EnsembleParams {
        EnsembleParams::new(self.best.n_tilde, self.best.p).expect("grid holds valid pairs")
    }

    pub fn get(&self, n_tilde: usize, p: usize) -> Option<F> {
        self.grid
            .iter()
            .find(|g| g.n_tilde == n_tilde && g.p == p)
            .map(|g| g.macro_f1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_tilde,p,macro_f1\n");
        for g in &self.grid {
            let _ = writeln!(out, "{},{},{}", g.n_tilde, g.p, g.macro_f1);
        }
        out
    }
}

/// Evaluates the ensemble estimator on every `(n_tilde, p)` pair with
/// `1 <= p <= n_tilde <= N` and returns the grid with its best point.
/// Ties prefer smaller `n_tilde`, then smaller `p`.
pub fn sweep<F: Scalar>(
    score_rows: &[ScoreVector<F>],
    ground_truth: &[TagSet],
    exemplars: &ExemplarSet,
    n_tilde_range: &[usize],
    p_range: &[usize],
) -> Result<SweepResult<F>> {
    if score_rows.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            expected: ground_truth.len(),
            actual: score_rows.len(),
        });
    }
    let n = exemplars.len();
    let n_tildes: BTreeSet<usize> = n_tilde_range.iter().copied().filter(|&v| v >= 1 && v <= n).collect();
    let ps: BTreeSet<usize> = p_range.iter().copied().filter(|&v| v >= 1).collect();
    let max_n_tilde = *n_tildes.last().ok_or(Error::EmptyGrid)?;
    let rankings = score_rows
        .iter()
        .map(|s| {
            if s.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: s.len(),
                });
            }
            top_n_indices(s, max_n_tilde)
        })
        .collect::<Result<Vec<_>>>()?;
    sweep_rankings(&rankings, ground_truth, exemplars, &n_tildes, &ps)
}

/// Grid sweep over precomputed best-first exemplar rankings.
pub(crate) fn sweep_rankings<F: Scalar>(
    rankings: &[Vec<usize>],
    ground_truth: &[TagSet],
    exemplars: &ExemplarSet,
    n_tildes: &BTreeSet<usize>,
    ps: &BTreeSet<usize>,
) -> Result<SweepResult<F>> {
    let k = exemplars.vocab_size();
    let mut counts: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); rankings.len()];
    let mut used = 0;
    let mut grid = Vec::new();
    for &nt in n_tildes {
        for (row, ranking) in counts.iter_mut().zip(rankings) {
            for &i in &ranking[used..nt] {
                for &t in &exemplars.get(i).tags {
                    *row.entry(t).or_insert(0) += 1;
                }
            }
        }
        used = nt;
        for &p in ps.iter().filter(|&&p| p <= nt) {
            let mut confusion = Confusion::new(k);
            for (row, truth) in counts.iter().zip(ground_truth) {
                confusion.add(&select_tags(row, p), truth);
            }
            grid.push(GridPoint {
                n_tilde: nt,
                p,
                macro_f1: confusion.report::<F>().macro_f1,
            });
        }
    }
    let mut best = *grid.first().ok_or(Error::EmptyGrid)?;
    for g in &grid[1..] {
        if g.macro_f1 > best.macro_f1 {
            best = *g;
        }
    }
    Ok(SweepResult { grid, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exemplar::{score_from_matrix, Exemplar};
    use proptest::prelude::*;

    fn vocab(k: usize) -> TagVocabulary {
        TagVocabulary::from_entries((0..k).map(|i| (format!("t{i}"), 1)).collect()).unwrap()
    }

    /// Brute force over every (tag, sample) pair.
    fn oracle(pred: &[TagSet], truth: &[TagSet], k: usize) -> (f64, f64, f64) {
        let (mut r, mut p, mut f) = (0.0, 0.0, 0.0);
        for t in 0..k {
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for s in 0..pred.len() {
                match (pred[s].contains(&t), truth[s].contains(&t)) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    _ => {}
                }
            }
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            r += rec;
            p += prec;
            f += if prec + rec > 0.0 {
                2.0 * prec * rec / (prec + rec)
            } else {
                0.0
            };
        }
        (r / k as f64, p / k as f64, f / k as f64)
    }

    #[test]
    fn perfect_prediction() {
        let v = vocab(3);
        let sets = vec![TagSet::from([0, 1]), TagSet::from([2]), TagSet::from([0, 2])];
        let r = evaluate::<f64>(&sets, &sets, &v).unwrap();
        assert_eq!((r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_predictions_have_zero_recall() {
        let v = vocab(2);
        let truth = vec![TagSet::from([0]), TagSet::from([1])];
        let r = evaluate::<f64>(&[TagSet::new(), TagSet::new()], &truth, &v).unwrap();
        assert_eq!(r.macro_recall, 0.0);
        assert_eq!(r.macro_precision, 0.0);
    }

    #[test]
    fn hand_computed_two_tags() {
        let v = vocab(2);
        let truth = vec![TagSet::from([0]), TagSet::from([0, 1])];
        let pred = vec![TagSet::from([0, 1]), TagSet::from([0])];
        let r = evaluate::<f64>(&pred, &truth, &v).unwrap();
        let a = &r.per_tag[0];
        assert_eq!((a.tp, a.fp, a.fn_), (2, 0, 0));
        assert_eq!((a.precision, a.recall, a.f1), (1.0, 1.0, 1.0));
        let b = &r.per_tag[1];
        assert_eq!((b.tp, b.fp, b.fn_), (0, 1, 1));
        assert_eq!((b.precision, b.recall, b.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.macro_f1, 0.5);
        assert!(r
            .to_rows(&v)
            .starts_with("tag,tp,fp,fn,precision,recall,f1\nt0,2,0,0,1,1,1\n"));
        assert!(r.to_text(&v).contains("macro f1         0.5000"));
    }

    #[test]
    fn errors() {
        let v = vocab(2);
        assert!(matches!(
            evaluate::<f64>(&[TagSet::new()], &[], &v),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            evaluate::<f64>(&[TagSet::from([5])], &[TagSet::new()], &v),
            Err(Error::TagIndexOutOfRange { index: 5, .. })
        ));
    }

    fn fixture() -> (ExemplarSet, Vec<ScoreVector<f64>>, Vec<TagSet>) {
        // Tag 1 is noise on exemplar b, which ranks in the top two for the
        // first two queries.
        let v = vocab(2);
        let ex = ExemplarSet::new(
            vec![
                Exemplar {
                    font_id: "a".into(),
                    tags: TagSet::from([0]),
                },
                Exemplar {
                    font_id: "b".into(),
                    tags: TagSet::from([0, 1]),
                },
                Exemplar {
                    font_id: "c".into(),
                    tags: TagSet::from([1]),
                },
                Exemplar {
                    font_id: "d".into(),
                    tags: TagSet::from([1]),
                },
            ],
            &v,
        )
        .unwrap();
        let rows = vec![
            score_from_matrix(&[0.5, 0.3, 0.1, 0.1], 4).unwrap(),
            score_from_matrix(&[0.3, 0.5, 0.1, 0.1], 4).unwrap(),
            score_from_matrix(&[0.05, 0.05, 0.5, 0.4], 4).unwrap(),
        ];
        (ex, rows, vec![TagSet::from([0]), TagSet::from([0]), TagSet::from([1])])
    }

    #[test]
    fn sweep_single_point() {
        let (ex, rows, truth) = fixture();
        let s = sweep(&rows, &truth, &ex, &[2], &[1]).unwrap();
        assert_eq!(s.grid.len(), 1);
        assert_eq!((s.best.n_tilde, s.best.p), (2, 1));
    }

    #[test]
    fn sweep_prefers_filtering_noise() {
        let (ex, rows, truth) = fixture();
        let s = sweep(&rows, &truth, &ex, &[1, 2], &[1, 2]).unwrap();
        // exhaustive check against the estimator itself
        let v = vocab(2);
        for g in &s.grid {
            let preds: Vec<TagSet> = rows
                .iter()
                .map(|r| {
                    crate::estimator::estimate_ensemble(r, &ex, EnsembleParams::new(g.n_tilde, g.p).unwrap())
                        .unwrap()
                        .selected
                })
                .collect();
            assert_eq!(evaluate::<f64>(&preds, &truth, &v).unwrap().macro_f1, g.macro_f1);
        }
        assert_eq!(s.grid.len(), 3);
        assert!((s.get(1, 1).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.get(2, 1), Some(0.75));
        assert_eq!(s.get(2, 2), Some(1.0));
        assert_eq!((s.best.n_tilde, s.best.p), (2, 2));
        assert_eq!(s.best_params(), EnsembleParams::new(2, 2).unwrap());
    }

    #[test]
    fn sweep_tie_break_and_errors() {
        let (ex, rows, _) = fixture();
        let empty = vec![TagSet::new(); 3];
        let s = sweep(&rows, &empty, &ex, &[3, 1, 2], &[2, 1]).unwrap();
        assert!(s.grid.iter().all(|g| g.macro_f1 == 0.0));
        assert_eq!((s.best.n_tilde, s.best.p), (1, 1));
        assert!(s.to_csv().starts_with("n_tilde,p,macro_f1\n1,1,0\n2,1,0\n2,2,0\n"));
        let truth = vec![TagSet::new(); 3];
        assert!(matches!(sweep(&rows, &truth, &ex, &[5], &[1]), Err(Error::EmptyGrid)));
        assert!(matches!(sweep(&rows, &truth, &ex, &[1], &[2]), Err(Error::EmptyGrid)));
        assert!(matches!(
            sweep::<f64>(&rows, &truth, &ex, &[], &[1]),
            Err(Error::EmptyGrid)
        ));
        assert!(matches!(
            sweep(&rows, &truth[..2], &ex, &[1], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn instance() -> impl Strategy<Value = (usize, Vec<TagSet>, Vec<TagSet>)> {
        (1usize..=10, 1usize..=50).prop_flat_map(|(k, n)| {
            let set = prop::collection::btree_set(0..k, 0..=k);
            (
                Just(k),
                prop::collection::vec(set.clone(), n),
                prop::collection::vec(set, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_oracle((k, pred, truth) in instance()) {
            let r = evaluate::<f64>(&pred, &truth, &vocab(k)).unwrap();
            let (rec, prec, f) = oracle(&pred, &truth, k);
            prop_assert!((r.macro_recall - rec).abs() <= 1e-12);
            prop_assert!((r.macro_precision - prec).abs() <= 1e-12);
            prop_assert!((r.macro_f1 - f).abs() <= 1e-12);
            prop_assert!(r.macro_f1 >= 0.0 && r.macro_f1 <= 1.0);
            let max_f1 = r.per_tag.iter().map(|s| s.f1).fold(0.0, f64::max);
            prop_assert!(r.macro_f1 <= max_f1 + 1e-15);
        }

        #[test]
        fn order_invariant_and_mergeable((k, pred, truth) in instance(), split in 0usize..50) {
            let v = vocab(k);
            let r = evaluate::<f64>(&pred, &truth, &v).unwrap();
            let rp: Vec<_> = pred.iter().rev().cloned().collect();
            let rt: Vec<_> = truth.iter().rev().cloned().collect();
            prop_assert_eq!(&r, &evaluate::<f64>(&rp, &rt, &v).unwrap());

            let cut = split.min(pred.len());
            let mut a = Confusion::new(k);
            let mut b = Confusion::new(k);
            for i in 0..pred.len() {
                if i < cut { a.add(&pred[i], &truth[i]) } else { b.add(&pred[i], &truth[i]) }
            }
            prop_assert_eq!(r, b.merge(&a).report::<f64>());
        }
    }
}
