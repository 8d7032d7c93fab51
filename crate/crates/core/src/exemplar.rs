//! Exemplar fonts and the scoring backends that rank them for a query.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::scalar::{cmp_scalar, euclidean, Scalar};
use crate::vocab::{canonicalize_counting, MergeRules, RawTagRecord, TagSet, TagVocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exemplar {
    pub font_id: String,
    pub tags: TagSet,
}

/// Exemplar fonts ordered by font id, each with its canonical tag set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExemplarSet {
    exemplars: Vec<Exemplar>,
    vocab_size: usize,
}

impl ExemplarSet {
    /// Builds a set from already canonical tag sets. Sorted by font id.
    pub fn new(mut exemplars: Vec<Exemplar>, vocab: &TagVocabulary) -> Result<Self> {
        for e in &exemplars {
            if e.font_id.is_empty() {
                return Err(Error::EmptyFontId { line: 0 });
            }
            vocab.check_set(&e.tags)?;
        }
        exemplars.sort_by(|a, b| a.font_id.cmp(&b.font_id));
        if let Some(w) = exemplars.windows(2).find(|w| w[0].font_id == w[1].font_id) {
            return Err(Error::DuplicateId(w[0].font_id.clone()));
        }
        Ok(Self {
            exemplars,
            vocab_size: vocab.len(),
        })
    }

    /// Number of exemplars N.
    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn get(&self, index: usize) -> &Exemplar {
        &self.exemplars[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.exemplars.iter().map(|e| e.font_id.as_str()).collect()
    }

    pub fn position(&self, font_id: &str) -> Option<usize> {
        self.exemplars
            .binary_search_by(|e| e.font_id.as_str().cmp(font_id))
            .ok()
    }
}

/// Canonicalizes raw tag records into an exemplar set. Also returns the
/// number of raw tags dropped as out of vocabulary.
pub fn load_exemplars(
    records: &[RawTagRecord],
    rules: &MergeRules,
    vocab: &TagVocabulary,
) -> Result<(ExemplarSet, usize)> {
    let mut dropped = 0;
    let exemplars = records
        .iter()
        .map(|r| {
            let (tags, d) = canonicalize_counting(&r.tags, rules, vocab);
            dropped += d;
            Exemplar {
                font_id: r.font_id.clone(),
                tags,
            }
        })
        .collect();
    Ok((ExemplarSet::new(exemplars, vocab)?, dropped))
}

/// Nonnegative per-exemplar scores for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<F> {
    scores: Vec<F>,
    normalized: bool,
}

impl<F: Scalar> ScoreVector<F> {
    pub fn scores(&self) -> &[F] {
        &self.scores
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Multiplies every score by a positive constant.
    pub fn scaled(&self, factor: F) -> Result<Self> {
        let row: Vec<F> = self.scores.iter().map(|&s| s * factor).collect();
        score_from_matrix(&row, row.len())
    }
}

/// Validates one externally computed score row.
pub fn score_from_matrix<F: Scalar>(row: &[F], expected_n: usize) -> Result<ScoreVector<F>> {
    if row.len() != expected_n {
        return Err(Error::LengthMismatch {
            expected: expected_n,
            actual: row.len(),
        });
    }
    for (index, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if v < F::zero() {
            return Err(Error::Negative { index });
        }
    }
    let sum: F = row.iter().copied().sum();
    Ok(ScoreVector {
        scores: row.to_vec(),
        normalized: (sum - F::one()).abs() <= F::sum_tolerance(),
    })
}

/// Fixed-dimension feature vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<F>(Vec<F>);

impl<F: Scalar> FeatureVector<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[F] {
        &self.0
    }
}

/// Feature vectors keyed by id, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore<F> {
    ids: Vec<String>,
    vectors: Vec<FeatureVector<F>>,
    dim: usize,
}

impl<F: Scalar> FeatureStore<F> {
    pub fn new(rows: Vec<(String, FeatureVector<F>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.dim());
        let mut seen = BTreeSet::new();
        let mut ids = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len());
        for (id, v) in rows {
            if v.dim() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: v.dim(),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            ids.push(id);
            vectors.push(v);
        }
        Ok(Self { ids, vectors, dim })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[FeatureVector<F>] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Vectors reordered to match the exemplar order; every exemplar must
    /// have a feature row.
    pub fn aligned_to(&self, exemplars: &ExemplarSet) -> Result<Vec<FeatureVector<F>>> {
        let by_id: HashMap<&str, &FeatureVector<F>> = self.ids.iter().map(String::as_str).zip(&self.vectors).collect();
        if by_id.len() != exemplars.len() {
            return Err(Error::LengthMismatch {
                expected: exemplars.len(),
                actual: by_id.len(),
            });
        }
        exemplars
            .iter()
            .map(|e| {
                by_id
                    .get(e.font_id.as_str())
                    .map(|v| (*v).clone())
                    .ok_or_else(|| Error::MissingId(e.font_id.clone()))
            })
            .collect()
    }
}

/// Softmax over negative Euclidean distance to each exemplar feature.
pub fn nearest_exemplar_scores<F: Scalar>(
    query: &FeatureVector<F>,
    exemplar_features: &[FeatureVector<F>],
    temperature: F,
) -> Result<ScoreVector<F>> {
    if exemplar_features.is_empty() {
        return Err(Error::NoExemplars);
    }
    if !temperature.is_finite() || temperature <= F::zero() {
        return Err(Error::InvalidParameter("temperature must be positive".into()));
    }
    let logits = exemplar_features
        .iter()
        .map(|e| {
            if e.dim() != query.dim() {
                Err(Error::LengthMismatch {
                    expected: query.dim(),
                    actual: e.dim(),
                })
            } else {
                Ok(-euclidean(query.values(), e.values()) / temperature)
            }
        })
        .collect::<Result<Vec<F>>>()?;
    Ok(ScoreVector {
        scores: softmax(&logits),
        normalized: true,
    })
}

fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&l| (l - max).exp()).collect();
    // Summing in sorted order keeps the result independent of exemplar order.
    let mut sorted = exps.clone();
    sorted.sort_by(cmp_scalar);
    let total: F = sorted.into_iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Indices of the `n_tilde` highest scores, descending; equal scores keep
/// ascending index order.
pub fn top_n_indices<F: Scalar>(scores: &ScoreVector<F>, n_tilde: usize) -> Result<Vec<usize>> {
    if n_tilde == 0 || n_tilde > scores.len() {
        return Err(Error::InvalidParameter(format!(
            "n_tilde must be in 1..={}, got {n_tilde}",
            scores.len()
        )));
    }
    let s = scores.scores();
    let mut order: Vec<usize> = (0..s.len()).collect();
    let cmp = |&a: &usize, &b: &usize| cmp_scalar(&s[b], &s[a]).then(a.cmp(&b));
    if n_tilde < order.len() {
        order.select_nth_unstable_by(n_tilde - 1, cmp);
        order.truncate(n_tilde);
    }
    order.sort_by(cmp);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector<f64> {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn vocab() -> TagVocabulary {
        TagVocabulary::from_entries(vec![("a".into(), 2), ("b".into(), 1)]).unwrap()
    }

    #[test]
    fn load_orders_by_id_and_rejects_duplicates() {
        let v = vocab();
        let recs = vec![
            RawTagRecord::new("z", &["a"]).unwrap(),
            RawTagRecord::new("m", &["b", "q"]).unwrap(),
        ];
        let (set, dropped) = load_exemplars(&recs, &MergeRules::default(), &v).unwrap();
        assert_eq!(set.ids(), vec!["m", "z"]);
        assert_eq!(set.len(), 2);
        assert_eq!(dropped, 1);
        assert_eq!(set.position("z"), Some(1));

        let one = vec![RawTagRecord::new("x", &["a"]).unwrap()];
        assert_eq!(load_exemplars(&one, &MergeRules::default(), &v).unwrap().0.len(), 1);

        let dup = vec![
            RawTagRecord::new("x", &["a"]).unwrap(),
            RawTagRecord::new("x", &["b"]).unwrap(),
        ];
        assert!(matches!(
            load_exemplars(&dup, &MergeRules::default(), &v),
            Err(Error::DuplicateId(id)) if id == "x"
        ));
    }

    #[test]
    fn matrix_rows() {
        let s = score_from_matrix(&[0.2, 0.8], 2).unwrap();
        assert!(s.is_normalized());
        let s = score_from_matrix(&[1.0, 3.0], 2).unwrap();
        assert!(!s.is_normalized());
        assert!(matches!(
            score_from_matrix(&[0.5], 2),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            score_from_matrix(&[0.5, -0.1], 2),
            Err(Error::Negative { index: 1 })
        ));
        assert!(matches!(
            score_from_matrix(&[f64::NAN, 0.1], 2),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn nearest_exemplar_examples() {
        let exemplars = vec![fv(&[10.0, 10.0]), fv(&[-10.0, 5.0]), fv(&[7.0, -9.0]), fv(&[0.5, 0.5])];
        let s = nearest_exemplar_scores(&fv(&[0.5, 0.5]), &exemplars, 1.0).unwrap();
        assert_eq!(top_n_indices(&s, 1).unwrap(), vec![3]);

        let s = nearest_exemplar_scores(&fv(&[0.0, 0.0]), &[fv(&[1.0, 0.0]), fv(&[0.0, 1.0])], 1.0).unwrap();
        assert!((s.scores()[0] - 0.5).abs() < 1e-12 && (s.scores()[1] - 0.5).abs() < 1e-12);

        // softmax(-1, -2) evaluated directly
        let e1 = (-1.0f64).exp();
        let e2 = (-2.0f64).exp();
        let expected = [e1 / (e1 + e2), e2 / (e1 + e2)];
        let s = nearest_exemplar_scores(&fv(&[0.0, 0.0]), &[fv(&[1.0, 0.0]), fv(&[0.0, 2.0])], 1.0).unwrap();
        assert!((s.scores()[0] - 0.7311).abs() < 1e-4);
        assert!((s.scores()[1] - 0.2689).abs() < 1e-4);
        assert!((s.scores()[0] - expected[0]).abs() < 1e-12);
        assert!(s.is_normalized());
    }

    #[test]
    fn nearest_exemplar_errors() {
        assert!(matches!(
            nearest_exemplar_scores(&fv(&[0.0]), &[], 1.0),
            Err(Error::NoExemplars)
        ));
        assert!(matches!(
            nearest_exemplar_scores(&fv(&[0.0]), &[fv(&[0.0, 1.0])], 1.0),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(nearest_exemplar_scores(&fv(&[0.0]), &[fv(&[1.0])], 0.0).is_err());
        assert!(FeatureVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn top_n_examples() {
        let s = score_from_matrix(&[0.1, 0.7, 0.2], 3).unwrap();
        assert_eq!(top_n_indices(&s, 2).unwrap(), vec![1, 2]);
        assert_eq!(top_n_indices(&s, 3).unwrap(), vec![1, 2, 0]);
        let eq = score_from_matrix(&[0.25; 4], 4).unwrap();
        assert_eq!(top_n_indices(&eq, 2).unwrap(), vec![0, 1]);
        assert!(top_n_indices(&s, 0).is_err());
        assert!(top_n_indices(&s, 4).is_err());
    }

    #[test]
    fn works_for_f32() {
        let q = FeatureVector::new(vec![0.0f32, 0.0]).unwrap();
        let ex = vec![
            FeatureVector::new(vec![1.0f32, 0.0]).unwrap(),
            FeatureVector::new(vec![0.0f32, 2.0]).unwrap(),
        ];
        let s = nearest_exemplar_scores(&q, &ex, 1.0).unwrap();
        assert!((s.scores()[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn feature_store_alignment() {
        let store = FeatureStore::new(vec![("z".into(), fv(&[1.0])), ("m".into(), fv(&[2.0]))]).unwrap();
        let v = vocab();
        let set = ExemplarSet::new(
            vec![
                Exemplar {
                    font_id: "z".into(),
                    tags: TagSet::new(),
                },
                Exemplar {
                    font_id: "m".into(),
                    tags: TagSet::new(),
                },
            ],
            &v,
        )
        .unwrap();
        let aligned = store.aligned_to(&set).unwrap();
        assert_eq!(aligned[0].values(), &[2.0]);
        assert!(FeatureStore::new(vec![("a".into(), fv(&[1.0])), ("b".into(), fv(&[1.0, 2.0]))]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_is_normalized(
            query in prop::collection::vec(-50.0f64..50.0, 3),
            points in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 1..40),
            temperature in 0.01f64..20.0,
        ) {
            let ex: Vec<_> = points.iter().map(|p| fv(p)).collect();
            let s = nearest_exemplar_scores(&fv(&query), &ex, temperature).unwrap();
            let sum: f64 = s.scores().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(s.scores().iter().all(|&v| v >= 0.0 && v.is_finite()));
        }

        #[test]
        fn selection_is_scale_invariant_and_prefix_closed(
            row in prop::collection::vec(0u32..20, 1..30),
            factor in 0.001f64..1000.0,
        ) {
            let row: Vec<f64> = row.into_iter().map(f64::from).collect();
            let s = score_from_matrix(&row, row.len()).unwrap();
            let scaled = s.scaled(factor).unwrap();
            let n = row.len();
            let full = top_n_indices(&s, n).unwrap();
            for k in 1..=n {
                let top = top_n_indices(&s, k).unwrap();
                prop_assert_eq!(&top, &top_n_indices(&scaled, k).unwrap());
                prop_assert_eq!(&top[..], &full[..k]);
            }
        }
    }
}
