//! Tag estimation from exemplar scores.
//!
//! The ensemble estimator takes the `n_tilde` best-scoring exemplars, counts
//! how many of their tag sets contain each tag, and keeps the tags seen at
//! least `p` times. Aggregating several exemplars recovers tags missing from
//! any single one; the occurrence threshold filters tags that only one or
//! two exemplars carry.
//!
//! The multi-label baseline simply thresholds per-tag scores at `theta`.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplar::{top_n_indices, ExemplarSet, ScoreVector};
use crate::scalar::Scalar;
use crate::vocab::{normalize_tag, TagSet, TagVocabulary};

pub const DEFAULT_N_TILDE: usize = 11;
pub const DEFAULT_P: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleParams {
    n_tilde: usize,
    p: usize,
}

impl EnsembleParams {
    pub fn new(n_tilde: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n_tilde {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= p <= n_tilde, got p={p}, n_tilde={n_tilde}"
            )));
        }
        Ok(Self { n_tilde, p })
    }

    pub fn n_tilde(&self) -> usize {
        self.n_tilde
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            n_tilde: DEFAULT_N_TILDE,
            p: DEFAULT_P,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Estimate {
    /// Tags with at least `p` occurrences.
    pub selected: TagSet,
    /// Occurrences of every tag among the aggregated exemplars.
    pub tag_counts: BTreeMap<usize, usize>,
    /// Indices of the aggregated exemplars, best first.
    pub contributing: Vec<usize>,
}

impl Estimate {
    pub fn contributing_ids<'a>(&self, exemplars: &'a ExemplarSet) -> Vec<&'a str> {
        self.contributing
            .iter()
            .map(|&i| exemplars.get(i).font_id.as_str())
            .collect()
    }

    /// `(tag, count)` pairs by descending count, ties by vocabulary order.
    pub fn ranked_counts(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.tag_counts.iter().map(|(&t, &c)| (t, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Counts tag occurrences over the given exemplars.
pub fn aggregate_tags(indices: &[usize], exemplars: &ExemplarSet) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &i in indices {
        for &t in &exemplars.get(i).tags {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    counts
}

/// Tags whose count reaches `p`.
pub fn select_tags(counts: &BTreeMap<usize, usize>, p: usize) -> TagSet {
    counts.iter().filter(|&(_, &c)| c >= p).map(|(&t, _)| t).collect()
}

pub fn estimate_ensemble<F: Scalar>(
    scores: &ScoreVector<F>,
    exemplars: &ExemplarSet,
    params: EnsembleParams,
) -> Result<Estimate> {
    if scores.len() != exemplars.len() {
        return Err(Error::LengthMismatch {
            expected: exemplars.len(),
            actual: scores.len(),
        });
    }
    let contributing = top_n_indices(scores, params.n_tilde)?;
    let tag_counts = aggregate_tags(&contributing, exemplars);
    Ok(Estimate {
        selected: select_tags(&tag_counts, params.p),
        tag_counts,
        contributing,
    })
}

/// Conventional decision threshold for per-tag scores.
pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelParams<F> {
    theta: F,
    class_weights: Option<Vec<F>>,
}

impl<F: Scalar> MultiLabelParams<F> {
    pub fn new(theta: F) -> Result<Self> {
        if !(theta >= F::zero() && theta <= F::one()) {
            return Err(Error::InvalidParameter(format!("theta must be in [0, 1], got {theta}")));
        }
        Ok(Self {
            theta,
            class_weights: None,
        })
    }

    /// Attaches per-tag class weights; they must cover the vocabulary and be positive.
    pub fn with_class_weights(mut self, weights: Vec<F>, vocab_size: usize) -> Result<Self> {
        if weights.len() != vocab_size {
            return Err(Error::LengthMismatch {
                expected: vocab_size,
                actual: weights.len(),
            });
        }
        if let Some(index) = weights.iter().position(|&w| !w.is_finite() || w <= F::zero()) {
            return Err(Error::InvalidParameter(format!(
                "class weight {index} must be positive"
            )));
        }
        self.class_weights = Some(weights);
        Ok(self)
    }

    pub fn theta(&self) -> F {
        self.theta
    }

    pub fn class_weights(&self) -> Option<&[F]> {
        self.class_weights.as_deref()
    }
}

/// Tags whose score is at least `theta`.
pub fn threshold_tags<F: Scalar>(tag_scores: &[F], theta: F) -> TagSet {
    tag_scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s >= theta)
        .map(|(i, _)| i)
        .collect()
}

/// Thresholds a named per-tag score map covering the whole vocabulary.
pub fn estimate_multilabel<F: Scalar>(
    tag_scores: &HashMap<String, F>,
    vocab: &TagVocabulary,
    params: &MultiLabelParams<F>,
) -> Result<TagSet> {
    let mut dense = vec![F::zero(); vocab.len()];
    let normalized: HashMap<String, F> = tag_scores.iter().map(|(k, &v)| (normalize_tag(k), v)).collect();
    for (i, tag) in vocab.tags().iter().enumerate() {
        let v = *normalized.get(tag).ok_or_else(|| Error::UnknownTag(tag.clone()))?;
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        dense[i] = v;
    }
    Ok(threshold_tags(&dense, params.theta))
}

/// Class weight `(m - m_k) / m_k` for a tag carried by `m_k` of `m` samples.
pub fn class_weight<F: Scalar>(m: u64, m_k: u64) -> Result<F> {
    check_weight_counts(m, m_k)?;
    let numer = F::from_u64(m - m_k).ok_or_else(|| Error::InvalidParameter("m too large".into()))?;
    let denom = F::from_u64(m_k).ok_or_else(|| Error::InvalidParameter("m_k too large".into()))?;
    Ok(numer / denom)
}

fn check_weight_counts(m: u64, m_k: u64) -> Result<()> {
    if m_k == 0 {
        return Err(Error::UndefinedWeight);
    }
    if m_k > m {
        return Err(Error::InvalidParameter(format!("m_k ({m_k}) exceeds m ({m})")));
    }
    Ok(())
}

/// Exact rational form of [`class_weight`].
pub fn class_weight_exact(m: u64, m_k: u64) -> Result<Ratio<u64>> {
    check_weight_counts(m, m_k)?;
    Ok(Ratio::new(m - m_k, m_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exemplar::{score_from_matrix, Exemplar};
    use proptest::prelude::*;

    fn vocab(names: &[&str]) -> TagVocabulary {
        TagVocabulary::from_entries(names.iter().map(|n| (n.to_string(), 1)).collect()).unwrap()
    }

    fn exemplars(v: &TagVocabulary, sets: &[&[&str]]) -> ExemplarSet {
        let ex = sets
            .iter()
            .enumerate()
            .map(|(i, tags)| Exemplar {
                font_id: format!("f{i:03}"),
                tags: v.resolve(tags).unwrap(),
            })
            .collect();
        ExemplarSet::new(ex, v).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(EnsembleParams::new(2, 3).is_err());
        assert!(EnsembleParams::new(2, 0).is_err());
        assert_eq!(EnsembleParams::default(), EnsembleParams::new(11, 3).unwrap());
    }

    #[test]
    fn degenerate_ensemble_is_top_exemplar() {
        let v = vocab(&["a", "b", "c"]);
        let ex = exemplars(&v, &[&["a"], &["b", "c"], &["a", "c"]]);
        let s = score_from_matrix(&[0.1, 0.6, 0.3], 3).unwrap();
        let e = estimate_ensemble(&s, &ex, EnsembleParams::new(1, 1).unwrap()).unwrap();
        assert_eq!(e.selected, ex.get(1).tags);
        assert_eq!(e.contributing_ids(&ex), vec!["f001"]);
    }

    #[test]
    fn two_exemplar_vote() {
        let v = vocab(&["elegant", "wedding", "script", "horror"]);
        let ex = exemplars(&v, &[&["elegant", "wedding"], &["elegant", "script"], &["horror"]]);
        let s = score_from_matrix(&[0.5, 0.4, 0.1], 3).unwrap();
        let e = estimate_ensemble(&s, &ex, EnsembleParams::new(2, 2).unwrap()).unwrap();
        assert_eq!(v.names(&e.selected), vec!["elegant"]);
        let counts: BTreeMap<&str, usize> = e.tag_counts.iter().map(|(&t, &c)| (v.name(t), c)).collect();
        assert_eq!(counts, BTreeMap::from([("elegant", 2), ("wedding", 1), ("script", 1)]));
        assert_eq!(e.ranked_counts()[0], (0, 2));
    }

    #[test]
    fn full_aggregation_is_union() {
        let v = vocab(&["a", "b", "c", "d"]);
        let ex = exemplars(&v, &[&["a"], &[], &["b", "c"]]);
        let s = score_from_matrix(&[0.2, 0.5, 0.3], 3).unwrap();
        let e = estimate_ensemble(&s, &ex, EnsembleParams::new(3, 1).unwrap()).unwrap();
        assert_eq!(v.names(&e.selected), vec!["a", "b", "c"]);
    }

    #[test]
    fn missing_label_is_recovered() {
        // The best exemplar lacks "heavy", but three of the next four carry it.
        let v = vocab(&["bold", "heavy", "noise"]);
        let ex = exemplars(
            &v,
            &[
                &["bold"],
                &["bold", "heavy"],
                &["heavy"],
                &["bold", "heavy", "noise"],
                &["bold"],
            ],
        );
        let s = score_from_matrix(&[0.5, 0.2, 0.15, 0.1, 0.05], 5).unwrap();
        let e = estimate_ensemble(&s, &ex, EnsembleParams::new(5, 3).unwrap()).unwrap();
        assert!(!ex.get(0).tags.contains(&1));
        assert_eq!(v.names(&e.selected), vec!["bold", "heavy"]);
    }

    #[test]
    fn length_and_range_errors() {
        let v = vocab(&["a"]);
        let ex = exemplars(&v, &[&["a"], &["a"]]);
        let s = score_from_matrix(&[0.5, 0.3, 0.2], 3).unwrap();
        assert!(matches!(
            estimate_ensemble(&s, &ex, EnsembleParams::default()),
            Err(Error::LengthMismatch { .. })
        ));
        let s = score_from_matrix(&[0.5, 0.5], 2).unwrap();
        assert!(estimate_ensemble(&s, &ex, EnsembleParams::new(3, 1).unwrap()).is_err());
    }

    #[test]
    fn multilabel_examples() {
        let v = vocab(&["a", "b", "c"]);
        let p = MultiLabelParams::new(0.1).unwrap();
        let zeros: HashMap<String, f64> = v.tags().iter().map(|t| (t.clone(), 0.0)).collect();
        assert!(estimate_multilabel(&zeros, &v, &p).unwrap().is_empty());

        let p = MultiLabelParams::new(0.7).unwrap();
        let ones: HashMap<String, f64> = v.tags().iter().map(|t| (t.clone(), 1.0)).collect();
        assert_eq!(estimate_multilabel(&ones, &v, &p).unwrap().len(), 3);

        let v2 = vocab(&["a", "b"]);
        let s = HashMap::from([("a".to_string(), 0.75), ("b".to_string(), 0.69)]);
        assert_eq!(v2.names(&estimate_multilabel(&s, &v2, &p).unwrap()), vec!["a"]);
        let at_boundary = HashMap::from([("a".to_string(), 0.7), ("b".to_string(), 0.0)]);
        assert_eq!(estimate_multilabel(&at_boundary, &v2, &p).unwrap().len(), 1);

        let partial = HashMap::from([("a".to_string(), 0.75)]);
        assert!(matches!(estimate_multilabel(&partial, &v2, &p), Err(Error::UnknownTag(t)) if t == "b"));
    }

    #[test]
    fn multilabel_params_validation() {
        assert!(MultiLabelParams::new(1.5f64).is_err());
        assert!(MultiLabelParams::new(-0.1f64).is_err());
        let p = MultiLabelParams::new(0.5f64).unwrap();
        assert!(p.clone().with_class_weights(vec![1.0], 2).is_err());
        assert!(p.clone().with_class_weights(vec![1.0, 0.0], 2).is_err());
        let p = p.with_class_weights(vec![1.0, 3.0], 2).unwrap();
        assert_eq!(p.class_weights(), Some(&[1.0, 3.0][..]));
        // weights do not change inference
        assert_eq!(threshold_tags(&[0.4, 0.6], p.theta()), TagSet::from([1]));
    }

    #[test]
    fn threshold_extremes() {
        let scores = [0.0, 0.3, 1.0];
        assert_eq!(threshold_tags(&scores, 0.0).len(), 3);
        assert!(threshold_tags(&scores, 1.0 + 1e-9).is_empty());
    }

    #[test]
    fn class_weight_examples() {
        assert_eq!(class_weight::<f64>(100, 25).unwrap(), 3.0);
        assert_eq!(class_weight::<f64>(7, 7).unwrap(), 0.0);
        assert_eq!(class_weight::<f64>(2_400_000, 600_000).unwrap(), 3.0);
        assert_eq!(class_weight_exact(10, 4).unwrap(), Ratio::new(3, 2));
        assert!(matches!(class_weight::<f64>(10, 0), Err(Error::UndefinedWeight)));
        assert!(class_weight::<f32>(10, 11).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_p_and_n_tilde(
            sets in prop::collection::vec(prop::collection::btree_set(0usize..6, 0..4), 2..12),
            row in prop::collection::vec(0.0f64..1.0, 12),
        ) {
            let v = vocab(&["a", "b", "c", "d", "e", "f"]);
            let ex = ExemplarSet::new(
                sets.iter().enumerate().map(|(i, s)| Exemplar { font_id: format!("{i:02}"), tags: s.clone() }).collect(),
                &v,
            ).unwrap();
            let n = ex.len();
            let s = score_from_matrix(&row[..n], n).unwrap();
            for nt in 1..=n {
                for p in 1..nt {
                    let lo = estimate_ensemble(&s, &ex, EnsembleParams::new(nt, p).unwrap()).unwrap();
                    let hi = estimate_ensemble(&s, &ex, EnsembleParams::new(nt, p + 1).unwrap()).unwrap();
                    prop_assert!(hi.selected.is_subset(&lo.selected));
                    for t in &lo.selected {
                        prop_assert!(lo.tag_counts[t] >= p && lo.tag_counts[t] <= nt);
                    }
                }
                if nt < n {
                    let a = estimate_ensemble(&s, &ex, EnsembleParams::new(nt, 1).unwrap()).unwrap();
                    let b = estimate_ensemble(&s, &ex, EnsembleParams::new(nt + 1, 1).unwrap()).unwrap();
                    for (t, c) in &a.tag_counts {
                        prop_assert!(b.tag_counts.get(t).copied().unwrap_or(0) >= *c);
                    }
                }
            }
        }

        #[test]
        fn class_weight_matches_formula(m in 1u64..1_000_000, frac in 0.0f64..1.0) {
            let m_k = ((m as f64 * frac) as u64).clamp(1, m);
            prop_assert_eq!(class_weight::<f64>(m, m_k).unwrap(), (m - m_k) as f64 / m_k as f64);
        }
    }
}
