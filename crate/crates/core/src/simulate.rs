//! Synthetic latent-font corpora with missing and noisy tags.
//!
//! Fonts are points in a feature space. Every tag has an anchor point and a
//! font's true tags are the anchors nearest to it, so neighbouring fonts
//! share tags. Observed tags drop each true tag with probability
//! `miss_rate` and gain one wrong tag with probability `noise_rate`.
//! Queries are noisy copies of font centres, standing in for different
//! renderings of the same font.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
pub use crate::estimator::DEFAULT_THETA;
use crate::estimator::{estimate_ensemble, threshold_tags, EnsembleParams, MultiLabelParams};
use crate::exemplar::{nearest_exemplar_scores, Exemplar, ExemplarSet, FeatureVector, ScoreVector};
use crate::metrics::{evaluate, sweep, EvalReport, SweepResult};
use crate::rng::SeededRng;
use crate::scalar::{euclidean, Scalar};
use crate::vocab::{RawTagRecord, TagSet, TagVocabulary};

pub const DEFAULT_TAGS_PER_FONT: usize = 4;
pub const DEFAULT_MISS_RATE: f64 = 0.3;
pub const DEFAULT_NOISE_RATE: f64 = 0.1;
pub const DEFAULT_FEATURE_DIM: usize = 2;
pub const DEFAULT_TARGET_ACCURACY: f64 = 0.8;

const STREAM_LAYOUT: u64 = 0;
const STREAM_CORRUPTION: u64 = 1;
const STREAM_CALIBRATION: u64 = 2;
const STREAM_QUERIES: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorruptionParams {
    pub miss_rate: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl CorruptionParams {
    pub fn new(miss_rate: f64, noise_rate: f64, seed: u64) -> Result<Self> {
        for (name, v) in [("miss_rate", miss_rate), ("noise_rate", noise_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(Self {
            miss_rate,
            noise_rate,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentFontModel<F> {
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub centers: Vec<FeatureVector<F>>,
    pub true_tags: Vec<TagSet>,
    pub observed_tags: Vec<TagSet>,
    pub params: CorruptionParams,
}

pub fn font_id(index: usize) -> String {
    format!("font{index:05}")
}

pub fn tag_name(index: usize) -> String {
    format!("tag{index:03}")
}

impl<F: Scalar> LatentFontModel<F> {
    pub fn n_fonts(&self) -> usize {
        self.centers.len()
    }

    /// Synthetic vocabulary `tag000..`, counting fonts by observed tags.
    pub fn vocabulary(&self) -> TagVocabulary {
        let mut counts = vec![0usize; self.vocab_size];
        for set in &self.observed_tags {
            for &t in set {
                counts[t] += 1;
            }
        }
        TagVocabulary::from_entries((0..self.vocab_size).map(|i| (tag_name(i), counts[i])).collect())
            .expect("generated names are unique")
    }

    /// Exemplar set carrying the observed (corrupted) tags.
    pub fn exemplars(&self, vocab: &TagVocabulary) -> Result<ExemplarSet> {
        let ex = self
            .observed_tags
            .iter()
            .enumerate()
            .map(|(i, tags)| Exemplar {
                font_id: font_id(i),
                tags: tags.clone(),
            })
            .collect();
        ExemplarSet::new(ex, vocab)
    }

    fn records(&self, sets: &[TagSet]) -> Vec<RawTagRecord> {
        sets.iter()
            .enumerate()
            .map(|(i, s)| RawTagRecord {
                font_id: font_id(i),
                tags: s.iter().map(|&t| tag_name(t)).collect(),
            })
            .collect()
    }

    pub fn observed_records(&self) -> Vec<RawTagRecord> {
        self.records(&self.observed_tags)
    }

    pub fn true_records(&self) -> Vec<RawTagRecord> {
        self.records(&self.true_tags)
    }

    pub fn feature_rows(&self) -> Vec<(String, FeatureVector<F>)> {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, c)| (font_id(i), c.clone()))
            .collect()
    }
}

/// Generates a corpus. Font ids are `font00000..` and tag indices refer to
/// the synthetic vocabulary from [`LatentFontModel::vocabulary`].
pub fn generate_corpus<F: Scalar>(
    n_fonts: usize,
    feature_dim: usize,
    tag_vocab_size: usize,
    tags_per_font: usize,
    params: CorruptionParams,
) -> Result<LatentFontModel<F>> {
    if n_fonts == 0 || feature_dim == 0 {
        return Err(Error::InvalidParameter(
            "n_fonts and feature_dim must be positive".into(),
        ));
    }
    if tags_per_font == 0 || tags_per_font > tag_vocab_size {
        return Err(Error::InvalidParameter(format!(
            "tags_per_font must be in 1..={tag_vocab_size}, got {tags_per_font}"
        )));
    }
    let params = CorruptionParams::new(params.miss_rate, params.noise_rate, params.seed)?;

    let mut rng = SeededRng::substream(params.seed, STREAM_LAYOUT);
    let mut seen = BTreeSet::new();
    let mut centers_f64: Vec<Vec<f64>> = Vec::with_capacity(n_fonts);
    while centers_f64.len() < n_fonts {
        let c: Vec<f64> = (0..feature_dim).map(|_| rng.uniform()).collect();
        if seen.insert(c.iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
            centers_f64.push(c);
        }
    }
    // Anchors sit on distinct randomly chosen fonts so every tag has at
    // least one carrier; any surplus tags get uniform anchors.
    let mut order: Vec<usize> = (0..n_fonts).collect();
    for i in 0..n_fonts.saturating_sub(1) {
        let j = i + rng.below(n_fonts - i);
        order.swap(i, j);
    }
    let anchors: Vec<Vec<f64>> = (0..tag_vocab_size)
        .map(|t| match order.get(t) {
            Some(&font) => centers_f64[font].clone(),
            None => (0..feature_dim).map(|_| rng.uniform()).collect(),
        })
        .collect();

    let true_tags: Vec<TagSet> = centers_f64
        .iter()
        .map(|c| {
            let mut by_distance: Vec<(f64, usize)> =
                anchors.iter().enumerate().map(|(t, a)| (euclidean(c, a), t)).collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            by_distance.iter().take(tags_per_font).map(|&(_, t)| t).collect()
        })
        .collect();

    let mut rng = SeededRng::substream(params.seed, STREAM_CORRUPTION);
    let observed_tags = true_tags
        .iter()
        .map(|truth| {
            let mut observed: TagSet = truth
                .iter()
                .copied()
                .filter(|_| !rng.bernoulli(params.miss_rate))
                .collect();
            if rng.bernoulli(params.noise_rate) && truth.len() < tag_vocab_size {
                let wrong: Vec<usize> = (0..tag_vocab_size).filter(|t| !truth.contains(t)).collect();
                observed.insert(wrong[rng.below(wrong.len())]);
            }
            observed
        })
        .collect();

    let centers = centers_f64
        .into_iter()
        .map(|c| FeatureVector::new(c.into_iter().map(F::from_f64_lossy).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LatentFontModel {
        feature_dim,
        vocab_size: tag_vocab_size,
        centers,
        true_tags,
        observed_tags,
        params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySample<F> {
    pub font_index: usize,
    pub feature: FeatureVector<F>,
    pub true_tags: TagSet,
}

impl<F: Scalar> QuerySample<F> {
    pub fn sample_id(&self, k: usize) -> String {
        format!("{}_q{k:03}", font_id(self.font_index))
    }
}

/// `per_font` perturbed copies of every font centre.
pub fn generate_queries<F: Scalar>(
    model: &LatentFontModel<F>,
    per_font: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<QuerySample<F>>> {
    let fonts: Vec<usize> = (0..model.n_fonts()).collect();
    queries_for_fonts(model, &fonts, per_font, sigma, seed)
}

/// `per_font` perturbed copies of each listed font centre.
pub fn queries_for_fonts<F: Scalar>(
    model: &LatentFontModel<F>,
    fonts: &[usize],
    per_font: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<QuerySample<F>>> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = SeededRng::substream(seed, STREAM_QUERIES);
    let mut out = Vec::with_capacity(fonts.len() * per_font);
    for &font_index in fonts {
        let center = model
            .centers
            .get(font_index)
            .ok_or_else(|| Error::InvalidParameter(format!("font index {font_index} out of range")))?;
        for _ in 0..per_font {
            let values = center
                .values()
                .iter()
                .map(|&c| c + F::from_f64_lossy(sigma * rng.normal()))
                .collect();
            out.push(QuerySample {
                font_index,
                feature: FeatureVector::new(values)?,
                true_tags: model.true_tags[font_index].clone(),
            });
        }
    }
    Ok(out)
}

/// Fraction of queries whose nearest font centre is their own font.
pub fn top1_accuracy<F: Scalar>(model: &LatentFontModel<F>, queries: &[QuerySample<F>]) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let hits = queries
        .iter()
        .filter(|q| nearest_center(model, q.feature.values()) == q.font_index)
        .count();
    hits as f64 / queries.len() as f64
}

fn nearest_center<F: Scalar>(model: &LatentFontModel<F>, x: &[F]) -> usize {
    let mut best = (F::infinity(), 0);
    for (i, c) in model.centers.iter().enumerate() {
        let d = euclidean(x, c.values());
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Finds the perturbation scale giving top-1 accuracy close to `target`.
///
/// Uses one fixed set of unit-normal perturbations (two per font) for every
/// candidate scale, so the accuracy curve is a deterministic step function
/// of `sigma`; the search bisects it for 40 rounds.
pub fn calibrate_sigma<F: Scalar>(model: &LatentFontModel<F>, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target accuracy must be in (0, 1), got {target}"
        )));
    }
    let mut rng = SeededRng::substream(model.params.seed, STREAM_CALIBRATION);
    let probes: Vec<(usize, Vec<f64>)> = (0..model.n_fonts())
        .flat_map(|i| std::iter::repeat_n(i, 2))
        .map(|i| (i, (0..model.feature_dim).map(|_| rng.normal()).collect()))
        .collect();
    let accuracy = |sigma: f64| {
        let hits = probes
            .iter()
            .filter(|(i, dir)| {
                let x: Vec<F> = model.centers[*i]
                    .values()
                    .iter()
                    .zip(dir)
                    .map(|(&c, &d)| c + F::from_f64_lossy(sigma * d))
                    .collect();
                nearest_center(model, &x) == *i
            })
            .count();
        hits as f64 / probes.len() as f64
    };
    let (mut lo, mut hi) = (0.0, 0.01);
    while accuracy(hi) >= target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidParameter("could not bracket target accuracy".into()));
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if accuracy(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Baseline per-tag scores: score-weighted share of exemplars carrying each tag.
pub fn weighted_tag_scores<F: Scalar>(scores: &ScoreVector<F>, exemplars: &ExemplarSet) -> Vec<F> {
    let total: F = scores.scores().iter().copied().sum();
    let mut out = vec![F::zero(); exemplars.vocab_size()];
    if total <= F::zero() {
        return out;
    }
    for (ex, &s) in exemplars.iter().zip(scores.scores()) {
        for &t in &ex.tags {
            out[t] = out[t] + s;
        }
    }
    out.iter_mut().for_each(|v| *v = *v / total);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub ensemble: Vec<TagSet>,
    pub baseline: Vec<TagSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison<F> {
    pub ensemble: EvalReport<F>,
    pub baseline: EvalReport<F>,
}

/// Scores each query against the exemplar centres.
pub fn score_queries<F: Scalar>(
    model: &LatentFontModel<F>,
    queries: &[QuerySample<F>],
    temperature: F,
) -> Result<Vec<ScoreVector<F>>> {
    queries
        .iter()
        .map(|q| nearest_exemplar_scores(&q.feature, &model.centers, temperature))
        .collect()
}

pub fn predict<F: Scalar>(
    model: &LatentFontModel<F>,
    queries: &[QuerySample<F>],
    ensemble_params: EnsembleParams,
    multilabel_params: &MultiLabelParams<F>,
    temperature: F,
) -> Result<Predictions> {
    let vocab = model.vocabulary();
    let exemplars = model.exemplars(&vocab)?;
    let mut ensemble = Vec::with_capacity(queries.len());
    let mut baseline = Vec::with_capacity(queries.len());
    for scores in score_queries(model, queries, temperature)? {
        ensemble.push(estimate_ensemble(&scores, &exemplars, ensemble_params)?.selected);
        baseline.push(threshold_tags(
            &weighted_tag_scores(&scores, &exemplars),
            multilabel_params.theta(),
        ));
    }
    Ok(Predictions { ensemble, baseline })
}

/// Runs both estimators and evaluates them against the true tags.
pub fn run_comparison<F: Scalar>(
    model: &LatentFontModel<F>,
    queries: &[QuerySample<F>],
    ensemble_params: EnsembleParams,
    multilabel_params: &MultiLabelParams<F>,
    temperature: F,
) -> Result<Comparison<F>> {
    let preds = predict(model, queries, ensemble_params, multilabel_params, temperature)?;
    let truth: Vec<TagSet> = queries.iter().map(|q| q.true_tags.clone()).collect();
    let vocab = model.vocabulary();
    Ok(Comparison {
        ensemble: evaluate(&preds.ensemble, &truth, &vocab)?,
        baseline: evaluate(&preds.baseline, &truth, &vocab)?,
    })
}

/// Ensemble grid sweep on simulated queries.
pub fn sweep_model<F: Scalar>(
    model: &LatentFontModel<F>,
    queries: &[QuerySample<F>],
    temperature: F,
    n_tilde_range: &[usize],
    p_range: &[usize],
) -> Result<SweepResult<F>> {
    let vocab = model.vocabulary();
    let exemplars = model.exemplars(&vocab)?;
    let rows = score_queries(model, queries, temperature)?;
    let truth: Vec<TagSet> = queries.iter().map(|q| q.true_tags.clone()).collect();
    sweep(&rows, &truth, &exemplars, n_tilde_range, p_range)
}

/// Jaccard similarity; two empty sets are identical.
pub fn jaccard(a: &TagSet, b: &TagSet) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Mean Jaccard similarity over all unordered pairs.
pub fn mean_pairwise_jaccard(sets: &[TagSet]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            total += jaccard(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        1.0
    } else {
        total / pairs as f64
    }
}

/// Everything needed to run a full comparison experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub n_fonts: usize,
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub tags_per_font: usize,
    pub corruption: CorruptionParams,
    pub queries_per_font: usize,
    /// Fixed perturbation scale; calibrated to `target_accuracy` when absent.
    pub sigma: Option<f64>,
    pub target_accuracy: f64,
    /// Softmax temperature; defaults to the perturbation scale.
    pub temperature: Option<f64>,
}

impl SimulationConfig {
    pub fn new(n_fonts: usize, vocab_size: usize, corruption: CorruptionParams) -> Self {
        Self {
            n_fonts,
            feature_dim: DEFAULT_FEATURE_DIM,
            vocab_size,
            tags_per_font: DEFAULT_TAGS_PER_FONT,
            corruption,
            queries_per_font: 3,
            sigma: None,
            target_accuracy: DEFAULT_TARGET_ACCURACY,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation<F> {
    pub model: LatentFontModel<F>,
    pub queries: Vec<QuerySample<F>>,
    pub sigma: f64,
    pub temperature: f64,
    pub top1_accuracy: f64,
}

impl<F: Scalar> Simulation<F> {
    pub fn generate(config: &SimulationConfig) -> Result<Self> {
        let model = generate_corpus::<F>(
            config.n_fonts,
            config.feature_dim,
            config.vocab_size,
            config.tags_per_font,
            config.corruption,
        )?;
        let sigma = match config.sigma {
            Some(s) => s,
            None => calibrate_sigma(&model, config.target_accuracy)?,
        };
        let queries = generate_queries(&model, config.queries_per_font, sigma, config.corruption.seed)?;
        let top1_accuracy = top1_accuracy(&model, &queries);
        let temperature = config.temperature.unwrap_or(sigma);
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(Error::InvalidParameter(
                "temperature must be positive; set it when sigma is 0".into(),
            ));
        }
        Ok(Self {
            model,
            queries,
            sigma,
            temperature,
            top1_accuracy,
        })
    }

    pub fn temperature(&self) -> F {
        F::from_f64_lossy(self.temperature)
    }

    pub fn compare(&self, ensemble: EnsembleParams, theta: F) -> Result<Comparison<F>> {
        run_comparison(
            &self.model,
            &self.queries,
            ensemble,
            &MultiLabelParams::new(theta)?,
            self.temperature(),
        )
    }
}
