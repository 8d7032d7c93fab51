//! Estimate tags for one query from a handful of exemplar fonts.

use impress::{
    estimate_ensemble, load_exemplars, nearest_exemplar_scores, EnsembleParams, FeatureVector64, MergeRules,
    RawTagRecord, TagVocabulary,
};

fn main() -> impress::Result<()> {
    let vocab = TagVocabulary::from_entries(
        ["elegant", "script", "wedding", "horror"]
            .iter()
            .map(|t| (t.to_string(), 1))
            .collect(),
    )?;
    let records = vec![
        RawTagRecord::new("e1", &["elegant", "wedding"])?,
        RawTagRecord::new("e2", &["elegant", "script"])?,
        RawTagRecord::new("e3", &["horror"])?,
    ];
    let (exemplars, _dropped) = load_exemplars(&records, &MergeRules::default(), &vocab)?;

    let features = [
        FeatureVector64::new(vec![0.0, 0.0])?,
        FeatureVector64::new(vec![0.4, 0.3])?,
        FeatureVector64::new(vec![5.0, 5.0])?,
    ];
    let query = FeatureVector64::new(vec![0.1, 0.1])?;
    let scores = nearest_exemplar_scores(&query, &features, 1.0)?;

    let estimate = estimate_ensemble(&scores, &exemplars, EnsembleParams::new(2, 2)?)?;
    println!("{:?}", vocab.names(&estimate.selected));
    Ok(())
}
