//! Canonical impression-tag vocabulary.
//!
//! Raw tags are free-form strings typed by font authors. Before anything
//! else they are normalized (lowercase, trimmed, internal whitespace
//! collapsed), then spelling variants are merged onto a canonical form and
//! compound tags are expanded into their components. The vocabulary keeps
//! the most frequent raw tags and removes the ones that merging made
//! redundant.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Set of vocabulary indices.
pub type TagSet = BTreeSet<usize>;

/// Minimum font count kept by default when building a vocabulary.
pub const DEFAULT_MIN_COUNT: usize = 24;
pub const DEFAULT_TOP_N: usize = 100;

/// Lowercases, trims and collapses runs of whitespace to a single space.
pub fn normalize_tag(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTagRecord {
    pub font_id: String,
    pub tags: Vec<String>,
}

impl RawTagRecord {
    /// Builds a record; tags are normalized and duplicates collapsed,
    /// keeping first-seen order. Empty tags are discarded.
    pub fn new<S: AsRef<str>>(font_id: impl Into<String>, tags: &[S]) -> Result<Self> {
        let font_id = font_id.into().trim().to_string();
        if font_id.is_empty() {
            return Err(Error::EmptyFontId { line: 0 });
        }
        let mut seen = HashSet::new();
        let tags = tags
            .iter()
            .map(|t| normalize_tag(t.as_ref()))
            .filter(|t| !t.is_empty() && seen.insert(t.clone()))
            .collect();
        Ok(Self { font_id, tags })
    }
}

/// Variant merges and compound expansions, loaded from a rules document.
///
/// ```toml
/// [variants]
/// scifi = "sci fi"
///
/// [compounds]
/// "comic cartoon" = ["comic", "cartoon"]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeRules {
    #[serde(default)]
    pub variants: BTreeMap<String, String>,
    #[serde(default)]
    pub compounds: BTreeMap<String, Vec<String>>,
}

impl MergeRules {
    /// Parses a rules document and validates it. Keys and targets are
    /// normalized the same way as raw tags.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let parsed: MergeRules = toml::from_str(text).map_err(|e| Error::parse("merge rules", e))?;
        let rules = MergeRules {
            variants: parsed
                .variants
                .into_iter()
                .map(|(k, v)| (normalize_tag(&k), normalize_tag(&v)))
                .collect(),
            compounds: parsed
                .compounds
                .into_iter()
                .map(|(k, v)| (normalize_tag(&k), v.iter().map(|t| normalize_tag(t)).collect()))
                .collect(),
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, target) in &self.variants {
            if key.is_empty() || target.is_empty() {
                return Err(Error::rule(key, "empty variant key or target"));
            }
            if self.compounds.contains_key(key) {
                return Err(Error::rule(key, "key appears in both variants and compounds"));
            }
            if key == target || self.variants.contains_key(target) {
                return Err(Error::rule(
                    key,
                    format!("variant target `{target}` is itself a variant key (cycle)"),
                ));
            }
            if self.compounds.contains_key(target) {
                return Err(Error::rule(key, format!("variant target `{target}` is a compound key")));
            }
        }
        for (key, parts) in &self.compounds {
            if key.is_empty() {
                return Err(Error::rule(key, "empty compound key"));
            }
            let distinct: BTreeSet<&String> = parts.iter().collect();
            if distinct.len() < 2 {
                return Err(Error::rule(key, "compound must expand to at least two distinct tags"));
            }
            for part in parts {
                if part.is_empty() || self.variants.contains_key(part) || self.compounds.contains_key(part) {
                    return Err(Error::rule(
                        key,
                        format!("compound component `{part}` is empty or itself a merge key"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn is_merge_key(&self, tag: &str) -> bool {
        self.variants.contains_key(tag) || self.compounds.contains_key(tag)
    }

    /// Maps one normalized raw tag to its canonical form(s).
    fn expand<'a>(&'a self, tag: &'a str) -> Vec<&'a str> {
        if let Some(target) = self.variants.get(tag) {
            vec![target.as_str()]
        } else if let Some(parts) = self.compounds.get(tag) {
            parts.iter().map(String::as_str).collect()
        } else {
            vec![tag]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    tags: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl TagVocabulary {
    /// Builds a vocabulary from `(tag, count)` pairs, keeping their order.
    pub fn from_entries(entries: Vec<(String, usize)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut tags = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (tag, count) in entries {
            let tag = normalize_tag(&tag);
            if index.insert(tag.clone(), tags.len()).is_some() {
                return Err(Error::DuplicateId(tag));
            }
            tags.push(tag);
            counts.push(count);
        }
        Ok(Self { tags, counts, index })
    }

    /// Vocabulary size K.
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn name(&self, index: usize) -> &str {
        &self.tags[index]
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.index.contains_key(tag)
    }

    /// Resolves canonical tag names to indices, failing on the first unknown name.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<TagSet> {
        names
            .iter()
            .map(|n| {
                let n = normalize_tag(n.as_ref());
                self.index_of(&n).ok_or(Error::UnknownTag(n))
            })
            .collect()
    }

    /// Tag names of a set, in vocabulary order.
    pub fn names(&self, set: &TagSet) -> Vec<&str> {
        set.iter().map(|&i| self.name(i)).collect()
    }

    pub fn check_set(&self, set: &TagSet) -> Result<()> {
        match set.iter().find(|&&i| i >= self.len()) {
            Some(&index) => Err(Error::TagIndexOutOfRange {
                index,
                size: self.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Builds the canonical vocabulary.
///
/// Raw tags are ranked by the number of fonts carrying them; the `top_n`
/// most frequent ones with at least `min_count` fonts are candidates.
/// Candidates that are merge keys are removed (a variant's canonical target
/// takes its place), and the final per-tag counts are recomputed after
/// merging. The result is ordered by descending count, ties by tag.
pub fn build_vocabulary(
    records: &[RawTagRecord],
    rules: &MergeRules,
    top_n: usize,
    min_count: usize,
) -> Result<TagVocabulary> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if top_n == 0 {
        return Err(Error::InvalidParameter("top_n must be positive".into()));
    }
    rules.validate()?;

    let normalized: Vec<BTreeSet<String>> = records
        .iter()
        .map(|r| {
            r.tags
                .iter()
                .map(|t| normalize_tag(t))
                .filter(|t| !t.is_empty())
                .collect()
        })
        .collect();

    let mut raw_counts: HashMap<&str, usize> = HashMap::new();
    for tags in &normalized {
        for t in tags {
            *raw_counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let candidates: Vec<&str> = rank(raw_counts)
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .take(top_n)
        .map(|(t, _)| t)
        .collect();

    let mut keep: BTreeSet<&str> = BTreeSet::new();
    for &c in &candidates {
        if let Some(target) = rules.variants.get(c) {
            keep.insert(target.as_str());
        } else if !rules.compounds.contains_key(c) {
            keep.insert(c);
        }
    }
    for &c in &candidates {
        if let Some(parts) = rules.compounds.get(c) {
            if let Some(missing) = parts.iter().find(|p| !keep.contains(p.as_str())) {
                return Err(Error::rule(
                    c,
                    format!("compound component `{missing}` is not in the vocabulary"),
                ));
            }
        }
    }

    let mut merged_counts: HashMap<&str, usize> = keep.iter().map(|&t| (t, 0)).collect();
    for tags in &normalized {
        let canonical: BTreeSet<&str> = tags.iter().flat_map(|t| rules.expand(t)).collect();
        for t in canonical {
            if let Some(c) = merged_counts.get_mut(t) {
                *c += 1;
            }
        }
    }
    let entries = rank(merged_counts)
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    TagVocabulary::from_entries(entries)
}

fn rank(counts: HashMap<&str, usize>) -> Vec<(&str, usize)> {
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
}

/// Canonical in-vocabulary tags induced by a raw tag list. Unknown tags are dropped.
pub fn canonicalize<S: AsRef<str>>(tags: &[S], rules: &MergeRules, vocab: &TagVocabulary) -> TagSet {
    canonicalize_counting(tags, rules, vocab).0
}

/// Like [`canonicalize`], also returning how many raw tags were dropped
/// as out of vocabulary.
pub fn canonicalize_counting<S: AsRef<str>>(tags: &[S], rules: &MergeRules, vocab: &TagVocabulary) -> (TagSet, usize) {
    let mut set = TagSet::new();
    let mut dropped = 0;
    for raw in tags {
        let tag = normalize_tag(raw.as_ref());
        if tag.is_empty() {
            continue;
        }
        let mut hit = false;
        for canonical in rules.expand(&tag) {
            if let Some(i) = vocab.index_of(canonical) {
                set.insert(i);
                hit = true;
            }
        }
        if !hit {
            dropped += 1;
        }
    }
    (set, dropped)
}
