//! Predicate/category vocabulary, triplet table and the Rare/Non-rare split.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::annotation::{convert_labels, sample_keyframes, AnnotationSet, KeyframeFilter};
use crate::error::{Error, Result};
use crate::geometry::PERSON;

/// Triplets with fewer training instances than this are rare.
pub const RARE_THRESHOLD: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateInfo {
    pub name: String,
    pub temporal: bool,
}

/// (person, predicate, object category); the subject is always a person.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub predicate: String,
    pub category: String,
}

impl Triplet {
    pub fn new(predicate: impl Into<String>, category: impl Into<String>) -> Self {
        Triplet {
            predicate: predicate.into(),
            category: category.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletEntry {
    pub predicate: String,
    pub category: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Taxonomy {
    pub predicates: Vec<PredicateInfo>,
    pub categories: Vec<String>,
    #[serde(default)]
    pub triplets: Vec<TripletEntry>,
    /// Free-form provenance remark, e.g. that temporal flags are unofficial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Taxonomy {
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for p in &self.predicates {
            if !names.insert(p.name.as_str()) {
                return Err(Error::Config {
                    field: "taxonomy.predicates".into(),
                    reason: format!("duplicate predicate `{}`", p.name),
                });
            }
        }
        if self.predicates.is_empty() {
            return Err(Error::Config {
                field: "taxonomy.predicates".into(),
                reason: "at least one predicate is required".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for t in &self.triplets {
            if !names.contains(t.predicate.as_str()) {
                return Err(Error::Unknown {
                    kind: "predicate",
                    name: t.predicate.clone(),
                });
            }
            if !self.categories.contains(&t.category) {
                return Err(Error::Unknown {
                    kind: "category",
                    name: t.category.clone(),
                });
            }
            if !seen.insert((&t.predicate, &t.category)) {
                return Err(Error::Config {
                    field: "taxonomy.triplets".into(),
                    reason: format!("duplicate triplet ({}, {})", t.predicate, t.category),
                });
            }
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let t: Taxonomy = super::load_json(path)?;
        t.validate()?;
        Ok(t)
    }

    pub fn predicate_names(&self) -> Vec<String> {
        self.predicates.iter().map(|p| p.name.clone()).collect()
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn is_temporal(&self, predicate: &str) -> Option<bool> {
        self.predicates
            .iter()
            .find(|p| p.name == predicate)
            .map(|p| p.temporal)
    }

    /// Dense id of a triplet in the table.
    pub fn triplet_id(&self, t: &Triplet) -> Option<usize> {
        self.triplets
            .iter()
            .position(|e| e.predicate == t.predicate && e.category == t.category)
    }

    /// Rebuild the triplet table from keyframe-level label counts over
    /// `train` (active-relation keyframes). Table order: predicate order,
    /// then category order.
    pub fn with_counts_from(mut self, train: &AnnotationSet) -> Result<Self> {
        let counts = triplet_counts(train, &self)?;
        let mut cats: BTreeSet<String> = self.categories.iter().cloned().collect();
        for t in counts.keys() {
            cats.insert(t.category.clone());
        }
        for c in &cats {
            if !self.categories.contains(c) {
                self.categories.push(c.clone());
            }
        }
        self.triplets.clear();
        for p in &self.predicates {
            for c in &self.categories {
                let t = Triplet::new(p.name.clone(), c.clone());
                if let Some(&count) = counts.get(&t) {
                    self.triplets.push(TripletEntry {
                        predicate: t.predicate,
                        category: t.category,
                        count,
                    });
                }
            }
        }
        Ok(self)
    }
}

/// Keyframe-level positive labels per triplet.
pub fn triplet_counts(
    ann: &AnnotationSet,
    taxonomy: &Taxonomy,
) -> Result<BTreeMap<Triplet, usize>> {
    let names = taxonomy.predicate_names();
    let mut counts = BTreeMap::new();
    for (vid, frame) in sample_keyframes(ann, KeyframeFilter::ActiveRelation) {
        let video = ann.video(&vid).expect("sampled from this set");
        let kl = convert_labels(video, frame, &names)?;
        for (pair, row) in kl.pairs.iter().zip(&kl.labels) {
            let cat = video
                .category_of(&kl.instance_ids[pair.object_index])
                .unwrap_or(PERSON)
                .to_string();
            for (c, &on) in row.iter().enumerate() {
                if on == 1 {
                    *counts
                        .entry(Triplet::new(names[c].clone(), cat.clone()))
                        .or_insert(0) += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Rare/Non-rare membership by training count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaritySplit {
    pub rare: BTreeSet<Triplet>,
    pub nonrare: BTreeSet<Triplet>,
}

impl RaritySplit {
    pub fn from_counts<'a>(counts: impl IntoIterator<Item = (&'a Triplet, usize)>) -> Self {
        let mut s = RaritySplit::default();
        for (t, n) in counts {
            if n < RARE_THRESHOLD {
                s.rare.insert(t.clone());
            } else {
                s.nonrare.insert(t.clone());
            }
        }
        s
    }

    pub fn from_taxonomy(taxonomy: &Taxonomy) -> Self {
        let counts: Vec<(Triplet, usize)> = taxonomy
            .triplets
            .iter()
            .map(|e| {
                (
                    Triplet::new(e.predicate.clone(), e.category.clone()),
                    e.count,
                )
            })
            .collect();
        Self::from_counts(counts.iter().map(|(t, n)| (t, *n)))
    }

    /// Triplets never seen in training count zero times and are rare.
    pub fn is_rare(&self, t: &Triplet) -> bool {
        !self.nonrare.contains(t)
    }
}

/// Split every taxonomy triplet by its count over `train`.
pub fn rarity_split(train: &AnnotationSet, taxonomy: &Taxonomy) -> Result<RaritySplit> {
    let counts = triplet_counts(train, taxonomy)?;
    let all: Vec<(Triplet, usize)> = taxonomy
        .triplets
        .iter()
        .map(|e| Triplet::new(e.predicate.clone(), e.category.clone()))
        .chain(counts.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|t| {
            let n = counts.get(&t).copied().unwrap_or(0);
            (t, n)
        })
        .collect();
    Ok(RaritySplit::from_counts(all.iter().map(|(t, n)| (t, *n))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_at_twenty_five() {
        let a = Triplet::new("hold", "cup");
        let b = Triplet::new("ride", "bike");
        let c = Triplet::new("push", "cart");
        let s = RaritySplit::from_counts([(&a, 24), (&b, 25), (&c, 0)]);
        assert!(s.is_rare(&a));
        assert!(!s.is_rare(&b));
        assert!(s.is_rare(&c));
        assert!(s.is_rare(&Triplet::new("never", "seen")));
        assert!(s.rare.is_disjoint(&s.nonrare));
        assert_eq!(s.rare.len() + s.nonrare.len(), 3);
    }

    #[test]
    fn duplicate_predicate_rejected() {
        let t = Taxonomy {
            predicates: vec![
                PredicateInfo {
                    name: "a".into(),
                    temporal: false,
                },
                PredicateInfo {
                    name: "a".into(),
                    temporal: true,
                },
            ],
            categories: vec![],
            triplets: vec![],
            note: None,
        };
        assert!(t.validate().is_err());
    }
}
