use std::collections::BTreeMap;

use rayon::prelude::*;

use super::dtw::dtw_distance_banded;
use crate::error::{domain, Error, Result};
use crate::features::{FeatureFile, FeatureParams, ShapeFeature};
use crate::model::SubjectId;

/// Sum of per-component DTW distances over every antenna pair.
pub fn ensemble_distance(a: &ShapeFeature, b: &ShapeFeature, band: Option<usize>) -> Result<f64> {
    if a.level != b.level || a.n_pairs() != b.n_pairs() || a.p() != b.p() {
        return domain(format!(
            "feature mismatch: (level {}, {} pairs, p {}) vs (level {}, {} pairs, p {})",
            a.level,
            a.n_pairs(),
            a.p(),
            b.level,
            b.n_pairs(),
            b.p()
        ));
    }
    let mut total = 0.0;
    for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
        if pa.len() != pb.len() {
            return domain("pairs hold differing component counts");
        }
        for (x, y) in pa.iter().zip(pb) {
            total += dtw_distance_banded(x, y, band)?;
        }
    }
    Ok(total)
}

/// Labeled training features sharing one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    params: FeatureParams,
    entries: Vec<(SubjectId, ShapeFeature)>,
}

impl Gallery {
    pub fn new(params: FeatureParams, entries: Vec<(SubjectId, ShapeFeature)>) -> Result<Self> {
        for (subject, f) in &entries {
            if f.level != params.level || f.n_pairs() != params.pairs || f.p() != params.components {
                return domain(format!("gallery entry for {subject} does not match {params:?}"));
            }
        }
        Ok(Self { params, entries })
    }

    /// Builds a gallery from the labeled samples of a feature file.
    pub fn from_features(file: &FeatureFile) -> Result<Self> {
        let entries = file
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.subject
                    .clone()
                    .map(|subject| (subject, s.feature.clone()))
                    .ok_or_else(|| Error::Domain(format!("gallery sample {i} has no subject")))
            })
            .collect::<Result<_>>()?;
        Self::new(file.params, entries)
    }

    pub fn params(&self) -> FeatureParams {
        self.params
    }

    pub fn entries(&self) -> &[(SubjectId, ShapeFeature)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct enrolled subjects, sorted.
    pub fn subjects(&self) -> Vec<SubjectId> {
        let mut s: Vec<SubjectId> = self.entries.iter().map(|e| e.0.clone()).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// Predicted subject plus the `k` nearest neighbors, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub predicted: SubjectId,
    pub neighbors: Vec<(SubjectId, f64)>,
}

/// Keeps the `k` smallest distances, ordered by distance then subject id.
pub fn nearest<'a>(candidates: impl IntoIterator<Item = (&'a SubjectId, f64)>, k: usize) -> Vec<(SubjectId, f64)> {
    let mut all: Vec<(&SubjectId, f64)> = candidates.into_iter().collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    all.truncate(k);
    all.into_iter().map(|(s, d)| (s.clone(), d)).collect()
}

/// Majority label among neighbors. Ties go to the smallest summed distance,
/// then to the lexicographically smallest subject.
pub fn vote(neighbors: &[(SubjectId, f64)]) -> Option<SubjectId> {
    let mut tally: BTreeMap<&SubjectId, (usize, f64)> = BTreeMap::new();
    for (s, d) in neighbors {
        let e = tally.entry(s).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += d;
    }
    tally
        .into_iter()
        .min_by(|(sa, (ca, da)), (sb, (cb, db))| cb.cmp(ca).then(da.total_cmp(db)).then_with(|| sa.cmp(sb)))
        .map(|(s, _)| s.clone())
}

pub fn knn_classify(
    query: &ShapeFeature,
    gallery: &Gallery,
    k: usize,
    band: Option<usize>,
) -> Result<IdentificationResult> {
    if gallery.is_empty() {
        return domain("gallery is empty");
    }
    if k == 0 || k > gallery.len() {
        return domain(format!("k = {k} must lie in 1..={}", gallery.len()));
    }
    let distances: Vec<f64> = gallery
        .entries
        .par_iter()
        .map(|(_, f)| ensemble_distance(query, f, band))
        .collect::<Result<_>>()?;
    let neighbors = nearest(gallery.entries.iter().map(|e| &e.0).zip(distances), k);
    let predicted = vote(&neighbors).expect("k >= 1 neighbors");
    Ok(IdentificationResult { predicted, neighbors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(s: &str) -> SubjectId {
        SubjectId::new(s).unwrap()
    }

    fn feat(series: Vec<Vec<f64>>) -> ShapeFeature {
        ShapeFeature {
            level: 1,
            original_len: 10,
            pairs: vec![series],
        }
    }

    fn params() -> FeatureParams {
        FeatureParams {
            components: 2,
            pairs: 1,
            level: 1,
        }
    }

    #[test]
    fn ensemble_examples() {
        let a = feat(vec![vec![0.0, 1.0, 2.0], vec![5.0, 5.0]]);
        let b = feat(vec![vec![0.0, 1.0, 2.0], vec![4.0, 7.0, 5.0]]);
        assert_eq!(ensemble_distance(&a, &a, None).unwrap(), 0.0);
        let d = ensemble_distance(&a, &b, None).unwrap();
        assert_eq!(d, dtw_distance_banded(&[5.0, 5.0], &[4.0, 7.0, 5.0], None).unwrap());
        assert!((d - ensemble_distance(&b, &a, None).unwrap()).abs() < 1e-12);
        let mut other = a.clone();
        other.level = 2;
        assert!(ensemble_distance(&a, &other, None).is_err());
    }

    #[test]
    fn six_pairs_of_four_components_sum_24_terms() {
        let f = |v: f64| ShapeFeature {
            level: 3,
            original_len: 80,
            pairs: vec![vec![vec![v; 10]; 4]; 6],
        };
        // Each of the 6 x 4 component pairs contributes 10 * |1 - 0|.
        assert_eq!(ensemble_distance(&f(0.0), &f(1.0), None).unwrap(), 240.0);
    }

    #[test]
    fn voting_rules() {
        let n = |s: &str, d: f64| (sid(s), d);
        assert_eq!(vote(&[n("A", 1.0), n("A", 2.0), n("B", 0.5)]).unwrap(), sid("A"));
        assert_eq!(vote(&[n("A", 1.0), n("B", 2.0)]).unwrap(), sid("A"));
        assert_eq!(vote(&[n("B", 1.0), n("A", 1.0)]).unwrap(), sid("A"));
    }

    #[test]
    fn exact_match_wins_with_k1() {
        let a = feat(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let b = feat(vec![vec![3.0, 1.0], vec![1.0, 3.0]]);
        let g = Gallery::new(params(), vec![(sid("a"), a.clone()), (sid("b"), b)]).unwrap();
        let r = knn_classify(&a, &g, 1, None).unwrap();
        assert_eq!(r.predicted, sid("a"));
        assert_eq!(r.neighbors, vec![(sid("a"), 0.0)]);
        assert!(knn_classify(&a, &g, 3, None).is_err());
        assert!(knn_classify(&a, &Gallery::new(params(), vec![]).unwrap(), 1, None).is_err());
    }

    #[test]
    fn classification_ignores_gallery_order() {
        let mk = |v: f64| feat(vec![vec![v, v + 1.0], vec![v * 2.0]]);
        let entries: Vec<_> = [("a", 0.0), ("b", 1.0), ("a", 2.0), ("c", 1.0), ("b", 3.0)]
            .iter()
            .map(|&(s, v)| (sid(s), mk(v)))
            .collect();
        let query = mk(1.0);
        let forward = Gallery::new(params(), entries.clone()).unwrap();
        let mut rev = entries;
        rev.reverse();
        let backward = Gallery::new(params(), rev).unwrap();
        for k in 1..=5 {
            assert_eq!(
                knn_classify(&query, &forward, k, None).unwrap(),
                knn_classify(&query, &backward, k, None).unwrap()
            );
        }
    }
}
