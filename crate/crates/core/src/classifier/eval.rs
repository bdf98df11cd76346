//! Identification accuracy sweeps over a labeled feature set.
//!
//! All ensemble distances are computed once up front; every sweep then
//! only re-partitions sample indices into galleries and probes.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::knn::{ensemble_distance, nearest, vote};
use crate::error::{domain, Result};
use crate::features::ShapeFeature;
use crate::model::SubjectId;

/// Evaluation settings (`knn.*`, `dtw.band`, `eval.*`).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocol {
    pub k: usize,
    pub band: Option<usize>,
    /// Training samples per subject for the subject-count sweep and confusion matrix.
    pub train_per_subject: usize,
    pub train_sizes: Vec<usize>,
    /// Random splits averaged per training size.
    pub repeats: usize,
    pub max_subsets: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            k: 3,
            band: None,
            train_per_subject: 20,
            train_sizes: vec![10, 20, 30],
            repeats: 10,
            max_subsets: 200,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSweepRow {
    pub n_subjects: usize,
    pub subsets: usize,
    pub probes: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSweepRow {
    pub train_per_subject: usize,
    pub repeats: usize,
    pub probes: usize,
    pub accuracy: f64,
}

/// Counts indexed `[truth][predicted]` over `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub labels: Vec<SubjectId>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn accuracy(&self) -> f64 {
        let total: usize = self.counts.iter().flatten().sum();
        let hits: usize = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub subjects: Vec<SubjectId>,
    pub by_subjects: Vec<SubjectSweepRow>,
    pub by_train_size: Vec<TrainSweepRow>,
    pub confusion: ConfusionMatrix,
}

/// Symmetric matrix of pairwise ensemble distances.
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn compute(features: &[&ShapeFeature], band: Option<usize>) -> Result<Self> {
        let n = features.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let dists: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| ensemble_distance(features[i], features[j], band))
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; n * n];
        for (&(i, j), d) in pairs.iter().zip(dists) {
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
        Ok(Self { n, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

struct Evaluator<'a> {
    labels: Vec<&'a SubjectId>,
    dist: DistanceMatrix,
    k: usize,
}

impl Evaluator<'_> {
    fn predict(&self, probe: usize, gallery: &[usize]) -> Result<SubjectId> {
        if self.k > gallery.len() {
            return domain(format!("k = {} exceeds gallery of {}", self.k, gallery.len()));
        }
        let neighbors = nearest(
            gallery.iter().map(|&g| (self.labels[g], self.dist.get(probe, g))),
            self.k,
        );
        Ok(vote(&neighbors).expect("nonempty neighbors"))
    }

    /// `(correct, probes)` for one gallery/probe partition.
    fn score(&self, gallery: &[usize], probes: &[usize]) -> Result<(usize, usize)> {
        let mut correct = 0;
        for &p in probes {
            if &self.predict(p, gallery)? == self.labels[p] {
                correct += 1;
            }
        }
        Ok((correct, probes.len()))
    }
}

fn subset_seed(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs the subject-count sweep, the training-size sweep, and the
/// confusion matrix. Samples keep their input order: within each subject
/// the first `train_per_subject` samples train and the rest probe.
pub fn evaluate_identification(samples: &[(SubjectId, ShapeFeature)], protocol: &EvalProtocol) -> Result<EvalReport> {
    let mut by_subject: BTreeMap<&SubjectId, Vec<usize>> = BTreeMap::new();
    for (i, (s, _)) in samples.iter().enumerate() {
        by_subject.entry(s).or_default().push(i);
    }
    let subjects: Vec<SubjectId> = by_subject.keys().map(|s| (*s).clone()).collect();
    if subjects.len() < 2 {
        return domain(format!("evaluation needs at least 2 subjects, got {}", subjects.len()));
    }
    if protocol.k == 0 {
        return domain("k must be at least 1");
    }
    let needed = protocol
        .train_sizes
        .iter()
        .copied()
        .chain([protocol.train_per_subject])
        .max()
        .unwrap_or(0)
        + 1;
    for (s, idx) in &by_subject {
        if idx.len() < needed {
            return domain(format!(
                "subject {s} has {} samples; the protocol needs {needed}",
                idx.len()
            ));
        }
    }

    let features: Vec<&ShapeFeature> = samples.iter().map(|s| &s.1).collect();
    let ev = Evaluator {
        labels: samples.iter().map(|s| &s.0).collect(),
        dist: DistanceMatrix::compute(&features, protocol.band)?,
        k: protocol.k,
    };
    let per_subject: Vec<&Vec<usize>> = by_subject.values().collect();
    let split = |members: &[usize]| -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for &m in members {
            let idx = per_subject[m];
            train.extend_from_slice(&idx[..protocol.train_per_subject]);
            test.extend_from_slice(&idx[protocol.train_per_subject..]);
        }
        (train, test)
    };

    let n_subjects = subjects.len();
    let mut by_subjects = Vec::new();
    for n in 2..=n_subjects {
        let total = binomial(n_subjects, n);
        let subsets: Vec<Vec<usize>> = if total <= protocol.max_subsets as u128 {
            (0..n_subjects).combinations(n).collect()
        } else {
            let mut rng = subset_seed(protocol.seed, n as u64);
            (0..protocol.max_subsets)
                .map(|_| {
                    let mut s = index::sample(&mut rng, n_subjects, n).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect()
        };
        let mut accs = Vec::with_capacity(subsets.len());
        let mut probes = 0;
        for subset in &subsets {
            let (train, test) = split(subset);
            let (correct, count) = ev.score(&train, &test)?;
            probes += count;
            accs.push(correct as f64 / count as f64);
        }
        by_subjects.push(SubjectSweepRow {
            n_subjects: n,
            subsets: subsets.len(),
            probes,
            mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            min_accuracy: accs.iter().copied().fold(f64::INFINITY, f64::min),
            max_accuracy: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }

    // One shuffle per subject and repeat; training sets are nested across sizes.
    let mut train_hits = vec![(0usize, 0usize); protocol.train_sizes.len()];
    for r in 0..protocol.repeats {
        let mut rng = subset_seed(protocol.seed, 1_000 + r as u64);
        let shuffled: Vec<Vec<usize>> = per_subject
            .iter()
            .map(|idx| {
                let mut v = (*idx).clone();
                v.shuffle(&mut rng);
                v
            })
            .collect();
        for (slot, &t) in protocol.train_sizes.iter().enumerate() {
            let train: Vec<usize> = shuffled.iter().flat_map(|v| v[..t].iter().copied()).collect();
            let test: Vec<usize> = shuffled.iter().flat_map(|v| v[t..].iter().copied()).collect();
            let (c, n) = ev.score(&train, &test)?;
            train_hits[slot].0 += c;
            train_hits[slot].1 += n;
        }
    }
    let by_train_size = protocol
        .train_sizes
        .iter()
        .zip(train_hits)
        .map(|(&t, (c, n))| TrainSweepRow {
            train_per_subject: t,
            repeats: protocol.repeats,
            probes: n,
            accuracy: if n == 0 { 0.0 } else { c as f64 / n as f64 },
        })
        .collect();

    let all: Vec<usize> = (0..n_subjects).collect();
    let (train, test) = split(&all);
    let mut counts = vec![vec![0usize; n_subjects]; n_subjects];
    for &p in &test {
        let predicted = ev.predict(p, &train)?;
        let t = subjects.binary_search(ev.labels[p]).expect("known subject");
        let q = subjects.binary_search(&predicted).expect("known subject");
        counts[t][q] += 1;
    }

    Ok(EvalReport {
        subjects: subjects.clone(),
        by_subjects,
        by_train_size,
        confusion: ConfusionMatrix {
            labels: subjects,
            counts,
        },
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
