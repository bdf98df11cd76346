//! Per-antenna-pair PCA over the subcarrier dimension.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::model::CsiTrace;

/// Default number of principal components kept per pair.
pub const DEFAULT_COMPONENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentOrder {
    /// Descending explained variance, as produced by the eigendecomposition.
    Variance,
    /// Descending peak-to-peak amplitude.
    PeakToPeak,
}

/// Projected component waveforms, `p` per antenna pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    p: usize,
    len: usize,
    order: ComponentOrder,
    pairs: Vec<Vec<Vec<f64>>>,
}

impl ComponentSet {
    /// Wraps raw waveforms; every pair must hold `p` series of one length.
    pub fn new(pairs: Vec<Vec<Vec<f64>>>, order: ComponentOrder) -> Result<Self> {
        let p = pairs.first().map_or(0, Vec::len);
        if p == 0 {
            return domain("component set needs at least one pair with one component");
        }
        let len = pairs[0][0].len();
        for (i, pair) in pairs.iter().enumerate() {
            if pair.len() != p {
                return domain(format!("pair {i} has {} components, expected {p}", pair.len()));
            }
            if pair.iter().any(|w| w.len() != len) {
                return domain(format!("pair {i} has waveforms of unequal length"));
            }
        }
        Ok(Self { p, len, order, pairs })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of samples in each waveform.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn order(&self) -> ComponentOrder {
        self.order
    }

    pub fn pairs(&self) -> &[Vec<Vec<f64>>] {
        &self.pairs
    }

    pub fn waveform(&self, pair: usize, component: usize) -> &[f64] {
        &self.pairs[pair][component]
    }

    /// All waveforms, pair-major.
    pub fn waveforms(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs.iter().flat_map(|p| p.iter().map(Vec::as_slice))
    }
}

/// Principal axes of one antenna pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBasis {
    /// Unit directions over the subcarrier dimension, one per component.
    pub directions: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues matching `directions`.
    pub eigenvalues: Vec<f64>,
}

pub fn peak_to_peak(waveform: &[f64]) -> f64 {
    let (lo, hi) = waveform
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Fits PCA to one pair's subcarrier series (each of equal length) and
/// projects onto the top `p` directions.
///
/// Each direction is signed so the projected sample of largest magnitude is
/// positive; the first such sample wins ties.
pub fn fit_pair(series: &[Vec<f64>], p: usize) -> Result<(PairBasis, Vec<Vec<f64>>)> {
    let dims = series.len();
    if p == 0 || p > dims {
        return domain(format!("cannot keep {p} components of {dims} subcarriers"));
    }
    let n = series[0].len();
    if n < 2 {
        return domain(format!("PCA needs at least 2 frames, got {n}"));
    }

    let centered: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let mean = s.iter().sum::<f64>() / n as f64;
            s.iter().map(|v| v - mean).collect()
        })
        .collect();
    let mut cov = DMatrix::<f64>::zeros(dims, dims);
    for a in 0..dims {
        for b in a..dims {
            let c = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum::<f64>() / (n - 1) as f64;
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut directions = Vec::with_capacity(p);
    let mut eigenvalues = Vec::with_capacity(p);
    let mut waveforms = Vec::with_capacity(p);
    for &idx in order.iter().take(p) {
        let mut dir: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let mut wave: Vec<f64> = (0..n)
            .map(|t| centered.iter().zip(&dir).map(|(s, d)| s[t] * d).sum())
            .collect();
        let extreme = wave.iter().fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
        if extreme < 0.0 {
            dir.iter_mut().for_each(|d| *d = -*d);
            wave.iter_mut().for_each(|v| *v = -*v);
        }
        directions.push(dir);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        waveforms.push(wave);
    }
    Ok((
        PairBasis {
            directions,
            eigenvalues,
        },
        waveforms,
    ))
}

/// Runs PCA independently on every antenna pair, returning the projected
/// waveforms in variance order together with each pair's basis.
pub fn pca_project_with_basis(trace: &CsiTrace, p: usize) -> Result<(ComponentSet, Vec<PairBasis>)> {
    if p == 0 || p > trace.n_subcarriers() {
        return domain(format!("p = {p} must lie in 1..={}", trace.n_subcarriers()));
    }
    if trace.n_frames() < 2 {
        return domain(format!("PCA needs at least 2 frames, got {}", trace.n_frames()));
    }
    let n_sub = trace.n_subcarriers();
    let fitted: Vec<(PairBasis, Vec<Vec<f64>>)> = (0..trace.n_pairs())
        .into_par_iter()
        .map(|pair| {
            let series: Vec<Vec<f64>> = (0..n_sub).map(|sc| trace.stream(pair * n_sub + sc)).collect();
            fit_pair(&series, p)
        })
        .collect::<Result<_>>()?;
    let (bases, pairs): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    Ok((ComponentSet::new(pairs, ComponentOrder::Variance)?, bases))
}

pub fn pca_project(trace: &CsiTrace, p: usize) -> Result<ComponentSet> {
    pca_project_with_basis(trace, p).map(|(set, _)| set)
}

/// Stable sort of each pair's waveforms by descending peak-to-peak value.
pub fn reorder_by_peak_to_peak(components: ComponentSet) -> ComponentSet {
    let ComponentSet { p, len, pairs, .. } = components;
    let pairs = pairs
        .into_iter()
        .map(|mut waves| {
            waves.sort_by(|a, b| peak_to_peak(b).total_cmp(&peak_to_peak(a)));
            waves
        })
        .collect();
    ComponentSet {
        p,
        len,
        order: ComponentOrder::PeakToPeak,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    }

    fn set_from(ptp: &[f64]) -> ComponentSet {
        let waves = ptp
            .iter()
            .enumerate()
            .map(|(i, &a)| vec![i as f64, i as f64 + a])
            .collect();
        ComponentSet::new(vec![waves], ComponentOrder::Variance).unwrap()
    }

    fn ptps(set: &ComponentSet) -> Vec<f64> {
        set.pairs()[0].iter().map(|w| peak_to_peak(w)).collect()
    }

    #[test]
    fn rank_one_input_concentrates_in_first_component() {
        let n = 500;
        let s: Vec<f64> = (0..n)
            .map(|t| (t as f64 * 0.05).sin() + 0.3 * (t as f64 * 0.011).cos())
            .collect();
        let mut data = Vec::with_capacity(n * 30);
        for &v in &s {
            for sc in 0..30 {
                data.push(10.0 + (1.0 + sc as f32 * 0.1) * v as f32);
            }
        }
        let trace = CsiTrace::new(1000.0, 1, 1, 30, data).unwrap();
        let (set, basis) = pca_project_with_basis(&trace, 4).unwrap();
        let total: f64 = (0..30).map(|sc| variance(&trace.stream(sc))).sum();
        assert!(variance(set.waveform(0, 0)) > 0.999 * total);
        for k in 1..4 {
            assert!(variance(set.waveform(0, k)) < 1e-9 * total);
        }
        // First component is proportional to s(t).
        let w = set.waveform(0, 0);
        let ratio = w[10] / (s[10] - s.iter().sum::<f64>() / n as f64);
        for t in (0..n).step_by(37) {
            let centered = s[t] - s.iter().sum::<f64>() / n as f64;
            assert!((w[t] - ratio * centered).abs() < 1e-4 * ratio.abs());
        }
        assert_eq!(basis[0].directions.len(), 4);
    }

    #[test]
    fn twenty_four_waveforms_for_six_pairs() {
        let n = 64;
        let data: Vec<f32> = (0..n * 180).map(|i| ((i * 7919) % 113) as f32).collect();
        let trace = CsiTrace::new(1000.0, 2, 3, 30, data).unwrap();
        let set = pca_project(&trace, 4).unwrap();
        assert_eq!(set.n_pairs(), 6);
        assert_eq!(set.waveforms().count(), 24);
        assert!(set.waveforms().all(|w| w.len() == n));
    }

    #[test]
    fn domain_errors() {
        let trace = CsiTrace::new(1000.0, 1, 1, 30, vec![1.0; 30]).unwrap();
        assert!(pca_project(&trace, 4).is_err());
        let trace = CsiTrace::new(1000.0, 1, 1, 30, vec![1.0; 90]).unwrap();
        assert!(pca_project(&trace, 31).is_err());
        assert!(pca_project(&trace, 0).is_err());
    }

    #[test]
    fn orientation_makes_largest_sample_positive() {
        let data: Vec<f32> = (0..300 * 30).map(|i| (((i * 31) % 97) as f32).sqrt()).collect();
        let trace = CsiTrace::new(1000.0, 1, 1, 30, data).unwrap();
        let a = pca_project(&trace, 5).unwrap();
        for w in a.waveforms() {
            let extreme = w.iter().fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
            assert!(extreme > 0.0);
        }
        assert_eq!(a, pca_project(&trace, 5).unwrap());
    }

    #[test]
    fn reorder_is_stable_descending() {
        let out = reorder_by_peak_to_peak(set_from(&[1.0, 3.0, 2.0, 2.0]));
        assert_eq!(ptps(&out), vec![3.0, 2.0, 2.0, 1.0]);
        // The two ties keep their original relative order (original indices 2 then 3).
        assert_eq!(out.pairs()[0][1][0], 2.0);
        assert_eq!(out.pairs()[0][2][0], 3.0);
        assert_eq!(out.order(), ComponentOrder::PeakToPeak);
    }

    #[test]
    fn sorted_input_is_unchanged() {
        let input = set_from(&[4.0, 3.0, 1.0]);
        let out = reorder_by_peak_to_peak(input.clone());
        assert_eq!(out.pairs(), input.pairs());
    }

    fn low_rank_trace(rank: usize, seed: u64) -> CsiTrace {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mix: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let latent: Vec<Vec<f64>> = (0..rank)
            .map(|_| (0..300).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut data = Vec::with_capacity(300 * 30);
        for t in 0..300 {
            for row in &mix {
                let v: f64 = row.iter().zip(&latent).map(|(m, l)| m * l[t]).sum();
                data.push((10.0 + v) as f32);
            }
        }
        CsiTrace::new(1000.0, 1, 1, 30, data).unwrap()
    }

    #[test]
    fn projected_variance_is_bounded_and_exact_at_full_rank() {
        for seed in 0..10 {
            for rank in 1..=6 {
                let trace = low_rank_trace(rank, seed);
                let total: f64 = (0..30).map(|sc| variance(&trace.stream(sc))).sum();
                for p in 1..=4 {
                    let set = pca_project(&trace, p).unwrap();
                    let kept: f64 = set.waveforms().map(variance).sum();
                    assert!(kept <= total * (1.0 + 1e-9), "rank {rank} p {p}: {kept} > {total}");
                    if rank <= p {
                        assert!((kept - total).abs() <= 1e-9 * total.max(1.0), "rank {rank} p {p}");
                    }
                }
                assert_eq!(pca_project(&trace, 4).unwrap(), pca_project(&trace, 4).unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn reorder_is_idempotent_permutation(ptp in proptest::collection::vec(0.0f64..10.0, 1..8)) {
            let input = set_from(&ptp);
            let once = reorder_by_peak_to_peak(input.clone());
            let twice = reorder_by_peak_to_peak(once.clone());
            prop_assert_eq!(once.pairs(), twice.pairs());
            let mut a: Vec<Vec<f64>> = input.pairs()[0].clone();
            let mut b: Vec<Vec<f64>> = once.pairs()[0].clone();
            a.sort_by(|x, y| x[0].total_cmp(&y[0]));
            b.sort_by(|x, y| x[0].total_cmp(&y[0]));
            prop_assert_eq!(a, b);
        }
    }
}
