//! LOS-crossing detection from mean-absolute-deviation profiles.
//!
//! For every sample `j` the detector looks at a window of `w` samples before
//! and after it. A crossing starts where the window before is quiet and the
//! window after is busy, and ends where the opposite holds. Two thresholds
//! (`t1 > t2`) separate busy from quiet and a duration gate rejects intervals
//! that are too short or too long to be a walk across the line of sight.

use std::ops::RangeInclusive;

use crate::error::{domain, Result};
use crate::model::Segment;
use crate::pca::ComponentSet;

/// Sliding MAD sums over component waveforms.
///
/// `before[j]` is the MAD of `Y[j-w..j]`, `after[j]` the MAD of `Y[j..j+w]`,
/// both summed over every waveform in scope. Entries outside
/// [`MadProfile::valid`] are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MadProfile {
    window: usize,
    before: Vec<f64>,
    after: Vec<f64>,
}

impl MadProfile {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.before.len()
    }

    pub fn is_empty(&self) -> bool {
        self.before.is_empty()
    }

    pub fn before(&self) -> &[f64] {
        &self.before
    }

    pub fn after(&self) -> &[f64] {
        &self.after
    }

    /// Indices where both windows fit inside the trace.
    pub fn valid(&self) -> RangeInclusive<usize> {
        self.window..=self.len() - self.window
    }

    /// Every defined `before` and `after` value.
    pub fn valid_values(&self) -> Vec<f64> {
        let r = self.valid();
        self.before[r.clone()].iter().chain(&self.after[r]).copied().collect()
    }
}

/// Mean absolute deviation of a window from its own mean.
pub fn window_mad(window: &[f64]) -> f64 {
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    window.iter().map(|v| (v - mean).abs()).sum::<f64>() / window.len() as f64
}

/// Fenwick tree over value ranks holding counts and sums.
struct RankTree {
    count: Vec<i64>,
    sum: Vec<f64>,
}

impl RankTree {
    fn new(n: usize) -> Self {
        Self {
            count: vec![0; n + 1],
            sum: vec![0.0; n + 1],
        }
    }

    fn update(&mut self, rank: usize, dc: i64, ds: f64) {
        let mut i = rank + 1;
        while i < self.count.len() {
            self.count[i] += dc;
            self.sum[i] += ds;
            i += i & i.wrapping_neg();
        }
    }

    /// Count and sum of entries with rank `< rank`.
    fn prefix(&self, rank: usize) -> (i64, f64) {
        let (mut c, mut s) = (0, 0.0);
        let mut i = rank;
        while i > 0 {
            c += self.count[i];
            s += self.sum[i];
            i -= i & i.wrapping_neg();
        }
        (c, s)
    }
}

/// MAD of every length-`w` window of `y`: entry `s` covers `y[s..s+w]`.
///
/// Runs in `O(n log n)` by keeping the window in a rank-indexed Fenwick
/// tree: the MAD splits into the parts below and above the window mean.
pub fn sliding_mad(y: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || y.len() < w {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |v: f64| sorted.partition_point(|&u| u < v);

    let mut tree = RankTree::new(sorted.len());
    let mut out = Vec::with_capacity(y.len() - w + 1);
    let mut total = 0.0;
    for (i, &v) in y.iter().enumerate() {
        tree.update(rank(v), 1, v);
        total += v;
        if i >= w {
            let old = y[i - w];
            tree.update(rank(old), -1, -old);
            total -= old;
        }
        if i + 1 >= w {
            // Resum once per window length so running-sum drift stays bounded.
            if (i + 1) % w == 0 {
                total = y[i + 1 - w..=i].iter().sum();
            }
            let mean = total / w as f64;
            let (below_n, below_sum) = tree.prefix(rank(mean));
            let above_n = w as i64 - below_n;
            let above_sum = total - below_sum;
            let dev = (mean * below_n as f64 - below_sum) + (above_sum - mean * above_n as f64);
            out.push(dev.max(0.0) / w as f64);
        }
    }
    out
}

fn profile_of<'a>(waves: impl Iterator<Item = &'a [f64]>, len: usize, w: usize) -> Result<MadProfile> {
    if w < 2 {
        return domain(format!("window {w} must be at least 2"));
    }
    if len < 2 * w {
        return domain(format!("trace of {len} samples is too short for window {w}"));
    }
    let mut before = vec![0.0; len];
    let mut after = vec![0.0; len];
    for y in waves {
        let mads = sliding_mad(y, w);
        for j in w..=len - w {
            before[j] += mads[j - w];
            after[j] += mads[j];
        }
    }
    Ok(MadProfile {
        window: w,
        before,
        after,
    })
}

/// Profile summed over every component of every pair.
pub fn mad_profile(components: &ComponentSet, w: usize) -> Result<MadProfile> {
    profile_of(components.waveforms(), components.len(), w)
}

/// One profile per antenna pair, each summed over that pair's components.
pub fn mad_profile_per_pair(components: &ComponentSet, w: usize) -> Result<Vec<MadProfile>> {
    components
        .pairs()
        .iter()
        .map(|pair| profile_of(pair.iter().map(Vec::as_slice), components.len(), w))
        .collect()
}

/// Resolved detector parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterParams {
    pub window: usize,
    pub t1: f64,
    pub t2: f64,
    pub timelen1: usize,
    pub timelen2: usize,
}

impl SegmenterParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return domain(format!("window {} must be at least 2", self.window));
        }
        if !(self.t1 > self.t2 && self.t2 >= 0.0) {
            return domain(format!(
                "thresholds need t1 > t2 >= 0, got t1 = {} t2 = {}",
                self.t1, self.t2
            ));
        }
        if self.timelen1 == 0 || self.timelen1 >= self.timelen2 {
            return domain(format!(
                "duration gate needs 0 < timelen1 < timelen2, got {} and {}",
                self.timelen1, self.timelen2
            ));
        }
        Ok(())
    }
}

/// Segmenter settings (`seg.*` config keys). Explicit thresholds override
/// the percentile rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    pub window: usize,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t1_percentile: f64,
    pub t2_percentile: f64,
    pub timelen1: usize,
    pub timelen2: usize,
    pub match_tol: Option<usize>,
    pub pool_pairs: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            window: 500,
            t1: None,
            t2: None,
            t1_percentile: 90.0,
            t2_percentile: 40.0,
            timelen1: 500,
            timelen2: 4000,
            match_tol: None,
            pool_pairs: true,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        for p in [self.t1_percentile, self.t2_percentile] {
            if !(0.0..=100.0).contains(&p) {
                return domain(format!("percentile {p} outside [0, 100]"));
            }
        }
        if self.t1.is_none() && self.t2.is_none() && self.t1_percentile <= self.t2_percentile {
            return domain("t1 percentile must exceed t2 percentile");
        }
        SegmenterParams {
            window: self.window,
            t1: self.t1.unwrap_or(f64::INFINITY),
            t2: self.t2.unwrap_or(0.0),
            timelen1: self.timelen1,
            timelen2: self.timelen2,
        }
        .validate()
    }

    /// Matching tolerance for detection scoring; defaults to the window.
    pub fn match_tolerance(&self) -> usize {
        self.match_tol.unwrap_or(self.window)
    }

    /// Fixes thresholds for one profile. Returns `None` when percentile
    /// thresholds collapse (`t1 <= t2`), which only happens on a profile
    /// with no activity to find.
    pub fn resolve(&self, profile: &MadProfile) -> Result<Option<SegmenterParams>> {
        let values = profile.valid_values();
        let t1 = self.t1.unwrap_or_else(|| percentile(&values, self.t1_percentile));
        let t2 = self.t2.unwrap_or_else(|| percentile(&values, self.t2_percentile));
        let params = SegmenterParams {
            window: self.window,
            t1,
            t2,
            timelen1: self.timelen1,
            timelen2: self.timelen2,
        };
        if t1 <= t2 && (self.t1.is_none() || self.t2.is_none()) {
            return Ok(None);
        }
        params.validate()?;
        Ok(Some(params))
    }
}

/// Linear-interpolated percentile (`q` in [0, 100]).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 100.0) / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Scans left to right for start/end pairs passing both thresholds and the
/// duration gate. Each start commits to the first admissible end; a start
/// without one is dropped and the scan resumes at the next sample.
pub fn detect_segments(profile: &MadProfile, params: &SegmenterParams) -> Vec<Segment> {
    let before = profile.before();
    let after = profile.after();
    let is_start = |j: usize| before[j] <= params.t2 && after[j] >= params.t1;
    let is_end = |j: usize| after[j] <= params.t2 && before[j] >= params.t1;

    let valid = profile.valid();
    let last = *valid.end();
    let mut out = Vec::new();
    let mut j = *valid.start();
    while j <= last {
        if is_start(j) {
            let lo = j + params.timelen1;
            let hi = (j + params.timelen2).min(last);
            if let Some(end) = (lo..=hi).find(|&e| is_end(e)) {
                out.push(Segment { j_begin: j, j_end: end });
                j = end + 1;
                continue;
            }
        }
        j += 1;
    }
    out
}

/// Single-threshold reference segmenter: a segment opens where the
/// activity after a point rises through the threshold and closes where it
/// falls back below, with no quiet-side check and no duration gate.
pub fn detect_segments_baseline(profile: &MadProfile, threshold: f64) -> Vec<Segment> {
    let before = profile.before();
    let after = profile.after();
    let valid = profile.valid();
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for j in valid {
        match open {
            None if before[j] < threshold && after[j] >= threshold => open = Some(j),
            Some(begin) if j > begin && before[j] >= threshold && after[j] < threshold => {
                out.push(Segment {
                    j_begin: begin,
                    j_end: j,
                });
                open = None;
            }
            _ => {}
        }
    }
    out
}

/// Collapses per-pair detections into segments seen by a strict majority
/// of pairs; each kept segment takes the median endpoints of its cluster.
pub fn merge_pair_detections(per_pair: &[Vec<Segment>]) -> Vec<Segment> {
    let n_pairs = per_pair.len();
    let mut all: Vec<(Segment, usize)> = per_pair
        .iter()
        .enumerate()
        .flat_map(|(pair, segs)| segs.iter().map(move |s| (*s, pair)))
        .collect();
    all.sort();

    let mut out: Vec<Segment> = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut reach = all[i].0.j_end;
        let mut k = i + 1;
        while k < all.len() && all[k].0.j_begin < reach {
            reach = reach.max(all[k].0.j_end);
            k += 1;
        }
        let cluster = &all[i..k];
        let mut pairs: Vec<usize> = cluster.iter().map(|c| c.1).collect();
        pairs.sort_unstable();
        pairs.dedup();
        if 2 * pairs.len() > n_pairs {
            let mut begins: Vec<usize> = cluster.iter().map(|c| c.0.j_begin).collect();
            let mut ends: Vec<usize> = cluster.iter().map(|c| c.0.j_end).collect();
            begins.sort_unstable();
            ends.sort_unstable();
            let seg = Segment {
                j_begin: begins[begins.len() / 2],
                j_end: ends[ends.len() / 2],
            };
            if seg.j_begin < seg.j_end && out.last().is_none_or(|p| p.j_end <= seg.j_begin) {
                out.push(seg);
            }
        }
        i = k;
    }
    out
}

/// Full detector over a component set, honoring `pool_pairs`.
pub fn segment_components(components: &ComponentSet, config: &SegmenterConfig) -> Result<Vec<Segment>> {
    config.validate()?;
    let detect = |profile: &MadProfile| -> Result<Vec<Segment>> {
        Ok(config
            .resolve(profile)?
            .map(|params| detect_segments(profile, &params))
            .unwrap_or_default())
    };
    if config.pool_pairs {
        detect(&mad_profile(components, config.window)?)
    } else {
        let per_pair = mad_profile_per_pair(components, config.window)?
            .iter()
            .map(detect)
            .collect::<Result<Vec<_>>>()?;
        Ok(merge_pair_detections(&per_pair))
    }
}

/// Reference segmenter over the pooled profile. Its single threshold is
/// the resolved quiet-side threshold `t2`.
pub fn segment_components_baseline(components: &ComponentSet, config: &SegmenterConfig) -> Result<Vec<Segment>> {
    config.validate()?;
    let profile = mad_profile(components, config.window)?;
    Ok(match config.resolve(&profile)? {
        Some(params) => detect_segments_baseline(&profile, params.t2),
        None => Vec::new(),
    })
}

/// Detection counts and ratios for one set of detections.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegmentationScore {
    /// Correctly detected segments.
    pub n_correct: usize,
    /// Ground-truth segments.
    pub n_truth: usize,
    /// False detections.
    pub n_false: usize,
    /// All detections.
    pub n_detected: usize,
}

impl SegmentationScore {
    /// Correct detections over ground truth; 1 when there is no ground truth.
    pub fn detection_ratio(&self) -> f64 {
        if self.n_truth == 0 {
            1.0
        } else {
            self.n_correct as f64 / self.n_truth as f64
        }
    }

    /// False detections over all detections; 0 when nothing was detected.
    pub fn error_ratio(&self) -> f64 {
        if self.n_detected == 0 {
            0.0
        } else {
            self.n_false as f64 / self.n_detected as f64
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            n_correct: self.n_correct + other.n_correct,
            n_truth: self.n_truth + other.n_truth,
            n_false: self.n_false + other.n_false,
            n_detected: self.n_detected + other.n_detected,
        }
    }
}

/// Greedy one-to-one matching in time order: a detection matches the first
/// unmatched truth segment whose endpoints both lie within `tol` samples.
/// Returns, per detection, the index of its truth segment.
pub fn match_segments(detected: &[Segment], truth: &[Segment], tol: usize) -> Vec<Option<usize>> {
    let mut used = vec![false; truth.len()];
    detected
        .iter()
        .map(|d| {
            let hit = truth.iter().enumerate().position(|(i, t)| {
                !used[i] && d.j_begin.abs_diff(t.j_begin) <= tol && d.j_end.abs_diff(t.j_end) <= tol
            });
            if let Some(i) = hit {
                used[i] = true;
            }
            hit
        })
        .collect()
}

pub fn segmentation_metrics(detected: &[Segment], truth: &[Segment], match_tol: i64) -> Result<SegmentationScore> {
    if match_tol < 0 {
        return domain(format!("match tolerance {match_tol} must be nonnegative"));
    }
    let matched = match_segments(detected, truth, match_tol as usize);
    let n_correct = matched.iter().filter(|m| m.is_some()).count();
    Ok(SegmentationScore {
        n_correct,
        n_truth: truth.len(),
        n_false: detected.len() - n_correct,
        n_detected: detected.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::ComponentOrder;
    use proptest::prelude::*;

    fn single(y: Vec<f64>) -> ComponentSet {
        ComponentSet::new(vec![vec![y]], ComponentOrder::PeakToPeak).unwrap()
    }

    fn naive_profile(set: &ComponentSet, w: usize) -> (Vec<f64>, Vec<f64>) {
        let n = set.len();
        let mut before = vec![0.0; n];
        let mut after = vec![0.0; n];
        for y in set.waveforms() {
            for j in w..=n - w {
                before[j] += window_mad(&y[j - w..j]);
                after[j] += window_mad(&y[j..j + w]);
            }
        }
        (before, after)
    }

    #[test]
    fn constant_waveform_has_zero_profile() {
        let p = mad_profile(&single(vec![3.5; 40]), 5).unwrap();
        assert!(p.before().iter().chain(p.after()).all(|&v| v == 0.0));
    }

    #[test]
    fn step_with_windows_on_each_side() {
        let p = mad_profile(&single(vec![0., 0., 0., 0., 4., 4., 4., 4.]), 4).unwrap();
        assert_eq!(p.valid(), 4..=4);
        assert_eq!(p.before()[4], 0.0);
        assert_eq!(p.after()[4], 0.0);
    }

    #[test]
    fn two_level_window_closed_form() {
        // k low samples then w - k high samples, step height delta.
        let (w, delta) = (10usize, 2.5);
        for k in 0..=w {
            let window: Vec<f64> = (0..w).map(|i| if i < k { 1.0 } else { 1.0 + delta }).collect();
            let closed = 2.0 * (k * (w - k)) as f64 * delta / (w * w) as f64;
            assert!((window_mad(&window) - closed).abs() < 1e-12);
            assert!((sliding_mad(&window, w)[0] - closed).abs() < 1e-12);
        }
        // The same value appears in the profile when the after-window straddles the step.
        let mut y = vec![0.0; 30];
        y[17..].iter_mut().for_each(|v| *v = delta);
        let p = mad_profile(&single(y), w).unwrap();
        let k = 17 - 12;
        assert!((p.after()[12] - 2.0 * (k * (w - k)) as f64 * delta / (w * w) as f64).abs() < 1e-12);
    }

    #[test]
    fn too_short_trace_is_rejected() {
        assert!(mad_profile(&single(vec![0.0; 9]), 5).is_err());
        assert!(mad_profile(&single(vec![0.0; 9]), 1).is_err());
    }

    #[test]
    fn flat_profile_detects_nothing() {
        let p = mad_profile(&single(vec![1.0; 100]), 5).unwrap();
        let params = SegmenterParams {
            window: 5,
            t1: 0.5,
            t2: 0.1,
            timelen1: 5,
            timelen2: 50,
        };
        assert!(detect_segments(&p, &params).is_empty());
    }

    fn burst_set(len: usize, start: usize, dur: usize) -> ComponentSet {
        let y: Vec<f64> = (0..len)
            .map(|t| {
                let quiet = 0.01 * ((t * 7919 % 97) as f64 / 97.0 - 0.5);
                if (start..start + dur).contains(&t) {
                    quiet + (t as f64 * 0.9).sin() * 5.0
                } else {
                    quiet
                }
            })
            .collect();
        single(y)
    }

    #[test]
    fn single_burst_is_found_near_truth() {
        let (w, start, dur) = (20, 150, 120);
        let p = mad_profile(&burst_set(500, start, dur), w).unwrap();
        let params = SegmenterParams {
            window: w,
            t1: 1.0,
            t2: 0.2,
            timelen1: 60,
            timelen2: 300,
        };
        let segs = detect_segments(&p, &params);
        assert_eq!(segs.len(), 1, "{segs:?}");
        assert!(segs[0].j_begin.abs_diff(start) <= w);
        assert!(segs[0].j_end.abs_diff(start + dur) <= w);
    }

    #[test]
    fn overlong_burst_fails_the_duration_gate() {
        let w = 20;
        let p = mad_profile(&burst_set(800, 150, 400), w).unwrap();
        let params = SegmenterParams {
            window: w,
            t1: 1.0,
            t2: 0.2,
            timelen1: 60,
            timelen2: 300,
        };
        assert!(detect_segments(&p, &params).is_empty());
    }

    #[test]
    fn per_pair_majority_merge() {
        let s = |a, b| Segment { j_begin: a, j_end: b };
        let merged = merge_pair_detections(&[
            vec![s(100, 200), s(500, 600)],
            vec![s(104, 210)],
            vec![s(98, 190), s(900, 950)],
        ]);
        assert_eq!(merged, vec![s(100, 200)]);
    }

    #[test]
    fn params_are_validated() {
        let ok = SegmenterParams {
            window: 4,
            t1: 2.0,
            t2: 1.0,
            timelen1: 5,
            timelen2: 10,
        };
        assert!(ok.validate().is_ok());
        assert!(SegmenterParams { t1: 1.0, ..ok }.validate().is_err());
        assert!(SegmenterParams { timelen1: 10, ..ok }.validate().is_err());
        assert!(SegmenterParams { window: 1, ..ok }.validate().is_err());
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0), 3.0);
        assert!((percentile(&[0.0, 10.0], 90.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_examples() {
        let s = |a, b| Segment { j_begin: a, j_end: b };
        let truth: Vec<_> = (0..12).map(|i| s(i * 1000, i * 1000 + 500)).collect();
        let perfect = segmentation_metrics(&truth, &truth, 0).unwrap();
        assert_eq!((perfect.detection_ratio(), perfect.error_ratio()), (1.0, 0.0));

        let mut detected = truth.clone();
        detected[5] = s(5300, 5900);
        let m = segmentation_metrics(&detected, &truth, 100).unwrap();
        assert!((m.detection_ratio() - 11.0 / 12.0).abs() < 1e-12);
        assert!((m.error_ratio() - 1.0 / 12.0).abs() < 1e-12);

        let none = segmentation_metrics(&[], &truth, 100).unwrap();
        assert_eq!((none.detection_ratio(), none.error_ratio()), (0.0, 0.0));
        assert!(segmentation_metrics(&[], &truth, -1).is_err());
    }

    #[test]
    fn matching_is_one_to_one() {
        let s = |a, b| Segment { j_begin: a, j_end: b };
        let m = match_segments(&[s(0, 10), s(1, 11)], &[s(0, 10)], 5);
        assert_eq!(m, vec![Some(0), None]);
    }

    proptest! {
        #[test]
        fn sliding_profile_matches_naive(
            values in proptest::collection::vec(-50.0f64..50.0, 24..120),
            w in 2usize..12,
        ) {
            prop_assume!(values.len() >= 2 * w);
            let set = single(values);
            let fast = mad_profile(&set, w).unwrap();
            let (before, after) = naive_profile(&set, w);
            for j in 0..set.len() {
                prop_assert!((fast.before()[j] - before[j]).abs() < 1e-9);
                prop_assert!((fast.after()[j] - after[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn mad_is_shift_invariant_and_scales(
            values in proptest::collection::vec(-5.0f64..5.0, 20..60),
            shift in -100.0f64..100.0, scale in 0.0f64..10.0,
        ) {
            let w = 5;
            let base = mad_profile(&single(values.clone()), w).unwrap();
            let shifted = mad_profile(&single(values.iter().map(|v| v + shift).collect()), w).unwrap();
            let scaled = mad_profile(&single(values.iter().map(|v| v * scale).collect()), w).unwrap();
            for j in base.valid() {
                prop_assert!((shifted.after()[j] - base.after()[j]).abs() < 1e-9);
                prop_assert!((scaled.after()[j] - scale * base.after()[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn detections_never_overlap_and_pass_the_gate(
            values in proptest::collection::vec(0.0f64..1.0, 100..300),
            t1 in 0.2f64..0.4, t2 in 0.0f64..0.2,
        ) {
            let p = mad_profile(&single(values), 4).unwrap();
            let params = SegmenterParams { window: 4, t1, t2, timelen1: 6, timelen2: 40 };
            let segs = detect_segments(&p, &params);
            for s in &segs {
                prop_assert!((6..=40).contains(&s.len()));
                prop_assert!(p.before()[s.j_begin] <= t2 && p.after()[s.j_begin] >= t1);
                prop_assert!(p.after()[s.j_end] <= t2 && p.before()[s.j_end] >= t1);
            }
            for pair in segs.windows(2) {
                prop_assert!(pair[0].j_end < pair[1].j_begin);
            }
        }
    }
}
