//! Core data types: CSI amplitude traces, segments, subject labels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Number of OFDM subcarriers reported per TX-RX antenna pair.
pub const SUBCARRIERS_PER_PAIR: usize = 30;

/// A time-ordered stream of CSI amplitude frames.
///
/// Each frame is a `(n_tx * n_rx) x n_subcarriers` matrix of linear
/// amplitudes stored pair-major, subcarrier-minor. All frames live in one
/// contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTrace {
    sample_rate_hz: f64,
    n_tx: usize,
    n_rx: usize,
    n_subcarriers: usize,
    data: Vec<f32>,
}

impl CsiTrace {
    /// Builds a trace from a flat frame buffer, checking every invariant.
    pub fn new(sample_rate_hz: f64, n_tx: usize, n_rx: usize, n_subcarriers: usize, data: Vec<f32>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return domain(format!("sample rate must be positive, got {sample_rate_hz}"));
        }
        if n_tx == 0 || n_rx == 0 || n_subcarriers == 0 {
            return domain("antenna and subcarrier counts must be positive");
        }
        let frame_len = n_tx * n_rx * n_subcarriers;
        if !data.len().is_multiple_of(frame_len) {
            return domain(format!(
                "buffer of {} values is not a whole number of {frame_len}-value frames",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return domain(format!(
                "amplitude {} at index {i} is not a finite nonnegative value",
                data[i]
            ));
        }
        Ok(Self {
            sample_rate_hz,
            n_tx,
            n_rx,
            n_subcarriers,
            data,
        })
    }

    /// An empty trace with the given geometry.
    pub fn empty(sample_rate_hz: f64, n_tx: usize, n_rx: usize, n_subcarriers: usize) -> Result<Self> {
        Self::new(sample_rate_hz, n_tx, n_rx, n_subcarriers, Vec::new())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Number of TX-RX antenna pairs.
    pub fn n_pairs(&self) -> usize {
        self.n_tx * self.n_rx
    }

    /// Total number of amplitude streams (pairs x subcarriers).
    pub fn n_streams(&self) -> usize {
        self.n_pairs() * self.n_subcarriers
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.n_streams()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat buffer, frame-major then pair then subcarrier.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, index: usize) -> &[f32] {
        let n = self.n_streams();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn amplitude(&self, frame: usize, pair: usize, subcarrier: usize) -> f32 {
        self.data[frame * self.n_streams() + pair * self.n_subcarriers + subcarrier]
    }

    /// Copies one stream out as an `f64` series.
    pub fn stream(&self, stream: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(stream)
            .step_by(self.n_streams())
            .map(|&v| v as f64)
            .collect()
    }

    /// Returns a trace with the same geometry and a new frame buffer.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.sample_rate_hz, self.n_tx, self.n_rx, self.n_subcarriers, data)
    }

    /// Rebuilds a trace from per-stream `f64` series (all of equal length).
    ///
    /// Values are narrowed to `f32` and negative values are clamped to zero
    /// so the amplitude invariant survives filter overshoot.
    pub fn from_streams(&self, streams: &[Vec<f64>]) -> Result<Self> {
        if streams.len() != self.n_streams() {
            return domain(format!("expected {} streams, got {}", self.n_streams(), streams.len()));
        }
        let n_frames = streams.first().map_or(0, Vec::len);
        if streams.iter().any(|s| s.len() != n_frames) {
            return domain("streams differ in length");
        }
        let n = self.n_streams();
        let mut data = vec![0.0f32; n_frames * n];
        for (s, series) in streams.iter().enumerate() {
            for (t, &v) in series.iter().enumerate() {
                data[t * n + s] = (v as f32).max(0.0);
            }
        }
        self.with_data(data)
    }
}

/// A detected or labeled LOS-crossing interval `[j_begin, j_end)` on the
/// component time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub j_begin: usize,
    pub j_end: usize,
}

impl Segment {
    pub fn new(j_begin: usize, j_end: usize) -> Result<Self> {
        if j_begin >= j_end {
            return domain(format!("segment begin {j_begin} must precede end {j_end}"));
        }
        Ok(Self { j_begin, j_end })
    }

    pub fn len(&self) -> usize {
        self.j_end - self.j_begin
    }

    pub fn is_empty(&self) -> bool {
        self.j_end <= self.j_begin
    }

    /// Checks `j_end < trace_len`.
    pub fn check_within(&self, trace_len: usize) -> Result<()> {
        if self.j_end >= trace_len {
            return domain(format!(
                "segment [{}, {}) exceeds trace of {trace_len} samples",
                self.j_begin, self.j_end
            ));
        }
        Ok(())
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.j_begin < other.j_end && other.j_begin < self.j_end
    }
}

/// Opaque nonempty subject identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubjectId(String);

impl SubjectId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return domain("subject id must be nonempty");
        }
        if id.contains([',', '\n', '\r', '"']) {
            return domain(format!("subject id {id:?} contains a CSV delimiter"));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SubjectId {
    type Error = crate::Error;

    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SubjectId> for String {
    fn from(value: SubjectId) -> Self {
        value.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ground-truth (or matched) subject for a segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub segment: Segment,
    pub subject: SubjectId,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_three_rig_has_six_pairs_and_180_streams() {
        let t = CsiTrace::empty(1000.0, 2, 3, SUBCARRIERS_PER_PAIR).unwrap();
        assert_eq!(t.n_pairs(), 6);
        assert_eq!(t.n_streams(), 180);
        assert_eq!(t.n_frames(), 0);
    }

    #[test]
    fn rejects_ragged_and_negative_buffers() {
        assert!(CsiTrace::new(1000.0, 1, 1, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(CsiTrace::new(1000.0, 1, 1, 2, vec![1.0, -2.0]).is_err());
        assert!(CsiTrace::new(1000.0, 1, 1, 2, vec![1.0, f32::NAN]).is_err());
        assert!(CsiTrace::new(0.0, 1, 1, 2, vec![]).is_err());
    }

    #[test]
    fn stream_extraction_is_pair_major() {
        let t = CsiTrace::new(10.0, 1, 2, 2, vec![0., 1., 2., 3., 4., 5., 6., 7.]).unwrap();
        assert_eq!(t.n_frames(), 2);
        assert_eq!(t.stream(2), vec![2.0, 6.0]);
        assert_eq!(t.amplitude(1, 1, 0), 6.0);
        let rebuilt = t
            .from_streams(&(0..4).map(|s| t.stream(s)).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(rebuilt, t);
    }

    #[test]
    fn segment_bounds() {
        assert!(Segment::new(5, 5).is_err());
        let s = Segment::new(2, 7).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.check_within(8).is_ok());
        assert!(s.check_within(7).is_err());
    }

    #[test]
    fn subject_ids_must_be_nonempty() {
        assert!(SubjectId::new("").is_err());
        assert!(SubjectId::new("a,b").is_err());
        assert_eq!(SubjectId::new("s01").unwrap().as_str(), "s01");
    }
}
