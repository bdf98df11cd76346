//! LOS waveform extraction and D4 shape features.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parse_err, Error, Result};
use crate::io::LineCursor;
use crate::model::{Segment, SubjectId};
use crate::pca::ComponentSet;
use crate::wavelet;

/// Component waveforms restricted to one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LosWaveform {
    pub segment: Segment,
    /// `pairs[pair][component]` slices of length `segment.len()`.
    pub pairs: Vec<Vec<Vec<f64>>>,
}

/// Slices every pair and component to `[j_begin, j_end)` without resampling.
pub fn extract_los_waveform(components: &ComponentSet, segment: Segment) -> Result<LosWaveform> {
    if segment.j_begin >= segment.j_end || segment.j_end > components.len() {
        return domain(format!(
            "segment [{}, {}) outside waveforms of length {}",
            segment.j_begin,
            segment.j_end,
            components.len()
        ));
    }
    let range = segment.j_begin..segment.j_end;
    let pairs = components
        .pairs()
        .iter()
        .map(|pair| pair.iter().map(|w| w[range.clone()].to_vec()).collect())
        .collect();
    Ok(LosWaveform { segment, pairs })
}

/// Approximation coefficients for every pair and component of one waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFeature {
    pub level: usize,
    pub original_len: usize,
    /// `pairs[pair][component]` coefficient vectors.
    pub pairs: Vec<Vec<Vec<f64>>>,
}

impl ShapeFeature {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn p(&self) -> usize {
        self.pairs.first().map_or(0, Vec::len)
    }

    pub fn series(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs.iter().flat_map(|p| p.iter().map(Vec::as_slice))
    }
}

/// Compresses a LOS waveform to its level-`level` D4 approximation.
pub fn dwt_compress(waveform: &LosWaveform, level: usize) -> Result<ShapeFeature> {
    let len = waveform.segment.len();
    let min_len = 1usize.checked_shl(level as u32).unwrap_or(usize::MAX);
    if len < min_len {
        return domain(format!(
            "waveform of {len} samples is too short for level {level}; need at least {min_len}"
        ));
    }
    let pairs = waveform
        .pairs
        .iter()
        .map(|pair| pair.iter().map(|w| wavelet::approximation(w, level)).collect())
        .collect();
    Ok(ShapeFeature {
        level,
        original_len: len,
        pairs,
    })
}

/// DWT settings (`dwt.level`, `dwt.target_len`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwtConfig {
    /// Fixed level; when unset the level comes from `target_len`.
    pub level: Option<usize>,
    pub target_len: usize,
}

impl Default for DwtConfig {
    fn default() -> Self {
        Self {
            level: None,
            target_len: 128,
        }
    }
}

impl DwtConfig {
    /// The decomposition level shared by every feature of a run: the fixed
    /// level, or the smallest level that brings a waveform of
    /// `longest_segment` samples down to at most `target_len` coefficients.
    pub fn resolve_level(&self, longest_segment: usize) -> Result<usize> {
        if let Some(level) = self.level {
            return Ok(level);
        }
        if self.target_len < 3 {
            return domain(format!("dwt target length {} must be at least 3", self.target_len));
        }
        let mut level = 0;
        while wavelet::approx_len(longest_segment, level) > self.target_len {
            level += 1;
        }
        Ok(level)
    }
}

/// Parameters every feature in a file shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub components: usize,
    pub pairs: usize,
    pub level: usize,
}

/// One extracted feature with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub subject: Option<SubjectId>,
    pub segment: Option<Segment>,
    pub feature: ShapeFeature,
}

/// Per-sample metadata stored in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample: usize,
    pub subject: Option<SubjectId>,
    pub segment: Option<Segment>,
    pub original_len: usize,
}

/// JSON sidecar accompanying a feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub params: FeatureParams,
    pub samples: Vec<SampleMeta>,
}

pub const FEATURE_CSV_HEADER: &str = "sample,subject,pair,component,level,coeff_index,value";

/// A portable collection of features sharing one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub params: FeatureParams,
    pub samples: Vec<FeatureSample>,
}

impl FeatureFile {
    pub fn new(params: FeatureParams) -> Self {
        Self {
            params,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: FeatureSample) -> Result<()> {
        let f = &sample.feature;
        if f.level != self.params.level || f.n_pairs() != self.params.pairs || f.p() != self.params.components {
            return domain(format!(
                "feature (level {}, {} pairs, {} components) does not match file parameters {:?}",
                f.level,
                f.n_pairs(),
                f.p(),
                self.params
            ));
        }
        if f.pairs.iter().any(|p| p.len() != self.params.components) {
            return domain("feature pairs hold differing component counts");
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Concatenates files that share parameters.
    pub fn merge(files: impl IntoIterator<Item = FeatureFile>) -> Result<FeatureFile> {
        let mut iter = files.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::Domain("no feature files to merge".into()))?;
        for file in iter {
            if file.params != out.params {
                return domain(format!(
                    "feature parameters differ: {:?} vs {:?}",
                    out.params, file.params
                ));
            }
            out.samples.extend(file.samples);
        }
        Ok(out)
    }

    pub fn encode_csv(&self) -> String {
        let mut out = String::from(FEATURE_CSV_HEADER);
        out.push('\n');
        for (s, sample) in self.samples.iter().enumerate() {
            let subject = sample.subject.as_ref().map_or("", SubjectId::as_str);
            for (pair, comps) in sample.feature.pairs.iter().enumerate() {
                for (component, coeffs) in comps.iter().enumerate() {
                    for (i, v) in coeffs.iter().enumerate() {
                        let _ = writeln!(out, "{s},{subject},{pair},{component},{},{i},{v}", sample.feature.level);
                    }
                }
            }
        }
        out
    }

    pub fn sidecar(&self) -> FeatureSidecar {
        FeatureSidecar {
            params: self.params,
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(sample, s)| SampleMeta {
                    sample,
                    subject: s.subject.clone(),
                    segment: s.segment,
                    original_len: s.feature.original_len,
                })
                .collect(),
        }
    }

    pub fn encode_sidecar(&self) -> String {
        serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes") + "\n"
    }

    /// Rebuilds a file from its CSV body and JSON sidecar.
    pub fn decode(csv: &str, sidecar: &str) -> Result<FeatureFile> {
        let sidecar: FeatureSidecar = serde_json::from_str(sidecar)?;
        let params = sidecar.params;
        let empty = |_| vec![vec![Vec::new(); params.components]; params.pairs];
        let mut coeffs: Vec<Vec<Vec<Vec<f64>>>> = sidecar.samples.iter().map(empty).collect();

        let mut lines = LineCursor::new(csv);
        let (offset, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
        if header.trim() != FEATURE_CSV_HEADER {
            return Err(parse_err(offset, format!("expected header `{FEATURE_CSV_HEADER}`")));
        }
        for (offset, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(parse_err(offset, format!("expected 7 fields, found {}", f.len())));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|e| parse_err(offset, e.to_string()));
            let (sample, pair, component, level, i) = (idx(f[0])?, idx(f[2])?, idx(f[3])?, idx(f[4])?, idx(f[5])?);
            let value: f64 = f[6]
                .parse()
                .map_err(|e: std::num::ParseFloatError| parse_err(offset, e.to_string()))?;
            let meta = sidecar
                .samples
                .get(sample)
                .ok_or_else(|| parse_err(offset, format!("sample {sample} missing from sidecar")))?;
            if meta.subject.as_ref().map_or("", SubjectId::as_str) != f[1] {
                return Err(parse_err(offset, format!("subject `{}` disagrees with sidecar", f[1])));
            }
            if level != params.level || pair >= params.pairs || component >= params.components {
                return Err(parse_err(offset, "row outside the sidecar parameters"));
            }
            let series = &mut coeffs[sample][pair][component];
            if i != series.len() {
                return Err(parse_err(offset, format!("coefficient index {i} out of sequence")));
            }
            if !value.is_finite() {
                return Err(parse_err(offset, "non-finite coefficient"));
            }
            series.push(value);
        }

        let mut file = FeatureFile::new(params);
        for (meta, pairs) in sidecar.samples.into_iter().zip(coeffs) {
            if pairs.iter().flatten().any(Vec::is_empty) {
                return domain(format!("sample {} has missing coefficient series", meta.sample));
            }
            file.push(FeatureSample {
                subject: meta.subject,
                segment: meta.segment,
                feature: ShapeFeature {
                    level: params.level,
                    original_len: meta.original_len,
                    pairs,
                },
            })?;
        }
        Ok(file)
    }
}
