//! Flat `key = value` pipeline configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys are
//! errors. `auto` and `none` clear optional settings.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::classifier::EvalProtocol;
use crate::error::{Error, Result};
use crate::features::DwtConfig;
use crate::io::LineCursor;
use crate::preprocess::FilterConfig;
use crate::segmentation::SegmenterConfig;
use crate::synth::CorpusSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub components: usize,
    pub seg: SegmenterConfig,
    pub dwt: DwtConfig,
    pub eval: EvalProtocol,
    pub synth: CorpusSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            components: crate::pca::DEFAULT_COMPONENTS,
            seg: SegmenterConfig::default(),
            dwt: DwtConfig::default(),
            eval: EvalProtocol::default(),
            synth: CorpusSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        key: key.to_string(),
        message: format!("cannot parse {value:?}"),
    })
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn show_opt<T: ToString>(v: &Option<T>, unset: &str) -> String {
    v.as_ref().map_or_else(|| unset.to_string(), T::to_string)
}

impl PipelineConfig {
    /// Every key in file order.
    pub const KEYS: &'static [&'static str] = &[
        "filter.order",
        "filter.cutoff_hz",
        "filter.zero_phase",
        "pca.components",
        "seg.window",
        "seg.t1",
        "seg.t2",
        "seg.t1_percentile",
        "seg.t2_percentile",
        "seg.timelen1",
        "seg.timelen2",
        "seg.match_tol",
        "seg.pool_pairs",
        "dwt.level",
        "dwt.target_len",
        "knn.k",
        "dtw.band",
        "eval.seed",
        "eval.train",
        "eval.train_sizes",
        "eval.repeats",
        "eval.max_subsets",
        "synth.seed",
        "synth.subjects",
        "synth.separation",
        "synth.traces",
        "synth.margin_s",
        "synth.margin_ratio",
        "synth.margin_jitter_s",
        "synth.sample_rate_hz",
        "synth.noise_sigma",
        "synth.drift_amplitude",
        "synth.burst_amplitude",
        "synth.jitter",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "filter.order" => self.filter.order = parse(key, v)?,
            "filter.cutoff_hz" => self.filter.cutoff_hz = parse(key, v)?,
            "filter.zero_phase" => self.filter.zero_phase = parse(key, v)?,
            "pca.components" => self.components = parse(key, v)?,
            "seg.window" => self.seg.window = parse(key, v)?,
            "seg.t1" => self.seg.t1 = parse_opt(key, v)?,
            "seg.t2" => self.seg.t2 = parse_opt(key, v)?,
            "seg.t1_percentile" => self.seg.t1_percentile = parse(key, v)?,
            "seg.t2_percentile" => self.seg.t2_percentile = parse(key, v)?,
            "seg.timelen1" => self.seg.timelen1 = parse(key, v)?,
            "seg.timelen2" => self.seg.timelen2 = parse(key, v)?,
            "seg.match_tol" => self.seg.match_tol = parse_opt(key, v)?,
            "seg.pool_pairs" => self.seg.pool_pairs = parse(key, v)?,
            "dwt.level" => self.dwt.level = parse_opt(key, v)?,
            "dwt.target_len" => self.dwt.target_len = parse(key, v)?,
            "knn.k" => self.eval.k = parse(key, v)?,
            "dtw.band" => self.eval.band = parse_opt::<usize>(key, v)?.filter(|&b| b > 0),
            "eval.seed" => self.eval.seed = parse(key, v)?,
            "eval.train" => self.eval.train_per_subject = parse(key, v)?,
            "eval.train_sizes" => self.eval.train_sizes = parse_list(key, v)?,
            "eval.repeats" => self.eval.repeats = parse(key, v)?,
            "eval.max_subsets" => self.eval.max_subsets = parse(key, v)?,
            "synth.seed" => self.synth.seed = parse(key, v)?,
            "synth.subjects" => self.synth.subjects = parse(key, v)?,
            "synth.separation" => self.synth.separation = parse(key, v)?,
            "synth.traces" => self.synth.traces = parse(key, v)?,
            "synth.margin_s" => self.synth.margin_s = parse(key, v)?,
            "synth.margin_ratio" => self.synth.margin_ratio = parse(key, v)?,
            "synth.margin_jitter_s" => self.synth.margin_jitter_s = parse(key, v)?,
            "synth.sample_rate_hz" => self.synth.trace.sample_rate_hz = parse(key, v)?,
            "synth.noise_sigma" => self.synth.trace.noise_sigma = parse(key, v)?,
            "synth.drift_amplitude" => self.synth.trace.drift_amplitude = parse(key, v)?,
            "synth.burst_amplitude" => self.synth.trace.burst_amplitude = parse(key, v)?,
            "synth.jitter" => self.synth.trace.jitter = parse(key, v)?,
            _ => {
                return Err(Error::Config {
                    key: key.to_string(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.synth.trace;
        Some(match key {
            "filter.order" => self.filter.order.to_string(),
            "filter.cutoff_hz" => self.filter.cutoff_hz.to_string(),
            "filter.zero_phase" => self.filter.zero_phase.to_string(),
            "pca.components" => self.components.to_string(),
            "seg.window" => self.seg.window.to_string(),
            "seg.t1" => show_opt(&self.seg.t1, "auto"),
            "seg.t2" => show_opt(&self.seg.t2, "auto"),
            "seg.t1_percentile" => self.seg.t1_percentile.to_string(),
            "seg.t2_percentile" => self.seg.t2_percentile.to_string(),
            "seg.timelen1" => self.seg.timelen1.to_string(),
            "seg.timelen2" => self.seg.timelen2.to_string(),
            "seg.match_tol" => show_opt(&self.seg.match_tol, "auto"),
            "seg.pool_pairs" => self.seg.pool_pairs.to_string(),
            "dwt.level" => show_opt(&self.dwt.level, "auto"),
            "dwt.target_len" => self.dwt.target_len.to_string(),
            "knn.k" => self.eval.k.to_string(),
            "dtw.band" => show_opt(&self.eval.band, "none"),
            "eval.seed" => self.eval.seed.to_string(),
            "eval.train" => self.eval.train_per_subject.to_string(),
            "eval.train_sizes" => self
                .eval
                .train_sizes
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "eval.repeats" => self.eval.repeats.to_string(),
            "eval.max_subsets" => self.eval.max_subsets.to_string(),
            "synth.seed" => self.synth.seed.to_string(),
            "synth.subjects" => self.synth.subjects.to_string(),
            "synth.separation" => self.synth.separation.to_string(),
            "synth.traces" => self.synth.traces.to_string(),
            "synth.margin_s" => self.synth.margin_s.to_string(),
            "synth.margin_ratio" => self.synth.margin_ratio.to_string(),
            "synth.margin_jitter_s" => self.synth.margin_jitter_s.to_string(),
            "synth.sample_rate_hz" => t.sample_rate_hz.to_string(),
            "synth.noise_sigma" => t.noise_sigma.to_string(),
            "synth.drift_amplitude" => t.drift_amplitude.to_string(),
            "synth.burst_amplitude" => t.burst_amplitude.to_string(),
            "synth.jitter" => t.jitter.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
                key: o.to_string(),
                message: "override must look like key=value".into(),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (offset, line) in LineCursor::new(text) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| crate::error::parse_err(offset, format!("expected key = value, got {line:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                message,
            })
        };
        if self.filter.order == 0 {
            return bad("filter.order", "must be at least 1".into());
        }
        if !(self.filter.cutoff_hz > 0.0) {
            return bad("filter.cutoff_hz", "must be positive".into());
        }
        if self.components == 0 {
            return bad("pca.components", "must be at least 1".into());
        }
        self.seg.validate().map_err(|e| Error::Config {
            key: "seg".into(),
            message: e.to_string(),
        })?;
        if self.dwt.level.is_none() && self.dwt.target_len < 3 {
            return bad("dwt.target_len", "must be at least 3".into());
        }
        if self.eval.k == 0 {
            return bad("knn.k", "must be at least 1".into());
        }
        if self.eval.train_per_subject == 0 || self.eval.train_sizes.contains(&0) {
            return bad("eval.train", "training sizes must be positive".into());
        }
        if self.eval.max_subsets == 0 {
            return bad("eval.max_subsets", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.synth.separation) {
            return bad("synth.separation", "must lie in [0, 1]".into());
        }
        if self.synth.subjects == 0 {
            return bad("synth.subjects", "must be at least 1".into());
        }
        let t = &self.synth.trace;
        if !(t.sample_rate_hz > 0.0) {
            return bad("synth.sample_rate_hz", "must be positive".into());
        }
        if !(self.synth.margin_s >= 0.0 && self.synth.margin_ratio >= 0.0 && self.synth.margin_jitter_s >= 0.0) {
            return bad("synth.margin_s", "margins must be nonnegative".into());
        }
        if !(t.noise_sigma >= 0.0 && t.jitter >= 0.0 && t.burst_amplitude >= 0.0 && t.drift_amplitude >= 0.0) {
            return bad(
                "synth.noise_sigma",
                "noise, jitter, drift and burst amplitude must be nonnegative".into(),
            );
        }
        Ok(())
    }
}
