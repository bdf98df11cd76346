//! End-to-end composition of the stages, corpus sources, and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{evaluate_identification, EvalReport};
use crate::config::PipelineConfig;
use crate::error::{domain, Error, Result};
use crate::features::{dwt_compress, extract_los_waveform, FeatureFile, FeatureParams, FeatureSample, ShapeFeature};
use crate::io;
use crate::model::{CsiTrace, Segment, SegmentLabel, SubjectId};
use crate::pca::{pca_project, reorder_by_peak_to_peak, ComponentSet};
use crate::preprocess::filter_trace;
use crate::segmentation::{
    match_segments, segment_components, segment_components_baseline, segmentation_metrics, SegmentationScore,
};
use crate::synth::Corpus;

/// Pipeline stage names used in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Input,
    Synth,
    Filter,
    Pca,
    Segment,
    Extract,
    Train,
    Identify,
    Evaluate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).ok();
        write!(f, "{}", name.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

impl StageError {
    /// Machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        let kind = match &self.source {
            Error::Parse { .. } => "parse",
            Error::Domain(_) => "domain",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        };
        let mut v = serde_json::json!({
            "stage": self.stage,
            "kind": kind,
            "message": self.source.to_string(),
        });
        match &self.source {
            Error::Parse { offset, .. } => v["offset"] = (*offset).into(),
            Error::Config { key, .. } => v["key"] = key.clone().into(),
            _ => {}
        }
        serde_json::json!({ "error": v }).to_string()
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

/// Attaches a stage to a result.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T, E: Into<Error>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// Filtering followed by per-pair PCA with peak-to-peak ordering.
pub fn trace_components(trace: &CsiTrace, cfg: &PipelineConfig) -> StageResult<ComponentSet> {
    let filtered = filter_trace(trace, &cfg.filter).at(Stage::Filter)?;
    components_of_filtered(&filtered, cfg)
}

pub fn components_of_filtered(filtered: &CsiTrace, cfg: &PipelineConfig) -> StageResult<ComponentSet> {
    let set = pca_project(filtered, cfg.components).at(Stage::Pca)?;
    Ok(reorder_by_peak_to_peak(set))
}

/// Decomposition level shared by every feature of a run: the longest
/// admissible segment decides it.
pub fn feature_params(cfg: &PipelineConfig, n_pairs: usize) -> Result<FeatureParams> {
    Ok(FeatureParams {
        components: cfg.components,
        pairs: n_pairs,
        level: cfg.dwt.resolve_level(cfg.seg.timelen2)?,
    })
}

pub fn segment_feature(set: &ComponentSet, segment: Segment, level: usize) -> Result<ShapeFeature> {
    dwt_compress(&extract_los_waveform(set, segment)?, level)
}

/// Detected segments of one trace, each tagged with the subject of the
/// ground-truth crossing it matches, if any.
pub fn label_detections(
    detected: &[Segment],
    labels: &[SegmentLabel],
    tol: usize,
) -> Vec<(Segment, Option<SubjectId>)> {
    let truth: Vec<Segment> = labels.iter().map(|l| l.segment).collect();
    match_segments(detected, &truth, tol)
        .into_iter()
        .zip(detected)
        .map(|(m, &seg)| (seg, m.map(|i| labels[i].subject.clone())))
        .collect()
}

/// A labeled collection of traces.
pub trait TraceSource: Sync {
    fn len(&self) -> usize;
    fn load(&self, index: usize) -> Result<(CsiTrace, Vec<SegmentLabel>)>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TraceSource for Corpus {
    fn len(&self) -> usize {
        Corpus::len(self)
    }

    fn load(&self, index: usize) -> Result<(CsiTrace, Vec<SegmentLabel>)> {
        self.trace(index)
    }
}

/// One entry of an on-disk corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub trace: String,
    pub labels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const CORPUS_MANIFEST: &str = "corpus.json";

/// Corpus directory listing `(trace, labels)` files relative to itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(default)]
    pub spec: Option<crate::synth::CorpusSpec>,
    #[serde(default)]
    pub profiles: Vec<crate::synth::SubjectProfile>,
    pub entries: Vec<CorpusEntry>,
}

pub struct DirCorpus {
    root: PathBuf,
    manifest: CorpusManifest,
}

impl DirCorpus {
    pub fn open(root: &Path) -> Result<Self> {
        let text = fs::read_to_string(root.join(CORPUS_MANIFEST))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: serde_json::from_str(&text)?,
        })
    }

    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    /// The manifest followed by every trace and label file.
    pub fn files(&self) -> impl Iterator<Item = PathBuf> + '_ {
        std::iter::once(self.root.join(CORPUS_MANIFEST)).chain(
            self.manifest
                .entries
                .iter()
                .flat_map(|e| [self.root.join(&e.trace), self.root.join(&e.labels)]),
        )
    }
}

impl TraceSource for DirCorpus {
    fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    fn load(&self, index: usize) -> Result<(CsiTrace, Vec<SegmentLabel>)> {
        let e = &self.manifest.entries[index];
        let trace = io::read_trace(fs::File::open(self.root.join(&e.trace))?)?;
        let labels = io::decode_labels(&fs::read_to_string(self.root.join(&e.labels))?)?;
        Ok((trace, labels))
    }
}

/// Writes every trace of `source` into `dir` with a corpus manifest.
pub fn write_corpus(source: &Corpus, dir: &Path) -> Result<CorpusManifest> {
    fs::create_dir_all(dir)?;
    let width = source.len().saturating_sub(1).to_string().len().max(4);
    let mut entries = Vec::with_capacity(source.len());
    for i in 0..source.len() {
        let (trace, labels) = source.trace(i)?;
        let entry = CorpusEntry {
            trace: format!("trace_{i:0width$}.csit"),
            labels: format!("trace_{i:0width$}.labels.csv"),
            seed: Some(source.trace_spec(i).seed),
        };
        fs::write(dir.join(&entry.trace), io::encode_trace(&trace))?;
        fs::write(dir.join(&entry.labels), io::encode_labels(&labels))?;
        entries.push(entry);
    }
    let manifest = CorpusManifest {
        spec: Some(source.spec().clone()),
        profiles: source.profiles().to_vec(),
        entries,
    };
    fs::write(
        dir.join(CORPUS_MANIFEST),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// Per-trace outcome of the fused path.
#[derive(Debug, Clone)]
pub struct TraceOutcome {
    pub score: SegmentationScore,
    pub baseline: Option<SegmentationScore>,
    pub samples: Vec<FeatureSample>,
}

fn process_trace(
    trace: &CsiTrace,
    labels: &[SegmentLabel],
    cfg: &PipelineConfig,
    with_baseline: bool,
) -> StageResult<TraceOutcome> {
    let set = trace_components(trace, cfg)?;
    let detected = segment_components(&set, &cfg.seg).at(Stage::Segment)?;
    let truth: Vec<Segment> = labels.iter().map(|l| l.segment).collect();
    let tol = cfg.seg.match_tolerance();
    let score = segmentation_metrics(&detected, &truth, tol as i64).at(Stage::Segment)?;
    let baseline = if with_baseline {
        let b = segment_components_baseline(&set, &cfg.seg).at(Stage::Segment)?;
        Some(segmentation_metrics(&b, &truth, tol as i64).at(Stage::Segment)?)
    } else {
        None
    };
    let level = feature_params(cfg, set.n_pairs()).at(Stage::Extract)?.level;
    let samples = label_detections(&detected, labels, tol)
        .into_iter()
        .filter_map(|(segment, subject)| subject.map(|s| (segment, s)))
        .map(|(segment, subject)| {
            Ok(FeatureSample {
                subject: Some(subject),
                segment: Some(segment),
                feature: segment_feature(&set, segment, level)?,
            })
        })
        .collect::<Result<_>>()
        .at(Stage::Extract)?;
    Ok(TraceOutcome {
        score,
        baseline,
        samples,
    })
}

/// Aggregate of running the fused path over a corpus.
#[derive(Debug, Clone)]
pub struct CorpusRun {
    pub score: SegmentationScore,
    pub baseline: Option<SegmentationScore>,
    pub features: FeatureFile,
}

/// Runs filter, PCA, segmentation, and feature extraction over every
/// trace. Features keep corpus order and come only from detections that
/// match a labeled crossing.
pub fn run_corpus(source: &dyn TraceSource, cfg: &PipelineConfig, with_baseline: bool) -> StageResult<CorpusRun> {
    cfg.validate().at(Stage::Config)?;
    let outcomes: Vec<TraceOutcome> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let (trace, labels) = source.load(i).at(Stage::Input)?;
            process_trace(&trace, &labels, cfg, with_baseline)
        })
        .collect::<StageResult<_>>()?;
    let n_pairs = match source.len() {
        0 => 0,
        _ => source.load(0).at(Stage::Input)?.0.n_pairs(),
    };
    let mut features = FeatureFile::new(feature_params(cfg, n_pairs).at(Stage::Extract)?);
    let mut score = SegmentationScore::default();
    let mut baseline = with_baseline.then(SegmentationScore::default);
    for o in outcomes {
        score = score.merge(o.score);
        if let (Some(acc), Some(b)) = (baseline.as_mut(), o.baseline) {
            *acc = acc.merge(b);
        }
        for s in o.samples {
            features.push(s).at(Stage::Extract)?;
        }
    }
    Ok(CorpusRun {
        score,
        baseline,
        features,
    })
}

/// Labeled features to the identification sweeps.
pub fn evaluate_features(features: &FeatureFile, cfg: &PipelineConfig) -> StageResult<EvalReport> {
    let samples: Vec<(SubjectId, ShapeFeature)> = features
        .samples
        .iter()
        .map(|s| match &s.subject {
            Some(subject) => Ok((subject.clone(), s.feature.clone())),
            None => domain("evaluation needs labeled samples"),
        })
        .collect::<Result<_>>()
        .at(Stage::Evaluate)?;
    evaluate_identification(&samples, &cfg.eval).at(Stage::Evaluate)
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub const RUN_MANIFEST: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        let config = PipelineConfig::KEYS
            .iter()
            .map(|k| (k.to_string(), cfg.get(k).expect("listed key")))
            .collect();
        let seeds = [("eval.seed", cfg.eval.seed), ("synth.seed", cfg.synth.seed)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self {
            command: command.to_string(),
            config,
            seeds,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(RUN_MANIFEST), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
