use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use csi_ident::classifier::{knn_classify, Gallery};
use csi_ident::config::PipelineConfig;
use csi_ident::features::{FeatureFile, FeatureSample};
use csi_ident::io;
use csi_ident::model::{CsiTrace, Segment, SegmentLabel};
use csi_ident::pca::ComponentSet;
use csi_ident::pipeline::{
    components_of_filtered, evaluate_features, feature_params, label_detections, run_corpus, segment_feature,
    trace_components, write_corpus, AtStage, DirCorpus, RunManifest, Stage, StageError, StageResult, TraceSource,
};
use csi_ident::preprocess::filter_trace;
use csi_ident::report;
use csi_ident::segmentation::{
    segment_components, segment_components_baseline, segmentation_metrics, SegmentationScore,
};
use csi_ident::synth::Corpus;

#[derive(Parser)]
#[command(
    name = "csi-ident",
    version,
    about = "Device-free human identification from WiFi CSI amplitudes"
)]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides a config key; repeatable and applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Prints the resolved config and exits.
    #[arg(long, global = true)]
    print_config: bool,
    /// Run directory receiving every output plus manifest.json.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Wikey,
}

#[derive(Subcommand)]
enum Command {
    /// Generates one synthetic trace, or a whole corpus with --corpus.
    Synth {
        #[arg(long)]
        corpus: bool,
        /// Corpus index of the single trace to write.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Low-pass filters every stream of a trace.
    Filter {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Detects walking segments in a trace or a corpus directory.
    Segment {
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        trace: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Ground-truth labels for DR/ER scoring and subject tagging.
        #[arg(long, requires = "trace")]
        labels: Option<PathBuf>,
        /// Also scores a single-threshold baseline segmenter.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// The trace was already produced by `filter`.
        #[arg(long)]
        prefiltered: bool,
    },
    /// Computes DWT shape features for the given segments.
    Extract {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        segments: PathBuf,
        #[arg(long)]
        prefiltered: bool,
    },
    /// Builds a gallery from labeled feature files.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
    },
    /// Predicts a subject for each walking segment of a trace.
    Identify {
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long, conflicts_with = "features", required_unless_present = "features")]
        trace: Option<PathBuf>,
        /// Classifies precomputed features instead of a trace.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        prefiltered: bool,
    },
    /// Runs the full pipeline over a corpus and writes the report.
    Evaluate {
        /// Corpus directory; the in-memory synthetic corpus when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> StageResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_text(&fs::read_to_string(p).at(Stage::Config)?).at(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_overrides(&cli.set).at(Stage::Config)?;
    cfg.validate().at(Stage::Config)?;
    Ok(cfg)
}

/// Collects outputs and inputs of one invocation for its manifest.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn new(dir: &Path, command: &str, cfg: &PipelineConfig) -> StageResult<Self> {
        fs::create_dir_all(dir).at(Stage::Output)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command, cfg),
        })
    }

    fn input(&mut self, path: &Path) -> StageResult<()> {
        self.manifest.add_input(path).at(Stage::Input)
    }

    fn write(&mut self, name: &str, body: impl AsRef<[u8]>) -> StageResult<()> {
        fs::write(self.dir.join(name), body).at(Stage::Output)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_features(&mut self, stem: &str, file: &FeatureFile) -> StageResult<()> {
        self.write(&format!("{stem}.csv"), file.encode_csv())?;
        self.write(&format!("{stem}.json"), file.encode_sidecar())
    }

    fn finish(self) -> StageResult<()> {
        self.manifest.write(&self.dir).at(Stage::Output)
    }
}

fn read_trace(run: &mut Run, path: &Path) -> StageResult<CsiTrace> {
    run.input(path)?;
    io::read_trace(fs::File::open(path).at(Stage::Input)?).at(Stage::Input)
}

/// Feature files travel as `<stem>.csv` plus a `<stem>.json` sidecar.
fn read_features(run: &mut Run, csv: &Path) -> StageResult<FeatureFile> {
    let sidecar = csv.with_extension("json");
    run.input(csv)?;
    run.input(&sidecar)?;
    let body = fs::read_to_string(csv).at(Stage::Input)?;
    let meta = fs::read_to_string(&sidecar).at(Stage::Input)?;
    FeatureFile::decode(&body, &meta).at(Stage::Input)
}

fn components(trace: &CsiTrace, cfg: &PipelineConfig, prefiltered: bool) -> StageResult<ComponentSet> {
    if prefiltered {
        components_of_filtered(trace, cfg)
    } else {
        trace_components(trace, cfg)
    }
}

fn run(cli: Cli) -> StageResult<()> {
    let cfg = load_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(StageError {
            stage: Stage::Config,
            source: csi_ident::Error::Domain("no command given; see --help".into()),
        });
    };
    match command {
        Command::Synth { corpus, index } => synth(&cli.out, &cfg, corpus, index),
        Command::Filter { trace } => filter(&cli.out, &cfg, &trace),
        Command::Segment {
            trace: Some(trace),
            labels,
            baseline,
            prefiltered,
            ..
        } => segment_trace(&cli.out, &cfg, &trace, labels.as_deref(), baseline, prefiltered),
        Command::Segment {
            corpus: Some(dir),
            baseline,
            ..
        } => segment_corpus(&cli.out, &cfg, &dir, baseline),
        Command::Segment { .. } => unreachable!("clap requires --trace or --corpus"),
        Command::Extract {
            trace,
            segments,
            prefiltered,
        } => extract(&cli.out, &cfg, &trace, &segments, prefiltered),
        Command::Train { features } => train(&cli.out, &cfg, &features),
        Command::Identify {
            gallery,
            trace,
            features,
            prefiltered,
        } => identify(
            &cli.out,
            &cfg,
            &gallery,
            trace.as_deref(),
            features.as_deref(),
            prefiltered,
        ),
        Command::Evaluate { corpus } => evaluate(&cli.out, &cfg, corpus.as_deref()),
    }
}

fn synth(out: &Path, cfg: &PipelineConfig, whole: bool, index: usize) -> StageResult<()> {
    let mut run = Run::new(out, "synth", cfg)?;
    let corpus = Corpus::new(cfg.synth.clone()).at(Stage::Synth)?;
    if whole {
        let manifest = write_corpus(&corpus, out).at(Stage::Output)?;
        run.manifest
            .outputs
            .push(csi_ident::pipeline::CORPUS_MANIFEST.to_string());
        for e in manifest.entries {
            run.manifest.outputs.extend([e.trace, e.labels]);
        }
    } else {
        if index >= corpus.len() {
            return Err(StageError {
                stage: Stage::Synth,
                source: csi_ident::Error::Domain(format!("index {index} outside corpus of {}", corpus.len())),
            });
        }
        let (trace, labels) = corpus.trace(index).at(Stage::Synth)?;
        run.write("trace.csit", io::encode_trace(&trace))?;
        run.write("trace.labels.csv", io::encode_labels(&labels))?;
    }
    run.finish()
}

fn filter(out: &Path, cfg: &PipelineConfig, path: &Path) -> StageResult<()> {
    let mut run = Run::new(out, "filter", cfg)?;
    let trace = read_trace(&mut run, path)?;
    let filtered = filter_trace(&trace, &cfg.filter).at(Stage::Filter)?;
    run.write("filtered.csit", io::encode_trace(&filtered))?;
    run.finish()
}

fn score(detected: &[Segment], labels: &[SegmentLabel], cfg: &PipelineConfig) -> StageResult<SegmentationScore> {
    let truth: Vec<Segment> = labels.iter().map(|l| l.segment).collect();
    segmentation_metrics(detected, &truth, cfg.seg.match_tolerance() as i64).at(Stage::Segment)
}

fn segment_trace(
    out: &Path,
    cfg: &PipelineConfig,
    path: &Path,
    labels: Option<&Path>,
    baseline: Option<Baseline>,
    prefiltered: bool,
) -> StageResult<()> {
    let mut run = Run::new(out, "segment", cfg)?;
    let trace = read_trace(&mut run, path)?;
    let labels = match labels {
        Some(p) => {
            run.input(p)?;
            Some(io::decode_labels(&fs::read_to_string(p).at(Stage::Input)?).at(Stage::Input)?)
        }
        None => None,
    };
    let set = components(&trace, cfg, prefiltered)?;
    let detected = segment_components(&set, &cfg.seg).at(Stage::Segment)?;
    let rows = match &labels {
        Some(l) => label_detections(&detected, l, cfg.seg.match_tolerance()),
        None => detected.iter().map(|&s| (s, None)).collect(),
    };
    run.write("segments.csv", io::encode_segments(&rows))?;
    if let Some(labels) = &labels {
        let mut table = vec![("default", score(&detected, labels, cfg)?)];
        if baseline.is_some() {
            let b = segment_components_baseline(&set, &cfg.seg).at(Stage::Segment)?;
            table.push(("wikey", score(&b, labels, cfg)?));
        }
        run.write(report::SEGMENTATION_CSV, report::segmentation_csv(&table))?;
    }
    run.finish()
}

fn segment_corpus(out: &Path, cfg: &PipelineConfig, dir: &Path, baseline: Option<Baseline>) -> StageResult<()> {
    let mut run = Run::new(out, "segment", cfg)?;
    let corpus = DirCorpus::open(dir).at(Stage::Input)?;
    for f in corpus.files().collect::<Vec<_>>() {
        run.input(&f)?;
    }
    let result = run_corpus(&corpus, cfg, baseline.is_some())?;
    let mut table = vec![("default", result.score)];
    if let Some(b) = result.baseline {
        table.push(("wikey", b));
    }
    run.write(report::SEGMENTATION_CSV, report::segmentation_csv(&table))?;
    run.finish()
}

fn extract(out: &Path, cfg: &PipelineConfig, path: &Path, segments: &Path, prefiltered: bool) -> StageResult<()> {
    let mut run = Run::new(out, "extract", cfg)?;
    let trace = read_trace(&mut run, path)?;
    run.input(segments)?;
    let rows = io::decode_segments(&fs::read_to_string(segments).at(Stage::Input)?).at(Stage::Input)?;
    let set = components(&trace, cfg, prefiltered)?;
    let mut file = FeatureFile::new(feature_params(cfg, set.n_pairs()).at(Stage::Extract)?);
    for (segment, subject) in rows {
        let feature = segment_feature(&set, segment, file.params.level).at(Stage::Extract)?;
        file.push(FeatureSample {
            subject,
            segment: Some(segment),
            feature,
        })
        .at(Stage::Extract)?;
    }
    run.write_features("features", &file)?;
    run.finish()
}

fn train(out: &Path, cfg: &PipelineConfig, paths: &[PathBuf]) -> StageResult<()> {
    let mut run = Run::new(out, "train", cfg)?;
    let files = paths
        .iter()
        .map(|p| read_features(&mut run, p))
        .collect::<StageResult<Vec<_>>>()?;
    let mut merged = FeatureFile::merge(files).at(Stage::Train)?;
    let before = merged.samples.len();
    merged.samples.retain(|s| s.subject.is_some());
    if merged.samples.len() < before {
        eprintln!("warning: skipped {} unlabeled samples", before - merged.samples.len());
    }
    Gallery::from_features(&merged).at(Stage::Train)?;
    run.write_features("gallery", &merged)?;
    run.finish()
}

fn identify(
    out: &Path,
    cfg: &PipelineConfig,
    gallery: &Path,
    trace: Option<&Path>,
    features: Option<&Path>,
    prefiltered: bool,
) -> StageResult<()> {
    let mut run = Run::new(out, "identify", cfg)?;
    let gallery = Gallery::from_features(&read_features(&mut run, gallery)?).at(Stage::Identify)?;
    let queries: Vec<FeatureSample> = match (trace, features) {
        (Some(path), _) => {
            let trace = read_trace(&mut run, path)?;
            let set = components(&trace, cfg, prefiltered)?;
            let level = gallery.params().level;
            segment_components(&set, &cfg.seg)
                .at(Stage::Segment)?
                .into_iter()
                .map(|segment| {
                    Ok(FeatureSample {
                        subject: None,
                        segment: Some(segment),
                        feature: segment_feature(&set, segment, level)?,
                    })
                })
                .collect::<csi_ident::Result<_>>()
                .at(Stage::Extract)?
        }
        (None, Some(path)) => read_features(&mut run, path)?.samples,
        (None, None) => unreachable!("clap requires --trace or --features"),
    };
    if queries.is_empty() {
        eprintln!("warning: no walking segments detected");
        run.write("identities.csv", "")?;
        return run.finish();
    }
    let mut body = String::from("j_begin,j_end,predicted,neighbors\n");
    for q in &queries {
        let r = knn_classify(&q.feature, &gallery, cfg.eval.k, cfg.eval.band).at(Stage::Identify)?;
        let (b, e) = q.segment.map_or((String::new(), String::new()), |s| {
            (s.j_begin.to_string(), s.j_end.to_string())
        });
        let neighbors: Vec<String> = r.neighbors.iter().map(|(s, d)| format!("{s}:{d}")).collect();
        body.push_str(&format!("{b},{e},{},{}\n", r.predicted, neighbors.join(";")));
    }
    run.write("identities.csv", body)?;
    run.finish()
}

fn evaluate(out: &Path, cfg: &PipelineConfig, corpus: Option<&Path>) -> StageResult<()> {
    let mut run = Run::new(out, "evaluate", cfg)?;
    let source: Box<dyn TraceSource> = match corpus {
        Some(dir) => {
            let c = DirCorpus::open(dir).at(Stage::Input)?;
            for f in c.files().collect::<Vec<_>>() {
                run.input(&f)?;
            }
            Box::new(c)
        }
        None => Box::new(Corpus::new(cfg.synth.clone()).at(Stage::Synth)?),
    };
    let result = run_corpus(source.as_ref(), cfg, true)?;
    let mut table = vec![("default", result.score)];
    table.extend(result.baseline.map(|b| ("wikey", b)));
    run.write(report::SEGMENTATION_CSV, report::segmentation_csv(&table))?;
    run.write_features("features", &result.features)?;
    let eval = evaluate_features(&result.features, cfg)?;
    let names = report::write_report(out, &eval).at(Stage::Output)?;
    run.manifest.outputs.extend(names);
    run.finish()
}
