use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csi_ident::classifier::{knn_classify, Gallery};
use csi_ident::features::FeatureFile;
use csi_ident::io;
use csi_ident::model::CsiTrace;
use csi_ident::pipeline::DirCorpus;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csi-ident"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn features(path: &Path) -> FeatureFile {
    FeatureFile::decode(
        &fs::read_to_string(path).unwrap(),
        &fs::read_to_string(path.with_extension("json")).unwrap(),
    )
    .unwrap()
}

fn max_abs_diff(a: &FeatureFile, b: &FeatureFile) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.samples.iter().zip(&b.samples) {
        for (u, v) in x.feature.series().zip(y.feature.series()) {
            assert_eq!(u.len(), v.len());
            worst = u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(worst, f64::max);
        }
    }
    worst
}

#[test]
fn separate_steps_match_fused_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let corpus = root.join("corpus");
    let sets = [
        "--set",
        "synth.traces=18",
        "--set",
        "eval.train=1",
        "--set",
        "eval.train_sizes=1",
        "--set",
        "knn.k=1",
    ];
    let with = |extra: &[&str]| -> Vec<String> { extra.iter().chain(&sets).map(|a| a.to_string()).collect() };
    let run = |extra: &[&str]| {
        let args = with(extra);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };

    run(&["synth", "--corpus", "--out", s(&corpus)]);
    let fused_dir = root.join("fused");
    run(&["evaluate", "--corpus", s(&corpus), "--out", s(&fused_dir)]);
    let fused = features(&fused_dir.join("features.csv"));
    assert!(fused_dir.join("accuracy_vs_subjects.svg").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fused_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 37);

    let dir = DirCorpus::open(&corpus).unwrap();
    let mut parts: Vec<PathBuf> = Vec::new();
    for (i, entry) in dir.manifest().entries.iter().enumerate() {
        let step = root.join(format!("t{i}"));
        let (f, sg, x) = (step.join("f"), step.join("s"), step.join("x"));
        run(&["filter", "--trace", s(&corpus.join(&entry.trace)), "--out", s(&f)]);
        let filtered = f.join("filtered.csit");
        run(&[
            "segment",
            "--trace",
            s(&filtered),
            "--prefiltered",
            "--labels",
            s(&corpus.join(&entry.labels)),
            "--out",
            s(&sg),
        ]);
        run(&[
            "extract",
            "--trace",
            s(&filtered),
            "--prefiltered",
            "--segments",
            s(&sg.join("segments.csv")),
            "--out",
            s(&x),
        ]);
        parts.push(x.join("features.csv"));
    }

    // Labeled samples of the separate runs, in corpus order, equal the fused ones.
    let mut separate = FeatureFile::merge(parts.iter().map(|p| features(p))).unwrap();
    separate.samples.retain(|s| s.subject.is_some());
    assert_eq!(separate.params, fused.params);
    assert_eq!(separate.samples.len(), fused.samples.len());
    for (a, b) in separate.samples.iter().zip(&fused.samples) {
        assert_eq!((&a.subject, a.segment), (&b.subject, b.segment));
    }
    assert!(max_abs_diff(&separate, &fused) <= 1e-9);

    // Train on the first 12 traces, identify the rest, and compare with the library.
    let gallery_dir = root.join("gallery");
    let mut train_args = vec!["train".to_string(), "--features".to_string()];
    train_args.extend(parts[..12].iter().map(|p| s(p).to_string()));
    train_args.extend(["--out".to_string(), s(&gallery_dir).to_string()]);
    run(&train_args.iter().map(String::as_str).collect::<Vec<_>>());
    let gallery_file = gallery_dir.join("gallery.csv");

    let train_count: usize = parts[..12]
        .iter()
        .map(|p| features(p).samples.iter().filter(|s| s.subject.is_some()).count())
        .sum();
    let mut lib_train = fused.clone();
    lib_train.samples.truncate(train_count);
    let lib_gallery = Gallery::from_features(&lib_train).unwrap();

    let mut probe_index = train_count;
    for (i, part) in parts.iter().enumerate().skip(12) {
        let out_dir = root.join(format!("id{i}"));
        run(&[
            "identify",
            "--gallery",
            s(&gallery_file),
            "--features",
            s(part),
            "--out",
            s(&out_dir),
        ]);
        let body = fs::read_to_string(out_dir.join("identities.csv")).unwrap();
        let probes: Vec<_> = features(part)
            .samples
            .into_iter()
            .filter(|s| s.subject.is_some())
            .collect();
        let rows: Vec<&str> = body.lines().skip(1).collect();
        let labeled_rows: Vec<&str> = rows
            .iter()
            .copied()
            .filter(|r| {
                probes.iter().any(|p| {
                    let seg = p.segment.unwrap();
                    r.starts_with(&format!("{},{},", seg.j_begin, seg.j_end))
                })
            })
            .collect();
        assert_eq!(labeled_rows.len(), probes.len());
        for row in labeled_rows {
            let fused_probe = &fused.samples[probe_index];
            probe_index += 1;
            let want = knn_classify(&fused_probe.feature, &lib_gallery, 1, None).unwrap();
            let f: Vec<&str> = row.split(',').collect();
            assert_eq!(f[2], want.predicted.as_str());
            let (who, dist) = f[3].split_once(':').unwrap();
            assert_eq!(who, want.neighbors[0].0.as_str());
            assert!((dist.parse::<f64>().unwrap() - want.neighbors[0].1).abs() <= 1e-9);
        }
    }
    assert_eq!(probe_index, fused.samples.len());
}

#[test]
fn identify_without_segments_writes_empty_result() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    ok(&[
        "synth",
        "--set",
        "synth.traces=12",
        "--corpus",
        "--out",
        s(&root.join("c")),
    ]);
    let parts: Vec<String> = (0..12)
        .map(|i| {
            let x = root.join(format!("x{i}"));
            let c = root.join("c");
            let trace = c.join(format!("trace_{i:04}.csit"));
            let sg = root.join(format!("s{i}"));
            ok(&[
                "segment",
                "--trace",
                s(&trace),
                "--labels",
                s(&c.join(format!("trace_{i:04}.labels.csv"))),
                "--out",
                s(&sg),
            ]);
            ok(&[
                "extract",
                "--trace",
                s(&trace),
                "--segments",
                s(&sg.join("segments.csv")),
                "--out",
                s(&x),
            ]);
            s(&x.join("features.csv")).to_string()
        })
        .collect();
    let mut args = vec!["train", "--features"];
    args.extend(parts.iter().map(String::as_str));
    let g = root.join("g");
    args.extend(["--out", s(&g)]);
    ok(&args);

    // A flat trace has nothing to segment.
    let quiet = CsiTrace::new(1000.0, 2, 3, 30, vec![25.0; 4000 * 180]).unwrap();
    let quiet_path = root.join("quiet.csit");
    fs::write(&quiet_path, io::encode_trace(&quiet)).unwrap();
    let out_dir = root.join("id");
    let out = ok(&[
        "identify",
        "--gallery",
        s(&g.join("gallery.csv")),
        "--trace",
        s(&quiet_path),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(fs::read(out_dir.join("identities.csv")).unwrap(), b"");
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(out_dir.join("manifest.json").is_file());
}

#[test]
fn corpus_segmentation_reports_both_segmenters() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("c");
    ok(&["synth", "--set", "synth.traces=6", "--corpus", "--out", s(&c)]);
    let out = tmp.path().join("seg");
    ok(&["segment", "--corpus", s(&c), "--baseline", "wikey", "--out", s(&out)]);
    let table = fs::read_to_string(out.join("segmentation.csv")).unwrap();
    let methods: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["default", "wikey"]);
}

#[test]
fn errors_are_json_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csit");
    let out = bin(&["filter", "--trace", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["stage"], "input");
    assert_eq!(v["error"]["kind"], "io");

    let out = bin(&["--set", "knn.k=0", "--print-config"]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["stage"], "config");
    assert_eq!(v["error"]["key"], "knn.k");

    let bad = tmp.path().join("bad.csit");
    fs::write(&bad, b"CSIT garbage").unwrap();
    let out = bin(&["filter", "--trace", s(&bad), "--out", s(&tmp.path().join("o"))]);
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v["error"]["offset"].is_u64());
}

#[test]
fn printed_config_round_trips_through_file() {
    let tmp = tempfile::tempdir().unwrap();
    let first = ok(&["--set", "seg.window=400", "--set", "dtw.band=8", "--print-config"]);
    let path = tmp.path().join("cfg.txt");
    fs::write(&path, &first.stdout).unwrap();
    let second = ok(&["--config", s(&path), "--print-config"]);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("seg.window = 400\n") && text.contains("dtw.band = 8\n"));
    // Flags override the file.
    let third = ok(&["--config", s(&path), "--set", "seg.window=300", "--print-config"]);
    assert!(String::from_utf8(third.stdout).unwrap().contains("seg.window = 300\n"));
}
