//! Report tables and SVG line charts for evaluation runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classifier::{ConfusionMatrix, EvalReport};
use crate::error::Result;
use crate::segmentation::SegmentationScore;

pub const SUBJECTS_CSV: &str = "accuracy_vs_subjects.csv";
pub const TRAINSIZE_CSV: &str = "accuracy_vs_trainsize.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const SEGMENTATION_CSV: &str = "segmentation.csv";
pub const SUBJECTS_SVG: &str = "accuracy_vs_subjects.svg";
pub const TRAINSIZE_SVG: &str = "accuracy_vs_trainsize.svg";

pub fn subjects_csv(report: &EvalReport) -> String {
    let mut out = String::from("n_subjects,subsets,probes,mean_accuracy,min_accuracy,max_accuracy\n");
    for r in &report.by_subjects {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.n_subjects, r.subsets, r.probes, r.mean_accuracy, r.min_accuracy, r.max_accuracy
        );
    }
    out
}

pub fn trainsize_csv(report: &EvalReport) -> String {
    let mut out = String::from("train_per_subject,repeats,probes,accuracy\n");
    for r in &report.by_train_size {
        let _ = writeln!(
            out,
            "{},{},{},{:.6}",
            r.train_per_subject, r.repeats, r.probes, r.accuracy
        );
    }
    out
}

/// Rows are true subjects, columns predictions.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\predicted");
    for l in &m.labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (l, row) in m.labels.iter().zip(&m.counts) {
        out.push_str(l.as_str());
        for c in row {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

/// One row per segmenter: `method,n_truth,n_detected,n_correct,n_false,dr,er`.
pub fn segmentation_csv(rows: &[(&str, SegmentationScore)]) -> String {
    let mut out = String::from("method,n_truth,n_detected,n_correct,n_false,dr,er\n");
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{:.6},{:.6}",
            s.n_truth,
            s.n_detected,
            s.n_correct,
            s.n_false,
            s.detection_ratio(),
            s.error_ratio()
        );
    }
    out
}

/// A named polyline of `(x, y)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 560.0;
const H: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Line chart with x ticks at every distinct x value and y fixed to `[y0, y1]`.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], y_range: (f64, f64)) -> String {
    let mut xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (x0, x1) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 1.0, a + 1.0),
        _ => (0.0, 1.0),
    };
    let (y0, y1) = y_range;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let v = y0 + (y1 - y0) * i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    for &x in &xs {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + ph + 18.0,
            fmt_tick(x)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    if !series.is_empty() {
        let h = 16.0 * series.len() as f64 + 8.0;
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="100" height="{h:.1}" fill="white" stroke="#999"/>"##,
            LEFT + pw - 118.0,
            TOP + ph - 6.0 - h
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = TOP + ph - 10.0 - 16.0 * (series.len() - 1 - i) as f64;
        let lx = LEFT + pw - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            ly,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn subjects_svg(report: &EvalReport) -> String {
    let pick = |f: fn(&crate::classifier::SubjectSweepRow) -> f64| -> Vec<(f64, f64)> {
        report.by_subjects.iter().map(|r| (r.n_subjects as f64, f(r))).collect()
    };
    let series = [
        Series {
            name: "mean".into(),
            points: pick(|r| r.mean_accuracy),
        },
        Series {
            name: "min".into(),
            points: pick(|r| r.min_accuracy),
        },
        Series {
            name: "max".into(),
            points: pick(|r| r.max_accuracy),
        },
    ];
    line_chart_svg(
        "Accuracy vs. number of subjects",
        "subjects",
        "accuracy",
        &series,
        (0.0, 1.0),
    )
}

pub fn trainsize_svg(report: &EvalReport) -> String {
    let series = [Series {
        name: "accuracy".into(),
        points: report
            .by_train_size
            .iter()
            .map(|r| (r.train_per_subject as f64, r.accuracy))
            .collect(),
    }];
    line_chart_svg(
        "Accuracy vs. training samples per subject",
        "training samples",
        "accuracy",
        &series,
        (0.0, 1.0),
    )
}

/// Writes the evaluation tables and charts into `dir`, returning the file names.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let files = [
        (SUBJECTS_CSV, subjects_csv(report)),
        (TRAINSIZE_CSV, trainsize_csv(report)),
        (CONFUSION_CSV, confusion_csv(&report.confusion)),
        (SUBJECTS_SVG, subjects_svg(report)),
        (TRAINSIZE_SVG, trainsize_svg(report)),
    ];
    for (name, body) in &files {
        fs::write(dir.join(name), body)?;
    }
    Ok(files.iter().map(|f| f.0.to_string()).collect())
}
