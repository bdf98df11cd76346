//! Trace and label file formats.
//!
//! Binary trace layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CSIT"
//! 4       2     version (u16, currently 1)
//! 6       8     sample rate in Hz (f64)
//! 14      4     n_tx (u32)
//! 18      4     n_rx (u32)
//! 22      4     n_subcarriers (u32)
//! 26      4     n_frames (u32)
//! 30      ...   frames as f32, pair-major then subcarrier-minor
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{parse_err, Error, Result};
use crate::model::{CsiTrace, Segment, SegmentLabel, SubjectId};

pub const TRACE_MAGIC: &[u8; 4] = b"CSIT";
pub const TRACE_VERSION: u16 = 1;
pub const TRACE_HEADER_LEN: usize = 30;

pub const TRACE_CSV_HEADER: &str = "t,pair,subcarrier,amplitude";
pub const LABEL_CSV_HEADER: &str = "j_begin,j_end,subject";

/// Serializes a trace to the binary format.
pub fn encode_trace(trace: &CsiTrace) -> Vec<u8> {
    let mut out = Vec::with_capacity(TRACE_HEADER_LEN + 4 * trace.as_slice().len());
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.extend_from_slice(&trace.sample_rate_hz().to_le_bytes());
    for v in [trace.n_tx(), trace.n_rx(), trace.n_subcarriers(), trace.n_frames()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in trace.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_trace<W: Write>(mut writer: W, trace: &CsiTrace) -> Result<()> {
    writer.write_all(&encode_trace(trace))?;
    Ok(())
}

pub fn read_trace<R: Read>(mut reader: R) -> Result<CsiTrace> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_trace(&bytes)
}

fn u32_at(bytes: &[u8], offset: usize) -> usize {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize
}

/// Parses the binary format, reporting the byte offset of the first defect.
pub fn decode_trace(bytes: &[u8]) -> Result<CsiTrace> {
    if bytes.len() < TRACE_HEADER_LEN {
        return Err(parse_err(
            bytes.len(),
            format!("header needs {TRACE_HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != TRACE_MAGIC {
        return Err(parse_err(0, "bad magic, expected CSIT"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TRACE_VERSION {
        return Err(parse_err(4, format!("unsupported version {version}")));
    }
    let fs = f64::from_le_bytes(bytes[6..14].try_into().unwrap());
    if !(fs.is_finite() && fs > 0.0) {
        return Err(parse_err(6, format!("sample rate {fs} is not positive")));
    }
    let n_tx = u32_at(bytes, 14);
    let n_rx = u32_at(bytes, 18);
    let n_sub = u32_at(bytes, 22);
    let n_frames = u32_at(bytes, 26);
    for (offset, v, name) in [(14, n_tx, "n_tx"), (18, n_rx, "n_rx"), (22, n_sub, "n_subcarriers")] {
        if v == 0 {
            return Err(parse_err(offset, format!("{name} must be positive")));
        }
    }

    let frame_bytes = 4 * n_tx * n_rx * n_sub;
    let body = &bytes[TRACE_HEADER_LEN..];
    let expected = frame_bytes * n_frames;
    if body.len() < expected {
        let complete = body.len() / frame_bytes;
        return Err(parse_err(
            TRACE_HEADER_LEN + complete * frame_bytes,
            format!("body truncated in frame {complete} of {n_frames}"),
        ));
    }
    if body.len() > expected {
        return Err(parse_err(
            TRACE_HEADER_LEN + expected,
            format!("{} trailing bytes after {n_frames} frames", body.len() - expected),
        ));
    }

    let mut data = Vec::with_capacity(expected / 4);
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() || v < 0.0 {
            return Err(parse_err(
                TRACE_HEADER_LEN + 4 * i,
                format!("amplitude {v} is not finite and nonnegative"),
            ));
        }
        data.push(v);
    }
    CsiTrace::new(fs, n_tx, n_rx, n_sub, data).map_err(|e| parse_err(0, e.to_string()))
}

/// Human-readable export: one `t,pair,subcarrier,amplitude` row per sample,
/// `t` being the frame index.
pub fn encode_trace_csv(trace: &CsiTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for t in 0..trace.n_frames() {
        for pair in 0..trace.n_pairs() {
            for sc in 0..trace.n_subcarriers() {
                let _ = writeln!(out, "{t},{pair},{sc},{}", trace.amplitude(t, pair, sc));
            }
        }
    }
    out
}

/// Parses the CSV export. The CSV carries no header metadata, so the caller
/// supplies the sample rate and antenna geometry; rows must appear in the
/// order [`encode_trace_csv`] writes them.
pub fn decode_trace_csv(text: &str, sample_rate_hz: f64, n_tx: usize, n_rx: usize) -> Result<CsiTrace> {
    let mut lines = LineCursor::new(text);
    let (offset, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
    if header.trim() != TRACE_CSV_HEADER {
        return Err(parse_err(offset, format!("expected header `{TRACE_CSV_HEADER}`")));
    }
    let n_pairs = n_tx * n_rx;
    let mut rows: Vec<(usize, usize, usize, usize, f32)> = Vec::new();
    for (offset, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(offset, format!("expected 4 fields, found {}", fields.len())));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| parse_err(offset, e.to_string()));
        let amp: f32 = fields[3]
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse_err(offset, e.to_string()))?;
        rows.push((offset, idx(fields[0])?, idx(fields[1])?, idx(fields[2])?, amp));
    }
    let n_sub = rows
        .iter()
        .map(|r| r.3 + 1)
        .max()
        .unwrap_or(crate::model::SUBCARRIERS_PER_PAIR);
    let per_frame = n_pairs * n_sub;
    let mut data = Vec::with_capacity(rows.len());
    for (i, &(offset, t, pair, sc, amp)) in rows.iter().enumerate() {
        if (t, pair, sc) != (i / per_frame, (i % per_frame) / n_sub, i % n_sub) {
            return Err(parse_err(offset, format!("row ({t},{pair},{sc}) out of order")));
        }
        if !amp.is_finite() || amp < 0.0 {
            return Err(parse_err(
                offset,
                format!("amplitude {amp} is not finite and nonnegative"),
            ));
        }
        data.push(amp);
    }
    if data.len() % per_frame != 0 {
        return Err(parse_err(text.len(), "last frame is incomplete"));
    }
    CsiTrace::new(sample_rate_hz, n_tx, n_rx, n_sub, data)
}

/// Writes `j_begin,j_end,subject` rows; `None` subjects become empty fields.
pub fn encode_segments(rows: &[(Segment, Option<SubjectId>)]) -> String {
    let mut out = String::from(LABEL_CSV_HEADER);
    out.push('\n');
    for (seg, subject) in rows {
        let name = subject.as_ref().map_or("", SubjectId::as_str);
        let _ = writeln!(out, "{},{},{}", seg.j_begin, seg.j_end, name);
    }
    out
}

pub fn encode_labels(labels: &[SegmentLabel]) -> String {
    let rows: Vec<_> = labels.iter().map(|l| (l.segment, Some(l.subject.clone()))).collect();
    encode_segments(&rows)
}

/// Reads a segment CSV. Accepts `j_begin,j_end` or `j_begin,j_end,subject`.
pub fn decode_segments(text: &str) -> Result<Vec<(Segment, Option<SubjectId>)>> {
    let mut lines = LineCursor::new(text);
    let (offset, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
    let header = header.trim();
    if header != LABEL_CSV_HEADER && header != "j_begin,j_end" {
        return Err(parse_err(offset, format!("expected header `{LABEL_CSV_HEADER}`")));
    }
    let mut out = Vec::new();
    for (offset, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(
                offset,
                format!("expected 2 or 3 fields, found {}", fields.len()),
            ));
        }
        let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| parse_err(offset, e.to_string()));
        let segment = Segment::new(idx(fields[0])?, idx(fields[1])?).map_err(|e| parse_err(offset, e.to_string()))?;
        let subject = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(SubjectId::new(s).map_err(|e| parse_err(offset, e.to_string()))?),
        };
        out.push((segment, subject));
    }
    Ok(out)
}

/// Reads a label sidecar where every row must name a subject.
pub fn decode_labels(text: &str) -> Result<Vec<SegmentLabel>> {
    decode_segments(text)?
        .into_iter()
        .map(|(segment, subject)| {
            subject
                .map(|subject| SegmentLabel { segment, subject })
                .ok_or_else(|| Error::Domain(format!("label [{}, {}) has no subject", segment.j_begin, segment.j_end)))
        })
        .collect()
}

/// Iterates lines together with their starting byte offset.
pub(crate) struct LineCursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }
}

impl<'a> Iterator for LineCursor<'a> {
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.text.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some((start, line.trim_end_matches('\r')))
    }
}
