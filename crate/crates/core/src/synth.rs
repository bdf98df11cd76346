//! Seeded synthetic CSI traces with ground-truth crossing labels.
//!
//! A crossing is modeled as a shadowing dip plus a few amplitude-modulated
//! tones in the 2-8 Hz walking band, projected onto the amplitude streams
//! through per-subject coupling weights. The dip follows a flat-topped
//! envelope whose rise and fall mark the body entering and leaving the
//! line of sight; the tones share that envelope but sag towards a
//! subject-specific point of the crossing. Everything else is a static per-stream baseline, a slow drift,
//! and white Gaussian noise. This is a harness for exercising the pipeline,
//! not a channel model.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{CsiTrace, Segment, SegmentLabel, SubjectId, SUBCARRIERS_PER_PAIR};

/// Envelope level that marks a crossing's labeled boundary.
pub const BOUNDARY_LEVEL: f64 = 0.05;

const DEFAULT_PAIRS: usize = 6;
const TONES: usize = 3;

/// One tone of a subject's gait signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Per-subject crossing signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject: SubjectId,
    /// Mean crossing duration in samples at 1 kHz (boundary to boundary).
    pub duration_mean: f64,
    pub duration_sd: f64,
    /// Length of the envelope's rise and fall as a fraction of the crossing.
    pub ramp: f64,
    /// Where tone activity sags most, as a fraction of the crossing.
    pub skew: f64,
    /// Relative drop of tone activity at `skew`.
    pub valley: f64,
    /// Generalized-Gaussian exponent of the flanks (2 is Gaussian).
    pub flank_shape: f64,
    /// Depth of the LOS shadowing dip relative to the tone amplitudes.
    pub dip_depth: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub tones: Vec<Tone>,
    /// Stream weights of the dip, one per stream.
    pub dip_coupling: Vec<f64>,
    /// Stream weights per tone, `tone_coupling[tone][stream]`.
    pub tone_coupling: Vec<Vec<f64>>,
}

/// Stable 64-bit FNV-1a, used to derive per-subject seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17))
}

/// Raw, unblended signature parameters drawn from one RNG stream.
struct Draw {
    duration_mean: f64,
    ramp: f64,
    skew: f64,
    valley: f64,
    flank_shape: f64,
    dip_depth: f64,
    band_center: f64,
    tone_amps: [f64; TONES],
    tone_phases: [f64; TONES],
    dip_coupling: Vec<f64>,
    tone_coupling: Vec<Vec<f64>>,
}

fn coupling(rng: &mut ChaCha8Rng, n_pairs: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_pairs * SUBCARRIERS_PER_PAIR);
    for _ in 0..n_pairs {
        let gain = rng.random_range(0.5..1.0);
        let cycles = rng.random_range(0.5..2.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        for sc in 0..SUBCARRIERS_PER_PAIR {
            let ripple = 1.0 + 0.3 * (2.0 * PI * cycles * sc as f64 / SUBCARRIERS_PER_PAIR as f64 + phase).cos();
            w.push(gain * ripple);
        }
    }
    w
}

impl Draw {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        Self {
            duration_mean: rng.random_range(900.0..1600.0),
            ramp: rng.random_range(0.14..0.26),
            skew: rng.random_range(0.3..0.7),
            valley: rng.random_range(0.0..0.35),
            flank_shape: rng.random_range(2.0..4.0),
            dip_depth: rng.random_range(3.0..4.0),
            band_center: rng.random_range(2.5..7.5),
            tone_amps: [1.0, rng.random_range(0.45..0.75), rng.random_range(0.2..0.4)],
            tone_phases: std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI)),
            dip_coupling: coupling(rng, DEFAULT_PAIRS),
            tone_coupling: (0..TONES).map(|_| coupling(rng, DEFAULT_PAIRS)).collect(),
        }
    }

    /// Neutral parameters shared by every subject at zero separation.
    fn base(seed: u64) -> Self {
        let mut d = Self::new(&mut rng_for(seed, 0xBA5E));
        d.duration_mean = 1250.0;
        d.ramp = 0.2;
        d.skew = 0.5;
        d.valley = 0.15;
        d.flank_shape = 3.0;
        d.dip_depth = 3.5;
        d.band_center = 5.0;
        d
    }
}

/// Half-width of a subject's oscillation band in Hz.
const BAND_HALF_WIDTH: f64 = 0.5;

/// Deterministic profile for `subject`. `separation` in [0, 1] interpolates
/// every parameter between a shared base and the subject's own draw.
pub fn synth_subject_profile(seed: u64, subject: SubjectId, separation: f64) -> Result<SubjectProfile> {
    if !(0.0..=1.0).contains(&separation) {
        return domain(format!("separation {separation} outside [0, 1]"));
    }
    let base = Draw::base(seed);
    let own = Draw::new(&mut rng_for(seed, fnv1a(subject.as_str().as_bytes())));
    let mix = |b: f64, o: f64| b + separation * (o - b);
    let mix_vec = |b: &[f64], o: &[f64]| b.iter().zip(o).map(|(&b, &o)| mix(b, o)).collect::<Vec<_>>();

    let center = mix(base.band_center, own.band_center);
    let (lo, hi) = (center - BAND_HALF_WIDTH, center + BAND_HALF_WIDTH);
    let tones = (0..TONES)
        .map(|i| Tone {
            freq_hz: lo + (hi - lo) * i as f64 / (TONES - 1) as f64,
            amplitude: mix(base.tone_amps[i], own.tone_amps[i]),
            phase: mix(base.tone_phases[i], own.tone_phases[i]),
        })
        .collect();
    Ok(SubjectProfile {
        subject,
        duration_mean: mix(base.duration_mean, own.duration_mean),
        duration_sd: 120.0,
        ramp: mix(base.ramp, own.ramp),
        skew: mix(base.skew, own.skew),
        valley: mix(base.valley, own.valley),
        flank_shape: mix(base.flank_shape, own.flank_shape),
        dip_depth: mix(base.dip_depth, own.dip_depth),
        band_lo_hz: lo,
        band_hi_hz: hi,
        tones,
        dip_coupling: mix_vec(&base.dip_coupling, &own.dip_coupling),
        tone_coupling: base
            .tone_coupling
            .iter()
            .zip(&own.tone_coupling)
            .map(|(b, o)| mix_vec(b, o))
            .collect(),
    })
}

/// A scheduled crossing: start time in seconds and who walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub start_s: f64,
    pub subject: SubjectId,
}

/// Everything that determines one synthetic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub schedule: Vec<Crossing>,
    /// White-noise standard deviation per stream, before filtering.
    pub noise_sigma: f64,
    pub drift_amplitude: f64,
    pub drift_period_s: f64,
    /// Peak tone amplitude of a crossing on a unit-weight stream.
    pub burst_amplitude: f64,
    /// Per-crossing variability of duration, rhythm, and strength.
    pub jitter: f64,
    /// Minimum spacing between crossing starts, in samples.
    pub min_spacing: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            sample_rate_hz: 1000.0,
            n_tx: 2,
            n_rx: 3,
            schedule: Vec::new(),
            noise_sigma: 0.4,
            drift_amplitude: 0.3,
            drift_period_s: 20.0,
            burst_amplitude: 5.0,
            jitter: 1.0,
            min_spacing: 4000,
            seed: 42,
        }
    }
}

/// Envelope level below which a flank is cut off.
const TAIL_LEVEL: f64 = 1e-4;

/// Shape of one crossing. Index `i` holds time `i - lead` relative to the
/// labeled start; the labeled span is `0..=duration` and the flanks extend
/// beyond it until they fall under [`TAIL_LEVEL`].
struct Envelope {
    lead: usize,
    /// Tone activity; equals [`BOUNDARY_LEVEL`] at both label ends, peaks at 1.
    activity: Vec<f64>,
    /// Shadowing depth in [0, 1]; the flat-topped envelope itself.
    shadow: Vec<f64>,
}

fn envelope(duration: usize, ramp: f64, skew: f64, valley: f64, shape: f64) -> Envelope {
    let d = duration as f64;
    let (c1, c2) = (ramp * d, (1.0 - ramp) * d);
    // Warps [0, 1] so that the sag centered at 1/2 lands at `skew`.
    let warp = 0.5f64.ln() / skew.ln();
    // exp(-0.5 * u^shape) == level at u == flank_extent(level).
    let flank_extent = |level: f64| (2.0 * (1.0 / level).ln()).powf(1.0 / shape);
    let edge = flank_extent(BOUNDARY_LEVEL);
    let (left, right) = (c1 / edge, (d - c2) / edge);
    let tail = flank_extent(TAIL_LEVEL);
    let lead = (tail * left - c1).ceil().max(0.0) as usize;
    let trail = (tail * right - (d - c2)).ceil().max(0.0) as usize;
    let n = lead + duration + trail + 1;
    let mut activity = Vec::with_capacity(n);
    let mut shadow = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 - lead as f64;
        let g = if t < c1 {
            (-0.5 * ((c1 - t) / left).powf(shape)).exp()
        } else if t > c2 {
            (-0.5 * ((t - c2) / right).powf(shape)).exp()
        } else {
            1.0
        };
        let mid = (PI * (t / d).clamp(0.0, 1.0).powf(warp)).sin().powi(2);
        activity.push(g * (1.0 - valley * mid));
        shadow.push(g);
    }
    Envelope { lead, activity, shadow }
}

/// Renders a trace and its labels.
pub fn synth_trace(profiles: &[SubjectProfile], spec: &SynthSpec) -> Result<(CsiTrace, Vec<SegmentLabel>)> {
    let fs = spec.sample_rate_hz;
    if !(fs > 0.0 && spec.duration_s >= 0.0) {
        return domain("sample rate must be positive and duration nonnegative");
    }
    if spec.n_tx * spec.n_rx != DEFAULT_PAIRS {
        return domain(format!(
            "synthetic profiles cover {DEFAULT_PAIRS} antenna pairs, spec asks for {}",
            spec.n_tx * spec.n_rx
        ));
    }
    if !(spec.noise_sigma >= 0.0 && spec.jitter >= 0.0) {
        return domain("noise and jitter must be nonnegative");
    }
    let n_frames = (spec.duration_s * fs).round() as usize;
    let n_streams = DEFAULT_PAIRS * SUBCARRIERS_PER_PAIR;
    let mut rng = rng_for(spec.seed, 0x7ACE);

    // Static environment.
    let baseline: Vec<f64> = (0..n_streams).map(|_| rng.random_range(20.0..30.0)).collect();
    let drift_phase: Vec<f64> = (0..n_streams).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut streams: Vec<Vec<f64>> = (0..n_streams)
        .map(|s| {
            (0..n_frames)
                .map(|t| {
                    let arg = 2.0 * PI * t as f64 / (spec.drift_period_s * fs) + drift_phase[s];
                    baseline[s] + spec.drift_amplitude * arg.sin()
                })
                .collect()
        })
        .collect();

    let mut labels = Vec::with_capacity(spec.schedule.len());
    let mut last_start: Option<usize> = None;
    let scale = fs / 1000.0;
    for crossing in &spec.schedule {
        let profile = profiles
            .iter()
            .find(|p| p.subject == crossing.subject)
            .ok_or_else(|| crate::Error::Domain(format!("no profile for subject {}", crossing.subject)))?;
        let start = (crossing.start_s * fs).round();
        if start < 0.0 {
            return domain(format!("crossing at {} s starts before the trace", crossing.start_s));
        }
        let start = start as usize;

        let j = spec.jitter;
        let normal = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite sd");
        let duration_ms = profile.duration_mean + j * normal(profile.duration_sd).sample(&mut rng);
        let duration = (duration_ms.max(50.0) * scale).round() as usize;
        let ramp = (profile.ramp + j * normal(0.045).sample(&mut rng)).clamp(0.05, 0.45);
        let skew = (profile.skew + j * normal(0.06).sample(&mut rng)).clamp(0.2, 0.8);
        let valley = (profile.valley + j * normal(0.09).sample(&mut rng)).clamp(0.0, 0.9);
        let strength = 1.0 + j * normal(0.18).sample(&mut rng);
        let rate = 1.0 + j * normal(0.045).sample(&mut rng);
        let phase_shift: Vec<f64> = (0..TONES).map(|_| j * normal(0.6).sample(&mut rng)).collect();

        if let Some(prev) = last_start {
            if start < prev + spec.min_spacing {
                return domain(format!("crossing at sample {start} overlaps the one at {prev}"));
            }
        }
        if let Some(prev) = labels.last().map(|l: &SegmentLabel| l.segment.j_end) {
            if start <= prev {
                return domain(format!("crossing at sample {start} overlaps one ending at {prev}"));
            }
        }
        if start + duration >= n_frames {
            return domain(format!(
                "crossing [{start}, {}) runs past the trace end {n_frames}",
                start + duration
            ));
        }
        last_start = Some(start);

        let env = envelope(duration, ramp, skew, valley, profile.flank_shape);
        let amp = spec.burst_amplitude * strength;
        let dip: Vec<f64> = env.shadow.iter().map(|s| -amp * profile.dip_depth * s).collect();
        let tones: Vec<Vec<f64>> = profile
            .tones
            .iter()
            .zip(&phase_shift)
            .map(|(tone, dphi)| {
                let w = 2.0 * PI * tone.freq_hz * rate / fs;
                env.activity
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let t = i as f64 - env.lead as f64;
                        amp * tone.amplitude * e * (w * t + tone.phase + dphi).sin()
                    })
                    .collect()
            })
            .collect();
        // Flanks beyond the trace are clipped.
        let first = start.saturating_sub(env.lead);
        let last = (start + dip.len() - env.lead).min(n_frames);
        for (s, stream) in streams.iter_mut().enumerate() {
            for (frame, v) in stream.iter_mut().enumerate().take(last).skip(first) {
                let i = frame + env.lead - start;
                let mut x = profile.dip_coupling[s] * dip[i];
                for (k, tone) in tones.iter().enumerate() {
                    x += profile.tone_coupling[k][s] * tone[i];
                }
                *v += x;
            }
        }
        labels.push(SegmentLabel {
            segment: Segment::new(start, start + duration)?,
            subject: profile.subject.clone(),
        });
    }

    let mut data = vec![0.0f32; n_frames * n_streams];
    for (s, stream) in streams.iter().enumerate() {
        for (t, v) in stream.iter().enumerate() {
            let noisy = v + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            data[t * n_streams + s] = noisy.max(0.0) as f32;
        }
    }
    let trace = CsiTrace::new(fs, spec.n_tx, spec.n_rx, SUBCARRIERS_PER_PAIR, data)?;
    Ok((trace, labels))
}

/// A labeled corpus of single-crossing traces, one subject per trace in
/// round-robin order. Trace `i` depends only on the seed and `i`, so a
/// shorter corpus is a prefix of a longer one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub subjects: usize,
    pub separation: f64,
    pub traces: usize,
    /// Quiet time before and after each crossing: `margin_s` plus
    /// `margin_ratio` times the subject's mean crossing duration.
    pub margin_s: f64,
    pub margin_ratio: f64,
    /// Random extra quiet time added to each margin, uniform in [0, this).
    pub margin_jitter_s: f64,
    /// Template for every trace; its duration, schedule, and seed are replaced.
    pub trace: SynthSpec,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            subjects: 6,
            separation: 0.7,
            traces: 240,
            margin_s: 0.75,
            margin_ratio: 0.5,
            margin_jitter_s: 0.05,
            trace: SynthSpec::default(),
        }
    }
}

/// Deterministic generator over a [`CorpusSpec`]; traces render on demand.
#[derive(Debug, Clone)]
pub struct Corpus {
    spec: CorpusSpec,
    profiles: Vec<SubjectProfile>,
}

impl Corpus {
    pub fn new(spec: CorpusSpec) -> Result<Self> {
        if spec.subjects == 0 {
            return domain("corpus needs at least one subject");
        }
        let width = spec.subjects.to_string().len().max(2);
        let profiles = (1..=spec.subjects)
            .map(|i| synth_subject_profile(spec.seed, SubjectId::new(format!("s{i:0width$}"))?, spec.separation))
            .collect::<Result<_>>()?;
        Ok(Self { spec, profiles })
    }

    pub fn spec(&self) -> &CorpusSpec {
        &self.spec
    }

    pub fn profiles(&self) -> &[SubjectProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.spec.traces
    }

    pub fn is_empty(&self) -> bool {
        self.spec.traces == 0
    }

    /// The spec of trace `index`: one crossing framed by seeded random
    /// quiet margins.
    pub fn trace_spec(&self, index: usize) -> SynthSpec {
        let mut rng = rng_for(self.spec.seed, 0xC0_0000 + index as u64);
        let profile = &self.profiles[index % self.profiles.len()];
        let crossing_s = profile.duration_mean / 1000.0;
        let base = self.spec.margin_s + self.spec.margin_ratio * crossing_s;
        let mut margin = || base + self.spec.margin_jitter_s * rng.random::<f64>();
        let (lead, tail) = (margin(), margin());
        let mut spec = self.spec.trace.clone();
        spec.duration_s = lead + crossing_s + tail;
        spec.schedule = vec![Crossing {
            start_s: lead,
            subject: profile.subject.clone(),
        }];
        spec.seed = rng.random();
        spec
    }

    pub fn trace(&self, index: usize) -> Result<(CsiTrace, Vec<SegmentLabel>)> {
        synth_trace(&self.profiles, &self.trace_spec(index))
    }
}
