//! Butterworth low-pass denoising of CSI amplitude streams.
//!
//! The digital filter comes from the analog Butterworth prototype through
//! the bilinear transform with the cutoff pre-warped, so the -3 dB point
//! lands exactly on the requested normalized frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::model::CsiTrace;

/// Normalized cutoff (rad/sample) and order of a low-pass design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    cutoff_rad_per_sample: f64,
    order: usize,
}

impl FilterSpec {
    pub fn new(cutoff_rad_per_sample: f64, order: usize) -> Result<Self> {
        if !(cutoff_rad_per_sample > 0.0 && cutoff_rad_per_sample < PI) {
            return domain(format!("cutoff {cutoff_rad_per_sample} rad/sample must lie in (0, pi)"));
        }
        if order == 0 {
            return domain("filter order must be at least 1");
        }
        Ok(Self {
            cutoff_rad_per_sample,
            order,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff_rad_per_sample
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// Transfer-function coefficients `B(z)/A(z)` with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl FilterCoefficients {
    /// Complex frequency response at `w` rad/sample.
    pub fn response(&self, w: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -w);
        let eval = |c: &[f64]| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z_inv + v);
        eval(&self.b) / eval(&self.a)
    }

    pub fn magnitude(&self, w: f64) -> f64 {
        self.response(w).norm()
    }

    /// Schur-Cohn step-down test: true iff every root of `A(z)` lies
    /// strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        let mut a: Vec<f64> = self.a.iter().map(|v| v / self.a[0]).collect();
        while a.len() > 1 {
            let m = a.len() - 1;
            let k = a[m];
            if k.abs() >= 1.0 {
                return false;
            }
            let denom = 1.0 - k * k;
            a = (0..m).map(|i| (a[i] - k * a[m - i]) / denom).collect();
        }
        true
    }
}

/// Converts a cutoff in Hz to rad/sample, `2 pi f / fs`.
pub fn cutoff_from_hz(f_hz: f64, fs_hz: f64) -> Result<f64> {
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return domain(format!("sample rate {fs_hz} must be positive"));
    }
    if !(f_hz > 0.0 && f_hz < fs_hz / 2.0) {
        return domain(format!(
            "cutoff {f_hz} Hz must lie in (0, {}) for fs = {fs_hz} Hz",
            fs_hz / 2.0
        ));
    }
    Ok(2.0 * PI * f_hz / fs_hz)
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

/// Designs a digital Butterworth low-pass filter.
pub fn design_lowpass(spec: FilterSpec) -> FilterCoefficients {
    let n = spec.order;
    // Bilinear map s = (z - 1) / (z + 1), so the analog edge is tan(w_c / 2).
    let warped = (spec.cutoff_rad_per_sample / 2.0).tan();
    let poles: Vec<Complex64> = (1..=n)
        .map(|k| {
            let theta = PI * (2 * k + n - 1) as f64 / (2 * n) as f64;
            let s = Complex64::from_polar(warped, theta);
            (1.0 + s) / (1.0 - s)
        })
        .collect();
    let zeros = vec![Complex64::new(-1.0, 0.0); n];

    let a: Vec<f64> = poly_from_roots(&poles).iter().map(|c| c.re).collect();
    // Unit DC gain: K * 2^n / prod(1 - p) = 1. Summing the coefficients
    // instead would cancel badly at low cutoffs.
    let k = poles.iter().map(|p| 1.0 - p).product::<Complex64>().re / 2f64.powi(n as i32);
    let b = poly_from_roots(&zeros).iter().map(|c| c.re * k).collect();
    FilterCoefficients { b, a }
}

fn check_finite(series: &[f64]) -> Result<()> {
    match series.iter().position(|v| !v.is_finite()) {
        Some(i) => domain(format!("non-finite sample {} at index {i}", series[i])),
        None => Ok(()),
    }
}

/// Causal single-pass filtering from a zero initial state
/// (direct form II transposed).
pub fn apply_filter(coeffs: &FilterCoefficients, series: &[f64]) -> Result<Vec<f64>> {
    check_finite(series)?;
    Ok(run_df2t(coeffs, series.iter().copied()))
}

fn run_df2t(coeffs: &FilterCoefficients, input: impl Iterator<Item = f64>) -> Vec<f64> {
    let a0 = coeffs.a[0];
    let order = coeffs.a.len().max(coeffs.b.len()) - 1;
    let b: Vec<f64> = (0..=order)
        .map(|i| coeffs.b.get(i).copied().unwrap_or(0.0) / a0)
        .collect();
    let a: Vec<f64> = (0..=order)
        .map(|i| coeffs.a.get(i).copied().unwrap_or(0.0) / a0)
        .collect();
    let mut state = vec![0.0; order + 1];
    input
        .map(|x| {
            let y = b[0] * x + state[0];
            for i in 0..order {
                state[i] = b[i + 1] * x - a[i + 1] * y + state[i + 1];
            }
            y
        })
        .collect()
}

/// Forward-backward filtering: zero phase, squared magnitude response.
pub fn apply_filter_zero_phase(coeffs: &FilterCoefficients, series: &[f64]) -> Result<Vec<f64>> {
    check_finite(series)?;
    let forward = run_df2t(coeffs, series.iter().copied());
    let mut backward = run_df2t(coeffs, forward.iter().rev().copied());
    backward.reverse();
    Ok(backward)
}

/// Filter settings (`filter.*` config keys).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub order: usize,
    pub cutoff_hz: f64,
    pub zero_phase: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            order: 4,
            cutoff_hz: 10.0,
            zero_phase: false,
        }
    }
}

/// Filters every stream of a trace independently.
///
/// Each stream is filtered relative to its first sample, which is the
/// zero-state response started from steady state at that level. Without
/// the offset the DC step from zero to the baseline amplitude rings for
/// hundreds of samples and swamps every later stage.
pub fn filter_trace(trace: &CsiTrace, config: &FilterConfig) -> Result<CsiTrace> {
    let spec = FilterSpec::new(cutoff_from_hz(config.cutoff_hz, trace.sample_rate_hz())?, config.order)?;
    let coeffs = design_lowpass(spec);
    // High orders at low cutoffs round the direct-form poles onto or past the unit circle.
    if !coeffs.is_stable() {
        return domain(format!(
            "order {} at {} Hz is numerically unstable in direct form",
            config.order, config.cutoff_hz
        ));
    }
    let streams: Vec<Vec<f64>> = (0..trace.n_streams())
        .into_par_iter()
        .map(|s| {
            let mut series = trace.stream(s);
            let offset = series.first().copied().unwrap_or(0.0);
            series.iter_mut().for_each(|v| *v -= offset);
            let mut out = if config.zero_phase {
                apply_filter_zero_phase(&coeffs, &series)?
            } else {
                apply_filter(&coeffs, &series)?
            };
            out.iter_mut().for_each(|v| *v += offset);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    trace.from_streams(&streams)
}
