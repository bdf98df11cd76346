//! Daubechies D4 analysis filter bank with half-sample symmetric extension.

use std::sync::Once;

/// D4 low-pass taps: `(1 + sqrt 3, 3 + sqrt 3, 3 - sqrt 3, 1 - sqrt 3) / (4 sqrt 2)`.
pub const D4_LOWPASS: [f64; 4] = [
    0.482_962_913_144_534_16,
    0.836_516_303_737_807_9,
    0.224_143_868_042_013_4,
    -0.129_409_522_551_260_37,
];

/// Quadrature-mirror high-pass taps, `g[j] = (-1)^j h[3 - j]`.
pub const D4_HIGHPASS: [f64; 4] = [D4_LOWPASS[3], -D4_LOWPASS[2], D4_LOWPASS[1], -D4_LOWPASS[0]];

static FILTER_CHECK: Once = Once::new();

fn check_filter_bank() {
    FILTER_CHECK.call_once(|| {
        let norm: f64 = D4_LOWPASS.iter().map(|h| h * h).sum();
        assert!((norm - 1.0).abs() < 1e-14, "D4 taps are not unit norm: {norm}");
        let sum: f64 = D4_LOWPASS.iter().sum();
        assert!(
            (sum - std::f64::consts::SQRT_2).abs() < 1e-14,
            "D4 taps do not sum to sqrt 2: {sum}"
        );
    });
}

/// Half-sample symmetric extension: `x[-1] = x[0]`, `x[n] = x[n-1]`.
pub fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Coefficient count after one analysis level.
pub fn level_len(n: usize) -> usize {
    (n + 3) / 2
}

/// Coefficient count after `levels` analysis levels.
pub fn approx_len(n: usize, levels: usize) -> usize {
    (0..levels).fold(n, |len, _| level_len(len))
}

/// One analysis level: returns `(approximation, detail)`.
///
/// Coefficient `o` is `sum_j h[j] x[2o + 1 - j]` over the symmetric extension.
pub fn analysis_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    check_filter_bank();
    let n = x.len();
    assert!(n > 0, "cannot transform an empty signal");
    let out_len = level_len(n);
    let mut approx = Vec::with_capacity(out_len);
    let mut detail = Vec::with_capacity(out_len);
    for o in 0..out_len {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..4 {
            let v = x[symmetric_index(2 * o as isize + 1 - j as isize, n)];
            a += D4_LOWPASS[j] * v;
            d += D4_HIGHPASS[j] * v;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// Approximation coefficients after `levels` analysis steps.
pub fn approximation(x: &[f64], levels: usize) -> Vec<f64> {
    (0..levels).fold(x.to_vec(), |cur, _| analysis_step(&cur).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn taps_match_closed_form() {
        let s3 = 3f64.sqrt();
        let d = 4.0 * std::f64::consts::SQRT_2;
        let exact = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
        for (a, b) in D4_LOWPASS.iter().zip(exact) {
            assert!((a - b).abs() < 1e-15);
        }
        let shifted: f64 = D4_LOWPASS[0] * D4_LOWPASS[2] + D4_LOWPASS[1] * D4_LOWPASS[3];
        assert!(shifted.abs() < 1e-15);
        let cross: f64 = D4_LOWPASS.iter().zip(&D4_HIGHPASS).map(|(h, g)| h * g).sum();
        assert!(cross.abs() < 1e-15);
    }

    #[test]
    fn symmetric_extension_indices() {
        let idx: Vec<usize> = (-3..7).map(|i| symmetric_index(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(symmetric_index(5, 1), 0);
    }

    /// Energy of the symmetric extension over `[-2, n + 2]`, the support
    /// read by one analysis level.
    fn extended_energy(x: &[f64]) -> f64 {
        (-2..=x.len() as isize + 2)
            .map(|i| x[symmetric_index(i, x.len())].powi(2))
            .sum()
    }

    #[test]
    fn constant_input_exceeds_plain_energy() {
        let x = vec![1.0; 100];
        let a = approximation(&x, 1);
        let energy: f64 = a.iter().map(|v| v * v).sum();
        assert!(energy > 100.0);
        assert!(energy <= extended_energy(&x) + 1e-9);
    }

    proptest! {
        #[test]
        fn transform_is_linear(
            pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..300),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            levels in 0usize..5,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let (tx, ty, tm) = (approximation(&x, levels), approximation(&y, levels), approximation(&mixed, levels));
            for ((u, v), m) in tx.iter().zip(&ty).zip(&tm) {
                prop_assert!((a * u + b * v - m).abs() <= 1e-9);
            }
        }

        #[test]
        fn coefficient_energy_bounded_by_extended_support(
            x in proptest::collection::vec(-100.0f64..100.0, 4..400),
            levels in 1usize..5,
        ) {
            let mut cur = x;
            for _ in 0..levels {
                let bound = extended_energy(&cur);
                let (a, d) = analysis_step(&cur);
                let ea: f64 = a.iter().map(|v| v * v).sum();
                let ed: f64 = d.iter().map(|v| v * v).sum();
                prop_assert!(ea + ed <= bound * (1.0 + 1e-12) + 1e-6);
                cur = a;
            }
        }
    }

    #[test]
    fn one_level_roughly_halves() {
        for n in 1..200 {
            let len = level_len(n);
            assert!(len >= n / 2 && len <= n / 2 + 2);
        }
        assert_eq!(approx_len(1000, 3), 127);
    }
}
