use crate::error::{domain, Result};

/// Dynamic time warping distance with local cost `|x_i - y_j|` and the
/// step set `{(1,0), (0,1), (1,1)}`.
///
/// `band` limits alignments to `|i - j| <= band` (widened to the length
/// difference so a path always exists); `None` or `Some(0)` means no limit.
pub fn dtw_distance_banded(x: &[f64], y: &[f64], band: Option<usize>) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return domain("DTW needs two nonempty sequences");
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return domain("DTW inputs must be finite");
    }
    let (n, m) = (x.len(), y.len());
    let band = match band {
        None | Some(0) => usize::MAX,
        Some(b) => b.max(n.abs_diff(m)),
    };

    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        let lo = if band == usize::MAX {
            1
        } else {
            i.saturating_sub(band).max(1)
        };
        let hi = if band == usize::MAX { m } else { (i + band).min(m) };
        cur[1..lo].iter_mut().for_each(|c| *c = f64::INFINITY);
        let xi = x[i - 1];
        for j in lo..=hi {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = (xi - y[j - 1]).abs() + best;
        }
        cur[hi + 1..].iter_mut().for_each(|c| *c = f64::INFINITY);
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Full-window DTW distance.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    dtw_distance_banded(x, y, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences_cost_nothing() {
        let x = [1.0, 5.0, -2.0, 0.5];
        assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn small_examples() {
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(dtw_distance(&[0.0], &[3.0, 4.0]).unwrap(), 7.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(dtw_distance(&[], &[1.0]).is_err());
        assert!(dtw_distance(&[1.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn band_never_undercuts_full_window() {
        let x = [0.0, 3.0, 1.0, 4.0, 0.0, 2.0];
        let y = [1.0, 1.0, 2.0, 2.0, 4.0, 0.0];
        let full = dtw_distance(&x, &y).unwrap();
        assert!(dtw_distance_banded(&x, &y, Some(1)).unwrap() >= full);
        assert_eq!(dtw_distance_banded(&x, &y, Some(0)).unwrap(), full);
        assert_eq!(dtw_distance_banded(&x, &y, Some(6)).unwrap(), full);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded_by_diagonal(
            x in proptest::collection::vec(-10.0f64..10.0, 1..30),
            y in proptest::collection::vec(-10.0f64..10.0, 1..30),
        ) {
            let a = dtw_distance(&x, &y).unwrap();
            let b = dtw_distance(&y, &x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0);
            let n = x.len().min(y.len());
            let diag: f64 = x[..n].iter().zip(&y[..n]).map(|(p, q)| (p - q).abs()).sum();
            if x.len() == y.len() {
                prop_assert!(a <= diag + 1e-12);
            }
            prop_assert!(dtw_distance_banded(&x, &y, Some(3)).unwrap() >= a - 1e-12);
        }
    }
}
