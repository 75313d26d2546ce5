use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::scalar::Scalar;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Reported floats are rounded to this many decimals.
const DECIMALS: i32 = 9;

pub fn round_report(v: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    let r = (v * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean from the `n − 1` sample variance; 0 for one value.
    pub stderr: f64,
    pub samples: usize,
}

pub fn aggregate(values: &[f64]) -> Result<Estimate> {
    if values.is_empty() {
        bail!(Domain, "cannot aggregate an empty sample");
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(Estimate { mean, stderr, samples: values.len() })
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        bail!(Domain, "proportion {successes}/{trials} is undefined");
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        let (lo, hi) = wilson(successes, trials, Z95)?;
        Ok(Proportion { successes, trials, estimate: successes as f64 / trials as f64, wilson_lo: lo, wilson_hi: hi })
    }

    /// Binomial standard error of the estimate.
    pub fn stderr(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Median, averaging the middle pair for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        bail!(Domain, "median of an empty sample");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[h] } else { (v[h - 1] + v[h]) / 2.0 })
}

/// Probability that `C_n` is empty: `q_0 = 0`, `q_{j+1} = (1 − p + p·q_j)^{M²}`.
pub fn extinction_oracle(p: &Scalar, m: u32, n: u32) -> f64 {
    let p = p.to_f64();
    let m2 = (m as i32) * (m as i32);
    let mut q = 0.0f64;
    for _ in 0..n {
        q = (1.0 - p + p * q).powi(m2);
    }
    q
}

/// The same iteration in exact rationals. Sizes grow like `M^{2n}`, so this is
/// only practical for small `n`.
pub fn extinction_oracle_exact(p: &Scalar, m: u32, n: u32) -> Scalar {
    let m2 = (m * m) as usize;
    let keep_none = Scalar::one() - p;
    let mut q = Scalar::zero();
    for _ in 0..n {
        let base = &keep_none + &(p * &q);
        q = num_traits::pow(base, m2);
    }
    q
}

/// Smallest fixed point of `q ↦ (1 − p + pq)^{M²}`, iterated from 0 until
/// successive values differ by less than `tol`.
pub fn extinction_limit(p: &Scalar, m: u32, tol: f64) -> f64 {
    let p = p.to_f64();
    let m2 = (m as i32) * (m as i32);
    let mut q = 0.0f64;
    for _ in 0..10_000_000 {
        let next = (1.0 - p + p * q).powi(m2);
        if (next - q).abs() < tol {
            return next;
        }
        q = next;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_examples() {
        let e = aggregate(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((e.mean, e.stderr), (4.0, 0.0));
        let e = aggregate(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(aggregate(&[7.0]).unwrap().stderr, 0.0);
        assert!(matches!(aggregate(&[]), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson(0, 100, Z95).unwrap();
        assert_eq!(lo, 0.0);
        // z²/(n + z²)
        assert!((hi - 0.036993).abs() < 1e-6, "{hi}");
        let (lo, hi) = wilson(100, 100, Z95).unwrap();
        assert!((lo - (1.0 - 0.036993)).abs() < 1e-6 && hi == 1.0);
        let (lo, hi) = wilson(50, 100, Z95).unwrap();
        assert!(lo < 0.5 && hi > 0.5 && ((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
        assert!(wilson(1, 0, Z95).is_err() && wilson(3, 2, Z95).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn oracle_agrees_with_exact_iteration() {
        for (a, b) in [(1, 5), (3, 10), (1, 2), (7, 10), (1, 1)] {
            let p = Scalar::ratio(a, b);
            for n in 0..=4 {
                let exact = extinction_oracle_exact(&p, 2, n).to_f64();
                let float = extinction_oracle(&p, 2, n);
                assert!((exact - float).abs() < 1e-13, "p={p} n={n}: {exact} vs {float}");
            }
        }
        assert_eq!(extinction_oracle_exact(&Scalar::ratio(1, 2), 2, 1), Scalar::ratio(1, 16));
        assert_eq!(extinction_oracle_exact(&Scalar::ratio(1, 2), 3, 1), Scalar::ratio(1, 512));
    }

    #[test]
    fn oracle_limits() {
        for n in [0, 5, 40] {
            assert_eq!(extinction_oracle(&Scalar::one(), 2, n), 0.0);
        }
        // subcritical and critical parameters die out
        assert!((extinction_limit(&Scalar::ratio(1, 4), 2, 1e-12) - 1.0).abs() < 1e-3);
        assert!((extinction_limit(&Scalar::ratio(1, 5), 2, 1e-14) - 1.0).abs() < 1e-9);
        let q = extinction_limit(&Scalar::ratio(1, 2), 2, 1e-14);
        assert!((q - 0.0874).abs() < 1e-4, "{q}");
        assert!((q - ((1.0 + q) / 2.0).powi(4)).abs() < 1e-12);
        // iterates increase towards the limit
        let qs: Vec<f64> = (0..30).map(|n| extinction_oracle(&Scalar::ratio(1, 2), 2, n)).collect();
        assert!(qs.windows(2).all(|w| w[0] <= w[1] && w[1] <= q + 1e-12));
    }

    #[test]
    fn rounding() {
        assert_eq!(round_report(0.1234567894), 0.123456789);
        assert_eq!(round_report(-1e-12), 0.0);
        assert_eq!(round_report(2.0), 2.0);
    }
}
