//! Network inputs derived from an observation: the raw series, its one-sided
//! Fourier coefficients, or both.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Ts,
    Fc,
    Tsfc,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Ts => "ts",
            FeatureKind::Fc => "fc",
            FeatureKind::Tsfc => "tsfc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ts" => Ok(FeatureKind::Ts),
            "fc" => Ok(FeatureKind::Fc),
            "tsfc" => Ok(FeatureKind::Tsfc),
            _ => Err(Error::Config(format!("unknown feature kind '{s}'"))),
        }
    }

    /// Number of channels when the features are read as a multi-channel signal.
    pub fn channels(self) -> usize {
        match self {
            FeatureKind::Tsfc => 2,
            _ => 1,
        }
    }

    pub fn width(self, n_t: usize) -> usize {
        self.channels() * n_t
    }
}

/// One-sided unnormalized DFT packed into exactly `n` reals:
/// `[Re c_0, Re c_{n/2}, Re c_1, Im c_1, …, Re c_{n/2−1}, Im c_{n/2−1}]`.
pub fn fourier_features(ts: &[f64]) -> Result<Vec<f64>> {
    let n = ts.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!("Fourier features need an even, positive length, got {n}")));
    }
    let mut buf: Vec<Complex<f64>> = ts.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut out = Vec::with_capacity(n);
    out.push(buf[0].re);
    out.push(buf[n / 2].re);
    for c in &buf[1..n / 2] {
        out.push(c.re);
        out.push(c.im);
    }
    Ok(out)
}

/// Feature vector for `kind`. For TS+FC the series comes first, then the coefficients.
pub fn extract(ts: &[f64], kind: FeatureKind) -> Result<Vec<f64>> {
    Ok(match kind {
        FeatureKind::Ts => ts.to_vec(),
        FeatureKind::Fc => fourier_features(ts)?,
        FeatureKind::Tsfc => {
            let mut v = ts.to_vec();
            v.extend(fourier_features(ts)?);
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Unpack into the full spectrum and invert with an O(n²) sum.
    fn naive_inverse(packed: &[f64]) -> Vec<f64> {
        let n = packed.len();
        let mut c = vec![(0.0, 0.0); n];
        c[0] = (packed[0], 0.0);
        c[n / 2] = (packed[1], 0.0);
        for k in 1..n / 2 {
            c[k] = (packed[2 * k], packed[2 * k + 1]);
            c[n - k] = (packed[2 * k], -packed[2 * k + 1]);
        }
        (0..n)
            .map(|j| {
                c.iter()
                    .enumerate()
                    .map(|(k, (re, im))| {
                        let a = 2.0 * PI * (j * k) as f64 / n as f64;
                        re * a.cos() - im * a.sin()
                    })
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn constant_series() {
        let f = fourier_features(&[0.7; 16]).unwrap();
        assert!((f[0] - 0.7 * 16.0).abs() <= 1e-12);
        assert!(f[1..].iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn cosine_lands_in_one_slot() {
        let (n, k, a) = (32, 5, 1.3);
        let ts: Vec<f64> = (0..n).map(|j| a * (2.0 * PI * (k * j) as f64 / n as f64).cos()).collect();
        let f = fourier_features(&ts).unwrap();
        for (i, x) in f.iter().enumerate() {
            let expected = if i == 2 * k { a * n as f64 / 2.0 } else { 0.0 };
            assert!((x - expected).abs() <= 1e-11, "slot {i}: {x}");
        }
    }

    #[test]
    fn widths() {
        let ts = vec![0.1; 2000];
        assert_eq!(extract(&ts, FeatureKind::Ts).unwrap().len(), 2000);
        assert_eq!(extract(&ts, FeatureKind::Fc).unwrap().len(), 2000);
        assert_eq!(extract(&ts, FeatureKind::Tsfc).unwrap().len(), 4000);
        assert!(fourier_features(&[1.0; 7]).is_err());
    }

    proptest! {
        #[test]
        fn packing_is_invertible(ts in prop::collection::vec(-3.0f64..3.0, 1..40usize)) {
            let mut ts = ts;
            if ts.len() % 2 == 1 {
                ts.push(0.5);
            }
            let back = naive_inverse(&fourier_features(&ts).unwrap());
            for (a, b) in ts.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
