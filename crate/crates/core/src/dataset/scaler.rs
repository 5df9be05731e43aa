//! Per-column standardization fitted on the training split.

use crate::error::{Error, Result};

/// Floor applied to column standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fit on row-major `rows` of the given width (population standard deviation).
    pub fn fit(rows: &[f64], width: usize) -> Result<Self> {
        if width == 0 || rows.is_empty() || !rows.len().is_multiple_of(width) {
            return Err(Error::EmptyInput);
        }
        let n = (rows.len() / width) as f64;
        let mut mean = vec![0.0; width];
        for row in rows.chunks_exact(width) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in rows.chunks_exact(width) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn identity(width: usize) -> Self {
        Self { mean: vec![0.0; width], std: vec![1.0; width] }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_in_place(&self, rows: &mut [f64]) {
        for row in rows.chunks_exact_mut(self.width()) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
    }

    pub fn transform(&self, rows: &[f64]) -> Vec<f64> {
        let mut out = rows.to_vec();
        self.transform_in_place(&mut out);
        out
    }

    pub fn inverse_in_place(&self, rows: &mut [f64]) {
        for row in rows.chunks_exact_mut(self.width()) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = *x * s + m;
            }
        }
    }
}

/// Fit on the training rows and transform every split with the same statistics.
pub fn standardize_features(
    train: &[f64],
    others: &[&[f64]],
    width: usize,
) -> Result<(Scaler, Vec<f64>, Vec<Vec<f64>>)> {
    let scaler = Scaler::fit(train, width)?;
    let t = scaler.transform(train);
    let rest = others.iter().map(|o| scaler.transform(o)).collect();
    Ok((scaler, t, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(rows: &[f64], width: usize, j: usize) -> Vec<f64> {
        rows.chunks_exact(width).map(|r| r[j]).collect()
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let rows = [1.0, 5.0, 2.0, 5.0, 3.0, 5.0];
        let s = Scaler::fit(&rows, 2).unwrap();
        assert_eq!(s.std[1], STD_FLOOR);
        assert!(column(&s.transform(&rows), 2, 1).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn training_columns_are_standard() {
        let rows: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64 * 0.3 + (i % 3) as f64).collect();
        let (_, t, _) = standardize_features(&rows, &[], 3).unwrap();
        for j in 0..3 {
            let c = column(&t, 3, j);
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
            assert!(m.abs() <= 1e-10 && (sd - 1.0).abs() <= 1e-10, "{m} {sd}");
        }
    }

    #[test]
    fn other_splits_use_training_statistics() {
        let train = [0.0, 2.0, 4.0];
        let test = [10.0, 12.0];
        let (s, _, rest) = standardize_features(&train, &[&test], 1).unwrap();
        let expected: Vec<f64> = test.iter().map(|x| (x - 2.0) / s.std[0]).collect();
        assert_eq!(rest[0], expected);
        let mut back = rest[0].clone();
        s.inverse_in_place(&mut back);
        assert!(back.iter().zip(&test).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}
