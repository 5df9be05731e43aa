//! Evaluation measures over row-major prediction and truth arrays.
//!
//! Every function takes `width`-wide rows. Width 1 gives the per-component
//! form; for MdAPE that reduces `‖·‖` ratios to `|·|` ratios.

use crate::dataset::LabelLayout;
use crate::error::{Error, Result};

fn check(preds: &[f64], truths: &[f64], width: usize) -> Result<usize> {
    if width == 0 || truths.is_empty() {
        return Err(Error::EmptyInput);
    }
    if preds.len() != truths.len() || !truths.len().is_multiple_of(width) {
        return Err(Error::ShapeMismatch { layer: 0, expected: truths.len(), got: preds.len() });
    }
    Ok(truths.len() / width)
}

fn column_mean(rows: &[f64], width: usize) -> Vec<f64> {
    let n = (rows.len() / width) as f64;
    let mut m = vec![0.0; width];
    for r in rows.chunks_exact(width) {
        for (a, x) in m.iter_mut().zip(r) {
            *a += x;
        }
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// `‖mean(truths) − mean(preds)‖²`.
pub fn sqb(preds: &[f64], truths: &[f64], width: usize) -> Result<f64> {
    check(preds, truths, width)?;
    let (mp, mt) = (column_mean(preds, width), column_mean(truths, width));
    Ok(mp.iter().zip(&mt).map(|(p, t)| (t - p) * (t - p)).sum())
}

/// Mean over samples of `‖(tᵢ − t̄) − (pᵢ − p̄)‖²`.
pub fn cmse(preds: &[f64], truths: &[f64], width: usize) -> Result<f64> {
    let n = check(preds, truths, width)?;
    let (mp, mt) = (column_mean(preds, width), column_mean(truths, width));
    let mut acc = 0.0;
    for (p, t) in preds.chunks_exact(width).zip(truths.chunks_exact(width)) {
        for k in 0..width {
            let d = (t[k] - mt[k]) - (p[k] - mp[k]);
            acc += d * d;
        }
    }
    Ok(acc / n as f64)
}

/// Median over samples of `‖tᵢ − pᵢ‖ / ‖tᵢ‖`; an even count averages the central pair.
pub fn mdape(preds: &[f64], truths: &[f64], width: usize) -> Result<f64> {
    check(preds, truths, width)?;
    let mut ratios = Vec::with_capacity(truths.len() / width);
    for (i, (p, t)) in preds.chunks_exact(width).zip(truths.chunks_exact(width)).enumerate() {
        let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if tn == 0.0 {
            return Err(Error::ZeroNormTruth { index: i });
        }
        let dn = p.iter().zip(t).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        ratios.push(dn / tn);
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    Ok(if n % 2 == 1 { ratios[n / 2] } else { 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]) })
}

/// `1 − Σ‖tᵢ − pᵢ‖² / Σ‖tᵢ − t̄‖²`.
pub fn cdet(preds: &[f64], truths: &[f64], width: usize) -> Result<f64> {
    check(preds, truths, width)?;
    let mt = column_mean(truths, width);
    let (mut num, mut den) = (0.0, 0.0);
    for (p, t) in preds.chunks_exact(width).zip(truths.chunks_exact(width)) {
        for k in 0..width {
            num += (t[k] - p[k]) * (t[k] - p[k]);
            den += (t[k] - mt[k]) * (t[k] - mt[k]);
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateTruths);
    }
    Ok(1.0 - num / den)
}

/// Columns `[start, start + len)` of row-major data.
pub fn columns(rows: &[f64], width: usize, start: usize, len: usize) -> Vec<f64> {
    rows.chunks_exact(width).flat_map(|r| r[start..start + len].iter().copied()).collect()
}

/// The four measures for one scope. A measure whose precondition fails is NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub mdape: f64,
    pub cdet: f64,
    pub sqb: f64,
    pub cmse: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 4] = ["MdAPE", "CDET", "SQB", "CMSE"];

    pub fn compute(preds: &[f64], truths: &[f64], width: usize) -> Result<Self> {
        check(preds, truths, width)?;
        let or_nan = |r: Result<f64>| match r {
            Ok(v) => Ok(v),
            Err(Error::ZeroNormTruth { .. } | Error::DegenerateTruths) => Ok(f64::NAN),
            Err(e) => Err(e),
        };
        Ok(Self {
            mdape: or_nan(mdape(preds, truths, width))?,
            cdet: or_nan(cdet(preds, truths, width))?,
            sqb: sqb(preds, truths, width)?,
            cmse: cmse(preds, truths, width)?,
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [self.mdape, self.cdet, self.sqb, self.cmse]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_samples: usize,
    pub layout: LabelLayout,
    /// Vector-level measures, one per label group in layout order.
    pub groups: Vec<(&'static str, MetricSet)>,
    /// Per-component measures in label order.
    pub components: Vec<(&'static str, MetricSet)>,
}

impl EvalReport {
    pub fn new(layout: LabelLayout, preds: &[f64], truths: &[f64]) -> Result<Self> {
        let w = layout.width();
        let n = check(preds, truths, w)?;
        let mut groups = Vec::new();
        let mut start = 0;
        for (name, len) in layout.group_widths() {
            let (p, t) = (columns(preds, w, start, len), columns(truths, w, start, len));
            groups.push((name, MetricSet::compute(&p, &t, len)?));
            start += len;
        }
        let mut components = Vec::new();
        for (j, name) in layout.names().into_iter().enumerate() {
            let (p, t) = (columns(preds, w, j, 1), columns(truths, w, j, 1));
            components.push((name, MetricSet::compute(&p, &t, 1)?));
        }
        Ok(Self { n_samples: n, layout, groups, components })
    }

    pub fn component(&self, name: &str) -> Option<&MetricSet> {
        self.components.iter().find(|c| c.0 == name).map(|c| &c.1)
    }

    pub fn group(&self, name: &str) -> Option<&MetricSet> {
        self.groups.iter().find(|c| c.0 == name).map(|c| &c.1)
    }

    /// Measures as rows and label components as columns.
    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = self.components.iter().map(|c| c.0).collect();
        let mut s = format!("metric,{}\n", names.join(","));
        for (k, metric) in MetricSet::NAMES.iter().enumerate() {
            let vals: Vec<String> = self.components.iter().map(|c| format!("{:?}", c.1.values()[k])).collect();
            s += &format!("{metric},{}\n", vals.join(","));
        }
        s
    }

    /// `key=value` lines: sample count, then `group.<name>.<metric>` and `component.<name>.<metric>`.
    pub fn to_text(&self) -> String {
        let mut s = format!("n_samples={}\nlabels={}\n", self.n_samples, self.layout.names().join(","));
        for (scope, list) in [("group", &self.groups), ("component", &self.components)] {
            for (name, m) in list {
                for (metric, v) in MetricSet::NAMES.iter().zip(m.values()) {
                    s += &format!("{scope}.{name}.{}={v:?}\n", metric.to_lowercase());
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn perfect_predictions() {
        let t = random(30, 1);
        assert_eq!(sqb(&t, &t, 3).unwrap(), 0.0);
        assert_eq!(cmse(&t, &t, 3).unwrap(), 0.0);
        assert_eq!(mdape(&t, &t, 3).unwrap(), 0.0);
        assert_eq!(cdet(&t, &t, 3).unwrap(), 1.0);
    }

    #[test]
    fn constant_shift() {
        let t = random(30, 2);
        let c = [0.5, -1.0, 2.0];
        let p: Vec<f64> = t.iter().enumerate().map(|(i, x)| x + c[i % 3]).collect();
        assert!((sqb(&p, &t, 3).unwrap() - 5.25).abs() <= 1e-12);
        assert!(cmse(&p, &t, 3).unwrap() <= 1e-24);
    }

    #[test]
    fn scaled_single_sample() {
        let t = [0.3, -0.7, 2.0];
        let p = t.map(|x| 1.1 * x);
        assert!((mdape(&p, &t, 3).unwrap() - 0.1).abs() <= 1e-14);
    }

    #[test]
    fn mean_predictor_has_zero_cdet() {
        let t = random(40, 3);
        let m = column_mean(&t, 4);
        let p: Vec<f64> = (0..10).flat_map(|_| m.iter().copied()).collect();
        assert!(cdet(&p, &t, 4).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn worse_than_mean_is_negative() {
        let t = random(20, 4);
        let p: Vec<f64> = t.iter().map(|x| -x).collect();
        let c = cdet(&p, &t, 2).unwrap();
        let tm = column_mean(&t, 2);
        let num: f64 = t.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = t.iter().enumerate().map(|(i, a)| (a - tm[i % 2]).powi(2)).sum();
        assert!(c < 0.0);
        assert!((c - (1.0 - num / den)).abs() <= 1e-14);
    }

    #[test]
    fn sqb_matches_two_pass() {
        let (p, t) = (random(300, 5), random(300, 6));
        let mut d = [0.0; 3];
        for i in 0..100 {
            for k in 0..3 {
                d[k] += t[3 * i + k] / 100.0;
                d[k] -= p[3 * i + k] / 100.0;
            }
        }
        let naive: f64 = d.iter().map(|x| x * x).sum();
        assert!((sqb(&p, &t, 3).unwrap() - naive).abs() <= 1e-12);
    }

    #[test]
    fn mdape_matches_sort() {
        let (p, t) = (random(10, 7), random(10, 8));
        let mut r: Vec<f64> = (0..5)
            .map(|i| {
                let (a, b) = (&p[2 * i..2 * i + 2], &t[2 * i..2 * i + 2]);
                ((b[0] - a[0]).hypot(b[1] - a[1])) / b[0].hypot(b[1])
            })
            .collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((mdape(&p, &t, 2).unwrap() - r[2]).abs() <= 1e-14 * r[2]);
        assert_eq!(mdape(&[1.0, 3.0], &[2.0, 2.0], 1).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(mdape(&[1.0, 1.0], &[1.0, 0.0], 1), Err(Error::ZeroNormTruth { index: 1 })));
        assert!(matches!(cdet(&[1.0, 2.0], &[3.0, 3.0], 1), Err(Error::DegenerateTruths)));
        assert!(matches!(sqb(&[], &[], 1), Err(Error::EmptyInput)));
        assert!(sqb(&[1.0], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn report_layout_and_perfect_fixture() {
        let layout = LabelLayout { beta: false, rho_sigma: true, covariance: false };
        let t: Vec<f64> = random(50, 9).iter().map(|x| x + 3.0).collect();
        let r = EvalReport::new(layout, &t, &t).unwrap();
        assert_eq!(r.n_samples, 10);
        let names: Vec<&str> = r.components.iter().map(|c| c.0).collect();
        assert_eq!(names, ["theta0", "theta1", "theta2", "rho", "sigma"]);
        assert!(r.components.iter().all(|c| c.1.cdet == 1.0));
        let csv = r.to_csv();
        assert!(csv.starts_with("metric,theta0,theta1,theta2,rho,sigma\nMdAPE,"));
        assert!(csv.lines().nth(2).unwrap().starts_with("CDET,1.0,1.0"));
        assert!(r.to_text().contains("group.rho_sigma.cdet=1.0\n"));
    }

    #[test]
    fn report_matches_library_calls() {
        let (p, t) = (random(60, 10), random(60, 11));
        let r = EvalReport::new(LabelLayout::DYN_ONLY, &p, &t).unwrap();
        assert_eq!(r.group("dyn").unwrap().cdet, cdet(&p, &t, 3).unwrap());
        let (pc, tc) = (columns(&p, 3, 1, 1), columns(&t, 3, 1, 1));
        assert_eq!(r.component("theta1").unwrap().mdape, mdape(&pc, &tc, 1).unwrap());
    }

    proptest! {
        #[test]
        fn bias_variance_split(seed in 0u64..1000, n in 1usize..40) {
            let (p, t) = (random(3 * n, seed), random(3 * n, seed + 5000));
            let mse: f64 = p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
            let s = sqb(&p, &t, 3).unwrap() + cmse(&p, &t, 3).unwrap();
            prop_assert!((s - mse).abs() <= 1e-12 * mse.max(1.0));
        }

        #[test]
        fn cdet_at_most_one_and_order_free(seed in 0u64..1000, n in 2usize..30, k in 0usize..30) {
            let (p, t) = (random(2 * n, seed), random(2 * n, seed + 77));
            let c = cdet(&p, &t, 2).unwrap();
            prop_assert!(c < 1.0);
            let rot = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(2 * (k % n)); v };
            let (pr, tr) = (rot(&p), rot(&t));
            prop_assert!((cdet(&pr, &tr, 2).unwrap() - c).abs() <= 1e-12);
            prop_assert!((sqb(&pr, &tr, 2).unwrap() - sqb(&p, &t, 2).unwrap()).abs() <= 1e-12);
            prop_assert!((cmse(&pr, &tr, 2).unwrap() - cmse(&p, &t, 2).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(mdape(&pr, &tr, 2).unwrap(), mdape(&p, &t, 2).unwrap());
        }
    }
}
