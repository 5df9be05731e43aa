//! Minibatch training with per-epoch loss history.

use rand::seq::SliceRandom;

use super::adam::Adam;
use super::file::{ModelFile, Provenance};
use super::layers::ModelSpec;
use super::network::Network;
use crate::dataset::{FeatureKind, LabelLayout, Scaler, SplitData};
use crate::error::{Error, Result};
use crate::noise::RngStream;

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
/// Dropout masks use seed `seed ^ DROPOUT_SALT`, one stream per sample visit.
const DROPOUT_SALT: u64 = 0x6472_6f70_6f75_7400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.002, batch: 32, epochs: 64, seed: 0 }
    }
}

/// Per-epoch MSE in standardized label units; column 0 is the training loss
/// averaged over the epoch's minibatches, the rest are full passes over the monitored splits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossHistory {
    pub columns: Vec<String>,
    pub epochs: Vec<Vec<f64>>,
}

impl LossHistory {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.epochs.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("epoch,{}\n", self.columns.join(","));
        for (e, row) in self.epochs.iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s += &format!("{},{}\n", e + 1, vals.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub history: LossHistory,
    pub optimizer_steps: u64,
}

/// Everything about the run that is recorded in the model file besides the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub arch: String,
    pub labels: LabelLayout,
    pub features: FeatureKind,
    pub dataset_digest: String,
}

pub fn train(
    spec: ModelSpec,
    train: &SplitData,
    monitors: &[(&str, &SplitData)],
    cfg: &TrainConfig,
    meta: &TrainMeta,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config(format!("invalid training settings {cfg:?}")));
    }
    let net = Network::glorot(spec, &mut RngStream::new(cfg.seed, INIT_STREAM).rng())?;
    if train.feature_width != net.input_size() {
        return Err(Error::ShapeMismatch { layer: 0, expected: net.input_size(), got: train.feature_width });
    }
    if train.label_width != net.output_size() || meta.labels.width() != net.output_size() {
        return Err(Error::ShapeMismatch {
            layer: net.plan().len(),
            expected: net.output_size(),
            got: train.label_width,
        });
    }
    let fs = Scaler::fit(&train.features, train.feature_width)?;
    let ls = Scaler::fit(&train.labels, train.label_width)?;
    let x = fs.transform(&train.features);
    let y = ls.transform(&train.labels);
    let scaled: Vec<(String, Vec<f64>, Vec<f64>)> = monitors
        .iter()
        .map(|(name, d)| (name.to_string(), fs.transform(&d.features), ls.transform(&d.labels)))
        .collect();

    let (n, fw, lw) = (train.len(), train.feature_width, train.label_width);
    let mut net = net;
    let mut opt = Adam::new(net.param_count(), cfg.lr);
    let mut shuffle = RngStream::new(cfg.seed, SHUFFLE_STREAM).rng();
    let mut order: Vec<usize> = (0..n).collect();
    let mut columns = vec!["train".to_string()];
    columns.extend(scaled.iter().map(|s| s.0.clone()));
    let mut history = LossHistory { columns, epochs: Vec::with_capacity(cfg.epochs) };
    let mut visits = 0u64;
    let (mut bx, mut by) = (Vec::new(), Vec::new());
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.extend_from_slice(&x[i * fw..(i + 1) * fw]);
                by.extend_from_slice(&y[i * lw..(i + 1) * lw]);
            }
            let (loss, grad) = net.loss_and_gradient(&bx, &by, Some((cfg.seed ^ DROPOUT_SALT, visits)))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { step: opt.steps() as usize });
            }
            opt.step(&mut net.params, &grad);
            epoch_loss += loss * batch.len() as f64;
            visits += batch.len() as u64;
        }
        let mut row = vec![epoch_loss / n as f64];
        for (_, sx, sy) in &scaled {
            row.push(net.mse(sx, sy)?);
        }
        history.epochs.push(row);
    }
    let model = ModelFile {
        arch: meta.arch.clone(),
        network: net,
        feature_scaler: fs,
        label_scaler: ls,
        labels: meta.labels,
        features: meta.features,
        provenance: Provenance {
            dataset: meta.dataset_digest.clone(),
            seed: cfg.seed,
            lr: cfg.lr,
            batch: cfg.batch,
            epochs: cfg.epochs,
        },
    };
    Ok(TrainOutcome { model, history, optimizer_steps: opt.steps() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{dnn, LayerSpec, Shape};

    fn toy(n: usize, seed: u64) -> SplitData {
        let mut rng = RngStream::new(seed, 0).rng();
        use rand::Rng;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            features.extend([a, b, a * b, a - b, 0.5]);
            labels.extend([a + 0.5 * b, (a * 2.0).sin(), b * b]);
        }
        SplitData { features, labels, feature_width: 5, label_width: 3 }
    }

    fn meta() -> TrainMeta {
        TrainMeta {
            arch: "dnn".into(),
            labels: LabelLayout::DYN_ONLY,
            features: FeatureKind::Ts,
            dataset_digest: "toy".into(),
        }
    }

    #[test]
    fn one_epoch_one_batch_is_one_step() {
        let data = toy(32, 1);
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let out = train(dnn(5, 1, 4, 3), &data, &[], &cfg, &meta()).unwrap();
        assert_eq!(out.optimizer_steps, 1);
        assert_eq!(out.history.epochs.len(), 1);
    }

    #[test]
    fn loss_decreases_and_is_seeded() {
        let data = toy(200, 2);
        let val = toy(50, 3);
        for seed in 0..3 {
            let cfg = TrainConfig { epochs: 64, seed, ..TrainConfig::default() };
            let out = train(dnn(5, 2, 16, 3), &data, &[("val", &val)], &cfg, &meta()).unwrap();
            let tr = out.history.column("train").unwrap();
            assert!(tr[63] < tr[0], "seed {seed}: {} !< {}", tr[63], tr[0]);
            let again = train(dnn(5, 2, 16, 3), &data, &[("val", &val)], &cfg, &meta()).unwrap();
            assert_eq!(again.history, out.history);
            assert_eq!(again.model, out.model);
        }
    }

    #[test]
    fn overfits_four_samples() {
        let data = toy(4, 5);
        let cfg = TrainConfig { epochs: 3000, batch: 4, lr: 0.01, seed: 0 };
        let out = train(dnn(5, 2, 32, 3), &data, &[], &cfg, &meta()).unwrap();
        let pred = out.model.predict(&data.features).unwrap();
        for (i, p) in pred.iter().enumerate() {
            for (a, b) in p.labels.iter().zip(data.label_row(i)) {
                assert!((a - b).abs() <= 1e-2, "sample {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dropout_training_is_seeded() {
        let data = toy(40, 6);
        let spec = ModelSpec {
            input: Shape::new(1, 5),
            layers: vec![LayerSpec::Dense(8), LayerSpec::Swish, LayerSpec::Dropout(0.2), LayerSpec::LinearOutput(3)],
        };
        let cfg = TrainConfig { epochs: 3, batch: 8, ..TrainConfig::default() };
        let a = train(spec.clone(), &data, &[], &cfg, &meta()).unwrap();
        let b = train(spec, &data, &[], &cfg, &meta()).unwrap();
        assert_eq!(a.model.network.params, b.model.network.params);
    }

    #[test]
    fn rejects_width_mismatch() {
        let data = toy(8, 1);
        assert!(train(dnn(6, 1, 4, 3), &data, &[], &TrainConfig::default(), &meta()).is_err());
    }
}
