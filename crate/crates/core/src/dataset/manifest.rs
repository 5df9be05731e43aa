//! `manifest`: UTF-8 `key=value` lines that fully determine a dataset.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{FeatureKind, HessianData, LabelLayout, Split};
use crate::error::{Error, Result};
use crate::noise::NoiseKind;
use crate::objective::{LikelihoodConfig, PriorConfig};
use crate::ode::SimConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    pub fn add(&mut self, s: Split) {
        match s {
            Split::Train => self.train += 1,
            Split::Val => self.val += 1,
            Split::Test => self.test += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub negative_definite: usize,
    pub ill_conditioned: usize,
    /// Forward or Hessian solve left the finite range.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub schema: u32,
    pub rng: String,
    pub seed: u64,
    pub n_samples: usize,
    /// Split sizes before any sample is dropped.
    pub counts: SplitCounts,
    pub sim: SimConfig,
    pub features: FeatureKind,
    pub feature_width: usize,
    pub noise: NoiseKind,
    pub labels: LabelLayout,
    pub prior: PriorConfig,
    pub like: LikelihoodConfig,
    pub noise_pairs: usize,
    pub hessian_data: HessianData,
    /// Stored rows per split.
    pub kept: SplitCounts,
    pub dropped: DropCounts,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn get(&self, k: &str) -> Result<&str> {
        self.0.get(k).map(String::as_str).ok_or_else(|| Error::Format(format!("manifest is missing '{k}'")))
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        self.get(k)?.parse().map_err(|_| Error::Format(format!("manifest field '{k}' is not a number")))
    }

    fn floats<const N: usize>(&self, k: &str) -> Result<[f64; N]> {
        let v: Vec<f64> = self
            .get(k)?
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("manifest field '{k}' is not a number list")))?;
        v.try_into().map_err(|_| Error::Format(format!("manifest field '{k}' needs {N} numbers")))
    }
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let b = &self.prior.bounds;
        let lines = [
            ("schema", self.schema.to_string()),
            ("rng", self.rng.clone()),
            ("seed", self.seed.to_string()),
            ("n_samples", self.n_samples.to_string()),
            ("n_train", self.counts.train.to_string()),
            ("n_val", self.counts.val.to_string()),
            ("n_test", self.counts.test.to_string()),
            ("tau", format!("{:?}", self.sim.tau)),
            ("n_t", self.sim.n_t.to_string()),
            ("z", format!("{:?}", self.sim.z)),
            ("u0", format!("{:?}", self.sim.u0)),
            ("v0", format!("{:?}", self.sim.v0)),
            ("features", self.features.name().to_string()),
            ("feature_width", self.feature_width.to_string()),
            ("noise", self.noise.name().to_string()),
            ("noise_pairs", self.noise_pairs.to_string()),
            ("labels", self.labels.names().join(",")),
            ("p", self.labels.width().to_string()),
            ("prior_mean", join(&self.prior.mean)),
            ("prior_sigma", join(&self.prior.sigma)),
            ("prior_lower", join(&[b[0].0, b[1].0, b[2].0])),
            ("prior_upper", join(&[b[0].1, b[1].1, b[2].1])),
            ("gamma", format!("{:?}", self.like.gamma)),
            ("hessian_data", self.hessian_data.name().to_string()),
            ("kept_train", self.kept.train.to_string()),
            ("kept_val", self.kept.val.to_string()),
            ("kept_test", self.kept.test.to_string()),
            ("dropped_negative_definite", self.dropped.negative_definite.to_string()),
            ("dropped_ill_conditioned", self.dropped.ill_conditioned.to_string()),
            ("dropped_failed", self.dropped.failed.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Format(format!("manifest line {} has no '='", n + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let f = Fields(map);
        let schema: u32 = f.num("schema")?;
        if schema != SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported manifest schema {schema}")));
        }
        let noise = NoiseKind::parse(f.get("noise")?).map_err(|e| Error::Format(e.to_string()))?;
        let names: Vec<&str> = f.get("labels")?.split(',').collect();
        let labels = LabelLayout::from_names(&names)?;
        if f.num::<usize>("p")? != labels.width() {
            return Err(Error::Format("manifest p disagrees with its label layout".into()));
        }
        let lo: [f64; 3] = f.floats("prior_lower")?;
        let hi: [f64; 3] = f.floats("prior_upper")?;
        Ok(Self {
            schema,
            rng: f.get("rng")?.to_string(),
            seed: f.num("seed")?,
            n_samples: f.num("n_samples")?,
            counts: SplitCounts { train: f.num("n_train")?, val: f.num("n_val")?, test: f.num("n_test")? },
            sim: SimConfig {
                tau: f.num("tau")?,
                n_t: f.num("n_t")?,
                z: f.num("z")?,
                u0: f.num("u0")?,
                v0: f.num("v0")?,
            },
            features: FeatureKind::parse(f.get("features")?).map_err(|e| Error::Format(e.to_string()))?,
            feature_width: f.num("feature_width")?,
            noise,
            labels,
            prior: PriorConfig {
                mean: f.floats("prior_mean")?,
                sigma: f.floats("prior_sigma")?,
                bounds: [(lo[0], hi[0]), (lo[1], hi[1]), (lo[2], hi[2])],
            },
            like: LikelihoodConfig { gamma: f.num("gamma")? },
            noise_pairs: f.num("noise_pairs")?,
            hessian_data: HessianData::parse(f.get("hessian_data")?).map_err(|e| Error::Format(e.to_string()))?,
            kept: SplitCounts { train: f.num("kept_train")?, val: f.num("kept_val")?, test: f.num("kept_test")? },
            dropped: DropCounts {
                negative_definite: f.num("dropped_negative_definite")?,
                ill_conditioned: f.num("dropped_ill_conditioned")?,
                failed: f.num("dropped_failed")?,
            },
        })
    }

    /// Hex SHA-256 of the serialized manifest; identifies the dataset in model provenance.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn retained_fraction(&self) -> f64 {
        self.kept.total() as f64 / self.n_samples as f64
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
