//! Self-describing model file: a text header followed by little-endian blobs.

use std::path::Path;

use nalgebra::Matrix3;

use super::layers::{LayerSpec, ModelSpec, Shape};
use super::network::Network;
use crate::binio::{decode_f64s, encode_f64s};
use crate::dataset::{FeatureKind, LabelLayout, Scaler};
use crate::error::{Error, Result};
use crate::spd::{tangent_to_covariance, TangentVec};

const MAGIC: &str = "fhn-model 1";
const HEADER_END: &str = "end";

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// Digest of the training dataset manifest.
    pub dataset: String,
    pub seed: u64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub arch: String,
    pub network: Network,
    pub feature_scaler: Scaler,
    pub label_scaler: Scaler,
    pub labels: LabelLayout,
    pub features: FeatureKind,
    pub provenance: Provenance,
}

/// One prediction in physical label units.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<f64>,
    /// Reconstructed from the tangent entries when the layout carries them.
    pub covariance: Option<Matrix3<f64>>,
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = &self.network.spec;
        let p = &self.provenance;
        let blobs = self.blobs();
        let sizes: Vec<String> = blobs.iter().map(|(n, v)| format!("{n}:{}", v.len())).collect();
        let mut s = String::new();
        s += &format!("{MAGIC}\n");
        s += &format!("arch={}\n", self.arch);
        s += &format!("input={}x{}\n", spec.input.channels, spec.input.len);
        s += &format!("layers={}\n", spec.layers_token());
        s += &format!("labels={}\n", self.labels.names().join(","));
        s += &format!("features={}\n", self.features.name());
        s += &format!("dataset={}\n", p.dataset);
        s += &format!("seed={}\n", p.seed);
        s += &format!("lr={:?}\n", p.lr);
        s += &format!("batch={}\n", p.batch);
        s += &format!("epochs={}\n", p.epochs);
        s += &format!("blobs={}\n", sizes.join(","));
        s += &format!("{HEADER_END}\n");
        let mut out = s.into_bytes();
        for (_, v) in blobs {
            out.extend(encode_f64s(v));
        }
        out
    }

    fn blobs(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("params", &self.network.params),
            ("feature_mean", &self.feature_scaler.mean),
            ("feature_std", &self.feature_scaler.std),
            ("label_mean", &self.label_scaler.mean),
            ("label_std", &self.label_scaler.std),
        ]
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        loop {
            let rest = &bytes[pos..];
            let nl =
                rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Format("unterminated header".into()))?;
            let line = std::str::from_utf8(&rest[..nl]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
            pos += nl + 1;
            if fields.is_empty() && line != MAGIC {
                return Err(Error::Format(format!("not a model file (first line '{line}')")));
            }
            if line == HEADER_END {
                break;
            }
            fields.push(line.to_string());
        }
        let get = |k: &str| -> Result<&str> {
            fields
                .iter()
                .find_map(|l| l.strip_prefix(k).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::Format(format!("missing header field '{k}'")))
        };
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Format(format!("bad '{k}'"))) };
        let (c, l) = get("input")?.split_once('x').ok_or_else(|| Error::Format("bad input shape".into()))?;
        let input = Shape::new(
            c.parse().map_err(|_| Error::Format("bad input channels".into()))?,
            l.parse().map_err(|_| Error::Format("bad input length".into()))?,
        );
        let layers = get("layers")?.split(',').map(LayerSpec::from_token).collect::<Result<Vec<_>>>()?;
        let names: Vec<&str> = get("labels")?.split(',').collect();
        let labels = LabelLayout::from_names(&names)?;
        let features = FeatureKind::parse(get("features")?)?;
        let provenance = Provenance {
            dataset: get("dataset")?.to_string(),
            seed: num("seed")?,
            lr: get("lr")?.parse().map_err(|_| Error::Format("bad 'lr'".into()))?,
            batch: num("batch")? as usize,
            epochs: num("epochs")? as usize,
        };
        let mut blobs = Vec::new();
        for item in get("blobs")?.split(',') {
            let (name, n) = item.split_once(':').ok_or_else(|| Error::Format(format!("bad blob entry '{item}'")))?;
            let n: usize = n.parse().map_err(|_| Error::Format(format!("bad blob size '{item}'")))?;
            let end = pos + 8 * n;
            if end > bytes.len() {
                return Err(Error::Format(format!("blob '{name}' truncated")));
            }
            blobs.push((name.to_string(), decode_f64s(&bytes[pos..end])?));
            pos = end;
        }
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after blobs".into()));
        }
        let mut take = |name: &str| -> Result<Vec<f64>> {
            let i = blobs
                .iter()
                .position(|b| b.0 == name)
                .ok_or_else(|| Error::Format(format!("missing blob '{name}'")))?;
            Ok(blobs.swap_remove(i).1)
        };
        let network = Network::from_params(ModelSpec { input, layers }, take("params")?)?;
        let feature_scaler = Scaler { mean: take("feature_mean")?, std: take("feature_std")? };
        let label_scaler = Scaler { mean: take("label_mean")?, std: take("label_std")? };
        let model = Self {
            arch: get("arch")?.to_string(),
            network,
            feature_scaler,
            label_scaler,
            labels,
            features,
            provenance,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let (fi, fo) = (self.network.input_size(), self.network.output_size());
        for (w, expected, what) in [
            (self.feature_scaler.mean.len(), fi, "feature mean"),
            (self.feature_scaler.std.len(), fi, "feature std"),
            (self.label_scaler.mean.len(), fo, "label mean"),
            (self.label_scaler.std.len(), fo, "label std"),
            (self.labels.width(), fo, "label layout"),
        ] {
            if w != expected {
                return Err(Error::Format(format!("{what} has width {w}, network expects {expected}")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Predict from raw (unstandardized) feature rows.
    pub fn predict(&self, rows: &[f64]) -> Result<Vec<Prediction>> {
        let w = self.network.input_size();
        if rows.is_empty() || !rows.len().is_multiple_of(w) {
            return Err(Error::ShapeMismatch { layer: 0, expected: w, got: rows.len() % w.max(1) });
        }
        let x = self.feature_scaler.transform(rows);
        let mut y = self.network.forward_batch(&x)?;
        self.label_scaler.inverse_in_place(&mut y);
        let off = self.labels.covariance_offset();
        Ok(y.chunks_exact(self.network.output_size())
            .map(|r| Prediction {
                labels: r.to_vec(),
                covariance: off.map(|o| {
                    let mut t = [0.0; 6];
                    t.copy_from_slice(&r[o..o + 6]);
                    tangent_to_covariance(&TangentVec(t))
                }),
            })
            .collect())
    }
}
