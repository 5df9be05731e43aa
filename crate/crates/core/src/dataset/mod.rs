//! Synthetic training data: prior draws, noisy observations, features, and labels.
//!
//! Every sample `i` draws from its own stream `(seed, i)`, so the data are
//! identical for any thread count. Splits are assigned by index before any
//! sample is dropped: test first, then validation, then training.

mod features;
mod manifest;
mod scaler;

pub use features::{extract, fourier_features, FeatureKind};
pub use manifest::sha256_hex;
pub use manifest::{DatasetManifest, DropCounts, SplitCounts, SCHEMA_VERSION};
pub use scaler::{standardize_features, Scaler, STD_FLOOR};

use std::path::Path;

use nalgebra::Matrix3;

use rand::Rng;
use rayon::prelude::*;

use crate::adjoint::{assemble_hessian, Hessian3};
use crate::binio::{read_f64s, write_f64s};
use crate::covariance::{posterior_covariance, screen_hessians, HessianQuality, Verdict};
use crate::error::{Error, Result};
use crate::noise::{make_observation, sample_additive_pair, NoiseKind, NoiseSpec, RngStream, BETA_LAW, MAX_REJECTIONS};
use crate::objective::{LikelihoodConfig, PriorConfig};
use crate::ode::{parameter_to_observation, DynParams, SimConfig};
use crate::spd::covariance_to_tangent;

/// Stream reserved for the shared pool of `(ρ, σ)` pairs.
pub const PAIR_POOL_STREAM: u64 = u64::MAX;

/// Default size of the shared `(ρ, σ)` pool.
pub const DEFAULT_NOISE_PAIRS: usize = 100;

/// Columns of `meta.bin`.
pub const META_COLUMNS: [&str; 12] =
    ["theta0", "theta1", "theta2", "rho", "sigma", "beta", "verdict", "s1", "s2", "s3", "split", "kept"];

/// Verdict column value for samples whose Hessian was not computed.
const VERDICT_NONE: f64 = -1.0;
/// Verdict column value for samples whose forward or Hessian solve failed.
const VERDICT_FAILED: f64 = 3.0;

/// Draw componentwise normals and reject draws outside the box.
pub fn sample_prior<R: Rng + ?Sized>(prior: &PriorConfig, rng: &mut R) -> Result<DynParams> {
    use rand_distr::{Distribution, StandardNormal};
    for _ in 0..MAX_REJECTIONS {
        let theta: [f64; 3] = std::array::from_fn(|k| {
            let z: f64 = StandardNormal.sample(rng);
            prior.mean[k] + prior.sigma[k] * z
        });
        let p = DynParams::from_array(theta);
        if prior.contains(&p) {
            return Ok(p);
        }
    }
    Err(Error::Bug(format!("{MAX_REJECTIONS} consecutive prior rejections")))
}

/// Which quantities make up the label vector, in the fixed order
/// `[θ0, θ1, θ2 | β | ρ, σ | vec(log Γ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelLayout {
    pub beta: bool,
    pub rho_sigma: bool,
    pub covariance: bool,
}

impl LabelLayout {
    pub const DYN_ONLY: LabelLayout = LabelLayout { beta: false, rho_sigma: false, covariance: false };

    /// From a comma list of `dyn`, `noise`, `cov`; `noise` expands to the
    /// parameters of the given noise model.
    pub fn parse(list: &str, noise: NoiseKind) -> Result<Self> {
        let mut layout = Self::DYN_ONLY;
        let mut has_dyn = false;
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "dyn" => has_dyn = true,
                "noise" => {
                    layout.beta = noise.has_intrinsic();
                    layout.rho_sigma = noise.has_additive();
                }
                "cov" => layout.covariance = true,
                _ => return Err(Error::Config(format!("unknown label group '{item}'"))),
            }
        }
        if !has_dyn {
            return Err(Error::Config("labels must include 'dyn'".into()));
        }
        Ok(layout)
    }

    pub fn width(&self) -> usize {
        3 + self.beta as usize + 2 * self.rho_sigma as usize + 6 * self.covariance as usize
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = vec!["theta0", "theta1", "theta2"];
        if self.beta {
            v.push("beta");
        }
        if self.rho_sigma {
            v.extend(["rho", "sigma"]);
        }
        if self.covariance {
            v.extend(["logcov0", "logcov1", "logcov2", "logcov3", "logcov4", "logcov5"]);
        }
        v
    }

    pub fn from_names(names: &[&str]) -> Result<Self> {
        let layout = LabelLayout {
            beta: names.contains(&"beta"),
            rho_sigma: names.contains(&"rho"),
            covariance: names.contains(&"logcov0"),
        };
        if layout.names() != names {
            return Err(Error::Format(format!("unrecognized label layout {names:?}")));
        }
        Ok(layout)
    }

    /// Offset of the six tangent entries, if present.
    pub fn covariance_offset(&self) -> Option<usize> {
        self.covariance.then(|| self.width() - 6)
    }

    /// Widths of the groups present, in order; sums to [`Self::width`].
    pub fn group_widths(&self) -> Vec<(&'static str, usize)> {
        let mut v = vec![("dyn", 3)];
        if self.beta {
            v.push(("beta", 1));
        }
        if self.rho_sigma {
            v.push(("rho_sigma", 2));
        }
        if self.covariance {
            v.push(("cov", 6));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split '{s}'"))),
        }
    }

    pub fn code(self) -> f64 {
        match self {
            Split::Train => 0.0,
            Split::Val => 1.0,
            Split::Test => 2.0,
        }
    }

    fn from_code(c: f64) -> Result<Self> {
        match c {
            0.0 => Ok(Split::Train),
            1.0 => Ok(Split::Val),
            2.0 => Ok(Split::Test),
            _ => Err(Error::Format(format!("unknown split code {c}"))),
        }
    }
}

/// Default `(n_test, n_val)` for `n` samples, proportional to 4000 : 2000 out of 15000.
pub fn default_split_sizes(n: usize) -> (usize, usize) {
    let n_test = (n as f64 * 4.0 / 15.0).round() as usize;
    let n_val = (n as f64 * 2.0 / 15.0).round() as usize;
    (n_test, n_val)
}

/// Observation used in the misfit term when the covariance label's Hessian is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HessianData {
    /// Noise-free `f(θ)`: `θ` is then the exact minimizer of the misfit.
    Clean,
    /// The sample's noisy observation.
    Noisy,
}

impl HessianData {
    pub fn name(self) -> &'static str {
        match self {
            HessianData::Clean => "clean",
            HessianData::Noisy => "noisy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(HessianData::Clean),
            "noisy" => Ok(HessianData::Noisy),
            _ => Err(Error::Config(format!("unknown Hessian data '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub n_samples: usize,
    pub n_test: usize,
    pub n_val: usize,
    pub features: FeatureKind,
    pub noise: NoiseKind,
    pub labels: LabelLayout,
    pub prior: PriorConfig,
    pub like: LikelihoodConfig,
    pub sim: SimConfig,
    pub seed: u64,
    /// Size of the shared `(ρ, σ)` pool; `0` draws a fresh pair per sample.
    pub noise_pairs: usize,
    pub hessian_data: HessianData,
    /// Worker threads; `0` means the rayon default.
    pub threads: usize,
}

impl GenerateConfig {
    pub fn new(n_samples: usize, features: FeatureKind, noise: NoiseKind, labels: LabelLayout, seed: u64) -> Self {
        let (n_test, n_val) = default_split_sizes(n_samples);
        Self {
            n_samples,
            n_test,
            n_val,
            features,
            noise,
            labels,
            prior: PriorConfig::default(),
            like: LikelihoodConfig::default(),
            sim: SimConfig::default(),
            seed,
            noise_pairs: DEFAULT_NOISE_PAIRS,
            hessian_data: HessianData::Clean,
            threads: 0,
        }
    }

    pub fn from_manifest(m: &DatasetManifest) -> Self {
        Self {
            n_samples: m.n_samples,
            n_test: m.counts.test,
            n_val: m.counts.val,
            features: m.features,
            noise: m.noise,
            labels: m.labels,
            prior: m.prior,
            like: m.like,
            sim: m.sim,
            seed: m.seed,
            noise_pairs: m.noise_pairs,
            hessian_data: m.hessian_data,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.prior.validate()?;
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.n_test + self.n_val > self.n_samples {
            return Err(Error::Config(format!(
                "n_test + n_val = {} exceeds n_samples = {}",
                self.n_test + self.n_val,
                self.n_samples
            )));
        }
        if self.features != FeatureKind::Ts && !self.sim.n_t.is_multiple_of(2) {
            return Err(Error::Config("Fourier features need an even n_t".into()));
        }
        if (self.labels.beta && !self.noise.has_intrinsic()) || (self.labels.rho_sigma && !self.noise.has_additive()) {
            return Err(Error::Config(format!(
                "label layout {:?} does not fit noise kind {}",
                self.labels,
                self.noise.name()
            )));
        }
        if !(self.like.gamma >= 0.0) {
            return Err(Error::Config("gamma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn split_of(&self, i: usize) -> Split {
        if i < self.n_test {
            Split::Test
        } else if i < self.n_test + self.n_val {
            Split::Val
        } else {
            Split::Train
        }
    }
}

/// Per-sample record kept for every generated sample, including dropped ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMeta {
    pub params: DynParams,
    pub noise: NoiseSpec,
    /// `None` when no Hessian was computed or the solve failed.
    pub verdict: Option<Verdict>,
    pub failed: bool,
    pub singular_values: [f64; 3],
    pub split: Split,
    pub kept: bool,
}

impl SampleMeta {
    fn to_row(self) -> [f64; 12] {
        let p = self.params;
        let verdict = match (self.failed, self.verdict) {
            (true, _) => VERDICT_FAILED,
            (false, None) => VERDICT_NONE,
            (false, Some(v)) => v.code() as f64,
        };
        let [s1, s2, s3] = self.singular_values;
        [
            p.theta0,
            p.theta1,
            p.theta2,
            self.noise.rho,
            self.noise.sigma,
            self.noise.beta,
            verdict,
            s1,
            s2,
            s3,
            self.split.code(),
            self.kept as u8 as f64,
        ]
    }

    fn from_row(r: &[f64], kind: NoiseKind) -> Result<Self> {
        let (verdict, failed) = match r[6] {
            VERDICT_NONE => (None, false),
            VERDICT_FAILED => (None, true),
            c if (0.0..=2.0).contains(&c) && c.fract() == 0.0 => (Some(Verdict::from_code(c as u8)?), false),
            c => return Err(Error::Format(format!("bad verdict code {c}"))),
        };
        Ok(Self {
            params: DynParams::new(r[0], r[1], r[2]),
            noise: NoiseSpec { kind, rho: r[3], sigma: r[4], beta: r[5] },
            verdict,
            failed,
            singular_values: [r[7], r[8], r[9]],
            split: Split::from_code(r[10])?,
            kept: r[11] == 1.0,
        })
    }
}

/// Kept samples as row-major feature and label matrices, plus metadata for all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub meta: Vec<SampleMeta>,
}

/// Contiguous view of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub feature_width: usize,
    pub label_width: usize,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.features.len() / self.feature_width.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_width..(i + 1) * self.feature_width]
    }

    pub fn label_row(&self, i: usize) -> &[f64] {
        &self.labels[i * self.label_width..(i + 1) * self.label_width]
    }
}

impl Dataset {
    pub fn feature_width(&self) -> usize {
        self.manifest.feature_width
    }

    pub fn label_width(&self) -> usize {
        self.manifest.labels.width()
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.feature_width()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Split of every stored row.
    pub fn row_splits(&self) -> Vec<Split> {
        self.meta.iter().filter(|m| m.kept).map(|m| m.split).collect()
    }

    /// Rows of `split` in generation order, truncated to the first `limit`.
    /// Prefixes of a larger dataset are therefore nested.
    pub fn split(&self, split: Split, limit: Option<usize>) -> SplitData {
        let (fw, lw) = (self.feature_width(), self.label_width());
        let mut out = SplitData { features: Vec::new(), labels: Vec::new(), feature_width: fw, label_width: lw };
        let rows = self.row_splits().into_iter().enumerate().filter(|(_, s)| *s == split).map(|(i, _)| i);
        for i in rows.take(limit.unwrap_or(usize::MAX)) {
            out.features.extend_from_slice(&self.features[i * fw..(i + 1) * fw]);
            out.labels.extend_from_slice(&self.labels[i * lw..(i + 1) * lw]);
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_f64s(&dir.join("features.bin"), &self.features)?;
        write_f64s(&dir.join("labels.bin"), &self.labels)?;
        let meta: Vec<f64> = self.meta.iter().flat_map(|m| m.to_row()).collect();
        write_f64s(&dir.join("meta.bin"), &meta)?;
        std::fs::write(dir.join("manifest"), self.manifest.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = DatasetManifest::parse(&std::fs::read_to_string(dir.join("manifest"))?)?;
        let features = read_f64s(&dir.join("features.bin"))?;
        let labels = read_f64s(&dir.join("labels.bin"))?;
        let meta_raw = read_f64s(&dir.join("meta.bin"))?;
        let rows = manifest.kept.total();
        if features.len() != rows * manifest.feature_width || labels.len() != rows * manifest.labels.width() {
            return Err(Error::Format(format!("data files do not match the manifest's {rows} rows")));
        }
        if meta_raw.len() != manifest.n_samples * META_COLUMNS.len() {
            return Err(Error::Format("meta.bin does not match the manifest's sample count".into()));
        }
        let meta = meta_raw
            .chunks_exact(META_COLUMNS.len())
            .map(|r| SampleMeta::from_row(r, manifest.noise))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, features, labels, meta })
    }
}

struct RawSample {
    params: DynParams,
    noise: NoiseSpec,
    features: Vec<f64>,
    hessian: Option<Hessian3>,
}

fn draw_noise<R: Rng + ?Sized>(cfg: &GenerateConfig, pool: &[(f64, f64)], rng: &mut R) -> Result<NoiseSpec> {
    let pair = |rng: &mut R| -> Result<(f64, f64)> {
        if pool.is_empty() {
            sample_additive_pair(rng)
        } else {
            Ok(pool[rng.random_range(0..pool.len())])
        }
    };
    Ok(match cfg.noise {
        NoiseKind::Additive => {
            let (rho, sigma) = pair(rng)?;
            NoiseSpec::additive(rho, sigma)
        }
        NoiseKind::Intrinsic => NoiseSpec::intrinsic(BETA_LAW.sample(rng)?),
        NoiseKind::Combined => {
            let (rho, sigma) = pair(rng)?;
            NoiseSpec::combined(rho, 0.5 * sigma, 0.5 * BETA_LAW.sample(rng)?)
        }
    })
}

/// `Ok(None)` marks a numerical failure of this sample; other errors abort the run.
fn generate_one(
    cfg: &GenerateConfig,
    pool: &[(f64, f64)],
    i: usize,
) -> Result<(DynParams, NoiseSpec, Option<RawSample>)> {
    let mut rng = RngStream::new(cfg.seed, i as u64).rng();
    let params = sample_prior(&cfg.prior, &mut rng)?;
    let noise = draw_noise(cfg, pool, &mut rng)?;
    let mut attempt = || -> Result<RawSample> {
        let y = make_observation(&params, &noise, &cfg.sim, &mut rng)?;
        let features = extract(&y, cfg.features)?;
        let hessian = if cfg.labels.covariance {
            let data = match cfg.hessian_data {
                HessianData::Clean => parameter_to_observation(&params, &cfg.sim)?,
                HessianData::Noisy => y.clone(),
            };
            Some(assemble_hessian(&params, &data, &cfg.like, &cfg.prior, &cfg.sim)?)
        } else {
            None
        };
        Ok(RawSample { params, noise, features, hessian })
    };
    match attempt() {
        Ok(s) => Ok((params, noise, Some(s))),
        Err(e) if e.is_numeric() => Ok((params, noise, None)),
        Err(e) => Err(e),
    }
}

fn labels_for(layout: &LabelLayout, s: &RawSample) -> Result<Vec<f64>> {
    let mut l = s.params.to_array().to_vec();
    if layout.beta {
        l.push(s.noise.beta);
    }
    if layout.rho_sigma {
        l.extend([s.noise.rho, s.noise.sigma]);
    }
    if layout.covariance {
        let h = s.hessian.as_ref().ok_or_else(|| Error::Bug("covariance label without Hessian".into()))?;
        l.extend(covariance_to_tangent(&posterior_covariance(h)?.gamma)?.0);
    }
    Ok(l)
}

fn run_samples(cfg: &GenerateConfig) -> Result<Vec<(DynParams, NoiseSpec, Option<RawSample>)>> {
    cfg.validate()?;
    let pool = if cfg.noise.has_additive() && cfg.noise_pairs > 0 {
        let mut rng = RngStream::new(cfg.seed, PAIR_POOL_STREAM).rng();
        (0..cfg.noise_pairs).map(|_| sample_additive_pair(&mut rng)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let run = || (0..cfg.n_samples).into_par_iter().map(|i| generate_one(cfg, &pool, i)).collect::<Result<Vec<_>>>();
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    }
}

pub fn generate_dataset(cfg: &GenerateConfig) -> Result<Dataset> {
    let raw = run_samples(cfg)?;

    let hessians: Vec<Hessian3> = raw.iter().filter_map(|(_, _, s)| s.as_ref().and_then(|s| s.hessian)).collect();
    let mut qualities = if cfg.labels.covariance && !hessians.is_empty() {
        screen_hessians(&hessians)?.into_iter()
    } else {
        Vec::new().into_iter()
    };

    let width = cfg.features.width(cfg.sim.n_t);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut meta = Vec::with_capacity(cfg.n_samples);
    let mut dropped = DropCounts::default();
    let mut kept = SplitCounts::default();
    for (i, (params, noise, sample)) in raw.into_iter().enumerate() {
        let split = cfg.split_of(i);
        let mut m = SampleMeta {
            params,
            noise,
            verdict: None,
            failed: sample.is_none(),
            singular_values: [f64::NAN; 3],
            split,
            kept: false,
        };
        if let Some(s) = sample {
            if cfg.labels.covariance {
                let q = qualities.next().ok_or_else(|| Error::Bug("screening result missing".into()))?;
                m.verdict = Some(q.verdict);
                m.singular_values = q.singular_values;
            }
            match m.verdict {
                Some(Verdict::NegativeDefinite) => dropped.negative_definite += 1,
                Some(Verdict::IllConditioned) => dropped.ill_conditioned += 1,
                _ => {
                    debug_assert_eq!(s.features.len(), width);
                    features.extend_from_slice(&s.features);
                    labels.extend(labels_for(&cfg.labels, &s)?);
                    m.kept = true;
                    kept.add(split);
                }
            }
        } else {
            dropped.failed += 1;
        }
        meta.push(m);
    }
    let manifest = DatasetManifest {
        schema: SCHEMA_VERSION,
        rng: RngStream::ALGORITHM.to_string(),
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        counts: SplitCounts { train: cfg.n_samples - cfg.n_test - cfg.n_val, val: cfg.n_val, test: cfg.n_test },
        sim: cfg.sim,
        features: cfg.features,
        feature_width: width,
        noise: cfg.noise,
        labels: cfg.labels,
        prior: cfg.prior,
        like: cfg.like,
        noise_pairs: if cfg.noise.has_additive() { cfg.noise_pairs } else { 0 },
        hessian_data: cfg.hessian_data,
        kept,
        dropped,
    };
    Ok(Dataset { manifest, features, labels, meta })
}

/// Hessian, screening verdict, and Laplace covariance of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianRecord {
    pub params: DynParams,
    pub noise: NoiseSpec,
    pub split: Split,
    /// `None` when the solve failed.
    pub hessian: Option<Hessian3>,
    pub quality: Option<HessianQuality>,
    /// Present for accepted samples.
    pub covariance: Option<Matrix3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSurvey {
    pub records: Vec<HessianRecord>,
    pub dropped: DropCounts,
}

impl HessianSurvey {
    pub fn accepted(&self) -> usize {
        self.records.iter().filter(|r| r.covariance.is_some()).count()
    }

    pub fn retained_fraction(&self) -> f64 {
        self.accepted() as f64 / self.records.len() as f64
    }
}

/// The per-sample Hessians that [`generate_dataset`] would compute for
/// covariance labels under `cfg`, with their screening verdicts.
pub fn survey_hessians(cfg: &GenerateConfig) -> Result<HessianSurvey> {
    let mut cfg = cfg.clone();
    cfg.labels.covariance = true;
    let raw = run_samples(&cfg)?;
    let hessians: Vec<Hessian3> = raw.iter().filter_map(|(_, _, s)| s.as_ref().and_then(|s| s.hessian)).collect();
    let mut qualities = if hessians.is_empty() { Vec::new() } else { screen_hessians(&hessians)? }.into_iter();
    let mut dropped = DropCounts::default();
    let mut records = Vec::with_capacity(raw.len());
    for (i, (params, noise, sample)) in raw.into_iter().enumerate() {
        let hessian = sample.and_then(|s| s.hessian);
        let quality = match hessian {
            Some(_) => Some(qualities.next().ok_or_else(|| Error::Bug("screening result missing".into()))?),
            None => None,
        };
        let covariance = match (quality.map(|q| q.verdict), &hessian) {
            (Some(Verdict::Accepted), Some(h)) => Some(posterior_covariance(h)?.gamma),
            (Some(Verdict::NegativeDefinite), _) => {
                dropped.negative_definite += 1;
                None
            }
            (Some(Verdict::IllConditioned), _) => {
                dropped.ill_conditioned += 1;
                None
            }
            _ => {
                dropped.failed += 1;
                None
            }
        };
        records.push(HessianRecord { params, noise, split: cfg.split_of(i), hessian, quality, covariance });
    }
    Ok(HessianSurvey { records, dropped })
}
