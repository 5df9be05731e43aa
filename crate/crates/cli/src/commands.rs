//! Subcommand bodies. Each one resolves its configuration, calls the library, and writes files.

use std::fmt::Write as _;
use std::path::Path;

use fhn_core::dataset::HessianData;
use fhn_core::mcmc::{mh_sample, relative_frobenius};
use fhn_core::nn::{cnn, dnn, train, Shape, TrainMeta};
use fhn_core::spd::is_spd;
use fhn_core::{
    assemble_hessian, generate_dataset, noise, parameter_to_observation, phi_grid, posterior_covariance, simulate_fhn,
    survey_hessians, Dataset, DynParams, Error, EvalReport, FeatureKind, GenerateConfig, GridAxis, LabelLayout,
    LikelihoodConfig, Matrix3, ModelFile, ModelSpec, NoiseKind, NoiseSpec, PriorConfig, Result, RngStream, SimConfig,
    Split, SplitData, TrainConfig,
};

use crate::output::{create_dir, csv_row, parse_axis, parse_theta, write_provenance};
use crate::{
    Cli, Command, EvaluateArgs, GenerateArgs, HessianArgs, McmcArgs, ObservationArgs, PlotKind, SimArgs, TrainArgs,
};

const OBSERVATION_STREAM: u64 = 0;
const CHAIN_STREAM: u64 = 1;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Hessian(a) => hessian(cli, a),
        Command::McmcCheck(a) => mcmc_check(cli, a),
        Command::ExportPlots { kind } => export(cli, kind),
    }
}

fn sim_config(a: &SimArgs) -> Result<(SimConfig, LikelihoodConfig)> {
    let sim = SimConfig { tau: a.tau, n_t: a.n_t, ..SimConfig::default() };
    sim.validate()?;
    let like = a.gamma.map_or_else(LikelihoodConfig::default, |gamma| LikelihoodConfig { gamma });
    if !(like.gamma >= 0.0) {
        return Err(Error::Config("gamma must be non-negative".into()));
    }
    Ok((sim, like))
}

#[allow(clippy::too_many_arguments)]
fn survey_config(
    cli: &Cli,
    n: usize,
    noise: &str,
    hessian_data: &str,
    noise_pairs: usize,
    sim: &SimArgs,
    features: FeatureKind,
    labels: &str,
) -> Result<GenerateConfig> {
    let kind = NoiseKind::parse(noise)?;
    let mut cfg = GenerateConfig::new(n, features, kind, LabelLayout::parse(labels, kind)?, cli.seed);
    (cfg.sim, cfg.like) = sim_config(sim)?;
    cfg.hessian_data = HessianData::parse(hessian_data)?;
    cfg.noise_pairs = noise_pairs;
    cfg.threads = cli.threads;
    Ok(cfg)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let features = FeatureKind::parse(&a.features)?;
    let mut cfg = survey_config(cli, a.n, &a.noise, &a.hessian_data, a.noise_pairs, &a.sim, features, &a.labels)?;
    cfg.n_test = a.n_test.unwrap_or(cfg.n_test);
    cfg.n_val = a.n_val.unwrap_or(cfg.n_val);
    let d = generate_dataset(&cfg)?;
    create_dir(&a.out)?;
    d.save(&a.out)?;
    write_provenance(&a.out, "generate", cli.seed, cli.threads, a)?;
    let m = &d.manifest;
    println!(
        "samples={} kept={} negative_definite={} ill_conditioned={} failed={} retained_fraction={:.4}",
        m.n_samples,
        m.kept.total(),
        m.dropped.negative_definite,
        m.dropped.ill_conditioned,
        m.dropped.failed,
        m.retained_fraction()
    );
    Ok(())
}

fn model_spec(a: &TrainArgs, d: &Dataset) -> Result<ModelSpec> {
    let m = &d.manifest;
    let p = m.labels.width();
    Ok(match a.arch.as_str() {
        "cnn" => {
            let c = m.features.channels();
            cnn(Shape::new(c, m.feature_width / c), a.layers.unwrap_or(5), a.nf, p)
        }
        "dnn" => dnn(m.feature_width, a.layers.unwrap_or(12), a.nu, p),
        other => return Err(Error::Config(format!("unknown architecture '{other}'"))),
    })
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let d = Dataset::load(&a.data)?;
    let spec = model_spec(a, &d)?;
    println!(
        "arch={} input={}x{} outputs={} parameters={}",
        a.arch,
        spec.input.channels,
        spec.input.len,
        spec.output_size()?,
        spec.param_count()?
    );
    create_dir(&a.out)?;
    write_provenance(&a.out, "train", cli.seed, cli.threads, a)?;
    if a.dry_run {
        return Ok(());
    }
    let train_split = d.split(Split::Train, a.n_train);
    let (val, test) = (d.split(Split::Val, None), d.split(Split::Test, None));
    let monitors: Vec<(&str, &SplitData)> =
        [("val", &val), ("test", &test)].into_iter().filter(|(_, s)| !s.is_empty()).collect();
    let cfg = TrainConfig { lr: a.lr, batch: a.batch, epochs: a.epochs, seed: cli.seed };
    let meta = TrainMeta {
        arch: a.arch.clone(),
        labels: d.manifest.labels,
        features: d.manifest.features,
        dataset_digest: d.manifest.digest(),
    };
    let out = train(spec, &train_split, &monitors, &cfg, &meta)?;
    out.model.save(&a.out.join("model.fhn"))?;
    std::fs::write(a.out.join("history.csv"), out.history.to_csv())?;
    if let Some(last) = out.history.epochs.last() {
        let cols: Vec<String> = out.history.columns.iter().zip(last).map(|(c, v)| format!("{c}={v:.6}")).collect();
        println!("epochs={} steps={} {}", out.history.epochs.len(), out.optimizer_steps, cols.join(" "));
    }
    Ok(())
}

/// Model and the chosen split of a dataset, checked for compatible layouts.
fn load_pair(model: &Path, data: &Path, split: &str) -> Result<(ModelFile, SplitData)> {
    let model = ModelFile::load(model)?;
    let d = Dataset::load(data)?;
    if d.manifest.features != model.features || d.manifest.labels != model.labels {
        return Err(Error::Config(format!(
            "model expects {} features with labels {:?}, dataset has {} with {:?}",
            model.features.name(),
            model.labels.names(),
            d.manifest.features.name(),
            d.manifest.labels.names()
        )));
    }
    let s = d.split(Split::parse(split)?, None);
    if s.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((model, s))
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let (model, s) = load_pair(&a.model, &a.data, &a.split)?;
    let pred = model.predict(&s.features)?;
    let flat: Vec<f64> = pred.iter().flat_map(|p| p.labels.iter().copied()).collect();
    let report = EvalReport::new(model.labels, &flat, &s.labels)?;
    let mut text = format!("split={}\n", a.split);
    text += &report.to_text();
    if model.labels.covariance {
        let spd = pred.iter().filter(|p| p.covariance.as_ref().is_some_and(is_spd)).count();
        let _ = writeln!(text, "spd_covariances={spd}/{}", pred.len());
    }
    create_dir(&a.out)?;
    std::fs::write(a.out.join("report.txt"), &text)?;
    std::fs::write(a.out.join("report.csv"), report.to_csv())?;
    write_provenance(&a.out, "evaluate", cli.seed, cli.threads, a)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn hessian(cli: &Cli, a: &HessianArgs) -> Result<()> {
    let cfg = survey_config(cli, a.n, &a.noise, &a.hessian_data, a.noise_pairs, &a.sim, FeatureKind::Ts, "dyn,cov")?;
    let survey = survey_hessians(&cfg)?;
    let mut csv = String::from(
        "index,split,theta0,theta1,theta2,rho,sigma,beta,verdict,s1,s2,s3,asymmetry,\
         h00,h01,h02,h11,h12,h22,c00,c01,c02,c11,c12,c22\n",
    );
    const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    for (i, r) in survey.records.iter().enumerate() {
        let verdict = r.quality.map_or("failed", |q| q.verdict.name());
        let sv = r.quality.map_or([f64::NAN; 3], |q| q.singular_values);
        let asym = r.hessian.map_or(f64::NAN, |h| h.asymmetry);
        let h = UPPER.map(|ij| r.hessian.map_or(f64::NAN, |h| h.entries[ij]));
        let c = UPPER.map(|ij| r.covariance.map_or(f64::NAN, |c| c[ij]));
        let n = r.noise;
        let head = csv_row(r.params.to_array().into_iter().chain([n.rho, n.sigma, n.beta]));
        let tail = csv_row(sv.into_iter().chain([asym]).chain(h).chain(c));
        let _ = writeln!(csv, "{i},{},{head},{verdict},{tail}", r.split.name());
    }
    let summary = format!(
        "n_samples={}\naccepted={}\nnegative_definite={}\nill_conditioned={}\nfailed={}\nretained_fraction={:?}\n",
        survey.records.len(),
        survey.accepted(),
        survey.dropped.negative_definite,
        survey.dropped.ill_conditioned,
        survey.dropped.failed,
        survey.retained_fraction()
    );
    create_dir(&a.out)?;
    std::fs::write(a.out.join("hessians.csv"), csv)?;
    std::fs::write(a.out.join("summary.txt"), &summary)?;
    write_provenance(&a.out, "hessian", cli.seed, cli.threads, a)?;
    print!("{summary}");
    Ok(())
}

fn observation(obs: &ObservationArgs, sim: &SimConfig, seed: u64) -> Result<(DynParams, Vec<f64>)> {
    let p = DynParams::from_array(parse_theta(&obs.theta)?);
    p.validate()?;
    let spec = match obs.noise.as_str() {
        "none" => return Ok((p, parameter_to_observation(&p, sim)?)),
        other => match NoiseKind::parse(other)? {
            NoiseKind::Additive => NoiseSpec::additive(obs.rho, obs.sigma),
            NoiseKind::Intrinsic => NoiseSpec::intrinsic(obs.beta),
            NoiseKind::Combined => NoiseSpec::combined(obs.rho, obs.sigma, obs.beta),
        },
    };
    let y = noise::make_observation(&p, &spec, sim, &mut RngStream::new(seed, OBSERVATION_STREAM).rng())?;
    Ok((p, y))
}

fn matrix_row(m: &Matrix3<f64>) -> String {
    csv_row((0..9).map(|k| m[(k / 3, k % 3)]))
}

fn mcmc_check(cli: &Cli, a: &McmcArgs) -> Result<()> {
    let (sim, like) = sim_config(&a.sim)?;
    let prior = PriorConfig::default();
    let (p, y) = observation(&a.obs, &sim, cli.seed)?;
    let laplace = posterior_covariance(&assemble_hessian(&p, &y, &like, &prior, &sim)?)?.gamma;
    if !(a.proposal_factor >= 0.0) {
        return Err(Error::Config("proposal factor must be non-negative".into()));
    }
    let proposal = prior.sigma.map(|s| a.proposal_factor * s);
    let mut rng = RngStream::new(cli.seed, CHAIN_STREAM).rng();
    let chain = mh_sample(&p, &y, &like, &prior, &sim, a.samples, proposal, &mut rng)?;
    let empirical = chain.covariance();
    let rel = relative_frobenius(&empirical, &laplace);
    let mut csv = String::from("step,theta0,theta1,theta2\n");
    for (i, s) in chain.samples.iter().enumerate() {
        let _ = writeln!(csv, "{i},{}", csv_row(*s));
    }
    let summary = format!(
        "samples={}\nacceptance_rate={:?}\nmean={}\nlaplace_covariance={}\nmcmc_covariance={}\nrelative_frobenius={:?}\n",
        chain.samples.len(),
        chain.acceptance_rate,
        csv_row(chain.mean()),
        matrix_row(&laplace),
        matrix_row(&empirical),
        rel
    );
    create_dir(&a.out)?;
    std::fs::write(a.out.join("chain.csv"), csv)?;
    std::fs::write(a.out.join("summary.txt"), &summary)?;
    write_provenance(&a.out, "mcmc-check", cli.seed, cli.threads, a)?;
    print!("{summary}");
    Ok(())
}

fn export(cli: &Cli, kind: &PlotKind) -> Result<()> {
    let param_names = ["theta0", "theta1", "theta2"];
    match kind {
        PlotKind::Trajectory { obs, sim, out } => {
            let (cfg, _) = sim_config(sim)?;
            let (p, y) = observation(obs, &cfg, cli.seed)?;
            let traj = simulate_fhn(&p, &cfg)?;
            let mut csv = String::from("t,u,v,y\n");
            for j in 0..traj.len() {
                let obs = if j == 0 { String::new() } else { format!("{:?}", y[j - 1]) };
                let _ = writeln!(csv, "{},{obs}", csv_row([traj.time(j), traj.u[j], traj.v[j]]));
            }
            create_dir(out)?;
            std::fs::write(out.join("trajectory.csv"), csv)?;
            write_provenance(out, "export-plots trajectory", cli.seed, cli.threads, kind)
        }
        PlotKind::Landscape { obs, sim, x, y, out } => {
            let (cfg, like) = sim_config(sim)?;
            let (p, y_obs) = observation(obs, &cfg, cli.seed)?;
            let (xp, xv) = parse_axis(x)?;
            let (yp, yv) = parse_axis(y)?;
            let gx = GridAxis { param: xp, values: xv };
            let gy = GridAxis { param: yp, values: yv };
            let phi = phi_grid(&p, &gx, &gy, &y_obs, &like, &PriorConfig::default(), &cfg)?;
            let mut csv = format!("{},{},phi\n", param_names[xp], param_names[yp]);
            for (i, a) in gx.values.iter().enumerate() {
                for (j, b) in gy.values.iter().enumerate() {
                    let _ = writeln!(csv, "{}", csv_row([*a, *b, phi[i * gy.values.len() + j]]));
                }
            }
            create_dir(out)?;
            std::fs::write(out.join("landscape.csv"), csv)?;
            write_provenance(out, "export-plots landscape", cli.seed, cli.threads, kind)
        }
        PlotKind::Scatter { model, data, split, out } => {
            let (model, s) = load_pair(model, data, split)?;
            let pred = model.predict(&s.features)?;
            let names = model.labels.names();
            let header: Vec<String> = names.iter().flat_map(|n| [format!("{n}_true"), format!("{n}_pred")]).collect();
            let mut csv = format!("sample,{}\n", header.join(","));
            for (i, p) in pred.iter().enumerate() {
                let pairs = s.label_row(i).iter().zip(&p.labels).flat_map(|(t, q)| [*t, *q]);
                let _ = writeln!(csv, "{i},{}", csv_row(pairs));
            }
            create_dir(out)?;
            std::fs::write(out.join("scatter.csv"), csv)?;
            write_provenance(out, "export-plots scatter", cli.seed, cli.threads, kind)
        }
    }
}
