use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::json;

use super::args::{prepare, read_covariance, read_json, DataArgs, FiniteSampleArgs, ModelArgs, NoiseArgs, TrainArgs};
use super::{Cli, Command, Format, Outcome};
use crate::data::{generate_synthetic, split_indices, train_logistic, Standardizer, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fairness::{audit_reports, AuditOptions, BoundReport, Margins, MeasureKind, NoiseContext};
use crate::linmodel::LinearModel;
use crate::montecarlo::{coverage_check, sample_models, CoverageResult};
use crate::numerics::{DenseMatrix, SpdMatrix};
use crate::privacy::{
    auditing_posterior, calibrate_sigma, discrete_stationary_covariance, lyapunov_residual, noisy_gd_simulate,
    noisy_gd_stationary, GaussianPrior, NoisyGdConfig, PrivacyBudget, PriorScale,
};
use crate::{rng, SCHEMA_VERSION};

pub(crate) fn dispatch(cli: &Cli) -> Result<Outcome> {
    let out = Output {
        dir: cli.out_dir.as_deref(),
        format: cli.format,
    };
    match &cli.command {
        Command::Calibrate(a) => calibrate(a, &out),
        Command::Audit(a) => audit(a, cli.seed, &out),
        Command::Simulate(a) => simulate(a, cli.seed, &out),
        Command::Posterior(a) => posterior(a, cli.seed, &out),
        Command::NoisyGd(a) => noisy_gd(a, cli.seed, &out),
        Command::GenData(a) => gen_data(a, cli.seed, &out),
        Command::Train(a) => train(a, cli.seed, &out),
        Command::Split(a) => split_csv(a, cli.seed, &out),
    }
}

struct Output<'a> {
    dir: Option<&'a Path>,
    format: Format,
}

impl Output<'_> {
    fn path(&self, name: &str) -> Result<Option<PathBuf>> {
        match self.dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(dir.join(name)))
            }
            None => Ok(None),
        }
    }

    fn require_dir(&self, name: &str) -> Result<PathBuf> {
        self.path(name)?
            .ok_or_else(|| Error::config(format!("this command writes {name}; give --out-dir")))
    }

    /// Writes `name` under the output directory, or prints it.
    fn text(&self, name: &str, body: &str) -> Result<()> {
        match self.path(name)? {
            Some(p) => fs::write(p, body)?,
            None => print!("{body}"),
        }
        Ok(())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?)
        .map_err(|e| Error::config(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub sensitivity: f64,
}

fn calibrate(a: &CalibrateArgs, out: &Output) -> Result<Outcome> {
    let budget = PrivacyBudget::new(a.epsilon, a.delta, a.sensitivity)?;
    let cal = calibrate_sigma(&budget)?;
    match out.format {
        Format::Json => out.json(
            "calibration.json",
            &json!({
                "schema_version": SCHEMA_VERSION,
                "sigma": cal.sigma,
                "condition_value": cal.condition_value,
                "epsilon": a.epsilon,
                "delta": a.delta,
                "sensitivity": a.sensitivity,
            }),
        )?,
        Format::Csv => out.text(
            "calibration.csv",
            &csv_string(
                &["sigma", "condition_value", "epsilon", "delta", "sensitivity"],
                [vec![
                    cal.sigma.to_string(),
                    cal.condition_value.to_string(),
                    a.epsilon.to_string(),
                    a.delta.to_string(),
                    a.sensitivity.to_string(),
                ]],
            )?,
        )?,
    }
    Ok(Outcome::Ok)
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub finite: FiniteSampleArgs,
    /// Confidence parameter(s) zeta.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub zeta: Vec<f64>,
    /// Fairness measures to report; all by default.
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<MeasureKind>,
}

fn measures_or_all(m: &[MeasureKind]) -> Vec<MeasureKind> {
    if m.is_empty() {
        MeasureKind::ALL.to_vec()
    } else {
        m.to_vec()
    }
}

fn reports_csv(reports: &[BoundReport]) -> Result<String> {
    csv_string(
        &[
            "metric", "group", "epsilon", "delta", "sigma", "covariance", "zeta", "expected", "variance_bound",
            "lower", "upper", "lower_raw", "upper_raw", "finite_sample_t", "n", "warnings",
        ],
        reports.iter().map(|r| {
            vec![
                r.metric.clone(),
                r.group.clone(),
                opt(r.noise.epsilon),
                opt(r.noise.delta),
                r.noise.sigma.to_string(),
                r.noise.covariance.clone(),
                r.zeta.to_string(),
                r.expected.to_string(),
                opt(r.variance_bound),
                r.interval[0].to_string(),
                r.interval[1].to_string(),
                r.interval_raw[0].to_string(),
                r.interval_raw[1].to_string(),
                opt(r.finite_sample_t),
                r.n.to_string(),
                r.warnings.join("; "),
            ]
        }),
    )
}

fn audit(a: &AuditArgs, seed: u64, out: &Output) -> Result<Outcome> {
    let prepared = prepare(&a.data, &a.model, seed)?;
    let settings = a.noise.resolve(prepared.model.dim(), prepared.n_private)?;
    let options = AuditOptions {
        zetas: a.zeta.clone(),
        measures: measures_or_all(&a.measures),
        finite_sample: a.finite.options(),
    };
    let mut reports = Vec::new();
    for s in &settings {
        let ctx = NoiseContext::new(&s.noise, s.budget.as_ref());
        reports.extend(audit_reports(&prepared.model, &s.noise, &ctx, &prepared.audit_set, &options)?);
    }

    let covariance = a.noise.covariance(prepared.model.dim())?;
    let margins = Margins::compute(&prepared.model, &covariance, prepared.audit_set.examples())?;
    let alpha = margins.alpha();
    let margin_summary = json!({
        "min": alpha.iter().copied().fold(f64::INFINITY, f64::min),
        "max": alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "mean_abs": alpha.iter().map(|x| x.abs()).sum::<f64>() / alpha.len() as f64,
    });

    match out.format {
        Format::Json => out.json(
            "reports.json",
            &json!({
                "schema_version": SCHEMA_VERSION,
                "dataset": prepared.audit_set.summary(),
                "standardized": a.data.standardize,
                "model": prepared.model,
                "training": prepared.training,
                "margin_summary": margin_summary,
                "reports": reports,
            }),
        )?,
        Format::Csv => out.text("reports.csv", &reports_csv(&reports)?)?,
    }
    if let Some(path) = out.path("margins.csv")? {
        let body = csv_string(
            &["index", "group", "label", "angular_margin", "correct"],
            prepared.audit_set.examples().iter().enumerate().map(|(i, ex)| {
                vec![
                    i.to_string(),
                    ex.sensitive().to_string(),
                    i8::from(ex.label()).to_string(),
                    alpha[i].to_string(),
                    margins.correct()[i].to_string(),
                ]
            }),
        )?;
        fs::write(path, body)?;
    }
    Ok(Outcome::Ok)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Number of sampled private models.
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub zeta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<MeasureKind>,
}

fn simulate(a: &SimulateArgs, seed: u64, out: &Output) -> Result<Outcome> {
    if a.m < 100 {
        return Err(Error::config(format!("--m must be at least 100, got {}", a.m)));
    }
    let prepared = prepare(&a.data, &a.model, seed)?;
    let mut settings = a.noise.resolve(prepared.model.dim(), prepared.n_private)?;
    if settings.len() != 1 {
        return Err(Error::config("simulate takes a single --epsilon or --sigma"));
    }
    let s = settings.remove(0);
    let measures = measures_or_all(&a.measures);
    let options = AuditOptions {
        zetas: a.zeta.clone(),
        measures: measures.clone(),
        finite_sample: None,
    };
    let ctx = NoiseContext::new(&s.noise, s.budget.as_ref());
    let reports = audit_reports(&prepared.model, &s.noise, &ctx, &prepared.audit_set, &options)?;
    let run = sample_models(&prepared.model, &s.noise, &prepared.audit_set, &measures, a.m, seed)?;
    let mut results: Vec<CoverageResult> = Vec::new();
    for &z in &a.zeta {
        results.extend(coverage_check(&run, &reports, z)?);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.metric.as_str()).collect();

    match out.format {
        Format::Json => out.json(
            "coverage.json",
            &json!({
                "schema_version": SCHEMA_VERSION,
                "m": a.m,
                "base_seed": seed,
                "noise": ctx,
                "all_pass": failed.is_empty(),
                "results": results,
            }),
        )?,
        Format::Csv => out.text(
            "coverage.csv",
            &csv_string(
                &["metric", "zeta", "nominal", "coverage", "standard_error", "threshold", "pass"],
                results.iter().map(|r| {
                    vec![
                        r.metric.clone(),
                        r.zeta.to_string(),
                        r.nominal.to_string(),
                        r.coverage.to_string(),
                        r.standard_error.to_string(),
                        r.threshold.to_string(),
                        r.pass.to_string(),
                    ]
                }),
            )?,
        )?,
    }
    if let Some(path) = out.path("samples.csv")? {
        run.write_csv(path)?;
    }
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::CheckFailed(format!("coverage below threshold for {}", failed.join(", "))))
    }
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    /// Released private model JSON.
    #[arg(long)]
    pub private_model: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Prior mean; zeros by default.
    #[arg(long, value_delimiter = ',')]
    pub prior_mean: Vec<f64>,
    /// Prior variance scale eta^2; the flat prior when absent.
    #[arg(long, conflicts_with = "uniform_prior")]
    pub prior_variance: Option<f64>,
    /// Flat prior (the eta^2 -> infinity limit).
    #[arg(long)]
    pub uniform_prior: bool,
    /// Prior shape matrix A as JSON rows or a diagonal list; identity by default.
    #[arg(long)]
    pub prior_shape: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub zeta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<MeasureKind>,
}

fn posterior(a: &PosteriorArgs, seed: u64, out: &Output) -> Result<Outcome> {
    let released = LinearModel::from_json_file(&a.private_model)?;
    let p = released.dim();
    let has_data = a.data.data.is_some() || a.data.synthetic.is_some() || a.data.synth_n.is_some();
    let dataset = if has_data { Some(a.data.load(seed)?) } else { None };
    if a.noise.sigma.is_none() && a.noise.budget.delta.is_none() && dataset.is_none() {
        return Err(Error::config("give --delta (or a dataset for the 1/n^2 default) with --epsilon"));
    }
    let mut settings = a.noise.resolve(p, dataset.as_ref().map_or(0, |d| d.len()))?;
    if settings.len() != 1 {
        return Err(Error::config("posterior takes a single --epsilon or --sigma"));
    }
    let s = settings.remove(0);

    let mean = if a.prior_mean.is_empty() { vec![0.0; p] } else { a.prior_mean.clone() };
    let shape = match &a.prior_shape {
        Some(path) => read_covariance(path)?,
        None => SpdMatrix::identity(p),
    };
    let scale = match a.prior_variance {
        Some(eta2) => PriorScale::Variance(eta2),
        None => PriorScale::Uniform,
    };
    let prior = GaussianPrior::new(mean, scale, shape)?;
    let law = auditing_posterior(released.weights(), &s.noise, &prior)?;

    let reports = match &dataset {
        Some(d) => {
            let centre = LinearModel::new(law.mean.clone())?;
            let swapped = law.as_noise(s.noise.sigma())?;
            let ctx = NoiseContext::new(&swapped, s.budget.as_ref());
            let options = AuditOptions {
                zetas: a.zeta.clone(),
                measures: measures_or_all(&a.measures),
                finite_sample: None,
            };
            Some(audit_reports(&centre, &swapped, &ctx, d, &options)?)
        }
        None => None,
    };
    out.json(
        "posterior.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "posterior": law,
            "prior": prior,
            "noise": NoiseContext::new(&s.noise, s.budget.as_ref()),
            "reports": reports,
        }),
    )?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Args)]
pub struct NoisyGdArgs {
    /// Hessian as JSON rows or a diagonal list.
    #[arg(long)]
    pub hessian: Option<PathBuf>,
    /// Diagonal Hessian given inline.
    #[arg(long, value_delimiter = ',', conflicts_with = "hessian")]
    pub hessian_diagonal: Vec<f64>,
    /// Minimizer; zeros by default.
    #[arg(long, value_delimiter = ',')]
    pub theta_star: Vec<f64>,
    /// Starting point; the minimizer by default.
    #[arg(long, value_delimiter = ',')]
    pub theta0: Vec<f64>,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    /// Discarded leading iterations; a tenth of the steps by default.
    #[arg(long)]
    pub burn_in: Option<usize>,
}

/// `max |E - A| / max |A|` over all entries.
fn max_relative_deviation(empirical: &DenseMatrix, analytic: &DenseMatrix) -> Result<f64> {
    let scale = analytic.max_abs();
    let diff = empirical.sub(analytic)?.max_abs();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

fn noisy_gd(a: &NoisyGdArgs, seed: u64, out: &Output) -> Result<Outcome> {
    let hessian = match (&a.hessian, a.hessian_diagonal.is_empty()) {
        (Some(path), _) => read_covariance(path)?,
        (None, false) => SpdMatrix::diagonal(&a.hessian_diagonal)?,
        (None, true) => return Err(Error::config("give --hessian or --hessian-diagonal")),
    };
    let p = hessian.dim();
    let theta_star = if a.theta_star.is_empty() { vec![0.0; p] } else { a.theta_star.clone() };
    let theta0 = if a.theta0.is_empty() { theta_star.clone() } else { a.theta0.clone() };
    let discrete = discrete_stationary_covariance(&hessian, a.eta, a.sigma)?;
    let analytic = noisy_gd_stationary(&theta_star, &hessian, a.eta, a.sigma)?;
    let config = NoisyGdConfig {
        theta0,
        theta_star,
        hessian: hessian.clone(),
        eta: a.eta,
        sigma: a.sigma,
        steps: a.steps,
        burn_in: a.burn_in.unwrap_or(a.steps / 10),
    };
    let stats = noisy_gd_simulate(&config, &mut rng::stream(seed))?;
    out.json(
        "noisy_gd.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "eta": a.eta,
            "sigma": a.sigma,
            "analytic": analytic,
            "discrete_covariance": discrete,
            "empirical": stats,
            "lyapunov_residual": lyapunov_residual(&analytic.covariance, &hessian, a.eta, a.sigma)?,
            "max_relative_deviation": max_relative_deviation(&stats.covariance, &analytic.covariance)?,
            "max_relative_deviation_discrete": max_relative_deviation(&stats.covariance, &discrete)?,
        }),
    )?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// JSON synthetic-population spec; overrides the two-group flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Proportion of group `a`.
    #[arg(long, default_value_t = 0.5)]
    pub proportion: f64,
    /// CSV destination; `data.csv` under --out-dir by default.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn gen_data(a: &GenDataArgs, seed: u64, out: &Output) -> Result<Outcome> {
    let spec = match &a.spec {
        Some(path) => read_json::<SyntheticSpec>(path)?,
        None => SyntheticSpec::two_groups(a.n, a.p, (a.proportion, 1.0 - a.proportion), a.separation, seed),
    };
    let dataset = generate_synthetic(&spec)?;
    let path = match &a.output {
        Some(p) => p.clone(),
        None => out.require_dir("data.csv")?,
    };
    crate::data::write_csv(&dataset, &path)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "path": path,
            "summary": dataset.summary(),
        }))?
    );
    Ok(Outcome::Ok)
}

#[derive(Debug, Args)]
pub struct TrainCmdArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Model JSON destination; `model.json` under --out-dir by default.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn train(a: &TrainCmdArgs, seed: u64, out: &Output) -> Result<Outcome> {
    let mut dataset = a.data.load(seed)?;
    let standardizer = a.data.standardize.then(|| Standardizer::fit(&dataset));
    if let Some(z) = &standardizer {
        dataset = z.apply(&dataset)?;
    }
    let fit = train_logistic(&dataset, &a.train.config())?;
    let path = match &a.output {
        Some(p) => Some(p.clone()),
        None => out.path("model.json")?,
    };
    if let Some(p) = &path {
        fit.model.to_json_file(p)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "weights": fit.model.weights(),
            "feature_names": dataset.feature_names(),
            "final_loss": fit.loss_history.last(),
            "gradient_norm": fit.gradient_norm,
            "iterations": fit.iterations_run,
            "standardizer": standardizer,
            "path": path,
        }))?
    );
    Ok(Outcome::Ok)
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

fn split_csv(a: &SplitArgs, seed: u64, out: &Output) -> Result<Outcome> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(&a.data)?;
    let header = reader.headers()?.clone();
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    let (train_idx, test_idx) = split_indices(records.len(), a.train_fraction, seed)?;
    for (name, idx) in [("train.csv", &train_idx), ("test.csv", &test_idx)] {
        let mut w = csv::Writer::from_path(out.require_dir(name)?)?;
        w.write_record(&header)?;
        for &i in idx.iter() {
            w.write_record(&records[i])?;
        }
        w.flush()?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "train": train_idx.len(),
            "test": test_idx.len(),
        }))?
    );
    Ok(Outcome::Ok)
}
