//! The `stdf` command-line driver.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{bias_scale, delta, ranks, EstimatorConfig, EstimatorKind, StdfEstimator};
use crate::experiments::{qcurve, run_experiment};
use crate::io;
use crate::models::{sample, ModelParams, Sample, TailModel};
use crate::tail_probability::{failure_prob_known_margins, failure_prob_second_order, marginal_probs, PotMargins};

#[derive(Debug, Parser)]
#[command(name = "stdf", version, about = "Bias-corrected estimation of stable tail dependence functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample from a reference model.
    Sample(SampleArgs),
    /// Estimate the Pickands curve t -> L(1 - t, t) of a dataset.
    Estimate(EstimateArgs),
    /// Estimate the second-order index rho.
    Rho(RhoArgs),
    /// Estimate the Q-curve theta -> 1 / L(cos theta, sin theta).
    Qcurve(QcurveArgs),
    /// Run a Monte Carlo experiment described by a spec file.
    Experiment(ExperimentArgs),
    /// Estimate P(X > z1 or Y > z2).
    FailureProb(FailureArgs),
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// bpii, student, cauchy, gaussian, sym-logistic, archimax-logistic or archimax-mixed
    #[arg(long)]
    model: String,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(short = 'n', long = "size")]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Tuning {
    /// Fixed k of the empirical estimator.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    a: f64,
    #[arg(long, default_value_t = 0.4)]
    r: f64,
    /// Defaults to ceil(0.99 n).
    #[arg(long)]
    k_rho: Option<usize>,
    /// Defaults to n - 1.
    #[arg(long)]
    kappa: Option<usize>,
    /// Use this value of rho instead of estimating it.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long)]
    no_clamp: bool,
}

impl Tuning {
    fn config(&self, n: usize, grid: usize) -> Result<EstimatorConfig> {
        let mut c = EstimatorConfig::for_sample_size(n);
        if let Some(k) = self.k {
            c.k = k;
        }
        c.a = self.a;
        c.r = self.r;
        if let Some(k) = self.k_rho {
            c.k_rho = k;
        }
        if let Some(k) = self.kappa {
            c.kappa = k;
        }
        c.rho_override = self.rho;
        c.clamp = !self.no_clamp;
        c.grid = grid;
        c.validate(n)?;
        Ok(c)
    }

    /// `empirical` takes its `k` from `--k`.
    fn kind(&self, tag: &str, config: &EstimatorConfig) -> Result<EstimatorKind> {
        match tag {
            "empirical" => Ok(EstimatorKind::Empirical { k: config.k }),
            other => other.parse(),
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// empirical, ring-agg, tilde-agg, ring-agg-convex or empirical:K
    #[arg(long)]
    estimator: String,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, default_value_t = 30)]
    grid: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RhoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    a: f64,
    #[arg(long, default_value_t = 0.4)]
    r: f64,
    #[arg(long)]
    k_rho: Option<usize>,
    /// Evaluation point, comma separated; defaults to (1/2, ..., 1/2).
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct QcurveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    estimator: String,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, default_value_t = 30)]
    grid: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Per-replicate rows; overrides the spec file's `output`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Summary rows; overrides the spec file's `summary`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FailureArgs {
    #[arg(long)]
    input: PathBuf,
    /// Extreme levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    z: Vec<f64>,
    /// Known marginal exceedance probabilities, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "k_margin")]
    p: Option<Vec<f64>>,
    /// Number of upper order statistics for the POT margins.
    #[arg(long, default_value_t = 200)]
    k_margin: usize,
    #[arg(long, default_value = "ring-agg")]
    estimator: String,
    #[command(flatten)]
    tuning: Tuning,
    /// Add the second-order term, computed at `--k`.
    #[arg(long)]
    second_order: bool,
    /// Write the marginal GPD fits here (POT margins only).
    #[arg(long)]
    fits: Option<PathBuf>,
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn load_bivariate(path: &Path) -> Result<Sample> {
    io::load_dataset(path, Some(2))
}

fn run_sample(args: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let params = ModelParams {
        beta: args.beta,
        nu: args.nu,
        theta: args.theta,
        tau: args.tau,
        s: args.s,
    };
    let model = TailModel::from_tag(&args.model, &params)?;
    let s = sample(&model, args.n, args.seed)?;
    emit(&io::sample_csv(&s), args.output.as_deref(), out)
}

fn run_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_bivariate(&args.input)?;
    let config = args.tuning.config(data.n(), args.grid)?;
    let kind = args.tuning.kind(&args.estimator, &config)?;
    let r = ranks(&data)?;
    let est = StdfEstimator::new(&r, &config)?;
    let curve = est.pickands_curve(kind, args.grid)?;
    emit(&io::pickands_csv(&curve), args.output.as_deref(), out)
}

fn run_rho(args: &RhoArgs, out: &mut dyn Write) -> Result<()> {
    let data = io::load_dataset(&args.input, None)?;
    let mut config = EstimatorConfig::for_sample_size(data.n());
    config.a = args.a;
    config.r = args.r;
    if let Some(k) = args.k_rho {
        config.k_rho = k;
    }
    config.rho_point = args.x.clone();
    config.validate(data.n())?;
    let r = ranks(&data)?;
    let est = StdfEstimator::new(&r, &config)?;
    emit(&io::rho_csv(est.rho_estimate()), None, out)
}

fn run_qcurve(args: &QcurveArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_bivariate(&args.input)?;
    let config = args.tuning.config(data.n(), args.grid)?;
    let kind = args.tuning.kind(&args.estimator, &config)?;
    let r = ranks(&data)?;
    let est = StdfEstimator::new(&r, &config)?;
    let curve = qcurve(|x| est.evaluate(kind, x), args.grid)?;
    emit(&io::qcurve_csv(&curve), args.output.as_deref(), out)
}

fn run_experiment_cmd(args: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let file = io::load_spec(&args.spec)?;
    let result = run_experiment(&file.spec)?;
    let rows_path = args.output.clone().or(file.output);
    let summary_path = args.summary.clone().or(file.summary);
    if let Some(path) = &rows_path {
        io::write_experiment_csv(&result, path)?;
    }
    match &summary_path {
        Some(path) => io::write_summary_csv(&result, path),
        None => emit(&io::summary_csv(&result), None, out),
    }
}

fn run_failure(args: &FailureArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_bivariate(&args.input)?;
    if args.z.len() != data.d() {
        return Err(Error::arg(format!("--z needs {} levels, got {}", data.d(), args.z.len())));
    }
    let config = args.tuning.config(data.n(), 30)?;
    let kind = args.tuning.kind(&args.estimator, &config)?;
    let p = match &args.p {
        Some(p) => p.clone(),
        None => {
            let margins = PotMargins::fit(&data, args.k_margin)?;
            if let Some(path) = &args.fits {
                std::fs::write(path, io::gpd_fits_csv(margins.fits())).map_err(|e| Error::io(path, e))?;
            }
            marginal_probs(&margins, &args.z)?
        }
    };
    let r = ranks(&data)?;
    let est = StdfEstimator::new(&r, &config)?;
    let l = |x: &[f64]| est.evaluate(kind, x);
    let prob = if args.second_order {
        let rho = est.rho_used();
        let b = bias_scale(1.0, rho);
        failure_prob_second_order(&p, l, |w| delta(&r, config.k, b, w), config.k, data.n(), rho)?
    } else {
        failure_prob_known_margins(&p, l)?
    };
    let text = format!(
        "z1,z2,p1,p2,probability\n{},{},{},{},{}\n",
        io::format_num(args.z[0]),
        io::format_num(args.z[1]),
        io::format_num(p[0]),
        io::format_num(p[1]),
        io::format_num(prob)
    );
    emit(&text, None, out)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 1 on usage errors, 2 on
/// data, fit and I/O errors.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                1
            } else {
                let _ = out.write_all(text.as_bytes());
                0
            };
        }
    };
    let outcome = match &cli.command {
        Command::Sample(a) => run_sample(a, out),
        Command::Estimate(a) => run_estimate(a, out),
        Command::Rho(a) => run_rho(a, out),
        Command::Qcurve(a) => run_qcurve(a, out),
        Command::Experiment(a) => run_experiment_cmd(a, out),
        Command::FailureProb(a) => run_failure(a, out),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
