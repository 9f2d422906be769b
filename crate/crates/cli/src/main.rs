//! Command-line front end for the variational-inference experiments:
//! the ELBO/KL curve, gradient-ascent fits, gradient-estimator comparisons,
//! and amortized-encoder training, all emitting machine-readable output with
//! an explicit seed in the metadata.

mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{Cell, Format, Writer};
use parvi::amortize::{train_amortized, AmortizeConfig, Dataset, TrainStatus};
use parvi::estimators::{
    elbo_closed_form_grad, grad_reparam, grad_score_function, EstimatorConfig,
};
use parvi::model::GammaExpModel;
use parvi::optimize::{ascend, elbo_curve, GradEstimator, OptConfig, Schedule, StopReason};
use parvi::rng::RngState;
use parvi::varfam::{VariationalFamily, VariationalParams};
use parvi::Real;

#[derive(Parser)]
#[command(
    name = "parvi",
    version,
    about = "Parametric variational inference on the Gamma-Exponential reference model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ELBO, KL, and log evidence over a mu grid at fixed sigma
    ElboCurve(ElboCurveArgs),
    /// Fit the variational parameters by gradient ascent
    Fit(FitArgs),
    /// Compare stochastic gradient estimators against the analytic truth
    Gradcheck(GradcheckArgs),
    /// Train an amortized encoder on a dataset of observations
    Amortize(AmortizeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyArg {
    Lognormal,
    Normal,
}

impl FamilyArg {
    fn family(self) -> VariationalFamily {
        match self {
            FamilyArg::Lognormal => VariationalFamily::lognormal(),
            FamilyArg::Normal => VariationalFamily::normal(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EstimatorArg {
    ClosedForm,
    Reparam,
    Score,
}

impl EstimatorArg {
    fn estimator(self) -> GradEstimator {
        match self {
            EstimatorArg::ClosedForm => GradEstimator::ClosedForm,
            EstimatorArg::Reparam => GradEstimator::Reparameterized,
            EstimatorArg::Score => GradEstimator::ScoreFunction,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ScheduleArg {
    /// Constant for the closed form, inverse-sqrt decay for Monte Carlo
    Auto,
    Constant,
    InverseSqrt,
}

#[derive(Args, Serialize)]
struct ElboCurveArgs {
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    x_obs: f64,
    /// Fixed sigma of the lognormal variational posterior
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    mu_min: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    mu_max: f64,
    #[arg(long, default_value_t = 0.05)]
    mu_step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output path; "-" writes to stdout
    #[arg(long, short, default_value = "-")]
    output: String,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    x_obs: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Lognormal)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Reparam)]
    estimator: EstimatorArg,
    /// Initial mu
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu0: f64,
    /// Initial sigma
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,
    #[arg(long, default_value_t = 0.05)]
    step_size: f64,
    /// Monte Carlo samples per gradient step
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 5000)]
    max_steps: usize,
    /// Stop when the smoothed gradient norm falls below this
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Auto)]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, short, default_value = "-")]
    output: String,
}

#[derive(Args, Serialize)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    x_obs: f64,
    /// Grid of mu values (repeat the flag for more points)
    #[arg(long = "mu", default_values_t = [0.0], allow_negative_numbers = true)]
    mu: Vec<f64>,
    /// Grid of sigma values
    #[arg(long = "sigma", default_values_t = [0.5])]
    sigma: Vec<f64>,
    /// Monte Carlo samples per estimate
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Independent repetitions per estimator
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, short, default_value = "-")]
    output: String,
}

#[derive(Args, Serialize)]
struct AmortizeArgs {
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Dataset file, one positive decimal per line
    #[arg(long, conflicts_with = "generate")]
    data: Option<String>,
    /// Draw this many observations from the generative model instead
    #[arg(long)]
    generate: Option<usize>,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    batch_size: usize,
    /// Monte Carlo samples per local ELBO
    #[arg(long, default_value_t = 32)]
    samples: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.15)]
    step_size: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, short, default_value = "-")]
    output: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ElboCurve(args) => run_elbo_curve(args),
        Command::Fit(args) => run_fit(args),
        Command::Gradcheck(args) => run_gradcheck(args),
        Command::Amortize(args) => run_amortize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn meta_record<A: Serialize>(command: &str, seed: u64, args: &A) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": serde_json::to_value(args).expect("args serialize"),
    })
}

fn run_elbo_curve(args: ElboCurveArgs) -> Result<(), String> {
    if args.mu_step.is_nan() || args.mu_step <= 0.0 {
        return Err(format!("mu-step must be > 0, got {}", args.mu_step));
    }
    if args.mu_max < args.mu_min {
        return Err(format!(
            "mu-max {} is below mu-min {}",
            args.mu_max, args.mu_min
        ));
    }
    let model =
        GammaExpModel::new(args.alpha, args.beta, args.x_obs).map_err(|e| e.to_string())?;
    // constructing the parameters validates sigma before any work happens
    VariationalParams::new(args.mu_min, args.sigma).map_err(|e| e.to_string())?;
    let n = ((args.mu_max - args.mu_min) / args.mu_step + 1e-9).floor() as usize;
    let grid: Vec<Real> = (0..=n)
        .map(|i| args.mu_min + args.mu_step * i as f64)
        .collect();
    let points = elbo_curve(&model, &VariationalFamily::lognormal(), args.sigma, &grid)
        .map_err(|e| e.to_string())?;

    let mut w = Writer::open(&args.output, args.format).map_err(|e| e.to_string())?;
    w.meta(&meta_record("elbo-curve", args.seed, &args))
        .map_err(|e| e.to_string())?;
    let cols = ["mu", "elbo", "kl", "log_evidence"];
    w.header(&cols).map_err(|e| e.to_string())?;
    for p in &points {
        w.row(
            "point",
            &cols,
            &[
                Cell::Num(p.mu),
                Cell::Num(p.elbo),
                Cell::Num(p.kl),
                Cell::Num(p.log_evidence),
            ],
        )
        .map_err(|e| e.to_string())?;
    }
    w.finish().map_err(|e| e.to_string())
}

fn run_fit(args: FitArgs) -> Result<(), String> {
    let model =
        GammaExpModel::new(args.alpha, args.beta, args.x_obs).map_err(|e| e.to_string())?;
    let family = args.family.family();
    let start = VariationalParams::new(args.mu0, args.sigma0).map_err(|e| e.to_string())?;
    let mut cfg = OptConfig::new(args.estimator.estimator(), RngState::new(args.seed, 0));
    cfg.step_size = args.step_size;
    cfg.max_steps = args.max_steps;
    cfg.tolerance = args.tolerance;
    cfg.samples_per_step = args.samples;
    match args.schedule {
        ScheduleArg::Auto => {}
        ScheduleArg::Constant => cfg.schedule = Schedule::Constant,
        ScheduleArg::InverseSqrt => cfg.schedule = Schedule::InverseSqrtDecay,
    }
    let (best, trace) = ascend(&model, &family, start, &cfg).map_err(|e| e.to_string())?;

    let mut w = Writer::open(&args.output, args.format).map_err(|e| e.to_string())?;
    w.meta(&meta_record("fit", args.seed, &args))
        .map_err(|e| e.to_string())?;
    let cols = [
        "step",
        "mu",
        "sigma",
        "elbo",
        "elbo_se",
        "grad_mu",
        "grad_sigma",
        "grad_se_mu",
        "grad_se_sigma",
    ];
    w.header(&cols).map_err(|e| e.to_string())?;
    for s in &trace.steps {
        w.row(
            "step",
            &cols,
            &[
                Cell::Int(s.step as u64),
                Cell::Num(s.params.loc()),
                Cell::Num(s.params.scale()),
                Cell::Num(s.elbo.value),
                Cell::Num(s.elbo.standard_error),
                Cell::Num(s.grad.grad[0]),
                Cell::Num(s.grad.grad[1]),
                Cell::Num(s.grad.standard_error[0]),
                Cell::Num(s.grad.standard_error[1]),
            ],
        )
        .map_err(|e| e.to_string())?;
    }
    let (stop, stop_step) = match &trace.stop {
        StopReason::Converged { step } => ("converged".to_string(), *step as u64),
        StopReason::MaxSteps => ("max-steps".to_string(), cfg.max_steps as u64),
        StopReason::Failed { step, reason } => (format!("failed: {reason}"), *step as u64),
    };
    let final_elbo = trace.steps.last().map(|s| s.elbo.value).unwrap_or(f64::NAN);
    w.aux(
        "summary",
        &[
            ("mu", Cell::Num(best.loc())),
            ("sigma", Cell::Num(best.scale())),
            ("elbo", Cell::Num(final_elbo)),
            ("steps", Cell::Int(stop_step)),
            ("stop", Cell::Str(stop.clone())),
            ("seed", Cell::Int(args.seed)),
        ],
    )
    .map_err(|e| e.to_string())?;
    w.finish().map_err(|e| e.to_string())?;
    if matches!(trace.stop, StopReason::Failed { .. }) {
        return Err(format!("fit halted early ({stop})"));
    }
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<(), String> {
    if args.reps < 2 {
        return Err("reps must be at least 2".to_string());
    }
    let model =
        GammaExpModel::new(args.alpha, args.beta, args.x_obs).map_err(|e| e.to_string())?;
    let family = VariationalFamily::lognormal();

    let mut w = Writer::open(&args.output, args.format).map_err(|e| e.to_string())?;
    w.meta(&meta_record("gradcheck", args.seed, &args))
        .map_err(|e| e.to_string())?;
    let cols = [
        "estimator",
        "mu",
        "sigma",
        "mean_grad_mu",
        "mean_grad_sigma",
        "se_mu",
        "se_sigma",
        "var_mu",
        "var_sigma",
        "truth_mu",
        "truth_sigma",
    ];
    w.header(&cols).map_err(|e| e.to_string())?;

    for (grid_idx, (&mu, &sigma)) in args
        .mu
        .iter()
        .flat_map(|m| args.sigma.iter().map(move |s| (m, s)))
        .enumerate()
    {
        let params = VariationalParams::new(mu, sigma).map_err(|e| e.to_string())?;
        let truth = elbo_closed_form_grad(args.alpha, args.beta, args.x_obs, mu, sigma)
            .map_err(|e| e.to_string())?;
        for estimator in ["score-function", "reparameterized"] {
            let mut grads: Vec<[Real; 2]> = Vec::with_capacity(args.reps);
            for r in 0..args.reps {
                let rng =
                    RngState::new(args.seed, 0).block((grid_idx * args.reps + r) as u64);
                let cfg = EstimatorConfig::new(args.samples, rng).map_err(|e| e.to_string())?;
                let est = if estimator == "score-function" {
                    grad_score_function(&model, &family, params, &cfg)
                } else {
                    grad_reparam(&model, &family, params, &cfg)
                }
                .map_err(|e| e.to_string())?;
                grads.push(est.grad);
            }
            let n = args.reps as f64;
            let mut mean = [0.0_f64; 2];
            let mut var = [0.0_f64; 2];
            for c in 0..2 {
                mean[c] = grads.iter().map(|g| g[c]).sum::<f64>() / n;
                var[c] =
                    grads.iter().map(|g| (g[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0);
            }
            w.row(
                "estimate",
                &cols,
                &[
                    Cell::Str(estimator.to_string()),
                    Cell::Num(mu),
                    Cell::Num(sigma),
                    Cell::Num(mean[0]),
                    Cell::Num(mean[1]),
                    Cell::Num((var[0] / n).sqrt()),
                    Cell::Num((var[1] / n).sqrt()),
                    Cell::Num(var[0]),
                    Cell::Num(var[1]),
                    Cell::Num(truth[0]),
                    Cell::Num(truth[1]),
                ],
            )
            .map_err(|e| e.to_string())?;
        }
    }
    w.finish().map_err(|e| e.to_string())
}

fn run_amortize(args: AmortizeArgs) -> Result<(), String> {
    let rng = RngState::new(args.seed, 0);
    let data: Dataset<Real> = match (&args.data, args.generate) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read dataset {path}: {e}"))?;
            Dataset::parse(&text).map_err(|e| e.to_string())?
        }
        (None, Some(n)) => Dataset::generate(n, args.alpha, args.beta, rng.child(10))
            .map_err(|e| e.to_string())?,
        _ => return Err("exactly one of --data and --generate is required".to_string()),
    };
    let mut cfg = AmortizeConfig::<Real>::new(rng);
    cfg.hidden = args.hidden;
    cfg.batch_size = args.batch_size;
    cfg.samples = args.samples;
    cfg.epochs = args.epochs;
    cfg.step_size = args.step_size;
    let (_, trace, report) =
        train_amortized(&data, args.alpha, args.beta, &cfg).map_err(|e| e.to_string())?;

    let mut w = Writer::open(&args.output, args.format).map_err(|e| e.to_string())?;
    w.meta(&meta_record("amortize", args.seed, &args))
        .map_err(|e| e.to_string())?;
    for (epoch, loss) in trace.epoch_loss.iter().enumerate() {
        w.aux(
            "epoch",
            &[
                ("epoch", Cell::Int(epoch as u64)),
                ("mean_loss", Cell::Num(*loss)),
            ],
        )
        .map_err(|e| e.to_string())?;
    }
    let cols = ["x", "mu_pred", "sigma_pred", "mu_star", "sigma_star"];
    w.header(&cols).map_err(|e| e.to_string())?;
    for p in &report.points {
        w.row(
            "point",
            &cols,
            &[
                Cell::Num(p.x),
                Cell::Num(p.predicted.loc()),
                Cell::Num(p.predicted.scale()),
                Cell::Num(p.optimum.loc()),
                Cell::Num(p.optimum.scale()),
            ],
        )
        .map_err(|e| e.to_string())?;
    }
    let status = match &trace.status {
        TrainStatus::Completed => "completed".to_string(),
        TrainStatus::Diverged { epoch, reason } => {
            format!("diverged at epoch {epoch}: {reason}")
        }
    };
    w.aux(
        "amortization_gap",
        &[
            ("gap", Cell::Num(report.gap)),
            ("se", Cell::Num(report.gap_se)),
            ("status", Cell::Str(status.clone())),
        ],
    )
    .map_err(|e| e.to_string())?;
    w.finish().map_err(|e| e.to_string())?;
    if matches!(trace.status, TrainStatus::Diverged { .. }) {
        return Err(format!("training halted early ({status})"));
    }
    Ok(())
}
