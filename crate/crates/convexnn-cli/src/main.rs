//! `convexnn`: command-line front end for training convex neural networks, running the
//! oracle and geometry routines, and reproducing the synthetic experiments.
//!
//! Every command writes CSV or JSON to `--out` (or standard output). Exit codes are 0 on
//! success, 2 for invalid input, 3 when an exact enumeration exceeds its budget and 4 when
//! an iterative solver does not converge.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use convexnn::bounds::{
    complexity_bound, rademacher_bound, rademacher_mc, table1_rates, BoundSpec, FunctionSpace,
    RateParams, Regime,
};
use convexnn::experiment::{run_adaptivity, synth_dataset, ExperimentConfig};
use convexnn::fw::{empirical_risk, fw_train, FwConfig, StepRule};
use convexnn::geometry::{ellipsoid_hausdorff, zonotope_hausdorff};
use convexnn::harmonics::{gamma2_ridge, spectrum, RidgeProfile, SpectrumMethod};
use convexnn::io::{
    geometry_from_json, load_dataset, load_model, model_to_json, parse_json, write_dataset_csv,
    Geometry,
};
use convexnn::kernels::{f2_estimate, kernel, kernel_mc, F2Method, KernelSpec};
use convexnn::oracle::DEFAULT_BUDGET;
use convexnn::relax::conic::AdmmSettings;
use convexnn::relax::{
    random_direction_scaling, solve_relaxation, RelaxationKind, RelaxationProblem, ScalingSolver,
};
use convexnn::{predict, Dataset, Error, Loss, OracleMethod, OracleProblem};

#[derive(Parser)]
#[command(
    name = "convexnn",
    version,
    about = "Convex single-hidden-layer neural networks"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON configuration file for commands that take one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV with columns x1..xd,y.
    #[arg(long)]
    data: PathBuf,
    /// Exponent `q` of the input norm (`inf` for the box).
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Input radius `R`; fitted to the data when omitted.
    #[arg(long)]
    radius: Option<f64>,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        load_dataset(&self.data, self.q, self.radius)
            .with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset from an experiment configuration.
    Synth {
        /// Number of samples.
        #[arg(long)]
        n: usize,
    },
    /// Train a model by conditional gradient and write it as JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Norm exponent of the input weights.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Variation-norm budget.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Number of iterations.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Loss: sq, logistic, hinge or smoothed-hinge:<eps>.
        #[arg(long, default_value = "sq")]
        loss: String,
        /// Step rule: harmonic, linesearch or fc.
        #[arg(long, default_value = "linesearch")]
        step_rule: String,
        /// Oracle: exact[:budget], restarts:<k>, surrogate[:reg] or kappa:<factor>.
        #[arg(long, default_value = "exact")]
        oracle: OracleMethod,
        /// Smoothing constant for the plain hinge.
        #[arg(long)]
        smoothing: Option<f64>,
        /// Optional path for the per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Predict with a saved model on the inputs of a dataset.
    Predict {
        /// Model JSON.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit the kernel ridge baseline and write predictions.
    F2 {
        #[command(flatten)]
        data: DataArgs,
        /// Activation exponent of the kernel.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Ridge parameter.
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        /// Number of random features; the closed-form kernel is used when omitted.
        #[arg(long)]
        features: Option<usize>,
        /// Dataset whose inputs are predicted; the training inputs when omitted.
        #[arg(long)]
        predict: Option<PathBuf>,
    },
    /// Solve one oracle step with the dataset labels as weights.
    Oracle {
        #[command(flatten)]
        data: DataArgs,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Norm exponent of the direction.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Oracle: exact[:budget], restarts:<k>, surrogate[:reg] or kappa:<factor>.
        #[arg(long, default_value = "exact")]
        oracle: OracleMethod,
    },
    /// Hausdorff distance between two zonotopes or two ellipsoids given as JSON.
    Hausdorff {
        /// First object.
        #[arg(long)]
        first: PathBuf,
        /// Second object.
        #[arg(long)]
        second: PathBuf,
        /// Work budget for zonotope enumeration.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: f64,
    },
    /// Evaluate the closed-form kernel, optionally against a Monte-Carlo estimate.
    Kernel {
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// First input, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Second input, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xp: Vec<f64>,
        /// Input radius.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Number of Monte-Carlo directions.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Funk-Hecke spectrum of the activation as CSV.
    Spectrum {
        /// Sphere dimension.
        #[arg(long)]
        d: usize,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Largest degree.
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        /// Method: quadrature, closed or fourier.
        #[arg(long, default_value = "closed")]
        method: SpectrumMethod,
    },
    /// RKHS norm of a ridge function from its harmonic expansion.
    Gamma2 {
        /// Profile: linear, abs, activation, legendre:<j> or poly:<c0,c1,...>.
        #[arg(long)]
        profile: String,
        /// Sphere dimension.
        #[arg(long)]
        d: usize,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Truncation degree.
        #[arg(long, default_value_t = 80)]
        kmax: usize,
    },
    /// Convex relaxation of the oracle step with the dataset labels as weights.
    Relax {
        #[command(flatten)]
        data: DataArgs,
        /// Relaxation: d, nd or sign.
        #[arg(long, default_value = "d")]
        kind: RelaxationKind,
        /// Iteration cap per solve.
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Residual tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Scaling of random-direction oracle values with n, as CSV.
    RelaxScaling {
        /// Solver: exact, d, nd or sign.
        #[arg(long, default_value = "exact")]
        solver: ScalingSolver,
        /// Input dimension.
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Sample sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        n_grid: Vec<usize>,
        /// Trials per sample size.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Iteration cap per relaxation solve.
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Residual tolerance of relaxation solves.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Uniform-deviation bound `4Gδ C(p,d,α) / √n`.
    Radbound {
        /// Lipschitz constant of the loss.
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        /// Variation-norm budget.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Sample size.
        #[arg(long)]
        n: usize,
        /// Norm exponent in [1, 2].
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Input dimension.
        #[arg(long)]
        d: usize,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Universal constant of the α = 0 case.
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
    },
    /// Monte-Carlo Rademacher complexity of the unit class on a dataset.
    Radmc {
        #[command(flatten)]
        data: DataArgs,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Norm exponent of the direction.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Number of sign vectors.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Oracle: exact[:budget], restarts:<k>, surrogate[:reg] or kappa:<factor>.
        #[arg(long, default_value = "exact")]
        oracle: OracleMethod,
    },
    /// Estimation rate of a function space under a weight constraint, up to constants.
    Rates {
        /// Function space: affine, projection-pursuit or multi-index.
        #[arg(long)]
        space: FunctionSpace,
        /// Regime: l2, l1 or step.
        #[arg(long)]
        regime: Regime,
        /// Sample size.
        #[arg(long)]
        n: f64,
        /// Input dimension.
        #[arg(long)]
        d: f64,
        /// Number of components.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Number of relevant coordinates.
        #[arg(long, default_value_t = 1.0)]
        sparsity: f64,
        /// Projection dimension.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Activation exponent.
        #[arg(long, default_value_t = 1)]
        alpha: u32,
    },
    /// Run the adaptivity experiment described by `--config`.
    Experiment {
        /// Optional path for per-replicate risks.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read_config(path: &Option<PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let config: ExperimentConfig = match path {
        Some(p) => {
            parse_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?
        }
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn load_geometry(path: &Path) -> anyhow::Result<Geometry> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(geometry_from_json(&text)?)
}

fn parse_profile(name: &str, d: usize) -> anyhow::Result<RidgeProfile> {
    let (head, arg) = name.split_once(':').unwrap_or((name, ""));
    Ok(match head {
        "linear" => RidgeProfile::linear(),
        "abs" => RidgeProfile::abs(),
        "activation" => {
            let alpha: u32 = if arg.is_empty() {
                1
            } else {
                arg.parse().context("activation exponent")?
            };
            RidgeProfile::activation(alpha)
        }
        "legendre" => RidgeProfile::legendre(arg.parse().context("legendre degree")?, d),
        "poly" => RidgeProfile::polynomial(
            arg.split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("coefficients")?,
        ),
        other => return Err(Error::InvalidArgument(format!("unknown profile {other:?}")).into()),
    })
}

fn predictions_csv(values: impl Iterator<Item = f64>) -> String {
    let mut s = String::from("prediction\n");
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth { n } => {
            let config = read_config(&cli.config)?;
            let ds = synth_dataset(&config, n, seed)?;
            let mut buf = Vec::new();
            write_dataset_csv(&ds, &mut buf)?;
            emit(&cli.out, &String::from_utf8(buf)?)
        }
        Command::Train {
            data,
            alpha,
            p,
            delta,
            steps,
            loss,
            step_rule,
            oracle,
            smoothing,
            trace,
        } => {
            let ds = data.load()?;
            let loss = Loss::parse(&loss)?;
            let mut config = FwConfig::new(alpha, p, delta, steps);
            config.step_rule = StepRule::parse(&step_rule)?;
            config.oracle = oracle.reseeded(seed);
            config.smoothing = smoothing;
            config.seed = seed;
            let (model, tr) = fw_train(&ds, &loss, &config)?;
            if let Some(path) = trace {
                fs::write(&path, tr.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!(
                "trained {} units, empirical risk {:.6e}",
                model.units().len(),
                empirical_risk(&model, &ds, &loss)
            );
            emit(&cli.out, &(model_to_json(&model) + "\n"))
        }
        Command::Predict { model, data } => {
            let model =
                load_model(&model).with_context(|| format!("loading {}", model.display()))?;
            let ds = data.load()?;
            let preds = ds
                .xs()
                .iter()
                .map(|x| predict(&model, x))
                .collect::<convexnn::Result<Vec<_>>>()?;
            emit(&cli.out, &predictions_csv(preds.into_iter()))
        }
        Command::F2 {
            data,
            alpha,
            lambda,
            features,
            predict: target,
        } => {
            let ds = data.load()?;
            let method = features.map_or(F2Method::ExactKernel, |m| F2Method::RandomFeatures { m });
            let f = f2_estimate(&ds, alpha, lambda, method, seed)?;
            let train_mse = ds
                .xs()
                .iter()
                .zip(ds.ys())
                .map(|(x, y)| (f.predict(x) - y).powi(2))
                .sum::<f64>()
                / ds.n() as f64;
            eprintln!("training mean squared error {train_mse:.6e}");
            let eval = match target {
                Some(path) => load_dataset(&path, data.q, Some(ds.radius()))
                    .with_context(|| format!("loading {}", path.display()))?,
                None => ds,
            };
            emit(
                &cli.out,
                &predictions_csv(eval.xs().iter().map(|x| f.predict(x))),
            )
        }
        Command::Oracle {
            data,
            alpha,
            p,
            oracle,
        } => {
            let ds = data.load()?;
            let zs = ds.lifted();
            let problem = OracleProblem::new(&zs, ds.ys(), alpha, p, ds.radius())?;
            let r = oracle.reseeded(seed).solve(&problem)?;
            emit(
                &cli.out,
                &pretty(&json!({
                    "v": r.unit.v(),
                    "value": r.value,
                    "sign": r.sign,
                    "status": r.status,
                    "kappa": r.kappa,
                    "diagnostic": r.diagnostic,
                })),
            )
        }
        Command::Hausdorff {
            first,
            second,
            budget,
        } => {
            let distance = match (load_geometry(&first)?, load_geometry(&second)?) {
                (Geometry::Zonotope(a), Geometry::Zonotope(b)) => {
                    zonotope_hausdorff(&a, &b, budget)?
                }
                (Geometry::Ellipsoid(a), Geometry::Ellipsoid(b)) => ellipsoid_hausdorff(&a, &b)?,
                _ => bail!(Error::InvalidArgument(
                    "both objects must be zonotopes or both ellipsoids".into()
                )),
            };
            emit(&cli.out, &pretty(&json!({ "distance": distance })))
        }
        Command::Kernel {
            alpha,
            x,
            xp,
            radius,
            mc,
        } => {
            if x.is_empty() || x.len() != xp.len() {
                bail!(Error::InvalidArgument(
                    "--x and --xp must be nonempty and of equal length".into()
                ));
            }
            let spec = KernelSpec::new(alpha, x.len(), radius)?;
            let value = kernel(&spec, &x, &xp);
            let mut out = json!({ "value": value });
            if let Some(m) = mc {
                let (est, se) = kernel_mc(&spec, &x, &xp, m, seed)?;
                out["monte_carlo"] = json!({ "estimate": est, "std_error": se, "samples": m });
            }
            emit(&cli.out, &pretty(&out))
        }
        Command::Spectrum {
            d,
            alpha,
            kmax,
            method,
        } => {
            let s = spectrum(d, alpha, kmax, method)?;
            let mut csv = String::from("k,lambda,provenance\n");
            for (k, (l, p)) in s.lambdas.iter().zip(&s.provenance).enumerate() {
                csv.push_str(&format!("{k},{l:e},{p}\n"));
            }
            emit(&cli.out, &csv)
        }
        Command::Gamma2 {
            profile,
            d,
            alpha,
            kmax,
        } => {
            let prof = parse_profile(&profile, d)?;
            let r = gamma2_ridge(&prof, d, alpha, kmax)?;
            emit(
                &cli.out,
                &pretty(&json!({
                    "profile": prof.label(),
                    "verdict": r.verdict,
                    "value": r.value,
                    "partial_sums": r.partial_sums,
                })),
            )
        }
        Command::Relax {
            data,
            kind,
            max_iter,
            tol,
        } => {
            let ds = data.load()?;
            let zs = ds.lifted();
            let problem = RelaxationProblem::new(&zs, ds.ys(), ds.radius(), kind)?;
            let sol = solve_relaxation(&problem, max_iter, tol)?;
            emit(&cli.out, &pretty(&serde_json::to_value(&sol)?))?;
            if !sol.diagnostics.converged {
                bail!(Error::NonConverged(format!(
                    "relaxation did not reach tolerance {tol} in {max_iter} iterations"
                )));
            }
            Ok(())
        }
        Command::RelaxScaling {
            solver,
            d,
            n_grid,
            trials,
            max_iter,
            tol,
        } => {
            let table = random_direction_scaling(
                solver,
                &n_grid,
                d,
                trials,
                seed,
                AdmmSettings { max_iter, tol },
            )?;
            emit(&cli.out, &table.to_csv())
        }
        Command::Radbound {
            g,
            delta,
            n,
            p,
            d,
            alpha,
            c0,
        } => {
            let spec = BoundSpec {
                g,
                delta,
                n,
                p,
                d,
                alpha,
                c0,
            };
            let bound = rademacher_bound(&spec)?;
            emit(
                &cli.out,
                &pretty(&json!({
                    "bound": bound,
                    "complexity_bound": complexity_bound(n, d, alpha, p, c0),
                })),
            )
        }
        Command::Radmc {
            data,
            alpha,
            p,
            trials,
            oracle,
        } => {
            let ds = data.load()?;
            let est = rademacher_mc(&ds, alpha, p, trials, &oracle, seed)?;
            emit(
                &cli.out,
                &pretty(&json!({
                    "estimate": est.estimate,
                    "std_error": est.std_error,
                    "trials": est.trials,
                    "complexity_bound": complexity_bound(ds.n(), ds.d(), alpha, p, 1.0),
                })),
            )
        }
        Command::Rates {
            space,
            regime,
            n,
            d,
            k,
            sparsity,
            s,
            alpha,
        } => {
            let rate = table1_rates(
                space,
                regime,
                &RateParams {
                    n,
                    d,
                    k,
                    sparsity,
                    s,
                    alpha,
                },
            )?;
            emit(
                &cli.out,
                &pretty(&json!({ "value": rate.value, "formula": rate.formula })),
            )
        }
        Command::Experiment { records } => {
            if cli.config.is_none() {
                bail!(Error::InvalidArgument("experiment needs --config".into()));
            }
            let config = read_config(&cli.config)?;
            let report = run_adaptivity(&config)?;
            if let Some(path) = records {
                fs::write(&path, report.records_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            emit(&cli.out, &report.to_csv())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::BudgetExceeded(_)) => 3,
        Some(Error::NonConverged(_) | Error::ToleranceNotMet(_)) => 4,
        Some(Error::NumericalFailure(_) | Error::ReductionFailed(_)) => 1,
        Some(_) => 2,
        None if err
            .chain()
            .any(|e| e.downcast_ref::<std::io::Error>().is_some()) =>
        {
            2
        }
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
