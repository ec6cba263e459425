use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hierlasso::{
    constrained_lasso_path, full_model, lambda_grid, plain_lasso_path, relaxed_lasso_path,
    select_by_validation, ConstraintKind, ConstraintSystem, Dataset, HasseDiagram, LassoPath, Model,
    PathMethod, PathOptions, WeightScheme,
};
use hierlasso_cli::{
    expand_design, run_benchmark, simulate_coincidence, simulate_prediction, timings_csv, BenchmarkConfig,
    CliError, ColumnScaling, RawTable, Scaling, SimulationConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "hierlasso", version, about = "Hierarchical constrained lasso for polynomial models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the immediate divisibility relations of a model.
    Relations {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the relations as JSON here instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the Hasse diagram of a model in DOT format.
    Hasse {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a lasso path and write `<out>.json` and `<out>.csv`.
    Path(FitArgs),
    /// Fit a path and pick the point with the lowest validation error.
    Select {
        #[command(flatten)]
        fit: FitArgs,
        /// Validation CSV with the same columns as the training data.
        #[arg(long)]
        valid: PathBuf,
    },
    /// Replicated simulation studies; reports are JSON.
    #[command(subcommand)]
    Simulate(Study),
    /// Time every solver on random hierarchical models; writes CSV.
    Benchmark {
        #[arg(long, default_value_t = 12)]
        scenarios: usize,
        #[arg(long, default_value_t = 3)]
        max_k: usize,
        #[arg(long, default_value_t = 5)]
        max_degree: u16,
        #[arg(long, default_value_t = 10.0)]
        weight_s: f64,
        #[arg(long, default_value_t = 0.1)]
        weight_w: f64,
        #[arg(long, default_value_t = 60)]
        lambdas: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Study {
    /// Prediction error of the S constrained lasso against the plain lasso.
    Prediction {
        #[command(flatten)]
        common: StudyArgs,
        /// Noise variances, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 1.0, 4.0])]
        noise: Vec<f64>,
        /// S weights, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0])]
        weights: Vec<f64>,
    },
    /// Agreement between relaxed and orthant selections on a smooth truth.
    Coincidence {
        #[command(flatten)]
        common: StudyArgs,
        /// Scenario size, 3 or 5 inputs.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
        noise: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
        weights: Vec<f64>,
    },
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    lambdas: usize,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    refit: OnOff,
    /// Column preprocessing; `off` fits no intercept.
    #[arg(long, value_enum, default_value_t = Standardize::Center)]
    standardize: Standardize,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Model JSON: `{"k": 3, "terms": [[1,0,0], ...]}`.
    #[arg(long, conflicts_with = "degree")]
    model: Option<PathBuf>,
    /// Use every term up to this degree instead of a model file.
    #[arg(long)]
    degree: Option<u16>,
    /// Number of inputs for `--degree` when no data file fixes it.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Response column; defaults to the last one.
    #[arg(long)]
    response: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    /// Hierarchy constraint: H, S, W or none.
    #[arg(long, default_value = "none")]
    constraint: ConstraintKind,
    /// Constraint weights: unit, count or const:<c>.
    #[arg(long, default_value = "unit")]
    weight: WeightScheme,
    #[arg(long, default_value_t = 60)]
    lambdas: usize,
    #[arg(long, value_enum, default_value_t = Method::Constrained)]
    method: Method,
    /// Ridge on the negative block of the relaxed problem.
    #[arg(long)]
    delta: Option<f64>,
    /// Column preprocessing; `off` fits no intercept.
    #[arg(long, value_enum, default_value_t = Standardize::On)]
    standardize: Standardize,
    /// Refit least squares on each point's active terms.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    refit: OnOff,
    /// Output prefix for `path`, or the JSON file for `select`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Standardize {
    On,
    Off,
    /// Center columns and response without rescaling.
    Center,
}

impl Standardize {
    fn scaling(self) -> Scaling {
        match self {
            Standardize::On => Scaling::Fit,
            Standardize::Off => Scaling::Raw,
            Standardize::Center => Scaling::Center,
        }
    }

    fn column_scaling(self) -> ColumnScaling {
        match self {
            Standardize::On => ColumnScaling::Standardize,
            Standardize::Off => ColumnScaling::Raw,
            Standardize::Center => ColumnScaling::Center,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Constrained,
    Relaxed,
    Plain,
}

fn input_err(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            if !contents.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

impl ModelArgs {
    fn load(&self, data_k: Option<usize>) -> Result<Model, CliError> {
        match (&self.model, self.degree) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| input_err(format!("{}: {e}", path.display())))
            }
            (None, Some(d)) => {
                let k = data_k
                    .or(self.k)
                    .ok_or_else(|| input_err("--degree needs --k or a data file"))?;
                Ok(full_model(k, d)?)
            }
            (None, None) => Err(input_err("give --model or --degree")),
        }
    }
}

struct Fit {
    train: Dataset,
    path: LassoPath,
}

impl FitArgs {
    fn fit(&self) -> Result<Fit, CliError> {
        let raw = RawTable::from_path(&self.data, self.response.as_deref())?;
        let model = self.model.load(Some(raw.k()))?;
        let scaling = self.standardize.scaling();
        let train = expand_design(&raw, &model, &scaling)?;
        let hasse = HasseDiagram::new(&model);
        let cs = ConstraintSystem::build(self.constraint, &hasse, &self.weight)?;
        let grid = lambda_grid(&train, self.lambdas)?;
        let opts = PathOptions {
            refit: self.refit.on(),
            delta: self.delta,
            ..PathOptions::default()
        };
        let path = match (self.method, self.constraint) {
            (Method::Plain, ConstraintKind::None) | (Method::Constrained, ConstraintKind::None) => {
                plain_lasso_path(&train, &grid, &opts)?
            }
            (Method::Plain, k) => {
                return Err(input_err(format!("--method plain takes no constraints, got {k}")));
            }
            (Method::Constrained, _) => constrained_lasso_path(&train, &cs, &grid, &opts)?,
            (Method::Relaxed, _) => relaxed_lasso_path(&train, &cs, &grid, &opts)?,
        };
        Ok(Fit { train, path })
    }
}

fn cmd_path(args: &FitArgs) -> Result<(), CliError> {
    let prefix = args
        .out
        .as_ref()
        .ok_or_else(|| input_err("path needs --out <prefix>"))?;
    let Fit { path, .. } = args.fit()?;
    let json = path.to_json()?;
    let csv = path.to_wide_csv(false);
    let json_path = prefix.with_extension("json");
    let csv_path = prefix.with_extension("csv");
    write_file(&json_path, &json)?;
    write_file(&csv_path, &csv)?;

    let n = path.points.len();
    let count = |f: &dyn Fn(&hierlasso::PathPoint) -> bool| path.points.iter().filter(|p| f(p)).count();
    let lmax = path.points.last().map_or(0.0, |p| p.lambda);
    println!("method {}", method_name(path.method));
    println!("constraint {}", path.constraint.kind);
    println!("lambda_max {lmax}");
    println!("points {n}");
    println!("hierarchy_ok {}/{n}", count(&|p| p.hierarchy_ok));
    println!("constraints_ok {}/{n}", count(&|p| p.constraints_ok));
    if path.method == PathMethod::Relaxed {
        println!(
            "proxy_hierarchy_ok {}/{n}",
            count(&|p| p.relaxed.as_ref().is_some_and(|r| r.proxy_hierarchy_ok))
        );
        println!("non_complementary {}", path.stats.non_complementary);
    }
    println!("wrote {} {}", json_path.display(), csv_path.display());
    Ok(())
}

fn method_name(m: PathMethod) -> &'static str {
    match m {
        PathMethod::Constrained => "constrained",
        PathMethod::Relaxed => "relaxed",
        PathMethod::Plain => "plain",
    }
}

#[derive(Serialize)]
struct Selection<'a> {
    index: usize,
    lambda: f64,
    validation_mse: f64,
    active_terms: &'a [String],
    labels: &'a [String],
    coefficients: &'a [f64],
    /// Intercept and slopes on the original scale, when the columns were centered.
    #[serde(skip_serializing_if = "Option::is_none")]
    original_intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    original_coefficients: Option<Vec<f64>>,
}

fn cmd_select(args: &FitArgs, valid: &Path) -> Result<(), CliError> {
    let Fit { train, path } = args.fit()?;
    let raw = RawTable::from_path(valid, args.response.as_deref())?;
    let scaling = match train.standardization() {
        Some(st) => Scaling::Apply(st.clone()),
        None => Scaling::Raw,
    };
    let vds = expand_design(&raw, train.model(), &scaling)?;
    let use_refit = args.refit.on();
    let (index, pt) = select_by_validation(&path, &vds, use_refit)?;
    let coefs: &[f64] = match (&pt.refit_theta, use_refit) {
        (Some(r), true) => r,
        _ => &pt.theta,
    };
    let original = match train.standardization() {
        Some(st) => Some(st.to_original(coefs)?),
        None => None,
    };
    let sel = Selection {
        index,
        lambda: pt.lambda,
        validation_mse: vds.mse(coefs)?,
        active_terms: &pt.active_terms,
        labels: &path.labels,
        coefficients: coefs,
        original_intercept: original.as_ref().map(|o| o.0),
        original_coefficients: original.map(|o| o.1),
    };
    emit(args.out.as_deref(), &to_json(&sel)?)
}

fn study_config(mut cfg: SimulationConfig, c: &StudyArgs, noise: &[f64], weights: &[f64]) -> SimulationConfig {
    cfg.seed = c.seed;
    cfg.replications = c.reps;
    cfg.n_lambda = c.lambdas;
    cfg.use_refit = c.refit.on();
    cfg.scaling = c.standardize.column_scaling();
    cfg.noise_variances = noise.to_vec();
    cfg.weights = weights.to_vec();
    cfg
}

fn cmd_simulate(study: &Study) -> Result<(), CliError> {
    match study {
        Study::Prediction { common, noise, weights } => {
            let cfg = study_config(SimulationConfig::prediction_default(), common, noise, weights);
            let report = simulate_prediction(&cfg)?;
            for c in &report.cells {
                eprintln!(
                    "noise {} weight {}: S wins {}/{} ({:.3}, 95% CI {:.3}..{:.3}, p {:.4})",
                    c.noise_variance,
                    c.weight,
                    c.wins.successes,
                    c.wins.trials,
                    c.wins.estimate,
                    c.wins.ci_low,
                    c.wins.ci_high,
                    c.wins.p_value_above_half
                );
            }
            emit(common.out.as_deref(), &to_json(&report)?)
        }
        Study::Coincidence {
            common,
            k,
            noise,
            weights,
        } => {
            let cfg = study_config(SimulationConfig::coincidence_default(*k)?, common, noise, weights);
            let report = simulate_coincidence(&cfg)?;
            for c in &report.cells {
                eprintln!(
                    "noise {} weight {}: same terms {:.3}, same terms and signs {:.3}",
                    c.noise_variance, c.weight, c.terms_only.estimate, c.terms_and_signs.estimate
                );
            }
            emit(common.out.as_deref(), &to_json(&report)?)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Relations { model, out } => {
            let m = model.load(None)?;
            let hasse = HasseDiagram::new(&m);
            let pairs: Vec<(String, String)> = hasse
                .relations()
                .pairs(&m)
                .map(|(a, b)| (a.label(), b.label()))
                .collect();
            match out {
                Some(p) => write_file(&p, &to_json(&pairs)?),
                None => {
                    for (a, b) in pairs {
                        println!("{a} -> {b}");
                    }
                    Ok(())
                }
            }
        }
        Command::Hasse { model, out } => {
            let m = model.load(None)?;
            emit(out.as_deref(), &HasseDiagram::new(&m).export_dot())
        }
        Command::Path(args) => cmd_path(&args),
        Command::Select { fit, valid } => cmd_select(&fit, &valid),
        Command::Simulate(study) => cmd_simulate(&study),
        Command::Benchmark {
            scenarios,
            max_k,
            max_degree,
            weight_s,
            weight_w,
            lambdas,
            seed,
            out,
        } => {
            let cfg = BenchmarkConfig {
                seed,
                scenarios,
                max_k,
                max_degree,
                weight_s,
                weight_w,
                n_lambda: lambdas,
            };
            let rows = run_benchmark(&cfg)?;
            emit(out.as_deref(), &timings_csv(&rows)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hierlasso: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
