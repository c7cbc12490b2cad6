//! Command-line front end. Every subcommand prints one JSON document to stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::activations::{Activation, ActivationKind};
use crate::error::Error;
use crate::estimators::{
    estimate_activation_gradient, estimate_objective_telescoped, estimate_tanh_gradient, estimate_tanh_objective,
    ZetaFamily,
};
use crate::hamiltonians::{ModelFamily, ParamHamiltonian};
use crate::montecarlo::{Budget, Estimate};
use crate::observables::{finite_diff_gradient, Objective};
use crate::qlinalg::DensityMatrix;
use crate::singleshot::{run_shots, Neuron, NeuronCircuit};
use crate::thermo::{cross_entropy_estimate, cross_entropy_forms, log_partition_estimate, thermal_state};
use crate::training::{
    classification_protocol, classification_roster, compare_models, generate_dataset, random_target,
    regression_roster, standard_roster, validate_accuracy, ComparisonTrace, Loss, LossKind, Task, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(name = "qneuron", version, about = "Activation observables of parameterized qubit Hamiltonians")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; QNEURON_THREADS is used when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a quantum and a classical model on one dataset (needs --config).
    Train,
    /// Accuracy of a model Hamiltonian against a target on Haar-random states (needs --config).
    Validate,
    /// Run a hybrid estimator and compare with the exact value.
    Estimate(EstimateArgs),
    /// Fire a single-shot neuron repeatedly.
    Singleshot(SingleshotArgs),
    /// Compare exact gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Cross entropy and log-partition function of a thermal state.
    Xent(XentArgs),
    /// Binary-classification comparison of Heisenberg and fully connected Ising models.
    Table1(Table1Args),
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "tfim")]
    pub model: ModelFamily,
    /// Parameters are drawn uniformly from [−scale, scale].
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EstimatorKind {
    TanhGradient,
    TanhObjective,
    Gradient,
    Objective,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value = "tanh-gradient")]
    pub kind: EstimatorKind,
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value = "softplus")]
    pub act: ActivationKind,
    #[arg(long = "T", alias = "t", default_value_t = 1.0)]
    pub temperature: f64,
    /// Term index for gradient estimators.
    #[arg(long, default_value_t = 0)]
    pub term: usize,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Fixed trial count instead of the Hoeffding plan.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SingleshotArgs {
    #[arg(long)]
    pub neuron: Neuron,
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t2: f64,
    #[command(flatten)]
    pub instance: InstanceArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value = "tanh")]
    pub act: ActivationKind,
    #[arg(long = "T", alias = "t", default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum XentMode {
    Exact,
    Estimate,
}

#[derive(Debug, Args)]
pub struct XentArgs {
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: XentMode,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "heisenberg")]
    pub model: ModelFamily,
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub validation_states: usize,
}

/// Roster names accepted by `train`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Roster {
    Classification,
    Regression,
    Standard,
}

impl Roster {
    fn states(self, n: usize) -> Vec<DensityMatrix> {
        match self {
            Roster::Classification => classification_roster(n),
            Roster::Regression => regression_roster(n),
            Roster::Standard => standard_roster(n),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub family: ModelFamily,
    /// Drawn from U[−2,2] when absent.
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub quantum: ModelFamily,
    pub classical: ModelFamily,
}

/// Configuration of the `train` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainExperiment {
    pub n: usize,
    pub model: ModelSpec,
    pub target: TargetSpec,
    pub activation: Activation,
    pub loss: LossKind,
    pub states: Roster,
    #[serde(default)]
    pub config: TrainConfig,
    #[serde(default = "default_validation")]
    pub validation_states: usize,
}

fn default_validation() -> usize {
    500
}

/// Configuration of the `validate` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateExperiment {
    pub model: ParamHamiltonian,
    pub target: ParamHamiltonian,
    #[serde(rename = "T", default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_validation")]
    pub states: usize,
}

fn default_temperature() -> f64 {
    2.0
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(doc) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn thread_count(cli: &Cli) -> CliResult<Option<usize>> {
    if let Some(t) = cli.threads {
        return Ok(Some(t));
    }
    match std::env::var("QNEURON_THREADS") {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("QNEURON_THREADS = \"{v}\" is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run_cli(cli: &Cli) -> CliResult<Value> {
    let threads = thread_count(cli)?;
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
        return pool.install(|| dispatch(cli));
    }
    dispatch(cli)
}

fn dispatch(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Train => cmd_train(cli),
        Command::Validate => cmd_validate(cli),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Singleshot(a) => cmd_singleshot(cli, a),
        Command::Gradcheck(a) => cmd_gradcheck(cli, a),
        Command::Xent(a) => cmd_xent(cli, a),
        Command::Table1(a) => cmd_table1(cli, a),
    }
}

fn read_config<T: serde::de::DeserializeOwned>(cli: &Cli) -> CliResult<T> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("this subcommand needs --config PATH".into()))?;
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn out_dir(cli: &Cli) -> CliResult<Option<&Path>> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn write_json(dir: Option<&Path>, name: &str, doc: &Value) -> CliResult<()> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(doc).expect("serializable") + "\n";
        fs::write(&path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Writes `iteration,loss_q,loss_c` rows.
pub fn write_trace_csv(path: &Path, trace: &ComparisonTrace) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "loss_q", "loss_c"])?;
    for (i, q, c) in trace.rows() {
        w.write_record([i.to_string(), format!("{q:e}"), format!("{c:e}")])?;
    }
    w.flush()
}

fn random_instance(rng: &mut ChaCha8Rng, args: &InstanceArgs) -> CliResult<ParamHamiltonian> {
    if !(args.scale >= 0.0) || !args.scale.is_finite() {
        return Err(CliError::Config(format!("--scale {} is invalid", args.scale)));
    }
    let theta: Vec<f64> = (0..args.model.num_params(args.n))
        .map(|_| if args.scale == 0.0 { 0.0 } else { rng.random_range(-args.scale..=args.scale) })
        .collect();
    Ok(args.model.build(args.n, &theta)?)
}

fn estimate_json(e: &Estimate, exact: f64) -> Value {
    json!({
        "estimate": e.value,
        "stderr": e.stderr,
        "trials": e.trials,
        "bound": e.bound,
        "exact": exact,
        "abs_error": (e.value - exact).abs(),
    })
}

fn cmd_train(cli: &Cli) -> CliResult<Value> {
    let exp: TrainExperiment = read_config(cli)?;
    let mut config = exp.config;
    config.seed = cli.seed;
    config.validate()?;
    let n = exp.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let target = match &exp.target.zeta {
        Some(z) => exp.target.family.build(n, z)?,
        None => random_target(&mut rng, exp.target.family, n)?,
    };
    let task = match exp.loss {
        LossKind::Squared => Task::Regression,
        LossKind::Logistic => Task::Classification,
    };
    let label_act = match task {
        Task::Regression => exp.activation,
        Task::Classification => Activation::new(ActivationKind::Tanh, exp.activation.temperature)?,
    };
    let ds = generate_dataset(&target, &label_act, exp.states.states(n), task)?;
    let loss = Loss::new(exp.loss, exp.activation);
    let (trace, qm, cm) = compare_models(&ds, n, exp.model.quantum, exp.model.classical, &config, &loss)?;
    let accuracy = match task {
        Task::Classification => {
            let t = exp.activation.temperature;
            let mut vr = crate::densities::stream_rng(cli.seed, 3);
            let q = validate_accuracy(&mut vr, &qm, &target, t, exp.validation_states)?;
            let mut vr = crate::densities::stream_rng(cli.seed, 3);
            let c = validate_accuracy(&mut vr, &cm, &target, t, exp.validation_states)?;
            json!({"quantum": q, "classical": c})
        }
        Task::Regression => Value::Null,
    };
    let doc = json!({
        "seed": cli.seed,
        "n": n,
        "items": ds.len(),
        "final_loss_q": trace.quantum.final_loss(),
        "final_loss_c": trace.classical.final_loss(),
        "iterations_q": trace.quantum.losses.len(),
        "iterations_c": trace.classical.losses.len(),
        "validation_accuracy": accuracy,
        "theta_q": trace.quantum.theta,
        "theta_c": trace.classical.theta,
        "target": target,
    });
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let csv_path = dir.join("trace.csv");
    write_trace_csv(&csv_path, &trace)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", csv_path.display())))?;
    write_json(Some(&dir), "summary.json", &doc)?;
    Ok(doc)
}

fn cmd_validate(cli: &Cli) -> CliResult<Value> {
    let exp: ValidateExperiment = read_config(cli)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let acc = validate_accuracy(&mut rng, &exp.model, &exp.target, exp.temperature, exp.states)?;
    let doc = json!({"seed": cli.seed, "states": exp.states, "accuracy": acc});
    write_json(out_dir(cli)?, "validate.json", &doc)?;
    Ok(doc)
}

fn cmd_estimate(cli: &Cli, a: &EstimateArgs) -> CliResult<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let ph = random_instance(&mut rng, &a.instance)?;
    let rho = DensityMatrix::haar_random(&mut rng, ph.dim());
    let budget = match a.trials {
        Some(k) => Budget::Trials(k),
        None => Budget::Hoeffding {
            epsilon: a.epsilon,
            delta: a.delta,
        },
    };
    let seed = cli.seed.wrapping_add(1);
    let (est, exact) = match a.kind {
        EstimatorKind::TanhGradient | EstimatorKind::TanhObjective => {
            let act = Activation::new(ActivationKind::Tanh, a.temperature)?;
            let obj = Objective::new(ph.clone(), act, rho.clone())?;
            if matches!(a.kind, EstimatorKind::TanhGradient) {
                let e = estimate_tanh_gradient(seed, &ph, a.term, a.temperature, &rho, budget)?;
                (e, obj.gradient()?[a.term])
            } else {
                (estimate_tanh_objective(seed, &ph, a.temperature, &rho, budget)?, obj.value()?)
            }
        }
        EstimatorKind::Gradient | EstimatorKind::Objective => {
            let family = ZetaFamily::new(Activation::new(a.act, a.temperature)?, 1.0)?;
            let obj = Objective::new(ph.clone(), family.objective_activation(), rho.clone())?;
            if matches!(a.kind, EstimatorKind::Gradient) {
                let grad = obj.gradient()?;
                if a.term >= grad.len() {
                    return Err(CliError::Config(format!("--term {} out of range", a.term)));
                }
                (estimate_activation_gradient(seed, &ph, a.term, &family, &rho, budget)?, grad[a.term])
            } else {
                (estimate_objective_telescoped(seed, &ph, &family, &rho, budget)?, obj.value()?)
            }
        }
    };
    let doc = estimate_json(&est, exact);
    write_json(out_dir(cli)?, "estimate.json", &doc)?;
    Ok(doc)
}

fn cmd_singleshot(cli: &Cli, a: &SingleshotArgs) -> CliResult<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let ph = random_instance(&mut rng, &a.instance)?;
    let rho = DensityMatrix::haar_random(&mut rng, ph.dim());
    let circuit = NeuronCircuit::new(a.neuron, &ph, &ph.theta, a.t1, a.t2, &rho)?;
    let s = run_shots(cli.seed.wrapping_add(1), &circuit, a.shots)?;
    let doc = json!({
        "neuron": a.neuron,
        "shots": s.shots,
        "mean": s.mean,
        "stderr": s.stderr,
        "exact": s.exact,
    });
    write_json(out_dir(cli)?, "singleshot.json", &doc)?;
    Ok(doc)
}

fn cmd_gradcheck(cli: &Cli, a: &GradcheckArgs) -> CliResult<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let ph = random_instance(&mut rng, &a.instance)?;
    let rho = DensityMatrix::haar_random(&mut rng, ph.dim());
    let obj = Objective::new(ph, Activation::new(a.act, a.temperature)?, rho)?;
    let exact = obj.gradient()?;
    let fd = finite_diff_gradient(&obj, a.h)?;
    let max_diff = exact.iter().zip(&fd).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let doc = json!({
        "activation": obj.activation,
        "value": obj.value()?,
        "exact": exact,
        "finite_difference": fd,
        "max_abs_diff": max_diff,
        "pass": max_diff < 1e-6,
    });
    write_json(out_dir(cli)?, "gradcheck.json", &doc)?;
    Ok(doc)
}

fn cmd_xent(cli: &Cli, a: &XentArgs) -> CliResult<Value> {
    let args = InstanceArgs {
        n: a.n,
        model: a.model,
        scale: a.scale,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let ph = random_instance(&mut rng, &args)?;
    let eta = DensityMatrix::haar_random(&mut rng, ph.dim());
    let ts = thermal_state(&ph, &ph.theta)?;
    let forms = cross_entropy_forms(&eta, &ph, &ts)?;
    let mut doc = json!({
        "cross_entropy": forms.energy_form,
        "cross_entropy_log_form": forms.log_form,
        "log_partition": ts.log_z,
    });
    if matches!(a.mode, XentMode::Estimate) {
        let budget = Budget::Hoeffding {
            epsilon: a.epsilon,
            delta: a.delta,
        };
        let xe = cross_entropy_estimate(cli.seed.wrapping_add(1), &eta, &ph, budget)?;
        let lz = log_partition_estimate(cli.seed.wrapping_add(2), &ph, budget)?;
        doc["cross_entropy_estimate"] = estimate_json(&xe, forms.energy_form);
        doc["log_partition_estimate"] = estimate_json(&lz, ts.log_z);
    }
    write_json(out_dir(cli)?, "xent.json", &doc)?;
    Ok(doc)
}

fn cmd_table1(cli: &Cli, a: &Table1Args) -> CliResult<Value> {
    let config = TrainConfig {
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let r = classification_protocol(a.n, &config, a.validation_states)?;
    let doc = serde_json::to_value(&r).expect("serializable");
    let dir = out_dir(cli)?;
    write_json(dir, "table1.json", &doc)?;
    if let Some(dir) = dir {
        let path = dir.join("table1_trace.csv");
        write_trace_csv(&path, &r.trace).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(doc)
}
