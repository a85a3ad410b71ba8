//! Argument parsing and subcommand dispatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use stoqmc_core::guiding::{builtin_guide, padded_guide, GuideSpec, RegularizedGuide};
use stoqmc_core::io::{ising_to_json, load_model};
use stoqmc_core::ising::{estimate_partition, estimate_tim_partition, partition_exact_enum, MAX_ENUM_SPINS};
use stoqmc_core::model::{protocol_params, GreenOperator, ProblemInstance, StoquasticHamiltonian, TimModel};
use stoqmc_core::oracle::{self, MAX_ORACLE_QUBITS};
use stoqmc_core::rng::{derive_seed, stream};
use stoqmc_core::stats::median;
use stoqmc_core::trotter::{
    map_to_classical, plan_trotter, plan_with_steps, tim_partition_exact, MAX_TRACE_QUBITS,
};
use stoqmc_core::walk::{
    amplified_acceptance, choose_start, default_lengths, estimate_acceptance, estimate_walk_acceptance,
    soundness_envelope, BranchingWalk, RunLimits, StartMode, WalkConfig, DEFAULT_OVERFLOW_C,
};
use stoqmc_core::{BasisState, Error};

use crate::report::Report;
use crate::suite::{self, SuiteOptions};

/// Exit status for validation and I/O errors.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for statistical diagnostics and failed suites.
pub const EXIT_STATISTICAL: i32 = 3;

/// Heuristic start-state probes when the oracle is out of reach.
const START_PROBES: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "stoqmc", version, about = "Guided projection Monte Carlo and TIM partition functions")]
pub struct Cli {
    /// Master seed; a random seed is drawn and logged when absent.
    #[arg(long, global = true, env = "STOQMC_SEED")]
    pub seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the verifier's acceptance probability for a witness.
    Verify(VerifyArgs),
    /// Acceptance over a range of λ_M (heuristic ground-energy scan).
    Sweep(SweepArgs),
    /// Exact spectrum, partition function and good set for small models.
    Oracle(OracleArgs),
    /// Estimate Z = tr e^{-H} of a ferromagnetic TIM.
    TimZ(TimZArgs),
    /// Estimate the partition function of a ferromagnetic classical Ising model.
    IsingZ(IsingZArgs),
    /// Map a TIM to its Trotterized classical Ising model.
    Map(MapArgs),
    /// Fuzz the Trotter error-operator bound on random symmetric pairs.
    TrotterCheck(TrotterCheckArgs),
    /// Run the acceptance suite on the bundled fixtures.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Defaults to the model file's `lambda_yes`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_yes: Option<f64>,
    /// Defaults to the model file's `lambda_no`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_no: Option<f64>,
    /// Witness energy; defaults to λ_yes.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_m: Option<f64>,
    /// `uniform`, `exact` or `product:p1,p2,...`.
    #[arg(long, default_value = "uniform")]
    pub guide: GuideSpec,
    /// Pad the guide with `2^{-n}` before regularizing.
    #[arg(long)]
    pub padded: bool,
    /// Witness bitstring, qubit 0 first; chosen automatically when absent.
    #[arg(long)]
    pub x_m: Option<String>,
    /// Walk length; defaults to ceil(c·n/Δ).
    #[arg(long = "L", alias = "steps")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma_max: Option<u64>,
    /// The constant c in the default walk length.
    #[arg(long, default_value_t = 1.0)]
    pub safety_c: f64,
    #[arg(long, default_value_t = DEFAULT_OVERFLOW_C)]
    pub overflow_c: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Independent rounds for the amplified acceptance report.
    #[arg(long, default_value_t = 1)]
    pub rounds: u32,
    /// Keep walking after extinction.
    #[arg(long)]
    pub no_early_exit: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_hi: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[arg(long, default_value = "uniform")]
    pub guide: GuideSpec,
    #[arg(long)]
    pub x_m: Option<String>,
    #[arg(long = "L", alias = "steps", default_value_t = 20)]
    pub steps: usize,
    /// Defaults to 10·L.
    #[arg(long)]
    pub gamma_max: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "uniform")]
    pub guide: GuideSpec,
    #[arg(long)]
    pub padded: bool,
    /// Reports ‖G‖ at this λ_M; defaults to the ground energy.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TimZArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
}

#[derive(Debug, Args)]
pub struct IsingZArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Plans r for this δ and floors fields at δ/n.
    #[arg(long, conflicts_with = "r")]
    pub delta: Option<f64>,
    /// Fixed number of Trotter layers instead of a planned one.
    #[arg(long)]
    pub r: Option<u64>,
    /// Also write the bare classical model, ready for `ising-z`.
    #[arg(long)]
    pub ising_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrotterCheckArgs {
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[arg(long, default_value_t = 16)]
    pub max_dim: usize,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    /// Reduced trials and repeats with looser bands.
    #[arg(long)]
    pub quick: bool,
}

/// What a subcommand produced.
pub struct Outcome {
    pub config: Value,
    pub result: Value,
    pub status: i32,
}

fn ok(config: Value, result: Value) -> Result<Outcome> {
    Ok(Outcome {
        config,
        result,
        status: 0,
    })
}

/// Maps an error to the documented exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_statistical() => EXIT_STATISTICAL,
        _ => EXIT_VALIDATION,
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify(_) => "verify",
        Command::Sweep(_) => "sweep",
        Command::Oracle(_) => "oracle",
        Command::TimZ(_) => "tim-z",
        Command::IsingZ(_) => "ising-z",
        Command::Map(_) => "map",
        Command::TrotterCheck(_) => "trotter-check",
        Command::Fixtures(_) => "fixtures",
    }
}

fn resolve_seed(cli: &Cli) -> u64 {
    match (cli.seed, &cli.command) {
        (Some(s), _) => s,
        (None, Command::Fixtures(_)) => suite::SUITE_SEED,
        (None, _) => {
            let s = rand::random();
            log::info!("no --seed or STOQMC_SEED given; using seed {s}");
            s
        }
    }
}

/// Runs the parsed command, writes the report and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    match run_inner(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn run_inner(cli: &Cli) -> Result<i32> {
    let seed = resolve_seed(cli);
    let start = Instant::now();
    let outcome = match cli.threads {
        Some(t) => {
            if t == 0 {
                bail!(Error::validation("threads", "must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .context("building the thread pool")?
                .install(|| dispatch(&cli.command, seed))?
        }
        None => dispatch(&cli.command, seed)?,
    };
    let mut config = outcome.config;
    if let Value::Object(m) = &mut config {
        m.insert("seed".into(), json!(seed));
        m.insert("threads".into(), json!(cli.threads));
    }
    let report = Report::new(command_name(&cli.command), config, outcome.result, start.elapsed().as_secs_f64());
    write_report(&report.to_json(), cli.output.as_deref())?;
    Ok(outcome.status)
}

fn write_report(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).with_context(|| format!("cannot write {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn dispatch(command: &Command, seed: u64) -> Result<Outcome> {
    match command {
        Command::Verify(a) => verify(a, seed),
        Command::Sweep(a) => sweep(a, seed),
        Command::Oracle(a) => oracle_cmd(a),
        Command::TimZ(a) => tim_z(a, seed),
        Command::IsingZ(a) => ising_z(a, seed),
        Command::Map(a) => map(a),
        Command::TrotterCheck(a) => trotter_check(a, seed),
        Command::Fixtures(a) => fixtures(a, seed),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn make_guide(h: &StoquasticHamiltonian, spec: &GuideSpec, padded: bool) -> Result<RegularizedGuide> {
    let mut base = builtin_guide(h, spec)?;
    if padded {
        base = padded_guide(&base)?;
    }
    Ok(RegularizedGuide::new(base))
}

/// Parses `--x-m`, or picks a start: oracle mode for small `n`, else heuristic.
fn resolve_start(
    h: &StoquasticHamiltonian,
    guide: &RegularizedGuide,
    given: Option<&str>,
    seed: u64,
) -> Result<(BasisState, &'static str)> {
    match given {
        Some(bits) if bits != "auto" => {
            let (x, len) = BasisState::parse(bits)?;
            if len != h.n() {
                bail!(Error::validation(
                    "x_m",
                    format!("expected {} bits, got {len}", h.n())
                ));
            }
            Ok((x, "given"))
        }
        _ => {
            let mut r = stream(derive_seed(seed, 0x5747), 0);
            if h.n() <= MAX_ORACLE_QUBITS {
                Ok((choose_start(h, guide, StartMode::Oracle, &mut r)?, "oracle"))
            } else {
                let mode = StartMode::Heuristic { probes: START_PROBES };
                Ok((choose_start(h, guide, mode, &mut r)?, "heuristic"))
            }
        }
    }
}

fn verify(a: &VerifyArgs, seed: u64) -> Result<Outcome> {
    let model = load_model(&a.model)?;
    let h = model.hamiltonian()?;
    let n = h.n();
    let (file_yes, file_no) = model.thresholds();
    let lambda_yes = a
        .lambda_yes
        .or(file_yes)
        .ok_or_else(|| Error::validation("lambda_yes", "not in the model file; pass --lambda-yes"))?;
    let lambda_no = a
        .lambda_no
        .or(file_no)
        .ok_or_else(|| Error::validation("lambda_no", "not in the model file; pass --lambda-no"))?;
    let instance = ProblemInstance::new(h, lambda_yes, lambda_no)?;
    let params = protocol_params(&instance)?;
    let h = &instance.hamiltonian;
    let guide = make_guide(h, &a.guide, a.padded)?;
    let (x_m, start_mode) = resolve_start(h, &guide, a.x_m.as_deref(), seed)?;
    let lambda_m = a.lambda_m.unwrap_or(lambda_yes);
    let (default_steps, _) = default_lengths(n, params.decision_gap, a.safety_c, a.overflow_c)?;
    let steps = a.steps.unwrap_or(default_steps);
    if steps == 0 {
        bail!(Error::validation("L", "must be at least 1"));
    }
    let gamma_max = a
        .gamma_max
        .unwrap_or_else(|| ((a.overflow_c * steps as f64).ceil() as u64).max(1));
    let mut config = WalkConfig::new(steps, gamma_max, lambda_m, x_m, seed, a.trials);
    config.early_exit = !a.no_early_exit;
    let estimate = estimate_acceptance(&instance, &guide, &config)?;
    let envelope = match guide.norm() {
        Ok(norm) => Some(soundness_envelope(n, norm, guide.value(x_m), params.decision_gap.clamp(0.0, 1.0), steps)?),
        Err(_) => None,
    };
    let config_json = json!({
        "model": path_str(&a.model),
        "lambda_yes": lambda_yes,
        "lambda_no": lambda_no,
        "lambda_m": lambda_m,
        "guide": a.guide.to_string(),
        "padded": a.padded,
        "x_m": x_m.to_bitstring(n),
        "x_m_source": start_mode,
        "L": steps,
        "gamma_max": gamma_max,
        "safety_c": a.safety_c,
        "overflow_c": a.overflow_c,
        "trials": a.trials,
        "rounds": a.rounds,
        "early_exit": config.early_exit,
    });
    let result = json!({
        "instance": { "n": n, "terms": h.terms().len(), "params": params },
        "p_hat": estimate.p_hat,
        "stderr": estimate.stderr,
        "verdicts": {
            "accept": estimate.accepted,
            "reject_overflow": estimate.overflow,
            "reject_extinct": estimate.extinct,
            "malformed_witness": estimate.malformed,
        },
        "amplified": { "rounds": a.rounds, "p": amplified_acceptance(estimate.p_hat, a.rounds) },
        "envelope": envelope,
        "per_step": estimate.per_step,
    });
    ok(config_json, result)
}

fn sweep(a: &SweepArgs, seed: u64) -> Result<Outcome> {
    if !(a.lambda_lo <= a.lambda_hi) || a.points == 0 {
        bail!(Error::validation(
            "lambda_lo",
            format!(
                "empty range [{}, {}] with {} points",
                a.lambda_lo, a.lambda_hi, a.points
            )
        ));
    }
    if a.steps == 0 {
        bail!(Error::validation("L", "must be at least 1"));
    }
    let h = load_model(&a.model)?.hamiltonian()?;
    let guide = make_guide(&h, &a.guide, false)?;
    let (x_m, start_mode) = resolve_start(&h, &guide, a.x_m.as_deref(), seed)?;
    let gamma_max = a.gamma_max.unwrap_or(10 * a.steps as u64);
    let limits = RunLimits {
        steps: a.steps,
        gamma_max: Some(gamma_max),
        early_exit: true,
    };
    let points = if a.lambda_lo == a.lambda_hi { 1 } else { a.points };
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let lambda_m = if points == 1 {
            a.lambda_lo
        } else {
            a.lambda_lo + (a.lambda_hi - a.lambda_lo) * i as f64 / (points - 1) as f64
        };
        let green = GreenOperator::for_hamiltonian(&h, lambda_m)?;
        let walk = BranchingWalk::new(&h, green, &guide)?;
        let est = estimate_walk_acceptance(&walk, x_m, &limits, a.trials, derive_seed(seed, i as u64))?;
        rows.push(json!({
            "lambda_m": lambda_m,
            "p_hat": est.p_hat,
            "stderr": est.stderr,
            "overflow_fraction": est.overflow as f64 / est.trials as f64,
            "extinct_fraction": est.extinct as f64 / est.trials as f64,
        }));
    }
    let config = json!({
        "model": path_str(&a.model),
        "lambda_lo": a.lambda_lo,
        "lambda_hi": a.lambda_hi,
        "points": points,
        "guide": a.guide.to_string(),
        "x_m": x_m.to_bitstring(h.n()),
        "x_m_source": start_mode,
        "L": a.steps,
        "gamma_max": gamma_max,
        "trials": a.trials,
    });
    let result = json!({
        "heuristic": true,
        "note": "no completeness guarantee: acceptance depends on the start string and on Γ_max",
        "rows": rows,
    });
    ok(config, result)
}

fn oracle_cmd(a: &OracleArgs) -> Result<Outcome> {
    let h = load_model(&a.model)?.hamiltonian()?;
    let n = h.n();
    let summary = oracle::spectrum(&h)?;
    let z = oracle::partition_from_eigenvalues(&summary.eigenvalues);
    let lambda_m = a.lambda_m.unwrap_or(summary.ground_energy);
    let green = GreenOperator::for_hamiltonian(&h, lambda_m)?;
    let guide = make_guide(&h, &a.guide, a.padded)?;
    let good = oracle::pi_and_good_set(&h, &guide)?;
    let start = choose_start(&h, &guide, StartMode::Oracle, &mut stream(0, 0))?;
    let gap = summary.eigenvalues.get(1).map(|e1| e1 - summary.ground_energy);
    let config = json!({
        "model": path_str(&a.model),
        "guide": a.guide.to_string(),
        "padded": a.padded,
        "lambda_m": lambda_m,
    });
    let result = json!({
        "n": n,
        "total_norm": h.total_norm(),
        "beta": green.beta,
        "ground_energy": summary.ground_energy,
        "spectral_gap": gap,
        "eigenvalues": summary.eigenvalues,
        "log_z": z.log_z,
        "z": z.z,
        "green_norm": green.norm_from_ground(summary.ground_energy),
        "ground_state": summary.ground_state,
        "pi": good.pi,
        "good_set": {
            "members": good.members.iter().map(|x| x.to_bitstring(n)).collect::<Vec<_>>(),
            "mass": good.mass,
            "overlap": good.overlap,
        },
        "start": start.to_bitstring(n),
    });
    ok(config, result)
}

fn check_repeats(repeats: u64) -> Result<()> {
    if repeats == 0 {
        bail!(Error::validation("repeats", "must be at least 1"));
    }
    Ok(())
}

/// Median of the logs plus every repeat's seed and value.
fn summarize_repeats(seed: u64, logs: &[f64]) -> Value {
    let mut sorted = logs.to_vec();
    let log_z = median(&mut sorted);
    json!({
        "log_Z": log_z,
        "Z": log_z.exp(),
        "repeats": logs
            .iter()
            .enumerate()
            .map(|(j, v)| json!({ "seed": derive_seed(seed, j as u64), "log_Z": v }))
            .collect::<Vec<_>>(),
    })
}

fn exact_comparison(estimate: f64, exact: f64) -> Value {
    json!({
        "log_Z": exact,
        "relative_error": ((estimate - exact).exp() - 1.0).abs(),
        "free_energy_error": (estimate - exact).abs(),
    })
}

fn tim_z(a: &TimZArgs, seed: u64) -> Result<Outcome> {
    check_repeats(a.repeats)?;
    let file_model = load_model(&a.model)?.tim()?;
    // The gauge conjugates H by a product of Z's, so tr e^{-H} is unchanged.
    let gauged = file_model.fields().iter().any(|&h| h < 0.0);
    let tim: TimModel = if gauged { file_model.stoquastic_gauge() } else { file_model };
    let estimates = (0..a.repeats)
        .map(|j| estimate_tim_partition(&tim, a.delta, derive_seed(seed, j)))
        .collect::<stoqmc_core::Result<Vec<_>>>()?;
    let logs: Vec<f64> = estimates.iter().map(|e| e.log_value()).collect();
    let mut result = summarize_repeats(seed, &logs);
    let first = &estimates[0];
    result["delta"] = json!(a.delta);
    result["combined_tolerance"] = json!(first.combined_tolerance);
    result["confidence"] = json!(first.estimate.confidence);
    result["diagnostics"] = serde_json::to_value(first)?;
    if tim.n() <= MAX_TRACE_QUBITS {
        let exact = tim_partition_exact(&tim)?.log_z;
        result["exact"] = exact_comparison(result["log_Z"].as_f64().unwrap_or(f64::NAN), exact);
    }
    let config = json!({
        "model": path_str(&a.model),
        "delta": a.delta,
        "repeats": a.repeats,
        "stoquastic_gauge": gauged,
    });
    ok(config, result)
}

fn ising_z(a: &IsingZArgs, seed: u64) -> Result<Outcome> {
    check_repeats(a.repeats)?;
    let model = load_model(&a.model)?.ising()?;
    let estimates = (0..a.repeats)
        .map(|j| estimate_partition(&model, a.delta, derive_seed(seed, j)))
        .collect::<stoqmc_core::Result<Vec<_>>>()?;
    let logs: Vec<f64> = estimates.iter().map(|e| e.log_value).collect();
    let mut result = summarize_repeats(seed, &logs);
    result["delta"] = json!(a.delta);
    result["confidence"] = json!(estimates[0].confidence);
    result["diagnostics"] = serde_json::to_value(&estimates[0].diagnostics)?;
    if model.num_spins() <= MAX_ENUM_SPINS {
        let exact = partition_exact_enum(&model)?;
        result["exact"] = exact_comparison(result["log_Z"].as_f64().unwrap_or(f64::NAN), exact);
    }
    let config = json!({
        "model": path_str(&a.model),
        "delta": a.delta,
        "repeats": a.repeats,
    });
    ok(config, result)
}

fn map(a: &MapArgs) -> Result<Outcome> {
    let tim = load_model(&a.model)?.tim()?;
    let mapping = match (a.delta, a.r) {
        (Some(delta), None) => map_to_classical(&tim, &plan_trotter(&tim, delta)?, Some(delta))?,
        (None, Some(r)) => map_to_classical(&tim, &plan_with_steps(&tim, r)?, None)?,
        _ => bail!(Error::validation("delta", "pass exactly one of --delta or --r")),
    };
    if let Some(path) = &a.ising_out {
        std::fs::write(path, ising_to_json(&mapping.ising) + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let config = json!({
        "model": path_str(&a.model),
        "delta": a.delta,
        "r": a.r,
        "ising_out": a.ising_out.as_deref().map(path_str),
    });
    let result = json!({
        "ising": serde_json::from_str::<Value>(&ising_to_json(&mapping.ising))?,
        "plan": mapping.plan,
        "interlayer": mapping.interlayer,
        "floor": mapping.floor,
    });
    ok(config, result)
}

fn trotter_check(a: &TrotterCheckArgs, seed: u64) -> Result<Outcome> {
    if a.max_dim < 2 {
        bail!(Error::validation("max_dim", "must be at least 2"));
    }
    let mut r = stream(seed, 0);
    let cases = (0..a.pairs)
        .map(|_| {
            let dim = rand::Rng::random_range(&mut r, 2..=a.max_dim);
            suite::error_operator_case(dim, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    let failing = cases.iter().filter(|c| !c.passed()).count();
    let config = json!({ "pairs": a.pairs, "max_dim": a.max_dim });
    let result = json!({
        "passed": failing == 0,
        "failing": failing,
        "max_norm_ratio": cases.iter().map(|c| c.norm_d / c.bound).fold(0.0, f64::max),
        "max_reconstruction_error": cases.iter().map(|c| c.reconstruction_error).fold(0.0, f64::max),
        "cases": cases,
    });
    Ok(Outcome {
        config,
        result,
        status: if failing == 0 { 0 } else { EXIT_STATISTICAL },
    })
}

fn fixtures(a: &FixturesArgs, seed: u64) -> Result<Outcome> {
    let options = SuiteOptions { seed, quick: a.quick };
    let report = suite::run_suite(options, |c| eprintln!("{}", c.line()));
    let status = if report.passed { 0 } else { EXIT_STATISTICAL };
    Ok(Outcome {
        config: json!({ "quick": a.quick }),
        result: serde_json::to_value(&report)?,
        status,
    })
}
