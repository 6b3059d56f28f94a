//! Subcommand argument types and implementations. Each command returns the
//! process exit code on success; hard failures bubble up as `CliError`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use l0logit::{
    choose_bigm, dual_certificate, gen_synthetic, integrality_gap, load_dense_csv,
    load_sparse_text, round_upper_bound, screen_card, screen_reg, solve_bigm_relaxation, solve_bnb,
    solve_card_relaxation, solve_reg_relaxation, BnbConfig, Branching, CsvOptions, Dataset,
    FeatureStatus, LossConvention, MipStatus, ProblemKind, ProblemSpec, SolverConfig,
    SyntheticConfig, VariableFixings,
};
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchOptions, Timing};
use crate::error::CliError;
use crate::records::{Problem, SweepConfig, SCHEMA_VERSION};

/// Solver toolkit for L0-L2 regularized and cardinality-constrained sparse
/// logistic regression: perspective relaxations, safe screening, and exact
/// branch-and-bound, plus a synthetic benchmark harness.
#[derive(Debug, Parser)]
#[command(name = "l0logit", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as dense CSV (plus a true-support sidecar)
    Gen(GenArgs),
    /// Solve the perspective relaxation and report the safe screening rules
    Screen(ScreenArgs),
    /// Solve one instance exactly by branch-and-bound
    Solve(SolveArgs),
    /// Run a benchmark sweep described by a JSON configuration file
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of features
    #[arg(long)]
    pub n: usize,
    /// Number of observations
    #[arg(long)]
    pub m: usize,
    /// Size of the generating support
    #[arg(long)]
    pub k: usize,
    /// Signal strength
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; the true support is written to `<path>.support`
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Exactly one of `--mu` (REG) and `--k` (CARD) selects the problem.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PenaltyArg {
    /// Per-feature sparsity price: solves the L0-penalized problem
    #[arg(long)]
    pub mu: Option<f64>,
    /// Cardinality budget: solves the cardinality-constrained problem
    #[arg(long)]
    pub k: Option<usize>,
}

impl PenaltyArg {
    fn spec(&self, gamma: f64) -> Result<ProblemSpec, CliError> {
        match (self.mu, self.k) {
            (Some(mu), None) => Ok(ProblemSpec::reg(gamma, mu)?),
            (None, Some(k)) => Ok(ProblemSpec::card(gamma, k)?),
            _ => Err(CliError::Usage(
                "exactly one of --mu and --k must be given".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// Dataset file (dense CSV; see --sparse)
    pub input: PathBuf,
    /// Ridge parameter gamma
    #[arg(long)]
    pub gamma: f64,
    #[command(flatten)]
    pub penalty: PenaltyArg,
    /// Loss normalization convention
    #[arg(long, value_enum, default_value_t = ConventionArg::Unnormalized)]
    pub convention: ConventionArg,
    /// Read the input as sparse text (`<label> <index>:<value> ...`)
    #[arg(long)]
    pub sparse: bool,
    /// Write the JSON report here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    /// Loss sums the per-observation terms (the default formulation)
    Unnormalized,
    /// Loss averages the per-observation terms (factor 1/m)
    Normalized,
}

impl ConventionArg {
    fn to_convention(self) -> LossConvention {
        match self {
            ConventionArg::Unnormalized => LossConvention::Unnormalized,
            ConventionArg::Normalized => LossConvention::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchingArg {
    MostFractional,
    Pseudocost,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Dataset file (dense CSV; see --sparse)
    pub input: PathBuf,
    /// Ridge parameter gamma
    #[arg(long)]
    pub gamma: f64,
    #[command(flatten)]
    pub penalty: PenaltyArg,
    /// Apply the safe screening rules at the root node
    #[arg(long, value_enum, default_value_t = OnOff::Off)]
    pub screen: OnOff,
    /// Loss normalization convention
    #[arg(long, value_enum, default_value_t = ConventionArg::Unnormalized)]
    pub convention: ConventionArg,
    /// Wall-clock limit for the exact solve, in seconds
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Node limit for the exact solve
    #[arg(long)]
    pub node_limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = BranchingArg::MostFractional)]
    pub branching: BranchingArg,
    /// Read the input as sparse text (`<label> <index>:<value> ...`)
    #[arg(long)]
    pub sparse: bool,
    /// Write the JSON report here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Sweep configuration (JSON)
    pub config: PathBuf,
    /// Override the config's output stem
    #[arg(short, long)]
    pub output: Option<String>,
    /// Worker threads (default: SLS_THREADS, then all logical cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// `none` blanks wall-clock fields so repeated runs are bit-identical
    #[arg(long, value_enum, default_value_t = TimingArg::Wall)]
    pub timing: TimingArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimingArg {
    Wall,
    None,
}

fn load_dataset(path: &Path, sparse: bool) -> Result<Dataset, CliError> {
    if sparse {
        Ok(load_sparse_text(path, None)?)
    } else {
        Ok(load_dense_csv(path, &CsvOptions::default())?)
    }
}

/// Prints a line to stdout, treating a closed pipe as success so that
/// `l0logit ... | head` does not turn into a failure.
fn print_line(line: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn emit(json: String, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => {
            std::fs::write(path, json + "\n")?;
            Ok(())
        }
        None => print_line(&json),
    }
}

fn problem_of(spec: &ProblemSpec) -> Problem {
    match spec.kind {
        ProblemKind::Reg { .. } => Problem::Reg,
        ProblemKind::Card { .. } => Problem::Card,
    }
}

fn status_counts(status: &[FeatureStatus]) -> (usize, usize) {
    let zero = status
        .iter()
        .filter(|&&s| s == FeatureStatus::FixedZero)
        .count();
    let one = status
        .iter()
        .filter(|&&s| s == FeatureStatus::FixedOne)
        .count();
    (zero, one)
}

/// What `gen` prints on success.
#[derive(Debug, Serialize, Deserialize)]
pub struct GenReport {
    pub schema_version: u32,
    pub seed: u64,
    pub num_features: usize,
    pub num_observations: usize,
    pub output: String,
    pub support_output: String,
}

pub fn cmd_gen(args: &GenArgs) -> Result<i32, CliError> {
    let cfg = SyntheticConfig::new(args.n, args.m, args.k, args.s, args.seed);
    let d = gen_synthetic(&cfg)?;
    l0logit::write_dense_csv(&d, &args.output, false)?;
    let support_path = PathBuf::from(format!("{}.support", args.output.display()));
    let mut support = String::new();
    if let Some(indices) = d.true_support() {
        for &j in indices {
            support.push_str(&j.to_string());
            support.push('\n');
        }
    }
    std::fs::write(&support_path, support)?;
    let report = GenReport {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        num_features: d.num_features(),
        num_observations: d.num_observations(),
        output: args.output.display().to_string(),
        support_output: support_path.display().to_string(),
    };
    print_line(&serde_json::to_string(&report)?)?;
    Ok(0)
}

/// JSON schema of the `screen` report. On a non-converged relaxation the
/// optional fields stay absent and the command exits with code 2.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScreenReport {
    pub schema_version: u32,
    pub problem: Problem,
    pub convention: LossConvention,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub num_features: usize,
    pub num_observations: usize,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Perspective relaxation optimum (the lower bound behind the rules).
    pub eta_relax: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tightness_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent_screened: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_zero: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_one: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<Vec<FeatureStatus>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_feature_margin: Option<Vec<f64>>,
}

pub fn cmd_screen(args: &ScreenArgs) -> Result<i32, CliError> {
    let spec = args
        .penalty
        .spec(args.gamma)?
        .with_convention(args.convention.to_convention());
    let d = load_dataset(&args.input, args.sparse)?;
    let (mu, k) = match spec.kind {
        ProblemKind::Reg { mu, .. } => (Some(mu), None),
        ProblemKind::Card { k, .. } => (None, Some(k)),
    };
    let free = VariableFixings::all_free(d.num_features());
    let relax_cfg = SolverConfig::default();
    let relax = match spec.kind {
        ProblemKind::Reg { .. } => solve_reg_relaxation(&d, &spec, &free, &relax_cfg)?,
        ProblemKind::Card { .. } => solve_card_relaxation(&d, &spec, &free, &relax_cfg)?,
    };

    let mut report = ScreenReport {
        schema_version: SCHEMA_VERSION,
        problem: problem_of(&spec),
        convention: spec.convention,
        gamma: args.gamma,
        mu,
        k,
        num_features: d.num_features(),
        num_observations: d.num_observations(),
        converged: relax.converged,
        iterations: relax.iterations,
        kkt_residual: relax.kkt_residual,
        eta_relax: relax.objective,
        eta_upper: None,
        dual_value: None,
        tightness_gap: None,
        percent_screened: None,
        fixed_zero: None,
        fixed_one: None,
        delta_k: None,
        delta_k1: None,
        status: None,
        per_feature_margin: None,
    };

    if !relax.converged {
        // Partial report, then the documented numerical-failure exit code.
        emit(
            serde_json::to_string_pretty(&report)?,
            args.output.as_deref(),
        )?;
        eprintln!(
            "error: relaxation did not converge (residual {:.3e}); partial report emitted",
            relax.kkt_residual
        );
        return Ok(2);
    }

    let cert = dual_certificate(&relax, &d, &spec)?;
    let ub = round_upper_bound(&relax, &d, &spec, true);
    let screen = match spec.kind {
        ProblemKind::Reg { gamma, mu } => screen_reg(&cert, &ub, gamma, mu)?,
        ProblemKind::Card { gamma, k } => screen_card(&cert, &ub, gamma, k)?,
    };
    let (zero, one) = status_counts(&screen.status);
    report.eta_upper = Some(ub.value);
    report.dual_value = Some(cert.dual_value);
    report.tightness_gap = Some(cert.tightness_gap);
    report.percent_screened = Some(screen.percent_screened());
    report.fixed_zero = Some(zero);
    report.fixed_one = Some(one);
    report.delta_k = screen.delta_k;
    report.delta_k1 = screen.delta_k1;
    report.status = Some(screen.status);
    report.per_feature_margin = Some(screen.per_feature_margin);
    emit(
        serde_json::to_string_pretty(&report)?,
        args.output.as_deref(),
    )?;
    Ok(0)
}

/// JSON schema of the `solve` report: the exact solution plus the
/// measurements a sweep would record for this single run.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub problem: Problem,
    pub input: String,
    pub convention: LossConvention,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub screened: bool,
    pub status: MipStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes_explored: usize,
    pub wall_time: f64,
    /// Indices of the selected features and their coefficients.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub eta_perspective: f64,
    pub eta_bigm: f64,
    pub big_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_perspective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_bigm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent_screened: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_zero: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_one: Option<usize>,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let spec = args
        .penalty
        .spec(args.gamma)?
        .with_convention(args.convention.to_convention());
    let d = load_dataset(&args.input, args.sparse)?;
    let (mu, k) = match spec.kind {
        ProblemKind::Reg { mu, .. } => (Some(mu), None),
        ProblemKind::Card { k, .. } => (None, Some(k)),
    };
    let free = VariableFixings::all_free(d.num_features());
    let relax_cfg = SolverConfig::default();
    let persp = match spec.kind {
        ProblemKind::Reg { .. } => solve_reg_relaxation(&d, &spec, &free, &relax_cfg)?,
        ProblemKind::Card { .. } => solve_card_relaxation(&d, &spec, &free, &relax_cfg)?,
    };
    let big_m = choose_bigm(&d, &spec);
    let bigm = solve_bigm_relaxation(&d, &spec, big_m, &free, &relax_cfg)?;

    // Screening percentages are cheap; report them whenever the rules apply.
    let mut percent_screened = None;
    let mut fixed_zero = None;
    let mut fixed_one = None;
    if persp.converged {
        let cert = dual_certificate(&persp, &d, &spec)?;
        let ub = round_upper_bound(&persp, &d, &spec, true);
        let screen = match spec.kind {
            ProblemKind::Reg { gamma, mu } => Some(screen_reg(&cert, &ub, gamma, mu)?),
            ProblemKind::Card { gamma, k } if k < d.num_features() => {
                Some(screen_card(&cert, &ub, gamma, k)?)
            }
            ProblemKind::Card { .. } => None,
        };
        if let Some(screen) = screen {
            let (zero, one) = status_counts(&screen.status);
            percent_screened = Some(screen.percent_screened());
            fixed_zero = Some(zero);
            fixed_one = Some(one);
        }
    }

    let bnb_cfg = BnbConfig {
        time_limit: args.time_limit,
        node_limit: args.node_limit,
        branching: match args.branching {
            BranchingArg::MostFractional => Branching::MostFractional,
            BranchingArg::Pseudocost => Branching::Pseudocost,
        },
        ..BnbConfig::default()
    };
    // `--screen on` runs the full pipeline: eliminate columns first, solve
    // the reduced problem, and report the solution in original coordinates.
    let sol = if args.screen == OnOff::On {
        crate::bench::solve_screened(&d, &spec, &bnb_cfg)?.0
    } else {
        solve_bnb(&d, &spec, &free, &bnb_cfg)?
    };
    let support = sol.support();
    let coefficients = support.iter().map(|&j| sol.x[j]).collect();

    let (gap_perspective, gap_bigm) = if sol.status == MipStatus::Optimal {
        (
            Some(integrality_gap(sol.objective, persp.objective)?),
            Some(integrality_gap(sol.objective, bigm.objective)?),
        )
    } else {
        (None, None)
    };

    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        problem: problem_of(&spec),
        input: args.input.display().to_string(),
        convention: spec.convention,
        gamma: args.gamma,
        mu,
        k,
        screened: args.screen == OnOff::On,
        status: sol.status,
        objective: sol.objective,
        best_bound: sol.best_bound,
        nodes_explored: sol.nodes_explored,
        wall_time: sol.wall_time,
        support,
        coefficients,
        eta_perspective: persp.objective,
        eta_bigm: bigm.objective,
        big_m,
        gap_perspective,
        gap_bigm,
        percent_screened,
        fixed_zero,
        fixed_one,
    };
    emit(
        serde_json::to_string_pretty(&report)?,
        args.output.as_deref(),
    )?;
    Ok(0)
}

/// What `bench` prints on success.
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub cells: usize,
    pub records: usize,
    pub finished: usize,
    pub csv: String,
    pub json: String,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let raw = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let cfg: SweepConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Usage(format!("invalid sweep config: {e}")))?;
    cfg.validate()?;
    let opts = BenchOptions {
        threads: args.threads,
        timing: match args.timing {
            TimingArg::Wall => Timing::Wall,
            TimingArg::None => Timing::None,
        },
    };
    let (records, summaries) = bench::run_sweep(&cfg, &opts)?;
    let finished = records.iter().filter(|r| r.finished()).count();
    let stem = args.output.clone().unwrap_or_else(|| cfg.output.clone());
    let cells = summaries.len();
    let total = records.len();
    let (csv_path, json_path) = bench::write_outputs(&cfg, &stem, records, &summaries)?;
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        cells,
        records: total,
        finished,
        csv: csv_path.display().to_string(),
        json: json_path.display().to_string(),
    };
    print_line(&serde_json::to_string(&report)?)?;
    Ok(0)
}
