//! Sweep harness: runs a grid of synthetic instances through both
//! relaxations, the screening pass, and the exact solver with and without
//! screening, in parallel, and aggregates the results into a CSV table.

use std::path::{Path, PathBuf};
use std::time::Instant;

use l0logit::{
    choose_bigm, derive_seed, dual_certificate, gen_synthetic, integrality_gap, loss_value,
    round_upper_bound, screen_card, screen_reg, solve_bigm_relaxation, solve_bnb,
    solve_card_relaxation, solve_reg_relaxation, BnbConfig, Dataset, FeatureStatus, Fixing,
    MipSolution, MipStatus, ProblemKind, ProblemSpec, ScreenResult, SolverConfig, SyntheticConfig,
    VariableFixings,
};
use ndarray::{Array1, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::records::{CellParams, Problem, RunRecord, SweepConfig, SweepDocument, SCHEMA_VERSION};

/// Paired screened/unscreened objectives may differ by at most this much
/// before the harness aborts (safe screening must never change the optimum).
pub const TRIPWIRE_TOL: f64 = 1e-6;

/// Whether wall-clock fields are recorded. `None` blanks every time-derived
/// field so that repeated runs produce bit-identical output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timing {
    Wall,
    None,
}

/// Harness options that live outside the sweep configuration file.
#[derive(Clone, Copy, Debug)]
pub struct BenchOptions {
    /// Worker threads; `None` falls back to `SLS_THREADS`, then to the
    /// number of logical cores.
    pub threads: Option<usize>,
    pub timing: Timing,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            threads: None,
            timing: Timing::Wall,
        }
    }
}

/// Resolves the worker count: explicit flag, then `SLS_THREADS`, then the
/// number of logical cores.
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize, CliError> {
    if let Some(t) = explicit {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        return Ok(t);
    }
    if let Ok(raw) = std::env::var("SLS_THREADS") {
        return match raw.parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(CliError::Usage(format!(
                "SLS_THREADS must be a positive integer, got '{raw}'"
            ))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Per-cell averages over finished replications, one CSV row each.
#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub problem: Problem,
    pub m: usize,
    pub gamma: f64,
    pub mu: Option<f64>,
    pub k: Option<usize>,
    pub replications: usize,
    /// Replications whose paired exact solves both proved optimality.
    pub finished: usize,
    pub gap_perspective: Option<f64>,
    pub gap_bigm: Option<f64>,
    pub percent_screened: Option<f64>,
    pub fixed_zero: Option<f64>,
    pub fixed_one: Option<f64>,
    pub nodes_unscreened: Option<f64>,
    pub nodes_screened: Option<f64>,
    pub time_unscreened: Option<f64>,
    pub time_screened: Option<f64>,
    pub speedup: Option<f64>,
}

fn cells(cfg: &SweepConfig) -> Vec<CellParams> {
    let mut out = Vec::new();
    for &m in &cfg.m_grid {
        for &gamma in &cfg.gamma_grid {
            match cfg.problem {
                Problem::Reg => {
                    for &mu in &cfg.mu_grid {
                        out.push(CellParams {
                            m,
                            gamma,
                            mu: Some(mu),
                            k: None,
                        });
                    }
                }
                Problem::Card => {
                    for &k in &cfg.k_grid {
                        out.push(CellParams {
                            m,
                            gamma,
                            mu: None,
                            k: Some(k),
                        });
                    }
                }
            }
        }
    }
    out
}

fn spec_for(cfg: &SweepConfig, cell: &CellParams) -> Result<ProblemSpec, CliError> {
    let spec = match cfg.problem {
        Problem::Reg => ProblemSpec::reg(cell.gamma, cell.mu.expect("REG cell has mu"))?,
        Problem::Card => ProblemSpec::card(cell.gamma, cell.k.expect("CARD cell has k"))?,
    };
    Ok(spec.with_convention(cfg.convention))
}

fn solve_perspective_relaxation(
    d: &Dataset,
    spec: &ProblemSpec,
    fixings: &VariableFixings,
    cfg: &SolverConfig,
) -> Result<l0logit::RelaxationSolution, CliError> {
    Ok(match spec.kind {
        ProblemKind::Reg { .. } => solve_reg_relaxation(d, spec, fixings, cfg)?,
        ProblemKind::Card { .. } => solve_card_relaxation(d, spec, fixings, cfg)?,
    })
}

/// Runs the safe screening rules once: relax -> certificate -> round ->
/// rules. For CARD with `k >= n` (a vacuous budget) every feature stays
/// free, mirroring the rules' domain.
pub fn screen_instance(d: &Dataset, spec: &ProblemSpec) -> Result<ScreenResult, CliError> {
    let free = VariableFixings::all_free(d.num_features());
    let relax = solve_perspective_relaxation(d, spec, &free, &SolverConfig::default())?;
    let cert = dual_certificate(&relax, d, spec)?;
    let ub = round_upper_bound(&relax, d, spec, true);
    Ok(match spec.kind {
        ProblemKind::Reg { gamma, mu } => screen_reg(&cert, &ub, gamma, mu)?,
        ProblemKind::Card { gamma, k } if k < d.num_features() => {
            screen_card(&cert, &ub, gamma, k)?
        }
        ProblemKind::Card { .. } => ScreenResult {
            status: vec![FeatureStatus::Free; d.num_features()],
            eta_relax: relax.objective,
            eta_upper: ub.value,
            delta_k: None,
            delta_k1: None,
            per_feature_margin: vec![f64::NEG_INFINITY; d.num_features()],
        },
    })
}

/// The screened exact pipeline: apply the rules, physically drop the
/// eliminated columns, solve the reduced problem (ones staying fixed), and
/// map the solution back to the original feature indices. `wall_time`
/// covers the whole pipeline including the screening pass itself.
pub fn solve_screened(
    d: &Dataset,
    spec: &ProblemSpec,
    cfg: &BnbConfig,
) -> Result<(MipSolution, ScreenResult), CliError> {
    let start = Instant::now();
    let n = d.num_features();
    let screen = screen_instance(d, spec)?;
    let keep: Vec<usize> = (0..n)
        .filter(|&j| screen.status[j] != FeatureStatus::FixedZero)
        .collect();

    if keep.is_empty() {
        // Everything was eliminated: the empty model is proven optimal.
        let objective = loss_value(d, Array1::zeros(n).view(), spec.convention);
        let sol = MipSolution {
            x: Array1::zeros(n),
            z: Array1::zeros(n),
            objective,
            best_bound: objective,
            nodes_explored: 0,
            wall_time: start.elapsed().as_secs_f64(),
            status: MipStatus::Optimal,
        };
        return Ok((sol, screen));
    }

    let reduced_matrix = d.matrix().select(Axis(1), &keep);
    let reduced = Dataset::new(reduced_matrix, d.labels().clone())?;
    let fixings = VariableFixings::from_vec(
        keep.iter()
            .map(|&j| match screen.status[j] {
                FeatureStatus::FixedOne => Fixing::One,
                _ => Fixing::Free,
            })
            .collect(),
    );
    // A budget beyond the surviving feature count is vacuous; clamping it
    // keeps the reduced problem well-formed without changing its optimum.
    let reduced_spec = match spec.kind {
        ProblemKind::Card { gamma, k } if k > keep.len() => {
            ProblemSpec::card(gamma, keep.len())?.with_convention(spec.convention)
        }
        _ => *spec,
    };
    let inner_cfg = BnbConfig {
        screen_at_root: true,
        ..*cfg
    };
    let sol = solve_bnb(&reduced, &reduced_spec, &fixings, &inner_cfg)?;

    let mut x = Array1::zeros(n);
    let mut z = Array1::zeros(n);
    for (r, &j) in keep.iter().enumerate() {
        x[j] = sol.x[r];
        z[j] = sol.z[r];
    }
    let mapped = MipSolution {
        x,
        z,
        objective: sol.objective,
        best_bound: sol.best_bound,
        nodes_explored: sol.nodes_explored,
        wall_time: start.elapsed().as_secs_f64(),
        status: sol.status,
    };
    Ok((mapped, screen))
}

/// Runs relax -> big-M -> screen -> exact (plain and screened) on a single
/// instance, filling the record as stages complete.
fn fill_record(cfg: &SweepConfig, cell: &CellParams, rec: &mut RunRecord) -> Result<(), CliError> {
    let d = gen_synthetic(&SyntheticConfig::new(
        cfg.num_features,
        cell.m,
        cfg.true_support,
        cfg.signal,
        rec.seed,
    ))?;
    let spec = spec_for(cfg, cell)?;
    let free = VariableFixings::all_free(d.num_features());
    let relax_cfg = SolverConfig::default();

    let persp = solve_perspective_relaxation(&d, &spec, &free, &relax_cfg)?;
    rec.eta_perspective = Some(persp.objective);
    let big_m = choose_bigm(&d, &spec);
    rec.big_m = Some(big_m);
    let bigm = solve_bigm_relaxation(&d, &spec, big_m, &free, &relax_cfg)?;
    rec.eta_bigm = Some(bigm.objective);

    let plain_cfg = BnbConfig {
        time_limit: cfg.time_limit,
        node_limit: cfg.node_limit,
        ..BnbConfig::default()
    };
    let plain = solve_bnb(&d, &spec, &free, &plain_cfg)?;
    rec.eta_mip = Some(plain.objective);
    rec.nodes_unscreened = Some(plain.nodes_explored);
    rec.time_unscreened = Some(plain.wall_time);
    rec.status_unscreened = Some(plain.status);

    let (screened, screen) = solve_screened(&d, &spec, &plain_cfg)?;
    rec.percent_screened = Some(screen.percent_screened());
    rec.fixed_zero = Some(
        screen
            .status
            .iter()
            .filter(|&&s| s == FeatureStatus::FixedZero)
            .count(),
    );
    rec.fixed_one = Some(
        screen
            .status
            .iter()
            .filter(|&&s| s == FeatureStatus::FixedOne)
            .count(),
    );
    rec.eta_mip_screened = Some(screened.objective);
    rec.nodes_screened = Some(screened.nodes_explored);
    rec.time_screened = Some(screened.wall_time);
    rec.status_screened = Some(screened.status);

    if plain.status == MipStatus::Optimal {
        rec.gap_perspective = Some(integrality_gap(plain.objective, persp.objective)?);
        rec.gap_bigm = Some(integrality_gap(plain.objective, bigm.objective)?);
    }
    if plain.status == MipStatus::Optimal && screened.status == MipStatus::Optimal {
        rec.speedup = Some(plain.wall_time / screened.wall_time.max(1e-9));
    }
    Ok(())
}

fn run_one(cfg: &SweepConfig, cell: &CellParams, cell_idx: usize, rep: usize) -> RunRecord {
    let seed = derive_seed(cfg.seed, &[cell_idx as u64, rep as u64]);
    let mut rec = RunRecord::new(cell, cfg, rep, seed);
    if let Err(e) = fill_record(cfg, cell, &mut rec) {
        rec.error = Some(e.to_string());
    }
    rec
}

/// Runs the whole sweep. Per-run failures are recorded, never fatal; the
/// only aborting condition is the safety tripwire: a screened exact solve
/// whose proven objective differs from its unscreened partner.
pub fn run_sweep(
    cfg: &SweepConfig,
    opts: &BenchOptions,
) -> Result<(Vec<RunRecord>, Vec<CellSummary>), CliError> {
    cfg.validate()?;
    let cell_list = cells(cfg);
    let mut work = Vec::with_capacity(cell_list.len() * cfg.replications);
    for (cell_idx, cell) in cell_list.iter().enumerate() {
        for rep in 0..cfg.replications {
            work.push((cell_idx, *cell, rep));
        }
    }

    let threads = resolve_threads(opts.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failure(format!("failed to build worker pool: {e}")))?;
    // `collect` restores input order, so output is independent of scheduling.
    let mut records: Vec<RunRecord> = pool.install(|| {
        work.par_iter()
            .map(|&(cell_idx, cell, rep)| run_one(cfg, &cell, cell_idx, rep))
            .collect()
    });

    for rec in &records {
        if let (Some(a), Some(b)) = (rec.eta_mip, rec.eta_mip_screened) {
            let both_proven = rec.status_unscreened == Some(MipStatus::Optimal)
                && rec.status_screened == Some(MipStatus::Optimal);
            if both_proven && (a - b).abs() > TRIPWIRE_TOL {
                let dump =
                    serde_json::to_string_pretty(rec).unwrap_or_else(|_| rec.instance_id.clone());
                return Err(CliError::Failure(format!(
                    "safety tripwire: screened objective {b} differs from unscreened {a} \
                     by {} on {}\ndiagnostic record:\n{dump}",
                    (a - b).abs(),
                    rec.instance_id
                )));
            }
        }
    }

    if opts.timing == Timing::None {
        for rec in &mut records {
            rec.time_unscreened = None;
            rec.time_screened = None;
            rec.speedup = None;
        }
    }

    let summaries = summarize(cfg, &cell_list, &records);
    Ok((records, summaries))
}

fn mean_present<I: Iterator<Item = Option<f64>>>(iter: I) -> Option<f64> {
    let values: Vec<f64> = iter.flatten().collect();
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Collapses each cell's finished replications into plain averages.
fn summarize(
    cfg: &SweepConfig,
    cell_list: &[CellParams],
    records: &[RunRecord],
) -> Vec<CellSummary> {
    cell_list
        .iter()
        .enumerate()
        .map(|(cell_idx, cell)| {
            let start = cell_idx * cfg.replications;
            let cell_records = &records[start..start + cfg.replications];
            let finished: Vec<&RunRecord> = cell_records.iter().filter(|r| r.finished()).collect();
            CellSummary {
                problem: cfg.problem,
                m: cell.m,
                gamma: cell.gamma,
                mu: cell.mu,
                k: cell.k,
                replications: cfg.replications,
                finished: finished.len(),
                gap_perspective: mean_present(finished.iter().map(|r| r.gap_perspective)),
                gap_bigm: mean_present(finished.iter().map(|r| r.gap_bigm)),
                percent_screened: mean_present(finished.iter().map(|r| r.percent_screened)),
                fixed_zero: mean_present(finished.iter().map(|r| r.fixed_zero.map(|v| v as f64))),
                fixed_one: mean_present(finished.iter().map(|r| r.fixed_one.map(|v| v as f64))),
                nodes_unscreened: mean_present(
                    finished
                        .iter()
                        .map(|r| r.nodes_unscreened.map(|v| v as f64)),
                ),
                nodes_screened: mean_present(
                    finished.iter().map(|r| r.nodes_screened.map(|v| v as f64)),
                ),
                time_unscreened: mean_present(finished.iter().map(|r| r.time_unscreened)),
                time_screened: mean_present(finished.iter().map(|r| r.time_screened)),
                speedup: mean_present(finished.iter().map(|r| r.speedup)),
            }
        })
        .collect()
}

fn field(value: Option<f64>) -> String {
    // Unfinished or suppressed cells are marked "-" in the table.
    value.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Renders the per-cell table as CSV (header row first).
pub fn summaries_to_csv(summaries: &[CellSummary]) -> Result<String, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "problem",
        "m",
        "gamma",
        "mu",
        "k",
        "replications",
        "finished",
        "gap_perspective",
        "gap_bigm",
        "percent_screened",
        "fixed_zero",
        "fixed_one",
        "nodes_unscreened",
        "nodes_screened",
        "time_unscreened",
        "time_screened",
        "speedup",
    ])?;
    for s in summaries {
        writer.write_record([
            s.problem.to_string(),
            s.m.to_string(),
            s.gamma.to_string(),
            s.mu.map_or_else(|| "-".to_string(), |v| v.to_string()),
            s.k.map_or_else(|| "-".to_string(), |v| v.to_string()),
            s.replications.to_string(),
            s.finished.to_string(),
            field(s.gap_perspective),
            field(s.gap_bigm),
            field(s.percent_screened),
            field(s.fixed_zero),
            field(s.fixed_one),
            field(s.nodes_unscreened),
            field(s.nodes_screened),
            field(s.time_unscreened),
            field(s.time_screened),
            field(s.speedup),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Failure(e.to_string()))
}

/// Writes `<stem>.csv` and `<stem>.json`; returns both paths.
pub fn write_outputs(
    cfg: &SweepConfig,
    stem: &str,
    records: Vec<RunRecord>,
    summaries: &[CellSummary],
) -> Result<(PathBuf, PathBuf), CliError> {
    let csv_path = PathBuf::from(format!("{stem}.csv"));
    let json_path = PathBuf::from(format!("{stem}.json"));
    if let Some(parent) = Path::new(stem).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&csv_path, summaries_to_csv(summaries)?)?;
    let doc = SweepDocument {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        records,
    };
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    std::fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}
