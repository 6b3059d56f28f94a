//! Serializable sweep configuration and per-run records.

use l0logit::{LossConvention, MipStatus};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Version stamp written into every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_replications() -> usize {
    10
}

/// Which of the two problems a sweep exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Reg,
    Card,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Problem::Reg => write!(f, "reg"),
            Problem::Card => write!(f, "card"),
        }
    }
}

/// A benchmark sweep: a grid of problem parameters, each cell replicated on
/// independently seeded synthetic instances.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub problem: Problem,
    /// Number of features of every generated instance.
    pub num_features: usize,
    /// Size of the generating support.
    pub true_support: usize,
    /// Signal strength of the generator.
    pub signal: f64,
    /// Loss normalization; the sum convention unless stated otherwise.
    #[serde(default)]
    pub convention: LossConvention,
    /// Grid over the number of observations.
    pub m_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    /// REG only.
    #[serde(default)]
    pub mu_grid: Vec<f64>,
    /// CARD only.
    #[serde(default)]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Per-exact-solve wall-clock limit in seconds.
    #[serde(default)]
    pub time_limit: Option<f64>,
    /// Per-exact-solve node limit.
    #[serde(default)]
    pub node_limit: Option<usize>,
    /// Base seed; every run derives its own seed from it.
    pub seed: u64,
    /// Output stem: the harness writes `<output>.csv` and `<output>.json`.
    pub output: String,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        if self.schema_version != SCHEMA_VERSION {
            return usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.m_grid.is_empty() || self.gamma_grid.is_empty() {
            return usage("m_grid and gamma_grid must be non-empty".into());
        }
        match self.problem {
            Problem::Reg => {
                if self.mu_grid.is_empty() {
                    return usage("REG sweeps need a non-empty mu_grid".into());
                }
                if !self.k_grid.is_empty() {
                    return usage("REG sweeps must not set k_grid".into());
                }
            }
            Problem::Card => {
                if self.k_grid.is_empty() {
                    return usage("CARD sweeps need a non-empty k_grid".into());
                }
                if !self.mu_grid.is_empty() {
                    return usage("CARD sweeps must not set mu_grid".into());
                }
                if let Some(&k) = self.k_grid.iter().find(|&&k| k >= self.num_features) {
                    return usage(format!(
                        "k_grid entry {k} must be below num_features {}",
                        self.num_features
                    ));
                }
            }
        }
        if self.replications == 0 {
            return usage("replications must be at least 1".into());
        }
        if self.num_features == 0 || self.true_support == 0 {
            return usage("num_features and true_support must be at least 1".into());
        }
        if self.output.is_empty() {
            return usage("output stem must be non-empty".into());
        }
        Ok(())
    }
}

/// One grid cell: the problem parameters shared by its replications.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CellParams {
    pub m: usize,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// Everything measured on one synthetic instance. Fields stay `None` when
/// the corresponding stage failed, was skipped, or timing is suppressed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub problem: Problem,
    pub num_features: usize,
    pub num_observations: usize,
    pub true_support: usize,
    pub signal: f64,
    pub convention: LossConvention,
    pub seed: u64,
    pub gamma: f64,
    pub mu: Option<f64>,
    pub k: Option<usize>,
    /// Perspective relaxation optimum.
    pub eta_perspective: Option<f64>,
    /// Big-M relaxation optimum and the M it used.
    pub eta_bigm: Option<f64>,
    pub big_m: Option<f64>,
    /// Exact optimum (unscreened run's objective).
    pub eta_mip: Option<f64>,
    /// Objective of the screened exact run (tripwire partner of `eta_mip`).
    pub eta_mip_screened: Option<f64>,
    /// Integrality gaps in percent; only recorded when the exact run
    /// finished, so the MIP value is proven.
    pub gap_perspective: Option<f64>,
    pub gap_bigm: Option<f64>,
    pub percent_screened: Option<f64>,
    pub fixed_zero: Option<usize>,
    pub fixed_one: Option<usize>,
    pub nodes_unscreened: Option<usize>,
    pub nodes_screened: Option<usize>,
    pub time_unscreened: Option<f64>,
    pub time_screened: Option<f64>,
    /// `time_unscreened / time_screened`, present only when both runs
    /// finished (status Optimal) and timing is recorded.
    pub speedup: Option<f64>,
    pub status_unscreened: Option<MipStatus>,
    pub status_screened: Option<MipStatus>,
    /// First failure encountered while producing this record, if any.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(cell: &CellParams, cfg: &SweepConfig, rep: usize, seed: u64) -> Self {
        let param = match cfg.problem {
            Problem::Reg => format!("mu{}", cell.mu.unwrap_or_default()),
            Problem::Card => format!("k{}", cell.k.unwrap_or_default()),
        };
        RunRecord {
            instance_id: format!(
                "{}-m{}-gamma{}-{}-rep{}",
                cfg.problem, cell.m, cell.gamma, param, rep
            ),
            problem: cfg.problem,
            num_features: cfg.num_features,
            num_observations: cell.m,
            true_support: cfg.true_support,
            signal: cfg.signal,
            convention: cfg.convention,
            seed,
            gamma: cell.gamma,
            mu: cell.mu,
            k: cell.k,
            eta_perspective: None,
            eta_bigm: None,
            big_m: None,
            eta_mip: None,
            eta_mip_screened: None,
            gap_perspective: None,
            gap_bigm: None,
            percent_screened: None,
            fixed_zero: None,
            fixed_one: None,
            nodes_unscreened: None,
            nodes_screened: None,
            time_unscreened: None,
            time_screened: None,
            speedup: None,
            status_unscreened: None,
            status_screened: None,
            error: None,
        }
    }

    /// A run is finished when both exact solves proved optimality.
    pub fn finished(&self) -> bool {
        self.error.is_none()
            && self.status_unscreened == Some(MipStatus::Optimal)
            && self.status_screened == Some(MipStatus::Optimal)
    }
}

/// The JSON document `bench` writes next to the CSV table.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepDocument {
    pub schema_version: u32,
    pub config: SweepConfig,
    pub records: Vec<RunRecord>,
}
