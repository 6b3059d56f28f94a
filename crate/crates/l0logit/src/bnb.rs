//! Exact solvers for the two mixed-integer problems: best-bound
//! branch-and-bound over the indicator variables with the perspective
//! relaxation as node bound, plus a brute-force enumeration oracle and the
//! integrality-gap metric.

use std::collections::BinaryHeap;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::relax::{
    solve_perspective, solve_restricted_ridge, Fixing, ProblemKind, ProblemSpec, RelaxError,
    SolverConfig, VariableFixings,
};
use crate::screen::{
    card_rules, certificate_with_fixings, mip_objective, reg_rules, round_upper_bound_fixed,
    FeatureStatus, ScreenError, UpperBound,
};

/// Errors from the exact solvers.
#[derive(Debug, Error)]
pub enum BnbError {
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error("brute force supports at most {max} features, got {n}")]
    BruteForceTooLarge { n: usize, max: usize },
    #[error("relaxation value {eta_relax} exceeds MIP value {eta_mip} beyond tolerance")]
    BoundViolation { eta_mip: f64, eta_relax: f64 },
}

/// Node selection strategy (best-bound only).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NodeSelection {
    #[default]
    BestBound,
}

/// Branching variable selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Branching {
    /// Pick the free indicator closest to 0.5 (ties toward the lower index).
    #[default]
    MostFractional,
    /// Product of estimated bound degradations; rates are initialized from
    /// the root certificate's delta scores and updated with the degradations
    /// observed after each branched node is solved.
    Pseudocost,
}

/// Branch-and-bound settings.
#[derive(Clone, Copy, Debug)]
pub struct BnbConfig {
    /// Absolute gap tolerance: stop once incumbent - best_bound <= gap_tol.
    pub gap_tol: f64,
    /// |z_j - round(z_j)| below this counts as integral.
    pub integrality_tol: f64,
    pub node_selection: NodeSelection,
    pub branching: Branching,
    /// Wall-clock limit in seconds (checked after the root node).
    pub time_limit: Option<f64>,
    /// Maximum number of node relaxations to solve.
    pub node_limit: Option<usize>,
    /// Apply the safe screening rules once at the root and restart the root
    /// under the resulting fixings.
    pub screen_at_root: bool,
    /// Re-apply the rules at every node before branching.
    pub screen_at_nodes: bool,
    /// Settings for the node relaxation solves.
    pub relax: SolverConfig,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            integrality_tol: 1e-6,
            node_selection: NodeSelection::BestBound,
            branching: Branching::MostFractional,
            time_limit: None,
            node_limit: None,
            screen_at_root: false,
            screen_at_nodes: false,
            relax: SolverConfig::default(),
        }
    }
}

impl BnbConfig {
    /// The screened pipeline: safe screening at the root, then plain
    /// branch-and-bound on the survivors.
    pub fn screened() -> Self {
        Self {
            screen_at_root: true,
            ..Self::default()
        }
    }
}

/// Termination status of an exact solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
}

/// Result of an exact solve: the incumbent, the proven bound, and counters.
#[derive(Clone, Debug)]
pub struct MipSolution {
    pub x: Array1<f64>,
    /// Binary indicators (0.0 or 1.0); `x_j = 0` wherever `z_j = 0`.
    pub z: Array1<f64>,
    pub objective: f64,
    /// Proven lower bound; `objective - best_bound <= gap_tol` when Optimal.
    pub best_bound: f64,
    pub nodes_explored: usize,
    pub wall_time: f64,
    pub status: MipStatus,
}

impl MipSolution {
    /// Indices of the selected features.
    pub fn support(&self) -> Vec<usize> {
        self.z
            .iter()
            .enumerate()
            .filter(|&(_, &z)| z >= 0.5)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Relative integrality gap in percent:
/// `100 (eta_mip - eta_relax) / max(|eta_mip|, 1e-12)`.
pub fn integrality_gap(eta_mip: f64, eta_relax: f64) -> Result<f64, BnbError> {
    if eta_relax > eta_mip + 1e-9 {
        return Err(BnbError::BoundViolation { eta_mip, eta_relax });
    }
    Ok(100.0 * (eta_mip - eta_relax) / eta_mip.abs().max(1e-12))
}

const BRUTE_FORCE_MAX_FEATURES: usize = 20;

/// Brute-force report: the optimum plus the objective of every enumerated
/// support, for safety suites that need the full set of near-optima.
#[derive(Clone, Debug)]
pub struct BruteForceReport {
    pub solution: MipSolution,
    /// (support bitmask, exact MIP objective) for every enumerated support.
    pub support_values: Vec<(u32, f64)>,
}

impl BruteForceReport {
    /// Bitmasks of all supports within `epsilon` of the optimum.
    pub fn optimal_masks(&self, epsilon: f64) -> Vec<u32> {
        self.support_values
            .iter()
            .filter(|&&(_, v)| v <= self.solution.objective + epsilon)
            .map(|&(mask, _)| mask)
            .collect()
    }
}

/// Enumerates every support (CARD: every support of size at most k), solves
/// the restricted ridge-logistic problem on each, and returns the best
/// together with the full enumeration. Guarded to n <= 20.
pub fn brute_force_detailed(d: &Dataset, spec: &ProblemSpec) -> Result<BruteForceReport, BnbError> {
    let n = d.num_features();
    if n > BRUTE_FORCE_MAX_FEATURES {
        return Err(BnbError::BruteForceTooLarge {
            n,
            max: BRUTE_FORCE_MAX_FEATURES,
        });
    }
    let start = Instant::now();
    let ridge_cfg = SolverConfig {
        tol: 1e-9,
        ..SolverConfig::default()
    };
    let budget = match spec.kind {
        ProblemKind::Reg { .. } => n,
        ProblemKind::Card { k, .. } => k.min(n),
    };
    let mut support_values = Vec::new();
    let mut best_value = f64::INFINITY;
    let mut best_mask = 0u32;
    let mut best_x = Array1::<f64>::zeros(n);
    let mut support = vec![false; n];
    for mask in 0u32..(1u32 << n) {
        if (mask.count_ones() as usize) > budget {
            continue;
        }
        for (j, slot) in support.iter_mut().enumerate() {
            *slot = mask >> j & 1 == 1;
        }
        let (x, _, _) =
            solve_restricted_ridge(d, spec.convention, spec.gamma(), &support, &ridge_cfg, None);
        let value = mip_objective(d, spec, &x, &support);
        support_values.push((mask, value));
        if value < best_value {
            best_value = value;
            best_mask = mask;
            best_x = x;
        }
    }
    let z = Array1::from_shape_fn(n, |j| if best_mask >> j & 1 == 1 { 1.0 } else { 0.0 });
    let solution = MipSolution {
        x: best_x,
        z,
        objective: best_value,
        best_bound: best_value,
        nodes_explored: support_values.len(),
        wall_time: start.elapsed().as_secs_f64(),
        status: MipStatus::Optimal,
    };
    Ok(BruteForceReport {
        solution,
        support_values,
    })
}

/// Brute-force enumeration oracle (see [`brute_force_detailed`]).
pub fn brute_force(d: &Dataset, spec: &ProblemSpec) -> Result<MipSolution, BnbError> {
    Ok(brute_force_detailed(d, spec)?.solution)
}

/// Open node: fixings plus a warm start; `branched` records the decision
/// that created it, for pseudocost updates once the node is solved.
struct Node {
    fixings: VariableFixings,
    warm: Array1<f64>,
    branched: Option<BranchInfo>,
}

#[derive(Clone, Copy)]
struct BranchInfo {
    feature: usize,
    direction: Fixing,
    parent_bound: f64,
    parent_fraction: f64,
}

/// Max-heap entry ordered so the smallest bound pops first (ties toward the
/// older node id, keeping the search deterministic).
struct HeapEntry {
    bound: f64,
    id: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Running pseudocost estimates: average bound degradation per unit of
/// rounded-away fraction, per feature and direction, seeded with the root
/// certificate's delta scores as priors.
struct Pseudocost {
    zero_sum: Vec<f64>,
    zero_count: Vec<f64>,
    one_sum: Vec<f64>,
    one_count: Vec<f64>,
}

impl Pseudocost {
    fn new(priors: &Array1<f64>) -> Self {
        let n = priors.len();
        Self {
            zero_sum: priors.to_vec(),
            zero_count: vec![1.0; n],
            one_sum: priors.to_vec(),
            one_count: vec![1.0; n],
        }
    }

    fn observe(&mut self, feature: usize, direction: Fixing, rate: f64) {
        match direction {
            Fixing::Zero => {
                self.zero_sum[feature] += rate;
                self.zero_count[feature] += 1.0;
            }
            Fixing::One => {
                self.one_sum[feature] += rate;
                self.one_count[feature] += 1.0;
            }
            Fixing::Free => {}
        }
    }

    fn score(&self, feature: usize, fraction: f64) -> f64 {
        let down = self.zero_sum[feature] / self.zero_count[feature] * fraction;
        let up = self.one_sum[feature] / self.one_count[feature] * (1.0 - fraction);
        down.max(1e-12) * up.max(1e-12)
    }
}

/// Exact branch-and-bound solve of REG or CARD restricted to
/// `initial_fixings`, within `cfg.gap_tol`.
///
/// Nodes are explored best-bound-first. A popped node is solved under its
/// fixings (warm-started from its parent), bounded by the Fenchel dual value
/// at the node solution (valid even when the node solve hits its iteration
/// cap), pruned against the incumbent, used to update the incumbent via
/// rounding-with-refit, and finally split on the selected fractional
/// indicator into a Zero and a One child. The search is deterministic for a
/// given dataset and config.
pub fn solve_bnb(
    d: &Dataset,
    spec: &ProblemSpec,
    initial_fixings: &VariableFixings,
    cfg: &BnbConfig,
) -> Result<MipSolution, BnbError> {
    let start = Instant::now();
    let n = d.num_features();

    // Root solve (node 1), optionally tightened by root screening.
    let mut root_fixings = initial_fixings.clone();
    let mut root_sol = solve_perspective(d, spec, &root_fixings, &cfg.relax, None)?;
    let mut incumbent = round_upper_bound_fixed(&root_sol, d, spec, true, &root_fixings);
    let mut nodes_explored = 1usize;

    if cfg.screen_at_root {
        let cert = certificate_with_fixings(d, spec, &root_sol, &root_fixings);
        let statuses = apply_rules(spec, &cert, incumbent.value, &root_fixings)?;
        let refined = merge_statuses(&root_fixings, &statuses);
        if refined != root_fixings {
            root_fixings = refined;
            root_sol = solve_perspective(d, spec, &root_fixings, &cfg.relax, Some(&root_sol.x))?;
            let rounded = round_upper_bound_fixed(&root_sol, d, spec, true, &root_fixings);
            if rounded.value < incumbent.value {
                incumbent = rounded;
            }
        }
    }

    let root_bound = crate::screen::dual_value_with_fixings(
        d,
        root_sol.x.view(),
        spec.convention,
        spec.kind,
        &root_fixings,
    );

    let mut pseudocost = match cfg.branching {
        Branching::Pseudocost => {
            let cert = certificate_with_fixings(d, spec, &root_sol, &root_fixings);
            Some(Pseudocost::new(&cert.delta))
        }
        Branching::MostFractional => None,
    };

    let mut nodes: Vec<Option<Node>> = Vec::new();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

    // Process the root in place, then loop over the heap.
    let mut pending: Option<(VariableFixings, crate::relax::RelaxationSolution, f64)> =
        Some((root_fixings, root_sol, root_bound));

    let finish = |incumbent: &UpperBound,
                  best_bound: f64,
                  nodes_explored: usize,
                  status: MipStatus,
                  start: &Instant| MipSolution {
        x: incumbent.x.clone(),
        z: incumbent.z.clone(),
        objective: incumbent.value,
        best_bound: best_bound.min(incumbent.value),
        nodes_explored,
        wall_time: start.elapsed().as_secs_f64(),
        status,
    };

    loop {
        let (fixings, sol, bound) = match pending.take() {
            Some(root) => root,
            None => {
                // Pop the most promising open node.
                let entry = match heap.pop() {
                    Some(entry) => entry,
                    None => {
                        return Ok(finish(
                            &incumbent,
                            incumbent.value,
                            nodes_explored,
                            MipStatus::Optimal,
                            &start,
                        ));
                    }
                };
                if incumbent.value - entry.bound <= cfg.gap_tol {
                    return Ok(finish(
                        &incumbent,
                        entry.bound,
                        nodes_explored,
                        MipStatus::Optimal,
                        &start,
                    ));
                }
                if let Some(limit) = cfg.node_limit {
                    if nodes_explored >= limit {
                        return Ok(finish(
                            &incumbent,
                            entry.bound,
                            nodes_explored,
                            MipStatus::NodeLimit,
                            &start,
                        ));
                    }
                }
                if let Some(limit) = cfg.time_limit {
                    if start.elapsed().as_secs_f64() > limit {
                        return Ok(finish(
                            &incumbent,
                            entry.bound,
                            nodes_explored,
                            MipStatus::TimeLimit,
                            &start,
                        ));
                    }
                }
                let node = nodes[entry.id].take().expect("node popped twice");
                let sol = solve_perspective(d, spec, &node.fixings, &cfg.relax, Some(&node.warm))?;
                nodes_explored += 1;
                let bound = crate::screen::dual_value_with_fixings(
                    d,
                    sol.x.view(),
                    spec.convention,
                    spec.kind,
                    &node.fixings,
                );
                if let (Some(pc), Some(info)) = (pseudocost.as_mut(), node.branched) {
                    let degradation = (bound - info.parent_bound).max(0.0);
                    let unit = match info.direction {
                        Fixing::Zero => info.parent_fraction,
                        _ => 1.0 - info.parent_fraction,
                    };
                    pc.observe(info.feature, info.direction, degradation / unit.max(1e-6));
                }
                (node.fixings, sol, bound)
            }
        };

        // Prune against the incumbent.
        if bound >= incumbent.value - cfg.gap_tol {
            continue;
        }

        // Incumbent update from this node.
        let rounded = round_upper_bound_fixed(&sol, d, spec, true, &fixings);
        if rounded.value < incumbent.value {
            incumbent = rounded;
            if bound >= incumbent.value - cfg.gap_tol {
                continue;
            }
        }

        // Integral nodes need no branching.
        let fractional: Vec<usize> = (0..n)
            .filter(|&j| {
                fixings.get(j) == Fixing::Free && {
                    let z = sol.z[j];
                    (z - z.round()).abs() > cfg.integrality_tol
                }
            })
            .collect();
        if fractional.is_empty() {
            continue;
        }

        // Optional node screening; a refinement is queued as a single child.
        let branch_fixings = fixings;
        if cfg.screen_at_nodes {
            let cert = certificate_with_fixings(d, spec, &sol, &branch_fixings);
            let statuses = apply_rules(spec, &cert, incumbent.value, &branch_fixings)?;
            let refined = merge_statuses(&branch_fixings, &statuses);
            if refined != branch_fixings {
                let id = nodes.len();
                nodes.push(Some(Node {
                    fixings: refined,
                    warm: sol.x.clone(),
                    branched: None,
                }));
                heap.push(HeapEntry { bound, id });
                continue;
            }
        }

        // Select the branching variable.
        let feature = match cfg.branching {
            Branching::MostFractional => fractional
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = (sol.z[a] - 0.5).abs();
                    let db = (sol.z[b] - 0.5).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("nonempty fractional set"),
            Branching::Pseudocost => {
                let pc = pseudocost.as_ref().expect("pseudocost state");
                fractional
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        let sa = pc.score(a, sol.z[a]);
                        let sb = pc.score(b, sol.z[b]);
                        sa.total_cmp(&sb).then(b.cmp(&a))
                    })
                    .expect("nonempty fractional set")
            }
        };
        let fraction = sol.z[feature];

        // Zero child, then One child (CARD: only while budget allows).
        let mut push_child = |direction: Fixing, nodes: &mut Vec<Option<Node>>| {
            let mut child = branch_fixings.clone();
            child.set(feature, direction);
            let id = nodes.len();
            nodes.push(Some(Node {
                fixings: child,
                warm: sol.x.clone(),
                branched: Some(BranchInfo {
                    feature,
                    direction,
                    parent_bound: bound,
                    parent_fraction: fraction,
                }),
            }));
            heap.push(HeapEntry { bound, id });
        };
        push_child(Fixing::Zero, &mut nodes);
        let one_feasible = match spec.kind {
            ProblemKind::Reg { .. } => true,
            ProblemKind::Card { k, .. } => branch_fixings.count(Fixing::One) < k,
        };
        if one_feasible {
            push_child(Fixing::One, &mut nodes);
        }
    }
}

/// Applies the matching screening rules under partial fixings.
fn apply_rules(
    spec: &ProblemSpec,
    cert: &crate::screen::DualCertificate,
    eta_upper: f64,
    fixings: &VariableFixings,
) -> Result<Vec<FeatureStatus>, ScreenError> {
    match spec.kind {
        ProblemKind::Reg { gamma, mu } => {
            let (status, _) = reg_rules(cert, eta_upper, gamma, mu, fixings)?;
            Ok(status)
        }
        ProblemKind::Card { gamma, k } => {
            let (status, _, _, _) = card_rules(cert, eta_upper, gamma, k, fixings)?;
            Ok(status)
        }
    }
}

fn merge_statuses(fixings: &VariableFixings, statuses: &[FeatureStatus]) -> VariableFixings {
    let mut merged = fixings.clone();
    for (j, status) in statuses.iter().enumerate() {
        if merged.get(j) == Fixing::Free {
            match status {
                FeatureStatus::FixedZero => merged.set(j, Fixing::Zero),
                FeatureStatus::FixedOne => merged.set(j, Fixing::One),
                FeatureStatus::Free => {}
            }
        }
    }
    merged
}
