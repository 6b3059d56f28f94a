//! Fenchel-dual certificates, rounding upper bounds, and the safe screening
//! rules.
//!
//! For any point `x` (optimal or not), weak duality gives the lower bound
//!
//! ```text
//! REG:  L(x) + g'x + sum_j min(0, mu - gamma delta_j)
//! CARD: L(x) + g'x - gamma * (sum of the k largest delta_j)
//! ```
//!
//! where `g = -grad L(x)` and `delta_j = g_j^2 / 4`. At the relaxation
//! optimum the bound is tight (strong duality), which is what turns the
//! per-feature rules below into *safe* eliminations: if even the dual bound
//! of the subproblem with `z_j` forced to a value exceeds a known upper bound
//! on the mixed-integer optimum, no optimal solution takes that value.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::loss::{alpha_vector, loss_gradient, loss_value, LossConvention};
use crate::relax::{
    solve_restricted_ridge, Fixing, ProblemKind, ProblemSpec, RelaxationSolution, SolverConfig,
    VariableFixings,
};

/// Safety slack added to the right-hand side of every strict screening
/// inequality: the propositions assume exact relaxation optima, the solver
/// has finite tolerance.
pub const SAFETY_SLACK: f64 = 1e-9;

/// Errors from certificate construction and screening.
#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("relaxation did not converge (residual {kkt_residual:.3e}); certificate requires a converged solution")]
    NonConvergedRelaxation { kkt_residual: f64 },
    #[error("cardinality screening requires k < n, got k = {k} with n = {n}")]
    InvalidK { k: usize, n: usize },
    #[error("screening rules contradict on feature {feature}: the upper bound sits below the relaxation value")]
    InternalContradiction { feature: usize },
}

/// Dual information extracted from a relaxation solution at `x*`.
#[derive(Clone, Debug)]
pub struct DualCertificate {
    /// `alpha_i = y_i * sigmoid(-y_i a_i'x*)`, the dual logistic variables.
    pub alpha: Array1<f64>,
    /// `p = -gamma * grad L(x*)`.
    pub p: Array1<f64>,
    /// `delta_j = (grad L(x*))_j^2 / 4 >= 0`.
    pub delta: Array1<f64>,
    /// Fenchel dual value: a lower bound on the relaxation (and MIP) optimum.
    pub dual_value: f64,
    /// The relaxation objective the certificate was extracted from.
    pub primal_value: f64,
    /// `|primal - dual| / max(1, |primal|)`.
    pub tightness_gap: f64,
}

/// Screening decision for one feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureStatus {
    FixedZero,
    FixedOne,
    Free,
}

/// Outcome of a screening pass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScreenResult {
    pub status: Vec<FeatureStatus>,
    /// Relaxation objective (the lower bound eta underlying the rules).
    pub eta_relax: f64,
    /// Upper bound eta-bar the rules compared against.
    pub eta_upper: f64,
    /// k-th largest delta (CARD only).
    pub delta_k: Option<f64>,
    /// (k+1)-th largest delta (CARD only).
    pub delta_k1: Option<f64>,
    /// Largest eligible rule left-hand side per feature; a rule fires when
    /// its left-hand side exceeds `eta_upper + SAFETY_SLACK`.
    pub per_feature_margin: Vec<f64>,
}

impl ScreenResult {
    /// Percentage of features eliminated from the regression, i.e. fixed to
    /// zero. Features fixed to one also shrink the search tree but are not
    /// counted here: they stay in the model.
    pub fn percent_screened(&self) -> f64 {
        if self.status.is_empty() {
            return 0.0;
        }
        let eliminated = self
            .status
            .iter()
            .filter(|&&s| s == FeatureStatus::FixedZero)
            .count();
        100.0 * eliminated as f64 / self.status.len() as f64
    }

    pub fn to_fixings(&self) -> VariableFixings {
        VariableFixings::from_vec(
            self.status
                .iter()
                .map(|s| match s {
                    FeatureStatus::FixedZero => Fixing::Zero,
                    FeatureStatus::FixedOne => Fixing::One,
                    FeatureStatus::Free => Fixing::Free,
                })
                .collect(),
        )
    }
}

/// A feasible mixed-integer point and its exact objective value.
#[derive(Clone, Debug)]
pub struct UpperBound {
    pub x: Array1<f64>,
    /// Binary indicators (0.0 or 1.0).
    pub z: Array1<f64>,
    /// Exact MIP objective of `(x, z)` — always a valid eta-bar.
    pub value: f64,
    pub refit: bool,
}

/// Fenchel dual value for REG at an arbitrary point (weak-duality bound).
pub fn eval_dual_reg(
    d: &Dataset,
    x_star: ArrayView1<f64>,
    convention: LossConvention,
    gamma: f64,
    mu: f64,
) -> f64 {
    let fixings = VariableFixings::all_free(d.num_features());
    dual_value_with_fixings(
        d,
        x_star,
        convention,
        ProblemKind::Reg { gamma, mu },
        &fixings,
    )
}

/// Fenchel dual value for CARD at an arbitrary point (weak-duality bound).
pub fn eval_dual_card(
    d: &Dataset,
    x_star: ArrayView1<f64>,
    convention: LossConvention,
    gamma: f64,
    k: usize,
) -> f64 {
    let fixings = VariableFixings::all_free(d.num_features());
    dual_value_with_fixings(
        d,
        x_star,
        convention,
        ProblemKind::Card { gamma, k },
        &fixings,
    )
}

/// Weak-duality lower bound on the (possibly fixings-restricted) relaxation,
/// evaluated from the dual point induced by `x_star`.
///
/// `Zero`-fixed coordinates are removed from the problem (their conjugate
/// term vanishes); `One`-fixed coordinates charge the always-on conjugate
/// `mu - gamma delta_j` (REG) or `-gamma delta_j` (CARD) without the inner
/// minimum over the indicator.
pub(crate) fn dual_value_with_fixings(
    d: &Dataset,
    x_star: ArrayView1<f64>,
    convention: LossConvention,
    kind: ProblemKind,
    fixings: &VariableFixings,
) -> f64 {
    let g = loss_gradient(d, x_star, convention).mapv(|v| -v);
    let base = loss_value(d, x_star, convention) + g.dot(&x_star);
    match kind {
        ProblemKind::Reg { gamma, mu } => {
            let mut total = base;
            for (j, &gj) in g.iter().enumerate() {
                let coeff = mu - gamma * gj * gj / 4.0;
                match fixings.get(j) {
                    Fixing::Free => total += coeff.min(0.0),
                    Fixing::One => total += coeff,
                    Fixing::Zero => {}
                }
            }
            total
        }
        ProblemKind::Card { gamma, k } => {
            let ones = fixings.count(Fixing::One);
            let budget = k.saturating_sub(ones);
            let mut total = base;
            let mut free_deltas: Vec<f64> = Vec::new();
            for (j, &gj) in g.iter().enumerate() {
                let delta = gj * gj / 4.0;
                match fixings.get(j) {
                    Fixing::Free => free_deltas.push(delta),
                    Fixing::One => total -= gamma * delta,
                    Fixing::Zero => {}
                }
            }
            free_deltas.sort_unstable_by(|a, b| b.total_cmp(a));
            total -= gamma * free_deltas.iter().take(budget).sum::<f64>();
            total
        }
    }
}

/// Builds the dual certificate at a relaxation solution without requiring
/// convergence (the dual value is a valid bound at any point; it is merely
/// loose away from the optimum).
pub(crate) fn certificate_with_fixings(
    d: &Dataset,
    spec: &ProblemSpec,
    relax: &RelaxationSolution,
    fixings: &VariableFixings,
) -> DualCertificate {
    let gamma = spec.gamma();
    let alpha = alpha_vector(d, relax.x.view());
    let g = loss_gradient(d, relax.x.view(), spec.convention).mapv(|v| -v);
    let delta = g.mapv(|v| v * v / 4.0);
    let p = g.mapv(|v| gamma * v);
    let dual_value =
        dual_value_with_fixings(d, relax.x.view(), spec.convention, spec.kind, fixings);
    let primal_value = relax.objective;
    let tightness_gap = (primal_value - dual_value).abs() / primal_value.abs().max(1.0);
    DualCertificate {
        alpha,
        p,
        delta,
        dual_value,
        primal_value,
        tightness_gap,
    }
}

/// Extracts the Fenchel dual certificate from a converged relaxation.
pub fn dual_certificate(
    relax: &RelaxationSolution,
    d: &Dataset,
    spec: &ProblemSpec,
) -> Result<DualCertificate, ScreenError> {
    if !relax.converged {
        return Err(ScreenError::NonConvergedRelaxation {
            kkt_residual: relax.kkt_residual,
        });
    }
    let fixings = VariableFixings::all_free(d.num_features());
    Ok(certificate_with_fixings(d, spec, relax, &fixings))
}

/// Rounds a relaxation solution to a feasible integer point. REG keeps
/// features with `z_j >= 0.5`. CARD tries several fillings of the budget
/// (largest `z_j` above 0.5, largest `z_j` overall, largest `|x_j|`; ties
/// broken toward the lower index) and returns the cheapest, since a
/// mass-splitting relaxation can leave the thresholded support short of
/// the budget. With `refit`, the coefficients are re-minimized over each
/// candidate support by a ridge-logistic solve (kept only when it improves
/// on the projected point).
pub fn round_upper_bound(
    relax: &RelaxationSolution,
    d: &Dataset,
    spec: &ProblemSpec,
    refit: bool,
) -> UpperBound {
    let fixings = VariableFixings::all_free(d.num_features());
    round_upper_bound_fixed(relax, d, spec, refit, &fixings)
}

/// Rounding that honors partial fixings: `One`-fixed features always enter
/// the support (and consume CARD budget first), `Zero`-fixed never do, so
/// the rounded point stays feasible for the restricted subproblem.
pub(crate) fn round_upper_bound_fixed(
    relax: &RelaxationSolution,
    d: &Dataset,
    spec: &ProblemSpec,
    refit: bool,
    fixings: &VariableFixings,
) -> UpperBound {
    let n = d.num_features();
    let mut base = vec![false; n];
    for (j, slot) in base.iter_mut().enumerate() {
        *slot = fixings.get(j) == Fixing::One;
    }
    let candidates: Vec<Vec<bool>> = match spec.kind {
        ProblemKind::Reg { .. } => {
            let mut support = base;
            for (j, slot) in support.iter_mut().enumerate() {
                if fixings.get(j) == Fixing::Free && relax.z[j] >= 0.5 {
                    *slot = true;
                }
            }
            vec![support]
        }
        ProblemKind::Card { k, .. } => {
            let ones = fixings.count(Fixing::One);
            let slots = k.saturating_sub(ones);
            let free: Vec<usize> = (0..n).filter(|&j| fixings.get(j) == Fixing::Free).collect();
            let mut by_z_half: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&j| relax.z[j] >= 0.5)
                .collect();
            by_z_half.sort_by(|&a, &b| relax.z[b].total_cmp(&relax.z[a]).then(a.cmp(&b)));
            let mut by_z: Vec<usize> = free.iter().copied().filter(|&j| relax.z[j] > 0.0).collect();
            by_z.sort_by(|&a, &b| relax.z[b].total_cmp(&relax.z[a]).then(a.cmp(&b)));
            let mut by_x: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&j| relax.x[j] != 0.0)
                .collect();
            by_x.sort_by(|&a, &b| {
                relax.x[b]
                    .abs()
                    .total_cmp(&relax.x[a].abs())
                    .then(a.cmp(&b))
            });
            let mut out: Vec<Vec<bool>> = Vec::new();
            for ranked in [by_z_half, by_z, by_x] {
                let mut support = base.clone();
                for &j in ranked.iter().take(slots) {
                    support[j] = true;
                }
                if !out.contains(&support) {
                    out.push(support);
                }
            }
            out
        }
    };

    let mut best: Option<UpperBound> = None;
    for support in candidates {
        let mut x = relax.x.clone();
        for j in 0..n {
            if !support[j] {
                x[j] = 0.0;
            }
        }
        let mut value = mip_objective(d, spec, &x, &support);

        if refit {
            let (x_refit, _, _) = solve_restricted_ridge(
                d,
                spec.convention,
                spec.gamma(),
                &support,
                &SolverConfig::default(),
                Some(&x),
            );
            let refit_value = mip_objective(d, spec, &x_refit, &support);
            if refit_value < value {
                x = x_refit;
                value = refit_value;
            }
        }

        if best.as_ref().is_none_or(|b| value < b.value) {
            let z = Array1::from_shape_fn(n, |j| if support[j] { 1.0 } else { 0.0 });
            best = Some(UpperBound { x, z, value, refit });
        }
    }
    best.expect("rounding always evaluates at least one candidate")
}

/// Exact MIP objective of a feasible point with the given support.
pub(crate) fn mip_objective(
    d: &Dataset,
    spec: &ProblemSpec,
    x: &Array1<f64>,
    support: &[bool],
) -> f64 {
    let loss = loss_value(d, x.view(), spec.convention);
    match spec.kind {
        ProblemKind::Reg { gamma, mu } => {
            let penalty: f64 = x
                .iter()
                .zip(support)
                .map(|(&v, &s)| if s { v * v / gamma + mu } else { 0.0 })
                .sum();
            loss + penalty
        }
        ProblemKind::Card { gamma, .. } => {
            let penalty: f64 = x
                .iter()
                .zip(support)
                .map(|(&v, &s)| if s { v * v / gamma } else { 0.0 })
                .sum();
            loss + penalty
        }
    }
}

/// Applies the REG screening rules (all features free). `cert` must come
/// from a converged REG relaxation and `ub` must be a valid upper bound.
pub fn screen_reg(
    cert: &DualCertificate,
    ub: &UpperBound,
    gamma: f64,
    mu: f64,
) -> Result<ScreenResult, ScreenError> {
    let n = cert.delta.len();
    let fixings = VariableFixings::all_free(n);
    let (status, margins) = reg_rules(cert, ub.value, gamma, mu, &fixings)?;
    Ok(ScreenResult {
        status,
        eta_relax: cert.primal_value,
        eta_upper: ub.value,
        delta_k: None,
        delta_k1: None,
        per_feature_margin: margins,
    })
}

/// Applies the CARD screening rules (all features free); requires `k < n`.
pub fn screen_card(
    cert: &DualCertificate,
    ub: &UpperBound,
    gamma: f64,
    k: usize,
) -> Result<ScreenResult, ScreenError> {
    let n = cert.delta.len();
    if k >= n {
        return Err(ScreenError::InvalidK { k, n });
    }
    let fixings = VariableFixings::all_free(n);
    let (status, margins, delta_k, delta_k1) = card_rules(cert, ub.value, gamma, k, &fixings)?;
    Ok(ScreenResult {
        status,
        eta_relax: cert.primal_value,
        eta_upper: ub.value,
        delta_k: Some(delta_k),
        delta_k1: Some(delta_k1),
        per_feature_margin: margins,
    })
}

/// REG rules under partial fixings: already-fixed coordinates pass through;
/// for a free j, `FixedZero` fires when `dual + mu - gamma delta_j` exceeds
/// the upper bound and `FixedOne` when `dual - mu + gamma delta_j` does.
pub(crate) fn reg_rules(
    cert: &DualCertificate,
    eta_upper: f64,
    gamma: f64,
    mu: f64,
    fixings: &VariableFixings,
) -> Result<(Vec<FeatureStatus>, Vec<f64>), ScreenError> {
    let threshold = eta_upper + SAFETY_SLACK;
    let base = cert.dual_value;
    let n = cert.delta.len();
    let mut status = vec![FeatureStatus::Free; n];
    let mut margins = vec![f64::INFINITY; n];
    for j in 0..n {
        match fixings.get(j) {
            Fixing::Zero => status[j] = FeatureStatus::FixedZero,
            Fixing::One => status[j] = FeatureStatus::FixedOne,
            Fixing::Free => {
                let coeff = mu - gamma * cert.delta[j];
                let lhs_zero = base + coeff;
                let lhs_one = base - coeff;
                let fires_zero = lhs_zero > threshold;
                let fires_one = lhs_one > threshold;
                if fires_zero && fires_one {
                    return Err(ScreenError::InternalContradiction { feature: j });
                }
                status[j] = if fires_zero {
                    FeatureStatus::FixedZero
                } else if fires_one {
                    FeatureStatus::FixedOne
                } else {
                    FeatureStatus::Free
                };
                margins[j] = lhs_zero.max(lhs_one);
            }
        }
    }
    Ok((status, margins))
}

/// CARD rules under partial fixings. The order statistics are taken over the
/// free coordinates with the remaining budget `k - #One`; a missing order
/// statistic (slack budget) is treated as zero, which keeps every left-hand
/// side a valid subproblem bound.
pub(crate) fn card_rules(
    cert: &DualCertificate,
    eta_upper: f64,
    gamma: f64,
    k: usize,
    fixings: &VariableFixings,
) -> Result<(Vec<FeatureStatus>, Vec<f64>, f64, f64), ScreenError> {
    let threshold = eta_upper + SAFETY_SLACK;
    let base = cert.dual_value;
    let n = cert.delta.len();
    let ones = fixings.count(Fixing::One);
    if ones > k {
        return Err(ScreenError::InternalContradiction { feature: 0 });
    }
    let budget = k - ones;

    let free: Vec<usize> = (0..n).filter(|&j| fixings.get(j) == Fixing::Free).collect();
    let mut sorted: Vec<f64> = free.iter().map(|&j| cert.delta[j]).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let delta_k = if budget >= 1 && budget <= sorted.len() {
        sorted[budget - 1]
    } else {
        0.0
    };
    let delta_k1 = if budget < sorted.len() {
        sorted[budget]
    } else {
        0.0
    };

    let mut status = vec![FeatureStatus::Free; n];
    let mut margins = vec![f64::INFINITY; n];
    let mut fixed_one = 0usize;
    let mut fixed_zero = 0usize;
    for j in 0..n {
        match fixings.get(j) {
            Fixing::Zero => status[j] = FeatureStatus::FixedZero,
            Fixing::One => status[j] = FeatureStatus::FixedOne,
            Fixing::Free => {
                if budget == 0 {
                    // No indicator budget left: free coordinates are forced
                    // out by feasibility, not by a screening inequality.
                    status[j] = FeatureStatus::FixedZero;
                    continue;
                }
                let delta_j = cert.delta[j];
                let eligible_zero = delta_j <= delta_k1;
                let eligible_one = delta_j >= delta_k;
                let lhs_zero = base + gamma * (delta_k - delta_j);
                let lhs_one = base + gamma * (delta_j - delta_k1);
                let fires_zero = eligible_zero && lhs_zero > threshold;
                let fires_one = eligible_one && lhs_one > threshold;
                if fires_zero && fires_one {
                    return Err(ScreenError::InternalContradiction { feature: j });
                }
                status[j] = if fires_zero {
                    fixed_zero += 1;
                    FeatureStatus::FixedZero
                } else if fires_one {
                    fixed_one += 1;
                    FeatureStatus::FixedOne
                } else {
                    FeatureStatus::Free
                };
                margins[j] = match (eligible_zero, eligible_one) {
                    (true, true) => lhs_zero.max(lhs_one),
                    (true, false) => lhs_zero,
                    (false, true) => lhs_one,
                    (false, false) => f64::NEG_INFINITY,
                };
            }
        }
    }
    // More fixed-One features than budget, or every feature eliminated by a
    // rule while budget remains, means the bounds crossed: the inputs were
    // inconsistent. (With budget 0 the all-zero outcome is plain propagation.)
    if fixed_one > budget || (budget >= 1 && fixed_zero + fixings.count(Fixing::Zero) == n) {
        return Err(ScreenError::InternalContradiction { feature: 0 });
    }
    Ok((status, margins, delta_k, delta_k1))
}
