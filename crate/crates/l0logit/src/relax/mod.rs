//! Continuous relaxations of the two mixed-integer problems and the
//! accelerated proximal-gradient solver shared by all of them.
//!
//! The binary vector `z` never appears explicitly in the solver: for each
//! relaxation the inner minimization over `z in [0,1]^n` has a closed form,
//! leaving a convex problem in `x` alone.
//!
//! * REG, perspective strength: minimizing `x^2/(gamma z) + mu z` over
//!   `z in [0,1]` gives the reverse-Huber penalty `2|x|sqrt(mu/gamma)` below
//!   the knee `sqrt(gamma mu)` and `x^2/gamma + mu` beyond it.
//! * CARD, perspective strength: the inner problem over `z` under the budget
//!   `sum z <= k` is solved by water-filling.
//! * Big-M: eliminating `z_j = |x_j|/M` leaves an elastic-net-type penalty
//!   (REG) or an l1-ball constraint (CARD).
//!
//! Partial fixings pin individual indicators: `Zero` removes a coordinate
//! from the model (`x_j = 0` structurally, honoring the `0/0 = 0` perspective
//! convention), `One` charges the always-on penalty `x_j^2/gamma (+ mu)`.

mod fista;
mod penalty;

use ndarray::{Array1, ArrayView1};
use thiserror::Error;

use crate::data::Dataset;
use crate::loss::LossConvention;
use penalty::Penalty;

/// Errors from relaxation setup and solving.
#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fixings mark {ones} features One but the cardinality budget is {k}")]
    InfeasibleFixings { ones: usize, k: usize },
    #[error("fixings length {fixings} does not match feature count {features}")]
    FixingsLength { fixings: usize, features: usize },
    #[error("cardinality budget {k} exceeds feature count {features}")]
    BudgetTooLarge { k: usize, features: usize },
}

/// The two mixed-integer problems the toolkit targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    /// l0-l2 penalized: `loss + (1/gamma) sum x_j^2/z_j + mu sum z_j`.
    Reg { gamma: f64, mu: f64 },
    /// Cardinality constrained: `loss + (1/gamma) sum x_j^2/z_j`, `sum z <= k`.
    Card { gamma: f64, k: usize },
}

/// Problem description: which MIP, plus the loss scaling convention shared by
/// every quantity derived from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub convention: LossConvention,
}

impl ProblemSpec {
    /// Penalized problem with ridge weight `gamma` and per-feature price `mu`.
    pub fn reg(gamma: f64, mu: f64) -> Result<Self, RelaxError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(RelaxError::InvalidParameter(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(RelaxError::InvalidParameter(format!(
                "mu must be nonnegative and finite, got {mu}"
            )));
        }
        Ok(Self {
            kind: ProblemKind::Reg { gamma, mu },
            convention: LossConvention::default(),
        })
    }

    /// Cardinality-constrained problem with budget `k`.
    pub fn card(gamma: f64, k: usize) -> Result<Self, RelaxError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(RelaxError::InvalidParameter(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if k == 0 {
            return Err(RelaxError::InvalidParameter(
                "cardinality budget must be at least 1".into(),
            ));
        }
        Ok(Self {
            kind: ProblemKind::Card { gamma, k },
            convention: LossConvention::default(),
        })
    }

    pub fn with_convention(mut self, convention: LossConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Ridge weight, common to both problem kinds.
    pub fn gamma(&self) -> f64 {
        match self.kind {
            ProblemKind::Reg { gamma, .. } | ProblemKind::Card { gamma, .. } => gamma,
        }
    }
}

/// Branching / screening decision for one indicator variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixing {
    Free,
    Zero,
    One,
}

/// Per-feature indicator fixings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableFixings(Vec<Fixing>);

impl VariableFixings {
    pub fn all_free(n: usize) -> Self {
        Self(vec![Fixing::Free; n])
    }

    pub fn from_vec(fixings: Vec<Fixing>) -> Self {
        Self(fixings)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> Fixing {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, fixing: Fixing) {
        self.0[j] = fixing;
    }

    pub fn as_slice(&self) -> &[Fixing] {
        &self.0
    }

    pub fn count(&self, fixing: Fixing) -> usize {
        self.0.iter().filter(|&&f| f == fixing).count()
    }

    pub fn is_all_free(&self) -> bool {
        self.0.iter().all(|&f| f == Fixing::Free)
    }

    fn check_len(&self, features: usize) -> Result<(), RelaxError> {
        if self.len() != features {
            return Err(RelaxError::FixingsLength {
                fixings: self.len(),
                features,
            });
        }
        Ok(())
    }
}

/// Step-size policy for the proximal gradient loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    /// Constant `1 / curvature_bound`.
    FixedFromCurvature,
    /// Halve the step until the smooth part satisfies the descent model.
    BacktrackingLineSearch,
}

/// Solver settings shared by every relaxation.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Convergence tolerance on the prox-gradient fixed-point residual
    /// (sup norm), certified at the returned iterate.
    pub tol: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Reset momentum whenever the objective would increase.
    pub restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 100_000,
            step_rule: StepRule::FixedFromCurvature,
            restart: true,
        }
    }
}

/// Which relaxation family produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Perspective,
    BigM,
}

/// Solution of one continuous relaxation.
#[derive(Clone, Debug)]
pub struct RelaxationSolution {
    pub x: Array1<f64>,
    /// Eliminated indicators reconstructed from `x`: in `[0,1]`, honoring
    /// fixings, with `z_j = 0` exactly where `x_j = 0`.
    pub z: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Prox-gradient fixed-point residual at `x` (sup norm).
    pub kkt_residual: f64,
    /// False when `max_iters` ran out; the best iterate is still returned.
    pub converged: bool,
    pub solver_kind: SolverKind,
}

/// Minimizer of `x^2/(gamma z) + mu z` over `z in [0,1]` for one coordinate,
/// with the `0/0 = 0` convention at `x = 0`.
pub fn optimal_z_reg(x_abs: f64, gamma: f64, mu: f64) -> f64 {
    debug_assert!(x_abs >= 0.0 && gamma > 0.0 && mu >= 0.0);
    if x_abs == 0.0 {
        return 0.0;
    }
    (x_abs / (gamma * mu).sqrt()).min(1.0)
}

/// The z-eliminated REG penalty: `2|x|sqrt(mu/gamma)` for `|x|` up to the
/// knee `sqrt(gamma mu)`, and `x^2/gamma + mu` beyond (reverse Huber).
pub fn reverse_huber(x: f64, gamma: f64, mu: f64) -> f64 {
    let knee = (gamma * mu).sqrt();
    if x.abs() <= knee {
        2.0 * x.abs() * (mu / gamma).sqrt()
    } else {
        x * x / gamma + mu
    }
}

/// Proximal operator of the reverse-Huber penalty:
/// `argmin_u (u - v)^2 / 2 + step * reverse_huber(u)`.
///
/// Each regime has a closed form — soft thresholding by
/// `step * 2 sqrt(mu/gamma)` in the linear regime, shrinkage by
/// `1/(1 + 2 step/gamma)` in the quadratic regime — and the winner is chosen
/// by comparing the two candidate objective values.
pub fn perspective_penalty_prox(v: f64, step: f64, gamma: f64, mu: f64) -> f64 {
    debug_assert!(step > 0.0 && gamma > 0.0 && mu >= 0.0);
    let knee = (gamma * mu).sqrt();
    let slope = 2.0 * (mu / gamma).sqrt();
    let small = (v.abs() - step * slope).clamp(0.0, knee).copysign(v);
    let large = (v.abs() / (1.0 + 2.0 * step / gamma)).max(knee).copysign(v);
    let score = |u: f64| 0.5 * (u - v) * (u - v) + step * reverse_huber(u, gamma, mu);
    if score(small) <= score(large) {
        small
    } else {
        large
    }
}

/// Water-filling: minimizes `sum_j w_j^2 / z_j` over `z in [0,1]^p` with
/// `sum z <= budget`, where `w_j >= 0` and `0/0 = 0`. Coordinates with
/// `w_j = 0` receive `z_j = 0`.
pub(crate) fn water_fill(magnitudes: &[f64], budget: usize) -> Vec<f64> {
    let p = magnitudes.len();
    let mut z = vec![0.0; p];
    if budget == 0 {
        return z;
    }
    let nonzero = magnitudes.iter().filter(|&&w| w > 0.0).count();
    if nonzero <= budget {
        for (slot, &w) in z.iter_mut().zip(magnitudes) {
            if w > 0.0 {
                *slot = 1.0;
            }
        }
        return z;
    }
    let theta = water_level(magnitudes, budget);
    for (slot, &w) in z.iter_mut().zip(magnitudes) {
        *slot = (w / theta).min(1.0);
    }
    z
}

/// The level `theta` with `sum_j min(1, w_j/theta) = budget`, found by an
/// exact sort-and-scan over the break points with a bisection fallback.
fn water_level(magnitudes: &[f64], budget: usize) -> f64 {
    let mut sorted: Vec<f64> = magnitudes.iter().copied().filter(|&w| w > 0.0).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let p = sorted.len();
    debug_assert!(p > budget);
    // Suffix sums: suffix[r] = sum of sorted[r..].
    let mut suffix = vec![0.0; p + 1];
    for r in (0..p).rev() {
        suffix[r] = suffix[r + 1] + sorted[r];
    }
    // With the r largest capped at 1, theta = suffix[r] / (budget - r); valid
    // when theta sits between sorted[r] and sorted[r-1].
    for r in 0..budget {
        let theta = suffix[r] / (budget - r) as f64;
        let upper_ok = r == 0 || sorted[r - 1] >= theta;
        if upper_ok && theta >= sorted[r] {
            return theta;
        }
    }
    // Fallback: bisection on the decreasing map theta -> sum min(1, w/theta).
    let mut lo = sorted[p - 1] * 1e-6;
    let mut hi = suffix[0] / budget as f64;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let total: f64 = sorted.iter().map(|&w| (w / mid).min(1.0)).sum();
        if total > budget as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Water-filling minimizer of the CARD inner problem over the full indicator
/// vector, honoring fixings: `One` pins `z_j = 1` and consumes budget, `Zero`
/// pins `z_j = 0`, and free coordinates share the remaining budget.
pub fn optimal_z_card(
    x: ArrayView1<f64>,
    gamma: f64,
    k: usize,
    fixings: &VariableFixings,
) -> Result<Array1<f64>, RelaxError> {
    debug_assert!(gamma > 0.0);
    fixings.check_len(x.len())?;
    let ones = fixings.count(Fixing::One);
    if ones > k {
        return Err(RelaxError::InfeasibleFixings { ones, k });
    }
    let budget = k - ones;
    let free: Vec<usize> = (0..x.len())
        .filter(|&j| fixings.get(j) == Fixing::Free)
        .collect();
    let magnitudes: Vec<f64> = free.iter().map(|&j| x[j].abs()).collect();
    let filled = water_fill(&magnitudes, budget);
    let mut z = Array1::<f64>::zeros(x.len());
    for j in 0..x.len() {
        if fixings.get(j) == Fixing::One {
            z[j] = 1.0;
        }
    }
    for (&j, &zj) in free.iter().zip(&filled) {
        z[j] = zj;
    }
    Ok(z)
}

fn validate_card(d: &Dataset, k: usize, fixings: &VariableFixings) -> Result<usize, RelaxError> {
    if k > d.num_features() {
        return Err(RelaxError::BudgetTooLarge {
            k,
            features: d.num_features(),
        });
    }
    let ones = fixings.count(Fixing::One);
    if ones > k {
        return Err(RelaxError::InfeasibleFixings { ones, k });
    }
    Ok(k - ones)
}

/// Solves the perspective relaxation matching `spec.kind` under the fixings,
/// optionally warm-started. Shared by the public entry points and the
/// branch-and-bound node solves.
pub(crate) fn solve_perspective(
    d: &Dataset,
    spec: &ProblemSpec,
    fixings: &VariableFixings,
    cfg: &SolverConfig,
    warm: Option<&Array1<f64>>,
) -> Result<RelaxationSolution, RelaxError> {
    fixings.check_len(d.num_features())?;
    let penalty = match spec.kind {
        ProblemKind::Reg { gamma, mu } => Penalty::PerspectiveReg { gamma, mu, fixings },
        ProblemKind::Card { gamma, k } => {
            let budget = validate_card(d, k, fixings)?;
            Penalty::PerspectiveCard {
                gamma,
                budget,
                fixings,
            }
        }
    };
    Ok(run(d, spec, penalty, cfg, warm, SolverKind::Perspective))
}

fn run(
    d: &Dataset,
    spec: &ProblemSpec,
    penalty: Penalty<'_>,
    cfg: &SolverConfig,
    warm: Option<&Array1<f64>>,
    solver_kind: SolverKind,
) -> RelaxationSolution {
    let x0 = warm
        .cloned()
        .unwrap_or_else(|| Array1::zeros(d.num_features()));
    let outcome = fista::minimize(d, spec.convention, &penalty, x0, cfg, None);
    let z = penalty.indicators(&outcome.x);
    RelaxationSolution {
        x: outcome.x,
        z,
        objective: outcome.objective,
        iterations: outcome.iterations,
        kkt_residual: outcome.residual,
        converged: outcome.converged,
        solver_kind,
    }
}

/// Solves the perspective relaxation of REG under partial fixings.
pub fn solve_reg_relaxation(
    d: &Dataset,
    spec: &ProblemSpec,
    fixings: &VariableFixings,
    cfg: &SolverConfig,
) -> Result<RelaxationSolution, RelaxError> {
    match spec.kind {
        ProblemKind::Reg { .. } => solve_perspective(d, spec, fixings, cfg, None),
        ProblemKind::Card { .. } => Err(RelaxError::InvalidParameter(
            "solve_reg_relaxation requires a Reg problem".into(),
        )),
    }
}

/// Solves the perspective relaxation of CARD under partial fixings.
pub fn solve_card_relaxation(
    d: &Dataset,
    spec: &ProblemSpec,
    fixings: &VariableFixings,
    cfg: &SolverConfig,
) -> Result<RelaxationSolution, RelaxError> {
    match spec.kind {
        ProblemKind::Card { .. } => solve_perspective(d, spec, fixings, cfg, None),
        ProblemKind::Reg { .. } => Err(RelaxError::InvalidParameter(
            "solve_card_relaxation requires a Card problem".into(),
        )),
    }
}

/// Solves the big-M relaxation of either problem with the binary variables
/// eliminated: REG becomes `loss + sum x^2/gamma + (mu/M) sum |x|`, CARD
/// becomes `loss + sum x^2/gamma` subject to `sum |x| <= (k - #One) * M` over
/// the free coordinates.
pub fn solve_bigm_relaxation(
    d: &Dataset,
    spec: &ProblemSpec,
    big_m: f64,
    fixings: &VariableFixings,
    cfg: &SolverConfig,
) -> Result<RelaxationSolution, RelaxError> {
    if !(big_m.is_finite() && big_m > 0.0) {
        return Err(RelaxError::InvalidParameter(format!(
            "big-M must be positive and finite, got {big_m}"
        )));
    }
    fixings.check_len(d.num_features())?;
    let penalty = match spec.kind {
        ProblemKind::Reg { gamma, mu } => Penalty::BigMReg {
            gamma,
            mu,
            big_m,
            fixings,
        },
        ProblemKind::Card { gamma, k } => {
            let budget = validate_card(d, k, fixings)?;
            Penalty::BigMCard {
                gamma,
                big_m,
                budget,
                fixings,
            }
        }
    };
    Ok(run(d, spec, penalty, cfg, None, SolverKind::BigM))
}

/// Solves the plain ridge-logistic problem restricted to a support:
/// `loss + (1/gamma) sum_{j in support} x_j^2` with all other coordinates
/// pinned to zero. Returns the coefficients and the objective value.
pub(crate) fn solve_restricted_ridge(
    d: &Dataset,
    convention: LossConvention,
    gamma: f64,
    support: &[bool],
    cfg: &SolverConfig,
    warm: Option<&Array1<f64>>,
) -> (Array1<f64>, f64, bool) {
    let penalty = Penalty::RestrictedRidge { gamma, support };
    let x0 = warm
        .cloned()
        .unwrap_or_else(|| Array1::zeros(d.num_features()));
    let spec_convention = convention;
    let outcome = fista::minimize(d, spec_convention, &penalty, x0, cfg, None);
    (outcome.x, outcome.objective, outcome.converged)
}

/// Default big-M scale: twice the sup norm of the all-indicators-on ridge
/// solution, floored at 1.0. Recorded alongside every big-M result because
/// the relaxation is only valid for M at least as large as the true optimum's
/// sup norm.
pub fn choose_bigm(d: &Dataset, spec: &ProblemSpec) -> f64 {
    let gamma = spec.gamma();
    assert!(gamma > 0.0, "gamma must be positive");
    let support = vec![true; d.num_features()];
    let (x, _, _) = solve_restricted_ridge(
        d,
        spec.convention,
        gamma,
        &support,
        &SolverConfig::default(),
        None,
    );
    let sup = x.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    (2.0 * sup).max(1.0)
}
