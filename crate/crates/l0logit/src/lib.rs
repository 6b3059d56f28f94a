//! Sparse logistic regression via mixed-integer optimization.
//!
//! The crate targets two closely related problems over a data matrix `A`
//! (m observations, n features) with labels `y in {-1, +1}`:
//!
//! * **REG** — l0-l2 penalized:
//!   `min L(x) + (1/gamma) sum_j x_j^2 / z_j + mu sum_j z_j`,
//!   `z in {0,1}^n`, with the convention `0/0 = 0`;
//! * **CARD** — cardinality constrained:
//!   `min L(x) + (1/gamma) sum_j x_j^2 / z_j` subject to `sum_j z_j <= k`,
//!
//! where `L` is the logistic loss. Both are attacked through their
//! perspective-strength continuous relaxations, Fenchel-dual safe screening
//! rules that provably fix indicator variables before the exact solve, and a
//! best-bound branch-and-bound using the relaxation as node bound.
//!
//! Module map:
//!
//! * [`data`] — datasets, synthetic generation, CSV / sparse-text I/O;
//! * [`loss`] — logistic loss values, gradients, curvature bounds;
//! * [`relax`] — perspective and big-M relaxations, accelerated proximal
//!   gradient solver, closed-form indicator recovery;
//! * [`screen`] — dual certificates, rounding upper bounds, safe rules;
//! * [`bnb`] — branch-and-bound, brute-force oracle, integrality gap;
//! * [`rng`] — the deterministic PRNG behind every random quantity.

pub mod bnb;
pub mod data;
pub mod loss;
pub mod relax;
pub mod rng;
pub mod screen;

pub use bnb::{
    brute_force, brute_force_detailed, integrality_gap, solve_bnb, BnbConfig, BnbError, Branching,
    BruteForceReport, MipSolution, MipStatus, NodeSelection,
};
pub use data::{
    gen_synthetic, load_dense_csv, load_sparse_text, write_dense_csv, Covariance, CsvOptions,
    DataError, Dataset, SyntheticConfig,
};
pub use loss::{
    alpha_vector, curvature_bound, loss_gradient, loss_value, sigmoid, softplus, LossConvention,
};
pub use relax::{
    choose_bigm, optimal_z_card, optimal_z_reg, perspective_penalty_prox, reverse_huber,
    solve_bigm_relaxation, solve_card_relaxation, solve_reg_relaxation, Fixing, ProblemKind,
    ProblemSpec, RelaxError, RelaxationSolution, SolverConfig, SolverKind, StepRule,
    VariableFixings,
};
pub use rng::{derive_seed, Xoshiro256PlusPlus};
pub use screen::{
    dual_certificate, eval_dual_card, eval_dual_reg, round_upper_bound, screen_card, screen_reg,
    DualCertificate, FeatureStatus, ScreenError, ScreenResult, UpperBound, SAFETY_SLACK,
};
