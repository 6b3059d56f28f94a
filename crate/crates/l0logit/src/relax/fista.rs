//! Accelerated proximal gradient (FISTA) with adaptive restart.
//!
//! The smooth part is always the logistic loss; the nonsmooth part is one of
//! the [`Penalty`] variants. Restarts keep the recorded objective trace
//! non-increasing: when momentum would raise the objective, the iteration is
//! redone as a plain proximal-gradient step from the previous iterate, which
//! the descent lemma guarantees cannot increase it (the step never exceeds
//! one over the curvature bound).

use ndarray::Array1;

use super::penalty::Penalty;
use super::{SolverConfig, StepRule};
use crate::data::Dataset;
use crate::loss::{curvature_bound, loss_gradient, loss_value, LossConvention};

/// Guard against degenerate (all-zero) designs where the curvature bound
/// vanishes and the step would blow up.
const MIN_CURVATURE: f64 = 1e-12;

pub(crate) struct Outcome {
    pub x: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Prox-gradient fixed-point residual at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Callback invoked once per iteration with (iteration, objective,
/// restarted-this-iteration).
pub(crate) type IterCallback<'cb> = &'cb mut dyn FnMut(usize, f64, bool);

pub(crate) fn minimize(
    d: &Dataset,
    convention: LossConvention,
    penalty: &Penalty<'_>,
    x0: Array1<f64>,
    cfg: &SolverConfig,
    mut on_iter: Option<IterCallback<'_>>,
) -> Outcome {
    let smooth = |x: &Array1<f64>| loss_value(d, x.view(), convention);
    let grad = |x: &Array1<f64>| loss_gradient(d, x.view(), convention);
    let total = |x: &Array1<f64>| smooth(x) + penalty.value(x);
    let base_step = 1.0 / curvature_bound(d, convention).max(MIN_CURVATURE);

    let mut x_prev = x0;
    penalty.sanitize(&mut x_prev);
    let mut f_prev = total(&x_prev);
    let mut y = x_prev.clone();
    let mut momentum = 1.0f64;
    let mut step = base_step;
    let mut best_f = f_prev;
    let mut best_x = x_prev.clone();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    // One proximal step of length `step` from `point`.
    let prox_step = |point: &Array1<f64>, g: &Array1<f64>, step: f64| -> Array1<f64> {
        let mut out = point.clone();
        out.scaled_add(-step, g);
        penalty.prox(&mut out, step);
        out
    };

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let g_y = grad(&y);
        let mut x_new;
        match cfg.step_rule {
            StepRule::FixedFromCurvature => {
                x_new = prox_step(&y, &g_y, step);
            }
            StepRule::BacktrackingLineSearch => {
                let smooth_y = smooth(&y);
                loop {
                    x_new = prox_step(&y, &g_y, step);
                    let diff = &x_new - &y;
                    let model = smooth_y + g_y.dot(&diff) + diff.dot(&diff) / (2.0 * step);
                    if smooth(&x_new) <= model + 1e-12 * model.abs().max(1.0)
                        || step <= base_step * 1e-12
                    {
                        break;
                    }
                    step *= 0.5;
                }
            }
        }
        let mut f_new = total(&x_new);
        let mut restarted = false;
        if cfg.restart && f_new > f_prev && momentum > 1.0 {
            // Momentum overshoot: drop acceleration and redo the iteration as
            // a plain proximal-gradient step from the previous iterate.
            restarted = true;
            momentum = 1.0;
            y.assign(&x_prev);
            let g = grad(&y);
            x_new = prox_step(&y, &g, step);
            f_new = total(&x_new);
        }
        if let Some(cb) = on_iter.as_deref_mut() {
            cb(iter, f_new, restarted);
        }

        // Cheap residual from the step just taken; certify at x_new itself
        // before declaring convergence.
        let gap = x_new
            .iter()
            .zip(y.iter())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()))
            / step;
        if gap <= cfg.tol {
            let g_x = grad(&x_new);
            let x_check = prox_step(&x_new, &g_x, step);
            let certified = x_check
                .iter()
                .zip(x_new.iter())
                .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()))
                / step;
            if certified <= cfg.tol {
                residual = certified;
                converged = true;
                x_prev = x_new;
                f_prev = f_new;
                break;
            }
        }

        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        y = &x_new + &(&x_new - &x_prev).mapv(|delta| beta * delta);
        momentum = next_momentum;
        x_prev = x_new;
        f_prev = f_new;
        if f_prev < best_f {
            best_f = f_prev;
            best_x = x_prev.clone();
        }
    }

    if converged {
        Outcome {
            x: x_prev,
            objective: f_prev,
            iterations,
            residual,
            converged: true,
        }
    } else {
        // Out of iterations: report the best iterate seen, with its own
        // certified residual.
        let g = grad(&best_x);
        let x_check = prox_step(&best_x, &g, step);
        let certified = x_check
            .iter()
            .zip(best_x.iter())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()))
            / step;
        Outcome {
            x: best_x,
            objective: best_f,
            iterations,
            residual: certified,
            converged: false,
        }
    }
}
