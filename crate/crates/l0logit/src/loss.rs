//! Numerically stable logistic loss: values, gradients, the per-observation
//! weight vector used by the dual certificates, and a curvature bound that
//! the first-order solvers use as their step-size basis.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::rng::Xoshiro256PlusPlus;

/// Whether the loss sums the per-observation terms or averages them.
///
/// The convention is fixed per problem: loss, gradient, weights, and every
/// screening threshold must use the same one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossConvention {
    #[default]
    Unnormalized,
    Normalized,
}

impl LossConvention {
    /// Multiplier applied to the per-observation sum.
    pub fn scale(self, num_observations: usize) -> f64 {
        match self {
            LossConvention::Unnormalized => 1.0,
            LossConvention::Normalized => 1.0 / num_observations as f64,
        }
    }
}

/// Overflow-safe `log(1 + exp(t))`.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Overflow-safe logistic sigmoid `1 / (1 + exp(-t))`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_dim(d: &Dataset, x: ArrayView1<f64>) {
    assert_eq!(
        x.len(),
        d.num_features(),
        "coefficient length {} does not match feature count {}",
        x.len(),
        d.num_features()
    );
}

/// Logistic loss `scale * sum_i softplus(-y_i * (A x)_i)`.
pub fn loss_value(d: &Dataset, x: ArrayView1<f64>, convention: LossConvention) -> f64 {
    check_dim(d, x);
    let margins = d.matrix().dot(&x);
    let total: f64 = margins
        .iter()
        .zip(d.labels().iter())
        .map(|(&u, &y)| softplus(-y * u))
        .sum();
    convention.scale(d.num_observations()) * total
}

/// Per-observation weights `alpha_i = y_i * sigmoid(-y_i * (A x)_i)`.
pub fn alpha_vector(d: &Dataset, x: ArrayView1<f64>) -> Array1<f64> {
    check_dim(d, x);
    let margins = d.matrix().dot(&x);
    let mut alpha = Array1::<f64>::zeros(d.num_observations());
    for (i, (&u, &y)) in margins.iter().zip(d.labels().iter()).enumerate() {
        alpha[i] = y * sigmoid(-y * u);
    }
    alpha
}

/// Gradient of `loss_value`; equals `-scale * Aᵀ alpha` by construction.
pub fn loss_gradient(d: &Dataset, x: ArrayView1<f64>, convention: LossConvention) -> Array1<f64> {
    let alpha = alpha_vector(d, x);
    let scale = convention.scale(d.num_observations());
    let mut grad = d.matrix().t().dot(&alpha);
    grad.mapv_inplace(|v| -scale * v);
    grad
}

/// Covers the power-iteration stopping tolerance so the returned curvature
/// stays an upper bound on the Hessian spectrum.
const CURVATURE_SAFETY: f64 = 2e-6;

/// Upper bound on the largest eigenvalue of the loss Hessian:
/// `scale * sigma_max(A)^2 / 4`, with the spectral norm estimated by power
/// iteration to `1e-6` relative accuracy.
pub fn curvature_bound(d: &Dataset, convention: LossConvention) -> f64 {
    let scale = convention.scale(d.num_observations());
    scale * spectral_norm_squared(d.matrix()) * (1.0 + CURVATURE_SAFETY) / 4.0
}

/// Largest eigenvalue of `AᵀA` by power iteration from a seeded random
/// direction. The Rayleigh quotient never exceeds the true value, so the
/// caller inflates the result before using it as a bound.
fn spectral_norm_squared(a: &Array2<f64>) -> f64 {
    let n = a.ncols();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x5EED_0001);
    let mut v = Array1::from_shape_fn(n, |_| rng.next_normal());
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.mapv_inplace(|t| t / norm);
    }
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let w = a.t().dot(&a.dot(&v));
        let next = v.dot(&w);
        let w_norm = w.dot(&w).sqrt();
        if w_norm == 0.0 {
            return 0.0;
        }
        v = w / w_norm;
        if (next - lambda).abs() <= 1e-6 * next.abs().max(f64::MIN_POSITIVE) {
            return next.max(0.0);
        }
        lambda = next;
    }
    lambda.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;

    fn tiny(a: Array2<f64>, y: Array1<f64>) -> Dataset {
        Dataset::new(a, y).unwrap()
    }

    /// Central finite differences of the loss, the independent gradient oracle.
    fn fd_gradient(d: &Dataset, x: &Array1<f64>, convention: LossConvention) -> Array1<f64> {
        let h = 1e-5;
        let mut g = Array1::<f64>::zeros(x.len());
        for j in 0..x.len() {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += h;
            lo[j] -= h;
            g[j] = (loss_value(d, hi.view(), convention) - loss_value(d, lo.view(), convention))
                / (2.0 * h);
        }
        g
    }

    /// Jacobi eigenvalue sweep for small symmetric matrices, the independent
    /// Hessian-spectrum oracle.
    fn max_eigenvalue_symmetric(mut s: Array2<f64>) -> f64 {
        let n = s.nrows();
        for _ in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(s[(p, q)].abs());
                }
            }
            if off < 1e-13 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if s[(p, q)].abs() < 1e-15 {
                        continue;
                    }
                    let theta = 0.5 * (s[(q, q)] - s[(p, p)]) / s[(p, q)];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for r in 0..n {
                        let (srp, srq) = (s[(r, p)], s[(r, q)]);
                        s[(r, p)] = c * srp - sn * srq;
                        s[(r, q)] = sn * srp + c * srq;
                    }
                    for r in 0..n {
                        let (spr, sqr) = (s[(p, r)], s[(q, r)]);
                        s[(p, r)] = c * spr - sn * sqr;
                        s[(q, r)] = sn * spr + c * sqr;
                    }
                }
            }
        }
        (0..n).map(|i| s[(i, i)]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Analytic Hessian `scale * Aᵀ D A` with `D_ii = s(1-s)` at the margins.
    fn hessian(d: &Dataset, x: &Array1<f64>, convention: LossConvention) -> Array2<f64> {
        let margins = d.matrix().dot(x);
        let scale = convention.scale(d.num_observations());
        let n = d.num_features();
        let mut h = Array2::<f64>::zeros((n, n));
        for (i, (&u, &y)) in margins.iter().zip(d.labels().iter()).enumerate() {
            let s = sigmoid(-y * u);
            let w = scale * s * (1.0 - s);
            for a in 0..n {
                for b in 0..n {
                    h[(a, b)] += w * d.matrix()[(i, a)] * d.matrix()[(i, b)];
                }
            }
        }
        h
    }

    #[test]
    fn loss_at_zero_is_log_two_per_row() {
        let d = tiny(
            array![[1.0, -2.0], [0.5, 3.0], [2.0, 0.0]],
            array![1.0, -1.0, 1.0],
        );
        let x = Array1::zeros(2);
        assert_relative_eq!(
            loss_value(&d, x.view(), LossConvention::Normalized),
            std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            loss_value(&d, x.view(), LossConvention::Unnormalized),
            3.0 * std::f64::consts::LN_2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn loss_saturates_without_overflow() {
        let d = tiny(array![[1.0]], array![1.0]);
        let x = array![40.0];
        let v = loss_value(&d, x.view(), LossConvention::Unnormalized);
        assert!(v.is_finite());
        assert!(v < 1e-17, "loss {v}");
        assert!(v > 0.0);
    }

    #[test]
    fn loss_stays_finite_at_extreme_margins() {
        let d = tiny(array![[1e4], [-1e4]], array![1.0, 1.0]);
        for x in [array![1.0], array![-1.0]] {
            let v = loss_value(&d, x.view(), LossConvention::Unnormalized);
            assert!(v.is_finite());
            let g = loss_gradient(&d, x.view(), LossConvention::Unnormalized);
            assert!(g.iter().all(|t| t.is_finite()));
        }
    }

    #[test]
    fn gradient_at_zero_matches_closed_form() {
        let d = tiny(
            array![[1.0, -2.0], [0.5, 3.0], [2.0, 0.0]],
            array![1.0, -1.0, 1.0],
        );
        let x = Array1::zeros(2);
        for convention in [LossConvention::Unnormalized, LossConvention::Normalized] {
            let g = loss_gradient(&d, x.view(), convention);
            let scale = convention.scale(3);
            for j in 0..2 {
                let expected = -0.5
                    * scale
                    * d.labels()
                        .iter()
                        .enumerate()
                        .map(|(i, &y)| y * d.matrix()[(i, j)])
                        .sum::<f64>();
                assert_relative_eq!(g[j], expected, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = gen_synthetic(&SyntheticConfig::new(4, 5, 2, 1.0, 21)).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
        for _ in 0..20 {
            let x = Array1::from_shape_fn(4, |_| rng.next_normal());
            for convention in [LossConvention::Unnormalized, LossConvention::Normalized] {
                let g = loss_gradient(&d, x.view(), convention);
                let fd = fd_gradient(&d, &x, convention);
                for j in 0..4 {
                    assert_relative_eq!(g[j], fd[j], max_relative = 1e-5, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_column_has_zero_gradient() {
        let d = tiny(array![[1.0, 0.0], [-2.0, 0.0]], array![1.0, -1.0]);
        let x = array![0.3, -0.7];
        let g = loss_gradient(&d, x.view(), LossConvention::Unnormalized);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn alpha_basics_and_saturation() {
        let d = tiny(array![[1.0], [2.0]], array![1.0, -1.0]);
        let alpha = alpha_vector(&d, array![0.0].view());
        assert_eq!(alpha[0], 0.5);
        assert_eq!(alpha[1], -0.5);

        let d = tiny(array![[50.0]], array![1.0]);
        let alpha = alpha_vector(&d, array![1.0].view());
        assert!(alpha[0] > 0.0);
        assert!(alpha[0] < 2e-22, "alpha {}", alpha[0]);
    }

    #[test]
    fn alpha_matches_direct_formula_on_moderate_margins() {
        // On margins where the naive formula y/(1+exp(y*u)) cannot overflow,
        // the stable evaluation must agree with it almost to machine precision.
        let d = gen_synthetic(&SyntheticConfig::new(6, 40, 3, 1.0, 31)).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        for _ in 0..50 {
            let x = Array1::from_shape_fn(6, |_| 0.5 * rng.next_normal());
            let alpha = alpha_vector(&d, x.view());
            let margins = d.matrix().dot(&x);
            for i in 0..d.num_observations() {
                let y = d.labels()[i];
                let direct = y / (1.0 + (y * margins[i]).exp());
                assert_relative_eq!(alpha[i], direct, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn loss_is_convex_along_random_segments() {
        let d = gen_synthetic(&SyntheticConfig::new(5, 12, 2, 1.0, 41)).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        for _ in 0..100 {
            let a = Array1::from_shape_fn(5, |_| rng.next_normal());
            let b = Array1::from_shape_fn(5, |_| rng.next_normal());
            let t = rng.next_f64();
            let mid = &a * (1.0 - t) + &b * t;
            let lhs = loss_value(&d, mid.view(), LossConvention::Unnormalized);
            let rhs = (1.0 - t) * loss_value(&d, a.view(), LossConvention::Unnormalized)
                + t * loss_value(&d, b.view(), LossConvention::Unnormalized);
            assert!(lhs <= rhs + 1e-12, "convexity violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn normalized_is_unnormalized_over_m() {
        let d = gen_synthetic(&SyntheticConfig::new(4, 9, 2, 1.0, 51)).unwrap();
        let x = array![0.2, -0.4, 0.1, 0.9];
        let unn = loss_value(&d, x.view(), LossConvention::Unnormalized);
        let nor = loss_value(&d, x.view(), LossConvention::Normalized);
        assert_relative_eq!(nor, unn / 9.0, max_relative = 1e-15);
    }

    #[test]
    fn curvature_bound_known_values() {
        let d = tiny(array![[1.0, 0.0], [0.0, 1.0]], array![1.0, -1.0]);
        assert_relative_eq!(
            curvature_bound(&d, LossConvention::Unnormalized),
            0.25,
            max_relative = 1e-5
        );
        let d = tiny(array![[2.0]], array![1.0]);
        assert_relative_eq!(
            curvature_bound(&d, LossConvention::Normalized),
            1.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn curvature_bounds_the_hessian_spectrum() {
        let d = gen_synthetic(&SyntheticConfig::new(10, 20, 4, 1.0, 61)).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(71);
        for convention in [LossConvention::Unnormalized, LossConvention::Normalized] {
            let bound = curvature_bound(&d, convention);
            for _ in 0..100 {
                let x = Array1::from_shape_fn(10, |_| rng.next_normal());
                let top = max_eigenvalue_symmetric(hessian(&d, &x, convention));
                assert!(
                    top <= bound,
                    "hessian eigenvalue {top} exceeds bound {bound}"
                );
            }
        }
    }

    #[test]
    fn curvature_of_zero_matrix_is_zero() {
        let d = tiny(array![[0.0, 0.0], [0.0, 0.0]], array![1.0, -1.0]);
        assert_abs_diff_eq!(curvature_bound(&d, LossConvention::Unnormalized), 0.0);
    }
}
