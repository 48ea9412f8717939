//! Query minimization in the large-block limit.
//!
//! With `j1 = (pi/4) sqrt(N/z) - eta sqrt(b)` and `j2 = alpha sqrt(b)` the
//! total query count is `(pi/4) sqrt(N/z) - (eta - alpha) sqrt(b)`, so the
//! optimizer maximizes `f = eta - alpha` subject to the b → ∞ cancellation
//! constraint `eta = eta_large_b(alpha)`. Eliminating the Lagrange multiplier
//! leaves a single scalar condition in α, solved here by bracketed root
//! finding; [`grid_oracle`] maximizes `f` directly as an independent check.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cancellation::{eta_large_b, eta_large_k};
use crate::error::{Error, Result};
use crate::problem::{BlockModel, Problem};
use crate::roots::{bisect_secant, golden_section_max, sign_changes};

/// Cells used when scanning the α bracket for sign changes.
const ROOT_SCAN_SAMPLES: usize = 4096;

/// Smallest grid accepted by [`grid_oracle`].
pub const MIN_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedFormEven,
    ConditionRoot,
    GridOracle,
    /// Root of the K → ∞ optimality condition, `eta` from the K → ∞ cancellation form.
    LargeKConditionRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub problem: BlockModel,
    pub alpha_star: f64,
    pub eta_star: f64,
    /// `eta_star - alpha_star`.
    pub f_star: f64,
    /// Leading-order total queries; needs N and b, so absent for bare block models.
    pub queries_leading: Option<f64>,
    pub method: Method,
    /// Number of sign changes of the optimality condition in the bracket.
    /// More than one means the root was not unique and the smallest was taken.
    pub roots_found: usize,
}

impl OptimizationResult {
    fn new(model: &BlockModel, alpha: f64, eta: f64, method: Method, roots_found: usize) -> Self {
        Self {
            problem: model.clone(),
            alpha_star: alpha,
            eta_star: eta,
            f_star: eta - alpha,
            queries_leading: None,
            method,
            roots_found,
        }
    }

    /// Fills in the leading-order query count for a concrete instance.
    pub fn with_queries(mut self, problem: &Problem) -> Self {
        self.queries_leading = Some(total_queries(problem, self.eta_star, self.alpha_star));
        self
    }
}

/// Upper end of the α bracket, `2 alpha sqrt(tau_max) < pi`.
pub fn alpha_bracket(model: &BlockModel) -> (f64, f64) {
    (0.0, std::f64::consts::FRAC_PI_2 / model.tau_max().sqrt())
}

/// `2 sum (K tau_i - z) cos(2 alpha sqrt(tau_i)) - z (K - 2t)`.
pub fn optimality_residual(model: &BlockModel, alpha: f64) -> f64 {
    let k = model.k();
    let z = model.z();
    let t = model.t() as f64;
    2.0 * model
        .taus()
        .iter()
        .map(|tau| (k * tau - z) * (2.0 * alpha * tau.sqrt()).cos())
        .sum::<f64>()
        - z * (k - 2.0 * t)
}

/// The other factor of the optimality equation, `2 sum cos(2 alpha sqrt(tau_i)) + K - 2t`.
/// It exceeds `K - 4t` and so cannot vanish when t < K/4.
pub fn optimality_first_factor(model: &BlockModel, alpha: f64) -> f64 {
    2.0 * model
        .taus()
        .iter()
        .map(|tau| (2.0 * alpha * tau.sqrt()).cos())
        .sum::<f64>()
        + model.k()
        - 2.0 * model.t() as f64
}

/// Optimal α for an even distribution, from `cos(2 alpha sqrt(tau)) = (1 - 2 beta) / (2 (1 - beta))`.
pub fn even_alpha(beta: f64, tau_bar: f64) -> Result<f64> {
    if !(0.0..0.75).contains(&beta) {
        return Err(Error::Domain(format!(
            "even optimum needs 0 <= beta < 3/4, got {beta}"
        )));
    }
    Ok(((1.0 - 2.0 * beta) / (2.0 * (1.0 - beta))).acos() / (2.0 * tau_bar.sqrt()))
}

/// Closed-form optimum for an even distribution.
pub fn even_optimum(model: &BlockModel) -> Result<OptimizationResult> {
    if !model.is_even() {
        return Err(Error::InvalidInput(
            "closed-form optimum requires an even distribution".into(),
        ));
    }
    let k = model.k();
    let t = model.t() as f64;
    if k - 2.0 * t <= 0.0 {
        return Err(Error::Regime(format!(
            "closed-form eta0 needs t < K/2 (t = {t}, K = {k})"
        )));
    }
    let alpha = even_alpha(model.beta(), model.tau_bar())?;
    let tan = (3.0 * t * k - 4.0 * t * t).sqrt() / (k - 2.0 * t);
    let eta = tan.atan() / (2.0 * (model.z() / k).sqrt());
    Ok(OptimizationResult::new(
        model,
        alpha,
        eta,
        Method::ClosedFormEven,
        1,
    ))
}

/// Solves the optimality condition for the smallest α in the bracket and
/// takes η from the b → ∞ cancellation equation.
pub fn solve_uneven_optimum(model: &BlockModel) -> Result<OptimizationResult> {
    let (lo, hi) = alpha_bracket(model);
    let f = |alpha: f64| optimality_residual(model, alpha);
    let cells = sign_changes(f, lo, hi, ROOT_SCAN_SAMPLES);
    let &(a, b) = cells.first().ok_or_else(|| Error::NoRoot {
        what: "optimality condition in alpha".into(),
        lo,
        hi,
    })?;
    let alpha = bisect_secant(f, a, b, 0.0, "optimality condition")?;
    let first = optimality_first_factor(model, alpha);
    if first <= 0.0 {
        return Err(Error::Assertion(format!(
            "first factor of the optimality equation is {first} at alpha = {alpha}"
        )));
    }
    let eta = eta_large_b(model, alpha)?;
    Ok(OptimizationResult::new(
        model,
        alpha,
        eta,
        Method::ConditionRoot,
        cells.len(),
    ))
}

/// Direct maximization of `eta_large_b(alpha) - alpha` over the α bracket:
/// a dense scan followed by golden-section refinement around the best cell.
pub fn grid_oracle(model: &BlockModel, grid_points: usize) -> Result<OptimizationResult> {
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::InvalidInput(format!(
            "grid oracle needs at least {MIN_GRID_POINTS} points, got {grid_points}"
        )));
    }
    let (lo, hi) = alpha_bracket(model);
    let step = (hi - lo) / grid_points as f64;
    let objective = |alpha: f64| match eta_large_b(model, alpha) {
        Ok(eta) => eta - alpha,
        Err(_) => f64::NEG_INFINITY,
    };
    let values: Vec<f64> = (0..=grid_points)
        .into_par_iter()
        .map(|i| objective(lo + step * i as f64))
        .collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = lo + step * (best + 1).min(grid_points) as f64;
    let (alpha, _) = golden_section_max(objective, a, b, 1e-13);
    let eta = eta_large_b(model, alpha)?;
    Ok(OptimizationResult::new(
        model,
        alpha,
        eta,
        Method::GridOracle,
        0,
    ))
}

/// Optimum in the K → ∞ limit, where the cancellation constraint becomes
/// `eta = (1/z) sum sqrt(tau_i) sin(2 alpha sqrt(tau_i))` and the optimality
/// condition `(2/z) sum tau_i cos(2 alpha sqrt(tau_i)) = 1`.
pub fn large_k_optimum(model: &BlockModel) -> Result<OptimizationResult> {
    let (lo, hi) = alpha_bracket(model);
    let z = model.z();
    let f = |alpha: f64| {
        2.0 * model
            .taus()
            .iter()
            .map(|tau| tau * (2.0 * alpha * tau.sqrt()).cos())
            .sum::<f64>()
            / z
            - 1.0
    };
    let cells = sign_changes(f, lo, hi, ROOT_SCAN_SAMPLES);
    let &(a, b) = cells.first().ok_or_else(|| Error::NoRoot {
        what: "large-K optimality condition".into(),
        lo,
        hi,
    })?;
    let alpha = bisect_secant(f, a, b, 0.0, "large-K optimality condition")?;
    let eta = eta_large_k(model, alpha);
    Ok(OptimizationResult::new(
        model,
        alpha,
        eta,
        Method::LargeKConditionRoot,
        cells.len(),
    ))
}

/// Leading-order total queries `(pi/4) sqrt(N/z) - (eta - alpha) sqrt(b)`.
pub fn total_queries(problem: &Problem, eta: f64, alpha: f64) -> f64 {
    full_search_queries(problem) - (eta - alpha) * (problem.b() as f64).sqrt()
}

/// Leading-order cost of a full Grover search, `(pi/4) sqrt(N/z)`.
pub fn full_search_queries(problem: &Problem) -> f64 {
    FRAC_PI_4 * (problem.n() as f64 / problem.z() as f64).sqrt()
}

/// Optimum for a concrete instance: closed form when even, condition root otherwise.
pub fn optimize(problem: &Problem) -> Result<OptimizationResult> {
    let model = BlockModel::from(problem);
    let result = if model.is_even() {
        even_optimum(&model)?
    } else {
        solve_uneven_optimum(&model)?
    };
    Ok(result.with_queries(problem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_problem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn residual_at_zero_is_zk() {
        let m = BlockModel::analysis(40.0, vec![1.0, 3.0, 7.0]).unwrap();
        assert!((optimality_residual(&m, 0.0) - m.z() * m.k()).abs() < 1e-9);
    }

    #[test]
    fn even_closed_form_satisfies_both_conditions() {
        for (k, t, tau) in [
            (100.0, 1, 1.0),
            (40.0, 3, 4.0),
            (17.0, 4, 2.0),
            (1e4, 7, 30.0),
        ] {
            let m = BlockModel::analysis(k, vec![tau; t]).unwrap();
            let r = even_optimum(&m).unwrap();
            let scale = m.z() * m.k();
            assert!(optimality_residual(&m, r.alpha_star).abs() < 1e-12 * scale);
            assert!((r.eta_star - eta_large_b(&m, r.alpha_star).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn even_closed_form_k100_t1() {
        let m = BlockModel::analysis(100.0, vec![1.0]).unwrap();
        let r = even_optimum(&m).unwrap();
        assert!(((2.0 * r.alpha_star).cos() - 98.0 / 198.0).abs() < 1e-15);
        let eta = (296f64.sqrt() / 98.0).atan() / 2.0 * 10.0;
        assert!((r.eta_star - eta).abs() < 1e-14);
    }

    #[test]
    fn even_alpha_large_k_limit() {
        for tau in [1.0, 4.0, 9.0] {
            let m = BlockModel::analysis(1e8, vec![tau; 2]).unwrap();
            let r = even_optimum(&m).unwrap();
            assert!((r.alpha_star * tau.sqrt() - PI / 6.0).abs() < 1e-6);
            assert!(((2.0 * r.alpha_star * tau.sqrt()).sin() - 3f64.sqrt() / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn even_specialization_of_condition() {
        // with tau_i = tau_bar the condition is 2 t tau (K - t) cos - z (K - 2t), whose root is the closed form
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let t = rng.gen_range(1..6);
            let k = rng.gen_range(4 * t + 1..200) as f64;
            let tau = rng.gen_range(0.5..50.0);
            let m = BlockModel::analysis(k, vec![tau; t]).unwrap();
            for alpha in [0.05, 0.2, 0.6] {
                let c = (2.0 * alpha * f64::sqrt(tau)).cos();
                let z = t as f64 * tau;
                let expected = 2.0 * t as f64 * tau * (k - t as f64) * c - z * (k - 2.0 * t as f64);
                assert!((optimality_residual(&m, alpha) - expected).abs() < 1e-9 * z * k);
            }
            let root = solve_uneven_optimum(&m).unwrap();
            let closed = even_optimum(&m).unwrap();
            assert!((root.alpha_star - closed.alpha_star).abs() < 1e-10);
            assert!((root.f_star - closed.f_star).abs() < 1e-10);
        }
    }

    #[test]
    fn uneven_optimum_stationary_and_below_even() {
        let m = BlockModel::analysis(100.0, vec![1.0, 3.0]).unwrap();
        let r = solve_uneven_optimum(&m).unwrap();
        assert!(optimality_residual(&m, r.alpha_star).abs() < 1e-9);
        assert_eq!(r.roots_found, 1);
        // d(eta)/d(alpha) = 1 at the optimum
        let h = 1e-5;
        let slope = (eta_large_b(&m, r.alpha_star + h).unwrap()
            - eta_large_b(&m, r.alpha_star - h).unwrap())
            / (2.0 * h);
        assert!((slope - 1.0).abs() < 1e-8);
        let even = even_optimum(&m.evened()).unwrap();
        assert!(r.f_star < even.f_star);
    }

    #[test]
    fn grid_oracle_agrees_and_refines() {
        let m = BlockModel::analysis(50.0, vec![2.0, 5.0, 3.0]).unwrap();
        let root = solve_uneven_optimum(&m).unwrap();
        let grid = grid_oracle(&m, 4000).unwrap();
        assert!((root.f_star - grid.f_star).abs() < 1e-6);
        let even = BlockModel::analysis(50.0, vec![3.0; 3]).unwrap();
        assert!(
            (grid_oracle(&even, 2000).unwrap().f_star - even_optimum(&even).unwrap().f_star).abs()
                < 1e-6
        );
        assert!(grid_oracle(&m, 10).is_err());
    }

    #[test]
    fn grid_scan_improves_with_refinement() {
        let m = BlockModel::analysis(50.0, vec![2.0, 5.0, 3.0]).unwrap();
        let (lo, hi) = alpha_bracket(&m);
        let best = |n: usize| {
            (1..n)
                .map(|i| {
                    let a = lo + (hi - lo) * i as f64 / n as f64;
                    eta_large_b(&m, a).unwrap() - a
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        // nested grids: every point of the coarse grid is on the fine one
        assert!(best(2000) >= best(1000));
        assert!(best(4000) >= best(2000));
    }

    #[test]
    fn total_queries_baseline_and_monotonicity() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let full = full_search_queries(&p);
        assert!((full - FRAC_PI_4 * 16.0).abs() < 1e-12);
        assert_eq!(total_queries(&p, 0.3, 0.3), full);
        assert_eq!(total_queries(&p, 0.0, 0.0), full);
        assert!(total_queries(&p, 0.5, 0.3) < total_queries(&p, 0.4, 0.3));
    }

    #[test]
    fn optimize_dispatches_and_beats_full_search() {
        let even = make_problem(64, 256, &[3, 3]).unwrap();
        let r = optimize(&even).unwrap();
        assert_eq!(r.method, Method::ClosedFormEven);
        assert!(r.f_star > 0.0);
        assert!(r.queries_leading.unwrap() < full_search_queries(&even));
        let uneven = make_problem(64, 256, &[1, 5]).unwrap();
        let r = optimize(&uneven).unwrap();
        assert_eq!(r.method, Method::ConditionRoot);
        assert!(r.queries_leading.unwrap() < full_search_queries(&uneven));
    }

    #[test]
    fn large_k_optimum_even_limit() {
        let m = BlockModel::analysis(1e12, vec![4.0; 3]).unwrap();
        let r = large_k_optimum(&m).unwrap();
        assert!((r.alpha_star - PI / 12.0).abs() < 1e-14);
        assert!((r.eta_star - 3f64.sqrt() / 4.0).abs() < 1e-14);
    }

    #[test]
    fn uneven_rejected_by_closed_form() {
        let m = BlockModel::analysis(40.0, vec![1.0, 2.0]).unwrap();
        assert!(even_optimum(&m).is_err());
    }

    #[test]
    fn result_serializes_with_problem() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let json = serde_json::to_value(optimize(&p).unwrap()).unwrap();
        assert_eq!(json["problem"]["K"], 16.0);
        assert_eq!(json["method"], "condition-root");
        assert!(json["queries_leading"].as_f64().is_some());
    }
}
