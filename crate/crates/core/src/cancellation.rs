//! The cancellation constraint: after the final reflection no amplitude may
//! remain on the unmarked blocks.
//!
//! Three forms are provided: the exact finite-b equation in `(j1, j2)`, its
//! b → ∞ limit solved for η in closed form, and the further K → ∞ limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BlockModel, Problem, Regime};
use crate::reduced_sim::Schedule;
use crate::roots::{bisect_secant, sign_changes};

const SCAN_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CancellationRegime {
    FiniteB,
    LargeB,
    LargeK,
}

/// Left-hand side minus right-hand side of one form of the constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellationResidual {
    pub value: f64,
    pub regime: CancellationRegime,
}

/// Finite-b residual as a function of the accumulated global angle
/// `phi = (2 j1 + 1) theta`.
fn residual_at_phase(problem: &Problem, phi: f64, j2: f64) -> f64 {
    let n = problem.n() as f64;
    let z = problem.z() as f64;
    let b = problem.b() as f64;
    let t = problem.t() as f64;
    let k = problem.k() as f64;
    let (sin_phi, cos_phi) = phi.sin_cos();
    let lhs = n / (n - z).sqrt() * (t / k - 0.5) * cos_phi;
    let rhs: f64 = problem
        .taus()
        .iter()
        .zip(problem.angles().thetas)
        .map(|(&tau, theta_i)| {
            let tau = tau as f64;
            let (s, c) = (2.0 * j2 * theta_i).sin_cos();
            tau / z.sqrt() * c * sin_phi + (tau * (b - tau) / (n - z)).sqrt() * s * cos_phi
                - (tau * (b - tau) / z).sqrt() * s * sin_phi
                + (b - tau) / (n - z).sqrt() * c * cos_phi
        })
        .sum();
    lhs - rhs
}

/// Finite-b cancellation residual at real `(j1, j2)`.
///
/// The unmarked-block coordinate after the final reflection equals
/// `2 sqrt(b (K - t)) / N` times this value.
pub fn residual_finite_b(problem: &Problem, j1: f64, j2: f64) -> f64 {
    let phi = (2.0 * j1 + 1.0) * problem.angles().theta;
    residual_at_phase(problem, phi, j2)
}

/// Smallest `j1 >= 0` cancelling the unmarked amplitude for the given `j2`.
pub fn solve_j1_finite_b(problem: &Problem, j2: f64) -> Result<f64> {
    if !(j2 >= 0.0 && j2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "j2 must be nonnegative, got {j2}"
        )));
    }
    let theta = problem.angles().theta;
    let f = |phi: f64| residual_at_phase(problem, phi, j2);
    let lo = theta;
    let hi = std::f64::consts::PI;
    if f(lo) == 0.0 {
        return Ok(0.0);
    }
    let cells = sign_changes(f, lo, hi, SCAN_SAMPLES);
    let &(a, b) = cells.first().ok_or_else(|| Error::NoRoot {
        what: "finite-b cancellation residual in (2 j1 + 1) theta".into(),
        lo,
        hi,
    })?;
    let phi = bisect_secant(f, a, b, 0.0, "finite-b cancellation residual")?;
    Ok(((phi / theta - 1.0) / 2.0).max(0.0))
}

/// The full real schedule `(j1, j2)` whose Step 3 cancels the unmarked blocks.
pub fn solve_schedule_finite_b(problem: &Problem, j2: f64) -> Result<Schedule> {
    Schedule::real(solve_j1_finite_b(problem, j2)?, j2)
}

/// `K - 4 sum sin^2(alpha sqrt(tau_i))`, positive whenever t < K/4.
pub fn large_b_denominator(model: &BlockModel, alpha: f64) -> f64 {
    model.k()
        - 4.0
            * model
                .taus()
                .iter()
                .map(|tau| (alpha * tau.sqrt()).sin().powi(2))
                .sum::<f64>()
}

/// η solving the b → ∞ cancellation equation for the given α (principal branch).
///
/// Algorithm-regime models (t < K/4) always have a positive denominator;
/// analysis-regime models are accepted only where it is positive at `alpha`.
pub fn eta_large_b(model: &BlockModel, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let k = model.k();
    let z = model.z();
    let denom = large_b_denominator(model, alpha);
    if denom <= 0.0 {
        let reason = match model.regime() {
            Regime::Algorithm => "non-positive cancellation denominator",
            Regime::Analysis => "t >= K/4 and the cancellation denominator is not positive",
        };
        return Err(Error::Regime(format!(
            "{reason} at alpha = {alpha} (denominator {denom})"
        )));
    }
    let numer: f64 = 2.0
        * k.sqrt()
        * model
            .taus()
            .iter()
            .map(|tau| tau.sqrt() * (2.0 * alpha * tau.sqrt()).sin())
            .sum::<f64>();
    Ok(0.5 * (k / z).sqrt() * (numer / (z.sqrt() * denom)).atan())
}

/// The b → ∞ cancellation equation before solving for η, as LHS − RHS.
pub fn residual_large_b(model: &BlockModel, eta: f64, alpha: f64) -> CancellationResidual {
    let k = model.k();
    let z = model.z();
    let t = model.t() as f64;
    let (s, c) = (2.0 * eta * (z / k).sqrt()).sin_cos();
    let lhs = (t / k.sqrt() - k.sqrt() / 2.0) * s;
    let rhs: f64 = model
        .taus()
        .iter()
        .map(|tau| {
            let angle = 2.0 * alpha * tau.sqrt();
            angle.cos() * s / k.sqrt() - (tau / z).sqrt() * angle.sin() * c
        })
        .sum();
    CancellationResidual {
        value: lhs - rhs,
        regime: CancellationRegime::LargeB,
    }
}

/// η from the K → ∞ cancellation equation, `(1/z) sum sqrt(tau_i) sin(2 alpha sqrt(tau_i))`.
pub fn eta_large_k(model: &BlockModel, alpha: f64) -> f64 {
    model
        .taus()
        .iter()
        .map(|tau| tau.sqrt() * (2.0 * alpha * tau.sqrt()).sin())
        .sum::<f64>()
        / model.z()
}

pub fn residual_large_k(model: &BlockModel, eta: f64, alpha: f64) -> CancellationResidual {
    CancellationResidual {
        value: eta - eta_large_k(model, alpha),
        regime: CancellationRegime::LargeK,
    }
}

pub fn residual_finite_b_report(problem: &Problem, j1: f64, j2: f64) -> CancellationResidual {
    CancellationResidual {
        value: residual_finite_b(problem, j1, j2),
        regime: CancellationRegime::FiniteB,
    }
}
