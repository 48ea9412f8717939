//! Second-order penalty of uneven target distributions.
//!
//! Writing `tau_i = tau_bar (1 + eps_i)` with `sum eps_i = 0`, the optimum
//! moves by `Δα`, `Δη` proportional to the variance `δ²`, and the leading
//! coefficient `f = η - α` drops by a multiple of `δ² / tau_bar^(5/2)`.
//! This module evaluates those closed forms and compares them with the
//! optimizer run on explicitly perturbed instances.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{even_alpha, even_optimum, large_k_optimum, solve_uneven_optimum};
use crate::problem::BlockModel;
use crate::roots::{bisect_secant, sign_changes};

/// Upper end (exclusive) of the β range on which the closed forms are defined.
pub const BETA_MAX: f64 = 0.75;

/// Upper end (exclusive) of the β range in which the optimizer itself is valid.
pub const BETA_ALGORITHM_MAX: f64 = 0.25;

/// `(sqrt(3) pi^2 - 3 pi + 9 sqrt(3)) / 144`, the K → ∞ penalty coefficient.
pub fn theorem1_constant() -> f64 {
    let sqrt3 = 3f64.sqrt();
    (sqrt3 * PI * PI - 3.0 * PI + 9.0 * sqrt3) / 144.0
}

/// Predicted K → ∞ penalty `c δ² / tau_bar^(5/2)`.
pub fn theorem1_prediction(tau_bar: f64, variance: f64) -> f64 {
    theorem1_constant() * variance / tau_bar.powf(2.5)
}

/// Lower-bound coefficient for finite K as a function of β = t/K.
pub fn g_of_beta(beta: f64) -> Result<f64> {
    if !(0.0..BETA_MAX).contains(&beta) {
        return Err(Error::Domain(format!(
            "g(beta) needs 0 <= beta < 3/4, got {beta}"
        )));
    }
    let root = (3.0 - 4.0 * beta).sqrt();
    let numer = root * (1.0 - 2.0 * beta) * (PI * PI * (1.0 - beta) + 9.0)
        + 3.0 * PI * (-8.0 * beta * beta + 7.0 * beta - 1.0);
    Ok(numer / (144.0 * (1.0 - beta)))
}

/// The numerator of `g` with its radical squared away: a degree-5 polynomial
/// that vanishes wherever `g` does.
pub fn g_numerator_polynomial(beta: f64) -> f64 {
    let radical_part = (1.0 - 2.0 * beta) * (PI * PI * (1.0 - beta) + 9.0);
    let rest = 3.0 * PI * (-8.0 * beta * beta + 7.0 * beta - 1.0);
    (3.0 - 4.0 * beta) * radical_part * radical_part - rest * rest
}

/// The root of `g` in (0, 3/4), by bisection.
pub fn beta_critical() -> f64 {
    let g = |beta: f64| g_of_beta(beta).expect("beta inside the domain");
    let hi = BETA_MAX - 1e-9;
    let cells = sign_changes(g, 0.0, hi, 750);
    let &(a, b) = cells.first().expect("g changes sign on (0, 3/4)");
    bisect_secant(g, a, b, 1e-12, "g(beta)").expect("bracketed root")
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..BETA_MAX).contains(&beta) {
        return Err(Error::Domain(format!(
            "perturbative closed forms need 0 <= beta < 3/4, got {beta}"
        )));
    }
    Ok(())
}

struct Expansion {
    beta: f64,
    t: f64,
    tau_bar: f64,
    alpha0: f64,
    variance: f64,
}

impl Expansion {
    fn new(model: &BlockModel) -> Result<Self> {
        let beta = model.beta();
        check_beta(beta)?;
        let tau_bar = model.tau_bar();
        Ok(Self {
            beta,
            t: model.t() as f64,
            tau_bar,
            alpha0: even_alpha(beta, tau_bar)?,
            variance: model.variance(),
        })
    }
}

/// First-order shift of the optimal α, proportional to `δ²`.
pub fn delta_alpha(model: &BlockModel) -> Result<f64> {
    let e = Expansion::new(model)?;
    let (b, a0, tb) = (e.beta, e.alpha0, e.tau_bar);
    let coeff = (1.0 - 2.0 * b) / (4.0 * (3.0 - 4.0 * b).sqrt()) * a0 * a0 / tb.powf(1.5)
        + (3.0 + b) / (8.0 * (1.0 - b)) * a0 / (tb * tb);
    Ok(-coeff * e.variance)
}

/// First-order shift of the optimal η, proportional to `δ²`.
pub fn delta_eta(model: &BlockModel) -> Result<f64> {
    let e = Expansion::new(model)?;
    let (b, a0, tb) = (e.beta, e.alpha0, e.tau_bar);
    let root = (3.0 - 4.0 * b).sqrt();
    let coeff = (1.0 - b) * (1.0 - 2.0 * b) / root * a0 * a0 / tb.powf(1.5)
        + (4.0 * b.powi(3) - 8.0 * b * b + 3.0 * b + 1.0) / (4.0 * (1.0 - b).powi(2)) * a0
            / (tb * tb)
        + (1.0 - 2.0 * b) * root / (16.0 * (1.0 - b)) / tb.powf(2.5);
    Ok(-coeff * e.variance)
}

/// Coefficient of `δ²` in `sum sqrt(tau_i) sin(2 alpha_K sqrt(tau_i)) - t sqrt(tau_bar) sin(2 alpha_0 sqrt(tau_bar))`.
pub fn coeff_p(model: &BlockModel) -> Result<f64> {
    let e = Expansion::new(model)?;
    let (b, a0, tb, t) = (e.beta, e.alpha0, e.tau_bar, e.t);
    let root = (3.0 - 4.0 * b).sqrt();
    Ok(-(1.0 - b) / root * t * a0 * a0 / tb.sqrt()
        - (1.0 - 2.0 * b) * (1.0 + b) / (4.0 * (1.0 - b).powi(2)) * t * a0 / tb
        - root / (16.0 * (1.0 - b)) * t / tb.powf(1.5))
}

/// Coefficient of `δ²` in `sum cos(2 alpha_K sqrt(tau_i)) - t cos(2 alpha_0 sqrt(tau_bar))`.
pub fn coeff_q(model: &BlockModel) -> Result<f64> {
    let e = Expansion::new(model)?;
    let (b, a0, tb, t) = (e.beta, e.alpha0, e.tau_bar, e.t);
    Ok((3.0 - 4.0 * b).sqrt() / (2.0 * (1.0 - b).powi(2)) * t * a0 / tb.powf(1.5))
}

/// `Δη` assembled from P and Q through the linearized cancellation equation,
/// `((1 - 2β) P / (t tau_bar) - β sqrt(3 - 4β) Q / (t sqrt(tau_bar))) δ²`.
pub fn delta_eta_from_pq(model: &BlockModel) -> Result<f64> {
    let e = Expansion::new(model)?;
    let p = coeff_p(model)?;
    let q = coeff_q(model)?;
    let (b, t, tb) = (e.beta, e.t, e.tau_bar);
    Ok(
        ((1.0 - 2.0 * b) * p / (t * tb) - b * (3.0 - 4.0 * b).sqrt() * q / (t * tb.sqrt()))
            * e.variance,
    )
}

/// A one-parameter family of perturbed distributions
/// `tau_i = tau_bar (1 + eps * pattern_i)` at fixed K, t and tau_bar.
///
/// The pattern is normalized so that `max |pattern_i| = 1`; `eps` is then the
/// largest relative deviation. `K = ∞` selects the many-blocks limit.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedFamily {
    k: f64,
    tau_bar: f64,
    pattern: Vec<f64>,
}

impl PerturbedFamily {
    pub fn new(k: f64, tau_bar: f64, pattern: Vec<f64>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidInput(
                "perturbation pattern must be nonempty".into(),
            ));
        }
        if !(tau_bar.is_finite() && tau_bar > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tau_bar must be positive, got {tau_bar}"
            )));
        }
        if k.is_nan() || k <= 0.0 || (k.is_finite() && (pattern.len() as f64) > k) {
            return Err(Error::InvalidInput(format!(
                "K must be positive and at least t = {}, got {k}",
                pattern.len()
            )));
        }
        let scale = pattern.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        let sum: f64 = pattern.iter().sum();
        if !pattern.iter().all(|p| p.is_finite())
            || sum.abs() > 1e-12 * scale.max(1.0) * pattern.len() as f64
        {
            return Err(Error::InvalidInput(format!(
                "perturbation pattern must sum to zero, sums to {sum}"
            )));
        }
        let pattern = if scale > 0.0 {
            pattern.iter().map(|p| p / scale).collect()
        } else {
            pattern
        };
        Ok(Self {
            k,
            tau_bar,
            pattern,
        })
    }

    /// Family with `K = t / beta`.
    pub fn with_beta(beta: f64, tau_bar: f64, pattern: Vec<f64>) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "beta must be positive, got {beta}"
            )));
        }
        let t = pattern.len() as f64;
        Self::new(t / beta, tau_bar, pattern)
    }

    /// One block above the mean by `eps`, the other t-1 below it by `eps/(t-1)`.
    pub fn skewed_pattern(t: usize) -> Vec<f64> {
        assert!(t >= 2);
        std::iter::once(1.0)
            .chain(std::iter::repeat_n(-1.0 / (t - 1) as f64, t - 1))
            .collect()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn t(&self) -> usize {
        self.pattern.len()
    }

    pub fn tau_bar(&self) -> f64 {
        self.tau_bar
    }

    pub fn pattern(&self) -> &[f64] {
        &self.pattern
    }

    pub fn beta(&self) -> f64 {
        self.t() as f64 / self.k
    }

    pub fn is_many_blocks_limit(&self) -> bool {
        self.k.is_infinite()
    }

    pub fn taus(&self, eps: f64) -> Vec<f64> {
        self.pattern
            .iter()
            .map(|p| self.tau_bar * (1.0 + eps * p))
            .collect()
    }

    /// The perturbed instance at scale `eps`. In the K → ∞ limit the model
    /// carries a very large finite K, which only the large-K routines ignore.
    pub fn model(&self, eps: f64) -> Result<BlockModel> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidInput(format!(
                "eps must lie in [0, 1), got {eps}"
            )));
        }
        let k = if self.k.is_finite() { self.k } else { f64::MAX };
        BlockModel::analysis(k, self.taus(eps))
    }
}

/// One row of a perturbation check. Serialized fields match the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub t: usize,
    pub tau_bar: f64,
    pub beta: f64,
    pub eps_scale: f64,
    pub variance: f64,
    pub delta_alpha: f64,
    pub delta_eta: f64,
    pub predicted: f64,
    pub measured: f64,
    pub ratio: f64,
    /// Zero perturbation: both sides vanish and the inequality is vacuous.
    #[serde(skip)]
    pub degenerate: bool,
    /// Whether `measured > predicted` and `measured > 0`; `None` when not measurable.
    #[serde(skip)]
    pub inequality_holds: Option<bool>,
}

impl PerturbationReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "K",
        "t",
        "tau_bar",
        "beta",
        "eps_scale",
        "variance",
        "delta_alpha",
        "delta_eta",
        "predicted",
        "measured",
        "ratio",
    ];
}

/// K → ∞ check: penalty measured with the many-blocks optimizer against
/// [`theorem1_prediction`].
pub fn theorem1_report(family: &PerturbedFamily, eps: f64) -> Result<PerturbationReport> {
    let model = family.model(eps)?;
    let variance = model.variance();
    let f0 = large_k_optimum(&model.evened())?.f_star;
    let fk = large_k_optimum(&model)?.f_star;
    let measured = f0 - fk;
    let predicted = theorem1_prediction(family.tau_bar, variance);
    Ok(finish_report(
        family,
        eps,
        variance,
        delta_alpha(&model)?,
        delta_eta(&model)?,
        predicted,
        measured,
    ))
}

/// Finite-K check without asserting: measured penalty from the b → ∞
/// optimizer against the `g(β)` lower bound. If the optimizer is not valid
/// for this β, `measured` is NaN and `inequality_holds` is `None`.
pub fn theorem2_report(family: &PerturbedFamily, eps: f64) -> Result<PerturbationReport> {
    if family.is_many_blocks_limit() {
        return Err(Error::InvalidInput(
            "finite-K check needs a finite number of blocks".into(),
        ));
    }
    let model = family.model(eps)?;
    let beta = model.beta();
    let variance = model.variance();
    let predicted = g_of_beta(beta)? * variance / family.tau_bar.powf(2.5);
    let measured = match (even_optimum(&model.evened()), solve_uneven_optimum(&model)) {
        (Ok(even), Ok(uneven)) => even.f_star - uneven.f_star,
        _ => f64::NAN,
    };
    Ok(finish_report(
        family,
        eps,
        variance,
        delta_alpha(&model)?,
        delta_eta(&model)?,
        predicted,
        measured,
    ))
}

/// Finite-K check asserting `f(η0, α0) - f(η_K, α_K) > g(β) δ² / tau_bar^(5/2)`.
///
/// Requires β < β_c. The inequality is asserted only for β < 1/4, where the
/// optimizer is valid; for 1/4 ≤ β < β_c the report is returned as is.
pub fn theorem2_check(family: &PerturbedFamily, eps: f64) -> Result<PerturbationReport> {
    let beta = family.beta();
    let beta_c = beta_critical();
    if beta >= beta_c {
        return Err(Error::Regime(format!(
            "inequality asserted only below beta_c = {beta_c:.6}, got beta = {beta}"
        )));
    }
    let report = theorem2_report(family, eps)?;
    if beta < BETA_ALGORITHM_MAX && report.inequality_holds == Some(false) {
        return Err(Error::Assertion(format!(
            "penalty {} does not exceed g(beta) bound {} at beta = {beta}, eps = {eps}",
            report.measured, report.predicted
        )));
    }
    Ok(report)
}

fn finish_report(
    family: &PerturbedFamily,
    eps: f64,
    variance: f64,
    delta_alpha: f64,
    delta_eta: f64,
    predicted: f64,
    measured: f64,
) -> PerturbationReport {
    let degenerate = variance == 0.0;
    let inequality_holds = if degenerate || measured.is_nan() {
        None
    } else {
        Some(measured > predicted && measured > 0.0)
    };
    PerturbationReport {
        k: family.k,
        t: family.t(),
        tau_bar: family.tau_bar,
        beta: family.beta(),
        eps_scale: eps,
        variance,
        delta_alpha,
        delta_eta,
        predicted,
        measured,
        ratio: if degenerate {
            f64::NAN
        } else {
            measured / predicted
        },
        degenerate,
        inequality_holds,
    }
}
