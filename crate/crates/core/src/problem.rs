//! Search-problem instances and the scalar quantities derived from them.
//!
//! A [`Problem`] is an integer instance (N = bK items in K blocks of b,
//! with `taus[i]` targets in the i-th marked block) used by the simulators
//! and the finite-b cancellation solver. A [`BlockModel`] is the smooth
//! large-block view used by the optimizer and the perturbation analysis,
//! where only K and the (possibly real-valued) target counts matter.

use std::ops::RangeInclusive;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used for derived distribution statistics.
pub type Rational = Ratio<i128>;

/// Largest N accepted, so that every count is exactly representable as `f64`.
pub const MAX_ITEMS: u64 = 1 << 53;

/// Which parameter region an instance has been validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// t < K/4: every algorithm-mode operation is valid.
    Algorithm,
    /// t < K/4 not enforced; operations check their own preconditions pointwise.
    Analysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatabaseGeometry {
    n: u64,
    k: u64,
    b: u64,
}

impl DatabaseGeometry {
    pub fn new(k: u64, b: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!(
                "K must be at least 2, got {k}"
            )));
        }
        if b < 2 {
            return Err(Error::InvalidInput(format!(
                "b must be at least 2, got {b}"
            )));
        }
        let n = k
            .checked_mul(b)
            .filter(|&n| n <= MAX_ITEMS)
            .ok_or_else(|| Error::InvalidInput(format!("N = K*b too large (K={k}, b={b})")))?;
        Ok(Self { n, k, b })
    }

    /// Total number of items.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of blocks.
    pub fn k(&self) -> u64 {
        self.k
    }

    /// Items per block.
    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn is_power_of_two(&self) -> bool {
        self.n.is_power_of_two()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    taus: Vec<u64>,
    z: u64,
    tau_bar: Rational,
    epsilons: Vec<Rational>,
    variance: Rational,
}

impl TargetDistribution {
    fn new(taus: Vec<u64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidInput("taus must be nonempty".into()));
        }
        if let Some(bad) = taus.iter().find(|&&tau| tau == 0) {
            return Err(Error::InvalidInput(format!(
                "every tau must be positive, got {bad}"
            )));
        }
        let t = taus.len() as i128;
        let z: u64 = taus.iter().sum();
        let tau_bar = Rational::new(z as i128, t);
        let epsilons: Vec<Rational> = taus
            .iter()
            .map(|&tau| Rational::from_integer(tau as i128) / tau_bar - Rational::from_integer(1))
            .collect();
        let sum_sq = epsilons
            .iter()
            .fold(Rational::from_integer(0), |acc, e| acc + e * e);
        let variance = tau_bar * tau_bar / Rational::from_integer(t) * sum_sq;
        Ok(Self {
            taus,
            z,
            tau_bar,
            epsilons,
            variance,
        })
    }

    pub fn taus(&self) -> &[u64] {
        &self.taus
    }

    /// Total number of targets.
    pub fn z(&self) -> u64 {
        self.z
    }

    /// Number of marked blocks.
    pub fn t(&self) -> usize {
        self.taus.len()
    }

    pub fn tau_bar(&self) -> Rational {
        self.tau_bar
    }

    /// Relative deviations `tau_i / tau_bar - 1`; they sum to exactly zero.
    pub fn epsilons(&self) -> &[Rational] {
        &self.epsilons
    }

    /// `(tau_bar^2 / t) * sum(eps_i^2)`, the population variance of the taus.
    pub fn variance(&self) -> Rational {
        self.variance
    }

    pub fn is_even(&self) -> bool {
        self.taus.iter().all(|&tau| tau == self.taus[0])
    }

    pub fn tau_max(&self) -> u64 {
        self.taus.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationAngles {
    /// Global rotation angle, `sin^2(theta) = z / N`.
    pub theta: f64,
    /// Per-block local angles, `sin^2(theta_i) = tau_i / b`.
    pub thetas: Vec<f64>,
}

/// A validated search instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemSpec", into = "ProblemSpec")]
pub struct Problem {
    geometry: DatabaseGeometry,
    distribution: TargetDistribution,
    regime: Regime,
}

/// Wire form of a problem. Derived fields are always recomputed on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(rename = "K")]
    pub k: u64,
    pub b: u64,
    pub taus: Vec<u64>,
}

impl TryFrom<ProblemSpec> for Problem {
    type Error = Error;

    fn try_from(spec: ProblemSpec) -> Result<Self> {
        make_problem(spec.k, spec.b, &spec.taus)
    }
}

impl From<Problem> for ProblemSpec {
    fn from(p: Problem) -> Self {
        ProblemSpec {
            k: p.geometry.k,
            b: p.geometry.b,
            taus: p.distribution.taus,
        }
    }
}

/// Builds an algorithm-mode instance, enforcing t < K/4.
pub fn make_problem(k: u64, b: u64, taus: &[u64]) -> Result<Problem> {
    let problem = make_problem_relaxed(k, b, taus)?;
    let t = problem.t() as u64;
    if 4 * t >= k {
        return Err(Error::Regime(format!(
            "t = {t} marked blocks requires t < K/4 = {}",
            k as f64 / 4.0
        )));
    }
    Ok(Problem {
        regime: Regime::Algorithm,
        ..problem
    })
}

/// Draws a random algorithm-mode instance with `K` in `k_range`,
/// `N = K b <= max_n` and each `tau_i` uniform on `[1, b-1]`.
pub fn random_problem<R: Rng + ?Sized>(
    rng: &mut R,
    k_range: RangeInclusive<u64>,
    max_n: u64,
) -> Result<Problem> {
    let (k_lo, k_hi) = (*k_range.start(), *k_range.end());
    if k_lo < 5 || k_lo > k_hi || 2 * k_lo > max_n {
        return Err(Error::InvalidInput(format!(
            "cannot draw instances with K in [{k_lo}, {k_hi}] and N <= {max_n}"
        )));
    }
    let k = rng.gen_range(k_lo..=k_hi.min(max_n / 2));
    let b = rng.gen_range(2..=max_n / k);
    let t = rng.gen_range(1..=(k - 1) / 4);
    let taus: Vec<u64> = (0..t).map(|_| rng.gen_range(1..b)).collect();
    make_problem(k, b, &taus)
}

/// Builds an analysis-mode instance: identical validation except that
/// t < K/4 is not required (t ≤ K still is).
pub fn make_problem_relaxed(k: u64, b: u64, taus: &[u64]) -> Result<Problem> {
    let geometry = DatabaseGeometry::new(k, b)?;
    let distribution = TargetDistribution::new(taus.to_vec())?;
    if let Some(bad) = distribution.taus.iter().find(|&&tau| tau >= b) {
        return Err(Error::InvalidInput(format!(
            "each tau must lie in [1, b-1] = [1, {}], got {bad}",
            b - 1
        )));
    }
    if distribution.t() as u64 > k {
        return Err(Error::InvalidInput(format!(
            "t = {} marked blocks exceeds K = {k}",
            distribution.t()
        )));
    }
    Ok(Problem {
        geometry,
        distribution,
        regime: Regime::Analysis,
    })
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ProblemSpec>(text)
            .map_err(|e| Error::InvalidInput(format!("problem JSON: {e}")))
            .and_then(Problem::try_from)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ProblemSpec::from(self.clone())).expect("problem spec serializes")
    }

    pub fn geometry(&self) -> &DatabaseGeometry {
        &self.geometry
    }

    pub fn distribution(&self) -> &TargetDistribution {
        &self.distribution
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn n(&self) -> u64 {
        self.geometry.n
    }

    pub fn k(&self) -> u64 {
        self.geometry.k
    }

    pub fn b(&self) -> u64 {
        self.geometry.b
    }

    pub fn taus(&self) -> &[u64] {
        &self.distribution.taus
    }

    pub fn z(&self) -> u64 {
        self.distribution.z
    }

    pub fn t(&self) -> usize {
        self.distribution.t()
    }

    /// Items in unmarked blocks, `b (K - t)`.
    pub fn unmarked_items(&self) -> u64 {
        self.geometry.b * (self.geometry.k - self.t() as u64)
    }

    pub fn angles(&self) -> RotationAngles {
        angles(self)
    }

    pub fn beta(&self) -> Rational {
        beta(self)
    }
}

pub fn angles(problem: &Problem) -> RotationAngles {
    let n = problem.n() as f64;
    let b = problem.b() as f64;
    let theta = (problem.z() as f64 / n).sqrt().asin();
    let thetas = problem
        .taus()
        .iter()
        .map(|&tau| (tau as f64 / b).sqrt().asin())
        .collect();
    RotationAngles { theta, thetas }
}

/// Fraction of blocks that are marked, `t / K`.
pub fn beta(problem: &Problem) -> Rational {
    Rational::new(problem.t() as i128, problem.k() as i128)
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Large-block (b → ∞) view of an instance: the number of blocks and the
/// per-block target counts, which may be real-valued in analysis mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    #[serde(rename = "K")]
    k: f64,
    taus: Vec<f64>,
    #[serde(skip_serializing, default = "analysis_regime")]
    regime: Regime,
}

fn analysis_regime() -> Regime {
    Regime::Analysis
}

impl BlockModel {
    /// Analysis-mode model with real K and real positive target counts.
    pub fn analysis(k: f64, taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidInput("taus must be nonempty".into()));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "K must be positive and finite, got {k}"
            )));
        }
        if taus.iter().any(|tau| !(tau.is_finite() && *tau > 0.0)) {
            return Err(Error::InvalidInput(
                "every tau must be positive and finite".into(),
            ));
        }
        if taus.len() as f64 > k {
            return Err(Error::InvalidInput(format!(
                "t = {} exceeds K = {k}",
                taus.len()
            )));
        }
        let regime = if 4.0 * taus.len() as f64 >= k {
            Regime::Analysis
        } else {
            Regime::Algorithm
        };
        Ok(Self { k, taus, regime })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn t(&self) -> usize {
        self.taus.len()
    }

    pub fn z(&self) -> f64 {
        self.taus.iter().sum()
    }

    pub fn tau_bar(&self) -> f64 {
        self.z() / self.t() as f64
    }

    pub fn tau_max(&self) -> f64 {
        self.taus.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn beta(&self) -> f64 {
        self.t() as f64 / self.k
    }

    /// Population variance `(1/t) * sum (tau_i - tau_bar)^2`.
    pub fn variance(&self) -> f64 {
        let mean = self.tau_bar();
        self.taus
            .iter()
            .map(|tau| (tau - mean).powi(2))
            .sum::<f64>()
            / self.t() as f64
    }

    pub fn is_even(&self) -> bool {
        self.taus.iter().all(|&tau| tau == self.taus[0])
    }

    /// The even instance with the same K, t and tau_bar.
    pub fn evened(&self) -> Self {
        Self {
            k: self.k,
            taus: vec![self.tau_bar(); self.t()],
            regime: self.regime,
        }
    }
}

impl From<&Problem> for BlockModel {
    fn from(problem: &Problem) -> Self {
        Self {
            k: problem.k() as f64,
            taus: problem.taus().iter().map(|&tau| tau as f64).collect(),
            regime: problem.regime(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn even_instance_has_zero_variance() {
        let p = make_problem(16, 64, &[2, 2]).unwrap();
        assert_eq!(p.n(), 1024);
        assert_eq!(p.z(), 4);
        assert_eq!(p.t(), 2);
        assert_eq!(p.distribution().tau_bar(), Rational::from_integer(2));
        assert_eq!(p.distribution().variance(), Rational::from_integer(0));
        assert!(p.distribution().is_even());
    }

    #[test]
    fn uneven_instance_statistics() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let d = p.distribution();
        assert_eq!(d.tau_bar(), Rational::from_integer(2));
        assert_eq!(d.epsilons(), &[Rational::new(-1, 2), Rational::new(1, 2)]);
        assert_eq!(d.variance(), Rational::from_integer(1));
    }

    #[test]
    fn regime_bound_rejected() {
        let err = make_problem(16, 64, &[1, 1, 1, 1, 1]).unwrap_err();
        assert!(matches!(err, Error::Regime(_)));
        // t = K/4 exactly is also outside the regime
        assert!(matches!(
            make_problem(16, 64, &[1, 1, 1, 1]).unwrap_err(),
            Error::Regime(_)
        ));
        assert!(make_problem_relaxed(16, 64, &[1, 1, 1, 1, 1]).is_ok());
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(matches!(
            make_problem(16, 64, &[]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            make_problem(16, 64, &[0, 2]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            make_problem(16, 64, &[64]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            make_problem(1, 64, &[1]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            make_problem(16, 1, &[1]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            make_problem_relaxed(2, 8, &[1, 1, 1]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn angles_match_definitions() {
        // z = N/4 gives theta = pi/6; only reachable outside t < K/4
        let p = make_problem_relaxed(4, 4, &[1, 1, 1, 1]).unwrap();
        assert!((angles(&p).theta - PI / 6.0).abs() < 1e-15);

        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let a = angles(&p);
        assert!((a.theta - (1.0f64 / 16.0).asin()).abs() < 1e-15);
        assert!((a.theta.sin().powi(2) * 1024.0 - 4.0).abs() < 1e-12 * 4.0);
        for (th, &tau) in a.thetas.iter().zip(p.taus()) {
            assert!(*th > 0.0 && *th < PI / 2.0);
            assert!((th.sin().powi(2) * 64.0 - tau as f64).abs() < 1e-12 * tau as f64);
        }
    }

    #[test]
    fn beta_is_exact_and_ignores_taus() {
        let p = make_problem(16, 64, &[2, 2]).unwrap();
        assert_eq!(beta(&p), Rational::new(1, 8));
        let q = make_problem(16, 64, &[1, 3]).unwrap();
        assert_eq!(beta(&p), beta(&q));
        let r = make_problem_relaxed(5, 4, &[1]).unwrap();
        assert_eq!(beta(&r), Rational::new(1, 5));
    }

    #[test]
    fn json_round_trip_recomputes_derived_fields() {
        let p = Problem::from_json(r#"{"K":16,"b":64,"taus":[1,3]}"#).unwrap();
        assert_eq!(p.distribution().variance(), Rational::from_integer(1));
        assert_eq!(Problem::from_json(&p.to_json()).unwrap(), p);
        assert!(Problem::from_json(r#"{"K":16,"b":64,"taus":[1,1,1,1,1]}"#).is_err());
        assert!(Problem::from_json(r#"{"K":16,"b":64,"taus":[1],"z":9}"#).is_err());
    }

    #[test]
    fn block_model_statistics() {
        let m = BlockModel::analysis(40.0, vec![1.0, 3.0]).unwrap();
        assert_eq!(m.tau_bar(), 2.0);
        assert_eq!(m.variance(), 1.0);
        assert_eq!(m.beta(), 0.05);
        assert_eq!(m.regime(), Regime::Algorithm);
        assert!(m.evened().is_even());
        let wide = BlockModel::analysis(4.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(wide.regime(), Regime::Analysis);
    }
}
