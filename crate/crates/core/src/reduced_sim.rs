//! Exact evolution in the (2t+1)-dimensional invariant subspace.
//!
//! Basis order is fixed: `(t_1, ntt_1, t_2, ntt_2, ..., t_t, ntt_t, u)` where
//! `t_i` is the normalized sum of the targets of marked block i, `ntt_i` the
//! normalized sum of its non-targets, and `u` the normalized sum of every item
//! in the unmarked blocks. All amplitudes stay real.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Problem;

/// Coordinates in the fixed reduced basis. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReducedState(Vec<f64>);

impl ReducedState {
    pub fn new(amps: Vec<f64>) -> Result<Self> {
        if amps.len() % 2 != 1 {
            return Err(Error::InvalidInput(format!(
                "reduced state must have odd length 2t+1, got {}",
                amps.len()
            )));
        }
        Ok(Self(amps))
    }

    pub fn amps(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of marked blocks represented.
    pub fn t(&self) -> usize {
        self.0.len() / 2
    }

    pub fn target(&self, i: usize) -> f64 {
        self.0[2 * i]
    }

    pub fn non_target(&self, i: usize) -> f64 {
        self.0[2 * i + 1]
    }

    /// Coordinate on the unmarked-block vector `u`.
    pub fn u(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn max_abs_diff(&self, other: &ReducedState) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    fn from_vector(v: DVector<f64>) -> Self {
        Self(v.iter().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    IntegerOperator,
    RealAnalytic,
}

/// Numbers of global (`j1`) and local (`j2`) Grover iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub j1: f64,
    pub j2: f64,
    pub mode: ScheduleMode,
}

impl Schedule {
    pub fn integer(j1: u64, j2: u64) -> Self {
        Self {
            j1: j1 as f64,
            j2: j2 as f64,
            mode: ScheduleMode::IntegerOperator,
        }
    }

    pub fn real(j1: f64, j2: f64) -> Result<Self> {
        if !(j1 >= 0.0 && j2 >= 0.0 && j1.is_finite() && j2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "schedule must be nonnegative, got j1={j1}, j2={j2}"
            )));
        }
        Ok(Self {
            j1,
            j2,
            mode: ScheduleMode::RealAnalytic,
        })
    }

    /// `j1 = (pi/4) sqrt(N/z) - eta sqrt(b)`, `j2 = alpha sqrt(b)`.
    pub fn from_eta_alpha(problem: &Problem, eta: f64, alpha: f64) -> Result<Self> {
        if !(eta > 0.0 && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "eta and alpha must be positive, got eta={eta}, alpha={alpha}"
            )));
        }
        let sqrt_b = (problem.b() as f64).sqrt();
        let full = std::f64::consts::FRAC_PI_4 * (problem.n() as f64 / problem.z() as f64).sqrt();
        Self::real(full - eta * sqrt_b, alpha * sqrt_b)
    }

    /// The `(eta, alpha)` coordinates of this schedule.
    pub fn eta_alpha(&self, problem: &Problem) -> (f64, f64) {
        let sqrt_b = (problem.b() as f64).sqrt();
        let full = std::f64::consts::FRAC_PI_4 * (problem.n() as f64 / problem.z() as f64).sqrt();
        ((full - self.j1) / sqrt_b, self.j2 / sqrt_b)
    }

    /// Rounds to the nearest integer schedule.
    pub fn rounded(&self) -> Self {
        Self::integer(self.j1.round() as u64, self.j2.round() as u64)
    }
}

/// Projection of the uniform superposition onto the reduced basis.
pub fn initial_state(problem: &Problem) -> ReducedState {
    ReducedState(uniform_coordinates(problem))
}

fn uniform_coordinates(problem: &Problem) -> Vec<f64> {
    let n = problem.n() as f64;
    let b = problem.b() as f64;
    let mut amps = Vec::with_capacity(2 * problem.t() + 1);
    for &tau in problem.taus() {
        let tau = tau as f64;
        amps.push((tau / n).sqrt());
        amps.push(((b - tau) / n).sqrt());
    }
    amps.push((problem.unmarked_items() as f64 / n).sqrt());
    amps
}

/// `I - 2 s s^T` for the reduced uniform vector `s`.
fn reflection_about_uniform(problem: &Problem) -> DMatrix<f64> {
    let s = DVector::from_vec(uniform_coordinates(problem));
    DMatrix::identity(s.len(), s.len()) - 2.0 * &s * s.transpose()
}

/// Oracle sign pattern: -1 on target coordinates, +1 elsewhere.
fn oracle_diagonal(problem: &Problem) -> DVector<f64> {
    let dim = 2 * problem.t() + 1;
    DVector::from_fn(
        dim,
        |r, _| if r + 1 < dim && r % 2 == 0 { -1.0 } else { 1.0 },
    )
}

/// One global iteration `-(I - 2 s s^T) D` in reduced coordinates.
pub fn g1_matrix(problem: &Problem) -> DMatrix<f64> {
    let mut m = -reflection_about_uniform(problem);
    let d = oracle_diagonal(problem);
    for c in 0..m.ncols() {
        m.column_mut(c).scale_mut(d[c]);
    }
    m
}

/// `j2` local iterations: block-diagonal rotations by `2 j2 theta_i`, identity on `u`.
pub fn g2_matrix(problem: &Problem, j2: u64) -> DMatrix<f64> {
    g2_block_rotation(problem, j2 as f64)
}

fn g2_block_rotation(problem: &Problem, j2: f64) -> DMatrix<f64> {
    let dim = 2 * problem.t() + 1;
    let mut m = DMatrix::identity(dim, dim);
    for (i, theta_i) in problem.angles().thetas.iter().enumerate() {
        let (s, c) = (2.0 * j2 * theta_i).sin_cos();
        let r = 2 * i;
        m[(r, r)] = c;
        m[(r, r + 1)] = s;
        m[(r + 1, r)] = -s;
        m[(r + 1, r + 1)] = c;
    }
    m
}

/// `G1^j1` applied to the initial state by repeated matrix multiplication.
pub fn global_phase_operator(problem: &Problem, j1: u64) -> ReducedState {
    let g1 = g1_matrix(problem);
    let mut v = initial_state(problem).to_vector();
    for _ in 0..j1 {
        v = &g1 * v;
    }
    ReducedState::from_vector(v)
}

/// Steps 1 and 2 in operator form: `G2^j2 G1^j1 s`.
pub fn evolve_operator(problem: &Problem, j1: u64, j2: u64) -> ReducedState {
    let v = global_phase_operator(problem, j1).to_vector();
    ReducedState::from_vector(g2_matrix(problem, j2) * v)
}

/// Steps 1 and 2 in closed form, valid for real `j1`, `j2`.
pub fn evolve_analytic(problem: &Problem, j1: f64, j2: f64) -> ReducedState {
    let n = problem.n() as f64;
    let z = problem.z() as f64;
    let b = problem.b() as f64;
    let angles = problem.angles();
    let (sin_phi, cos_phi) = ((2.0 * j1 + 1.0) * angles.theta).sin_cos();
    let mut amps = Vec::with_capacity(2 * problem.t() + 1);
    for (&tau, theta_i) in problem.taus().iter().zip(&angles.thetas) {
        let tau = tau as f64;
        let target_weight = (tau / z).sqrt() * sin_phi;
        let non_target_weight = ((b - tau) / (n - z)).sqrt() * cos_phi;
        let (s, c) = (2.0 * j2 * theta_i).sin_cos();
        amps.push(c * target_weight + s * non_target_weight);
        amps.push(-s * target_weight + c * non_target_weight);
    }
    amps.push(cos_phi * (problem.unmarked_items() as f64 / (n - z)).sqrt());
    ReducedState(amps)
}

/// Steps 1 and 2 for either schedule mode.
pub fn evolve(problem: &Problem, schedule: &Schedule) -> Result<ReducedState> {
    match schedule.mode {
        ScheduleMode::RealAnalytic => Ok(evolve_analytic(problem, schedule.j1, schedule.j2)),
        ScheduleMode::IntegerOperator => {
            if schedule.j1.fract() != 0.0
                || schedule.j2.fract() != 0.0
                || schedule.j1 < 0.0
                || schedule.j2 < 0.0
            {
                return Err(Error::InvalidInput(format!(
                    "operator mode needs nonnegative integer iterations, got j1={}, j2={}",
                    schedule.j1, schedule.j2
                )));
            }
            Ok(evolve_operator(
                problem,
                schedule.j1 as u64,
                schedule.j2 as u64,
            ))
        }
    }
}

/// Step 3: the reflection `I - 2 s s^T` (not its negative).
pub fn final_reflection(problem: &Problem, state: &ReducedState) -> ReducedState {
    let s = uniform_coordinates(problem);
    let overlap: f64 = s.iter().zip(state.amps()).map(|(a, b)| a * b).sum();
    ReducedState(
        state
            .amps()
            .iter()
            .zip(&s)
            .map(|(a, si)| a - 2.0 * overlap * si)
            .collect(),
    )
}

/// Probability that measuring the block index returns a marked block.
pub fn success_probability(_problem: &Problem, state: &ReducedState) -> f64 {
    let amps = state.amps();
    amps[..amps.len() - 1].iter().map(|a| a * a).sum()
}

/// Full pipeline (Steps 1–3) returning the state measured in Step 4.
pub fn run(problem: &Problem, schedule: &Schedule) -> Result<ReducedState> {
    Ok(final_reflection(problem, &evolve(problem, schedule)?))
}
