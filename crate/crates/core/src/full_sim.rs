//! Brute-force simulation on all N amplitudes.
//!
//! Nothing here uses the reduced representation; the operators are the
//! reflection definitions applied item by item, so this module serves as an
//! independent oracle for [`crate::reduced_sim`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::reduced_sim::{self, ReducedState};

/// Default largest N accepted by [`FullSimulator`].
pub const DEFAULT_CAP: u64 = 1 << 20;

/// Tolerance on the amplitude spread within a symmetry class before
/// [`FullSimulator::project_to_reduced`] refuses to project.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// All N amplitudes, block-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    amps: Vec<f64>,
}

impl FullState {
    pub fn uniform(n: usize) -> Self {
        Self {
            amps: vec![1.0 / (n as f64).sqrt(); n],
        }
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [f64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }
}

/// Negates every amplitude flagged in `targets`.
pub fn oracle_reflect(amps: &mut [f64], targets: &[bool]) {
    for (a, &is_target) in amps.iter_mut().zip(targets) {
        if is_target {
            *a = -*a;
        }
    }
}

/// Inversion about the global mean, `a -> 2 mean - a`.
pub fn global_diffusion(amps: &mut [f64]) {
    invert_about_mean(amps);
}

/// Inversion about the mean of each block of `block_len` consecutive items.
pub fn local_diffusion(amps: &mut [f64], block_len: usize) {
    for block in amps.chunks_mut(block_len) {
        invert_about_mean(block);
    }
}

/// The reflection `I - 2|s1><s1|`, i.e. `a -> a - 2 mean`.
pub fn final_reflection(amps: &mut [f64]) {
    let shift = 2.0 * mean(amps);
    for a in amps.iter_mut() {
        *a -= shift;
    }
}

fn mean(amps: &[f64]) -> f64 {
    amps.iter().sum::<f64>() / amps.len() as f64
}

fn invert_about_mean(amps: &mut [f64]) {
    let twice_mean = 2.0 * mean(amps);
    for a in amps.iter_mut() {
        *a = twice_mean - *a;
    }
}

/// A problem instance laid out on N explicit items.
#[derive(Debug, Clone)]
pub struct FullSimulator {
    problem: Problem,
    /// Block index hosting the i-th marked block.
    marked_blocks: Vec<usize>,
    targets: Vec<bool>,
}

impl FullSimulator {
    /// Canonical layout: marked block i is block i, its first `tau_i` slots are targets.
    pub fn new(problem: &Problem, cap: u64) -> Result<Self> {
        check_cap(problem, cap)?;
        let b = problem.b() as usize;
        let mut targets = vec![false; problem.n() as usize];
        for (i, &tau) in problem.taus().iter().enumerate() {
            targets[i * b..i * b + tau as usize].fill(true);
        }
        Ok(Self {
            problem: problem.clone(),
            marked_blocks: (0..problem.t()).collect(),
            targets,
        })
    }

    /// Layout with the marked blocks and the target slots inside each block
    /// chosen by a seeded shuffle.
    pub fn permuted(problem: &Problem, cap: u64, seed: u64) -> Result<Self> {
        check_cap(problem, cap)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = problem.b() as usize;
        let mut blocks: Vec<usize> = (0..problem.k() as usize).collect();
        blocks.shuffle(&mut rng);
        let marked_blocks = blocks[..problem.t()].to_vec();
        let mut targets = vec![false; problem.n() as usize];
        let mut slots: Vec<usize> = (0..b).collect();
        for (&block, &tau) in marked_blocks.iter().zip(problem.taus()) {
            slots.shuffle(&mut rng);
            for &slot in &slots[..tau as usize] {
                targets[block * b + slot] = true;
            }
        }
        Ok(Self {
            problem: problem.clone(),
            marked_blocks,
            targets,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn uniform_state(&self) -> FullState {
        FullState::uniform(self.problem.n() as usize)
    }

    pub fn oracle_reflect(&self, state: &mut FullState) {
        oracle_reflect(&mut state.amps, &self.targets);
    }

    pub fn global_diffusion(&self, state: &mut FullState) {
        global_diffusion(&mut state.amps);
    }

    pub fn local_diffusion(&self, state: &mut FullState) {
        local_diffusion(&mut state.amps, self.problem.b() as usize);
    }

    /// One global Grover iteration.
    pub fn global_iteration(&self, state: &mut FullState) {
        self.oracle_reflect(state);
        self.global_diffusion(state);
    }

    /// One local Grover iteration.
    pub fn local_iteration(&self, state: &mut FullState) {
        self.oracle_reflect(state);
        self.local_diffusion(state);
    }

    pub fn final_reflection(&self, state: &mut FullState) {
        final_reflection(&mut state.amps);
    }

    /// Steps 1–3 from the uniform state.
    pub fn run_partial_search(&self, j1: u64, j2: u64) -> FullState {
        let mut state = self.uniform_state();
        for _ in 0..j1 {
            self.global_iteration(&mut state);
        }
        for _ in 0..j2 {
            self.local_iteration(&mut state);
        }
        self.final_reflection(&mut state);
        state
    }

    /// Probability mass on the marked blocks.
    pub fn success_probability(&self, state: &FullState) -> f64 {
        let b = self.problem.b() as usize;
        self.marked_blocks
            .iter()
            .map(|&block| {
                state.amps[block * b..(block + 1) * b]
                    .iter()
                    .map(|a| a * a)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Largest max-minus-min amplitude spread over the symmetry classes.
    pub fn class_spread(&self, state: &FullState) -> f64 {
        self.classes(state)
            .iter()
            .map(|c| c.spread)
            .fold(0.0, f64::max)
    }

    /// Coordinates in the reduced basis `(t_1, ntt_1, ..., u)`.
    pub fn project_to_reduced(&self, state: &FullState) -> Result<ReducedState> {
        let classes = self.classes(state);
        if let Some(bad) = classes.iter().find(|c| c.spread > SYMMETRY_TOL) {
            return Err(Error::SymmetryViolation {
                class: bad.name.clone(),
                spread: bad.spread,
            });
        }
        let amps = classes
            .iter()
            .map(|c| (c.count as f64).sqrt() * c.mean)
            .collect();
        ReducedState::new(amps)
    }

    fn classes(&self, state: &FullState) -> Vec<ClassStats> {
        let b = self.problem.b() as usize;
        let t = self.problem.t();
        let mut stats: Vec<ClassStats> = (0..t)
            .flat_map(|i| {
                [
                    ClassStats::new(format!("targets of marked block {i}")),
                    ClassStats::new(format!("non-targets of marked block {i}")),
                ]
            })
            .collect();
        stats.push(ClassStats::new("unmarked blocks".into()));
        let mut class_of_block = vec![None; self.problem.k() as usize];
        for (i, &block) in self.marked_blocks.iter().enumerate() {
            class_of_block[block] = Some(i);
        }
        for (block, chunk) in state.amps.chunks(b).enumerate() {
            for (slot, &a) in chunk.iter().enumerate() {
                let idx = match class_of_block[block] {
                    Some(i) if self.targets[block * b + slot] => 2 * i,
                    Some(i) => 2 * i + 1,
                    None => 2 * t,
                };
                stats[idx].add(a);
            }
        }
        stats.iter_mut().for_each(ClassStats::finish);
        stats
    }
}

struct ClassStats {
    name: String,
    count: usize,
    sum: f64,
    min: f64,
    max: f64,
    mean: f64,
    spread: f64,
}

impl ClassStats {
    fn new(name: String) -> Self {
        Self {
            name,
            count: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
            spread: 0.0,
        }
    }

    fn add(&mut self, a: f64) {
        self.count += 1;
        self.sum += a;
        self.min = self.min.min(a);
        self.max = self.max.max(a);
    }

    fn finish(&mut self) {
        self.mean = self.sum / self.count as f64;
        self.spread = self.max - self.min;
    }
}

fn check_cap(problem: &Problem, cap: u64) -> Result<()> {
    if problem.n() > cap {
        return Err(Error::Resource {
            n: problem.n(),
            cap,
        });
    }
    Ok(())
}

/// Largest amplitude difference between the projected full state and the
/// reduced operator evolution, after Step 3, over every `j1, j2 <= max_j`.
///
/// The full state is stepped incrementally, so the cost is
/// `O(max_j^2 N)` rather than rerunning each schedule from scratch.
pub fn compare_with_reduced(sim: &FullSimulator, max_j: u64) -> Result<f64> {
    let problem = sim.problem();
    let mut worst = 0.0f64;
    let mut after_global = sim.uniform_state();
    for j1 in 0..=max_j {
        if j1 > 0 {
            sim.global_iteration(&mut after_global);
        }
        let mut state = after_global.clone();
        for j2 in 0..=max_j {
            if j2 > 0 {
                sim.local_iteration(&mut state);
            }
            let mut measured = state.clone();
            sim.final_reflection(&mut measured);
            let projected = sim.project_to_reduced(&measured)?;
            let reduced = reduced_sim::final_reflection(
                problem,
                &reduced_sim::evolve_operator(problem, j1, j2),
            );
            worst = worst.max(projected.max_abs_diff(&reduced));
        }
    }
    Ok(worst)
}

/// Runs Steps 1–3 on the canonical layout under [`DEFAULT_CAP`].
pub fn run_partial_search(problem: &Problem, j1: u64, j2: u64) -> Result<FullState> {
    Ok(FullSimulator::new(problem, DEFAULT_CAP)?.run_partial_search(j1, j2))
}

/// Projects a state of the canonical layout.
pub fn project_to_reduced(problem: &Problem, state: &FullState) -> Result<ReducedState> {
    FullSimulator::new(problem, u64::MAX)?.project_to_reduced(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_problem;
    use crate::reduced_sim;
    use nalgebra::{DMatrix, DVector};

    fn test_state(n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 4.5) / 7.0).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.into_iter().map(|a| a / norm).collect()
    }

    #[test]
    fn oracle_is_involution_and_flips_only_targets() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let mut s = sim.uniform_state();
        let before = s.clone();
        sim.oracle_reflect(&mut s);
        let flipped = s
            .amps()
            .iter()
            .zip(before.amps())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(flipped as u64, p.z());
        sim.oracle_reflect(&mut s);
        assert_eq!(s, before);
    }

    #[test]
    fn oracle_commutes_with_local_diffusion_on_unmarked_blocks() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let mut a = FullState {
            amps: test_state(1024),
        };
        let mut b = a.clone();
        sim.oracle_reflect(&mut a);
        sim.local_diffusion(&mut a);
        sim.local_diffusion(&mut b);
        sim.oracle_reflect(&mut b);
        let unmarked = 2 * 64..;
        for (x, y) in a.amps()[unmarked.clone()].iter().zip(&b.amps()[unmarked]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn diffusion_fixes_uniform_and_preserves_mean() {
        let mut u = vec![0.125; 64];
        global_diffusion(&mut u);
        assert!(u.iter().all(|&a| (a - 0.125).abs() < 1e-16));
        let mut v = test_state(64);
        let m0 = mean(&v);
        global_diffusion(&mut v);
        assert!((mean(&v) - m0).abs() < 1e-15);

        let mut w: Vec<f64> = (0..64).map(|i| (i / 16) as f64).collect();
        let w0 = w.clone();
        local_diffusion(&mut w, 16);
        assert_eq!(w, w0);
    }

    #[test]
    fn global_diffusion_matches_dense_matrix() {
        let n = 64;
        let s = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let dense = -(DMatrix::identity(n, n) - 2.0 * &s * s.transpose());
        let v = test_state(n);
        let expected = &dense * DVector::from_column_slice(&v);
        let mut got = v.clone();
        global_diffusion(&mut got);
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn single_block_local_equals_global() {
        let mut a = test_state(64);
        let mut b = a.clone();
        local_diffusion(&mut a, 64);
        global_diffusion(&mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn local_iteration_matches_reduced_g2() {
        let p = make_problem(8, 32, &[5]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let mut s = sim.uniform_state();
        sim.global_iteration(&mut s);
        let before = sim.project_to_reduced(&s).unwrap();
        sim.local_iteration(&mut s);
        let after = sim.project_to_reduced(&s).unwrap();
        let g2 = reduced_sim::g2_matrix(&p, 1);
        let expected = g2 * DVector::from_column_slice(before.amps());
        for (a, e) in after.amps().iter().zip(expected.iter()) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn empty_schedule_keeps_success_probability() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let s = sim.run_partial_search(0, 0);
        assert!((sim.success_probability(&s) - 2.0 / 16.0).abs() < 1e-12);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_projects_to_initial_state() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let proj = sim.project_to_reduced(&sim.uniform_state()).unwrap();
        assert!(proj.max_abs_diff(&reduced_sim::initial_state(&p)) < 1e-15);
    }

    #[test]
    fn class_symmetry_holds_after_every_operator() {
        let p = make_problem(12, 32, &[2, 7]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let mut s = sim.uniform_state();
        for _ in 0..4 {
            sim.global_iteration(&mut s);
            assert!(sim.class_spread(&s) < 1e-12);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
        for _ in 0..4 {
            sim.local_iteration(&mut s);
            assert!(sim.class_spread(&s) < 1e-12);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
        sim.final_reflection(&mut s);
        assert!(sim.class_spread(&s) < 1e-12);
    }

    #[test]
    fn asymmetric_state_is_rejected() {
        let p = make_problem(16, 64, &[1, 3]).unwrap();
        let sim = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let mut s = sim.uniform_state();
        s.amps_mut()[70] += 0.01;
        assert!(matches!(
            sim.project_to_reduced(&s),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let p = make_problem(16, 64, &[1]).unwrap();
        assert!(matches!(
            FullSimulator::new(&p, 512),
            Err(Error::Resource { n: 1024, cap: 512 })
        ));
    }

    #[test]
    fn placement_does_not_matter() {
        let p = make_problem(16, 32, &[1, 3, 2]).unwrap();
        let canonical = FullSimulator::new(&p, DEFAULT_CAP).unwrap();
        let reference = canonical
            .project_to_reduced(&canonical.run_partial_search(4, 3))
            .unwrap();
        for seed in 0..5 {
            let sim = FullSimulator::permuted(&p, DEFAULT_CAP, seed).unwrap();
            let proj = sim
                .project_to_reduced(&sim.run_partial_search(4, 3))
                .unwrap();
            assert!(proj.max_abs_diff(&reference) < 1e-12);
        }
    }
}
