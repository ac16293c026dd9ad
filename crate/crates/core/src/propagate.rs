//! Exponential integrators for `i·dU/dt = H(t)·U` with `H(t) = P + f(t)·Q`.
//!
//! Every step is a product of exact exponentials of Hermitian matrices, so the
//! propagator stays unitary up to the accuracy of the eigen-solves.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::schedule::{ControlSchedule, Segment};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Second-order Magnus: one exponential of the midpoint generator.
    Midpoint,
    /// Fourth-order commutator-free Magnus: two exponentials built from the
    /// generator at the Gauss–Legendre nodes.
    #[default]
    CommutatorFree4,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Exponential factors of one step, as (node weights, coefficient) pairs:
/// each factor is `exp(−i·dt·(c·P + Σ_k a_k·f(t + x_k·dt)·Q))`, applied in order.
pub(crate) struct StepRule {
    pub nodes: Vec<f64>,
    /// Per factor: fixed-part weight and weights on each node's envelope.
    pub factors: Vec<(f64, Vec<f64>)>,
}

impl Integrator {
    pub(crate) fn rule(self) -> StepRule {
        match self {
            Integrator::Midpoint => StepRule { nodes: vec![0.5], factors: vec![(1.0, vec![1.0])] },
            Integrator::CommutatorFree4 => {
                let early = 0.25 + SQRT3 / 6.0;
                let late = 0.25 - SQRT3 / 6.0;
                StepRule {
                    nodes: vec![0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0],
                    // the first factor leans on the early node
                    factors: vec![(0.5, vec![early, late]), (0.5, vec![late, early])],
                }
            }
        }
    }
}

/// `H(f) = fixed + f·control`, real symmetric.
#[derive(Debug, Clone)]
pub(crate) struct LinearGenerator {
    pub fixed: DMatrix<f64>,
    pub control: DMatrix<f64>,
}

impl LinearGenerator {
    fn combined(&self, fixed_weight: f64, control_weight: f64) -> DMatrix<f64> {
        &self.fixed * fixed_weight + &self.control * control_weight
    }
}

/// `exp(−i·h·dt)` for real symmetric `h`.
pub(crate) fn expi_symmetric(h: DMatrix<f64>, dt: f64) -> DMatrix<C64> {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let phases: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * dt)).collect();
    let mut u = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += phases[k] * (v[(i, k)] * v[(j, k)]);
            }
            u[(i, j)] = acc;
        }
    }
    u
}

/// Frobenius norm of `U†U − I`.
pub(crate) fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let n = prod.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (prod[(i, j)] - C64::new(target, 0.0)).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Raw result of one fixed-step propagation.
pub(crate) struct Trajectory {
    pub times: Vec<f64>,
    pub envelope: Vec<f64>,
    pub matrices: Vec<DMatrix<C64>>,
}

/// Step indices (1-based, within a segment of `steps` steps) at which to keep a snapshot.
pub(crate) fn snapshot_indices(steps: usize, samples: usize) -> Vec<usize> {
    let s = samples.clamp(1, steps);
    let mut out: Vec<usize> = (1..=s).map(|k| k * steps / s).collect();
    out.dedup();
    out
}

/// Propagates the identity through every segment of `schedule`, taking
/// `steps` steps per ramp and evaluating a hold exactly.
pub(crate) fn propagate(
    generator: &LinearGenerator,
    schedule: &ControlSchedule,
    steps: usize,
    integrator: Integrator,
    samples: usize,
) -> Trajectory {
    let n = generator.fixed.nrows();
    let rule = integrator.rule();
    let mut u = DMatrix::<C64>::identity(n, n);
    let mut traj = Trajectory {
        times: vec![0.0],
        envelope: vec![schedule.envelope(0.0)],
        matrices: vec![u.clone()],
    };
    for seg in schedule.segments() {
        let (start, end) = seg.bounds();
        match seg {
            Segment::Hold { .. } => {
                let hold_samples = samples.clamp(1, 16);
                let base = u.clone();
                for k in 1..=hold_samples {
                    let t = (end - start) * k as f64 / hold_samples as f64;
                    let step = expi_symmetric(generator.fixed.clone(), t);
                    u = &step * &base;
                    traj.times.push(start + t);
                    traj.envelope.push(0.0);
                    traj.matrices.push(u.clone());
                }
            }
            Segment::Ramp { .. } => {
                let dt = (end - start) / steps as f64;
                let keep = snapshot_indices(steps, samples);
                let mut next_keep = keep.iter().peekable();
                for i in 0..steps {
                    let t0 = start + i as f64 * dt;
                    let fs: Vec<f64> =
                        rule.nodes.iter().map(|x| schedule.envelope_in(&seg, t0 + x * dt)).collect();
                    for (fixed_w, node_w) in &rule.factors {
                        let fw: f64 = node_w.iter().zip(&fs).map(|(a, f)| a * f).sum();
                        let h = generator.combined(*fixed_w, fw);
                        u = expi_symmetric(h, dt) * &u;
                    }
                    if next_keep.peek() == Some(&&(i + 1)) {
                        next_keep.next();
                        let t = if i + 1 == steps { end } else { t0 + dt };
                        traj.times.push(t);
                        traj.envelope.push(schedule.envelope_in(&seg, t));
                        traj.matrices.push(u.clone());
                    }
                }
            }
        }
    }
    traj
}
