//! Time evolution of the `2m + 1` bosonic modes under a control schedule.
//!
//! The generator is quadratic and number conserving, so the many-photon
//! evolution is fixed by the single-excitation propagator `U(t)`: an input
//! mode `v` ends up in `U(t)·v`, and every Fock or coherent state built on `v`
//! follows. Storage and retrieval are therefore computed on mode vectors, and
//! n-photon overlaps come from [`overlap_fock`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{dark_mode_vector, mixing_angles, split_hamiltonian, ModeVector, SubEnsembleConfig, C64};
use crate::propagate::{self, unitarity_defect, Integrator, LinearGenerator};
use crate::schedule::{ControlSchedule, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub integrator: Integrator,
    /// Largest accepted `‖U†U − I‖_F` over the snapshots.
    pub unitarity_tolerance: f64,
    /// Largest accepted entry-wise change of the final `U` between two refinements.
    pub convergence_tolerance: f64,
    /// Refinement stops with an error once the step count would exceed this.
    pub max_steps: usize,
    /// Snapshots kept per ramp.
    pub samples: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::default(),
            unitarity_tolerance: 1e-10,
            convergence_tolerance: 1e-9,
            max_steps: 1 << 20,
            samples: 400,
        }
    }
}

/// Time-ordered unitary on the mode space, sampled along the schedule.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub times: Vec<f64>,
    /// Envelope value `f(t)` at each snapshot.
    pub envelope: Vec<f64>,
    /// `U(t)` at each snapshot; the first is the identity.
    pub matrices: Vec<DMatrix<C64>>,
    pub unitarity_defect: f64,
    /// Steps per ramp in the accepted refinement.
    pub steps: usize,
    pub m: usize,
}

impl Propagator {
    pub fn final_matrix(&self) -> &DMatrix<C64> {
        self.matrices.last().expect("propagator always holds the initial identity")
    }

    /// `U(T)·v`.
    pub fn apply(&self, v: &ModeVector) -> Result<ModeVector> {
        apply_matrix(self.final_matrix(), v)
    }

    /// `U(t)·v` at every snapshot.
    pub fn trajectory(&self, v: &ModeVector) -> Result<Vec<ModeVector>> {
        self.matrices.iter().map(|u| apply_matrix(u, v)).collect()
    }
}

pub(crate) fn apply_matrix(u: &DMatrix<C64>, v: &ModeVector) -> Result<ModeVector> {
    if u.ncols() != v.len() {
        return Err(domain(format!("mode vector of length {} for a {}-mode propagator", v.len(), u.ncols())));
    }
    let out: Vec<C64> = (0..u.nrows())
        .map(|i| (0..u.ncols()).map(|j| u[(i, j)] * v.amplitudes()[j]).sum())
        .collect();
    ModeVector::new(v.m(), out)
}

fn generator(config: &SubEnsembleConfig, use_homogeneous: bool) -> Result<LinearGenerator> {
    let (p0, p1) = split_hamiltonian(config, 0.0)?;
    let (q0, q1) = split_hamiltonian(config, 1.0)?;
    // the control part is linear in f; recover it from f = 0 and f = 1
    if use_homogeneous {
        Ok(LinearGenerator { control: &q0 - &p0, fixed: p0 })
    } else {
        let fixed = p0 + p1;
        let control = (q0 + q1) - &fixed;
        Ok(LinearGenerator { fixed, control })
    }
}

/// Propagator of the true (`use_homogeneous = false`) or reference dynamics,
/// with default options.
pub fn evolve_modes(
    config: &SubEnsembleConfig,
    schedule: &ControlSchedule,
    steps: usize,
    use_homogeneous: bool,
) -> Result<Propagator> {
    evolve_modes_with(config, schedule, steps, use_homogeneous, &PropagationOptions::default())
}

/// Like [`evolve_modes`], starting from `steps` per ramp and doubling until the
/// final propagator is unitary and stable between refinements.
pub fn evolve_modes_with(
    config: &SubEnsembleConfig,
    schedule: &ControlSchedule,
    steps: usize,
    use_homogeneous: bool,
    options: &PropagationOptions,
) -> Result<Propagator> {
    if steps < 10 {
        return Err(domain(format!("at least 10 steps are required, got {steps}")));
    }
    schedule.validate()?;
    let generator = generator(config, use_homogeneous)?;
    let run = |n: usize| -> Propagator {
        let traj = propagate::propagate(&generator, schedule, n, options.integrator, options.samples);
        let defect = traj.matrices.iter().map(unitarity_defect).fold(0.0, f64::max);
        Propagator {
            times: traj.times,
            envelope: traj.envelope,
            matrices: traj.matrices,
            unitarity_defect: defect,
            steps: n,
            m: config.m(),
        }
    };

    let mut coarse = run(steps);
    let mut n = steps;
    loop {
        if 2 * n > options.max_steps {
            return Err(Error::NotConverged { steps: n, defect: coarse.unitarity_defect, change: f64::NAN });
        }
        n *= 2;
        let fine = run(n);
        let change = (fine.final_matrix() - coarse.final_matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if fine.unitarity_defect <= options.unitarity_tolerance && change < options.convergence_tolerance {
            return Ok(fine);
        }
        if 2 * n > options.max_steps {
            return Err(Error::NotConverged { steps: n, defect: fine.unitarity_defect, change });
        }
        coarse = fine;
    }
}

/// Starting step count for a schedule: about ten steps per unit of peak phase.
pub fn initial_steps(schedule: &ControlSchedule) -> usize {
    let estimate = (schedule.ramp_time * schedule.peak.max(1.0) / 4.0).ceil() as usize;
    estimate.clamp(64, 1 << 14)
}

/// Which mode the incoming photons occupy at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// The dark polariton at the schedule's initial control value; equals the
    /// bare photon mode in the limit of an infinitely strong initial control.
    #[default]
    DarkPolariton,
    /// The bare photon mode `a`.
    Photon,
}

/// Quantum state of the probe light fed into the memory.
#[derive(Debug, Clone, PartialEq)]
pub struct InputState {
    kind: Payload,
    pub mode: InputMode,
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Fock(Vec<C64>),
    Coherent(C64),
}

impl InputState {
    pub fn fock(coefficients: Vec<C64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(domain("at least one Fock coefficient is required"));
        }
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(domain(format!("Fock coefficients have total weight {norm}, expected 1")));
        }
        Ok(Self { kind: Payload::Fock(coefficients), mode: InputMode::default() })
    }

    /// `|n⟩`.
    pub fn photons(n: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); n + 1];
        c[n] = C64::new(1.0, 0.0);
        Self { kind: Payload::Fock(c), mode: InputMode::default() }
    }

    pub fn single_photon() -> Self {
        Self::photons(1)
    }

    pub fn coherent(alpha: C64) -> Result<Self> {
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(domain("coherent amplitude must be finite"));
        }
        Ok(Self { kind: Payload::Coherent(alpha), mode: InputMode::default() })
    }

    pub fn with_mode(mut self, mode: InputMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn fock_coefficients(&self) -> Option<&[C64]> {
        match &self.kind {
            Payload::Fock(c) => Some(c),
            Payload::Coherent(_) => None,
        }
    }

    pub fn alpha(&self) -> Option<C64> {
        match self.kind {
            Payload::Coherent(a) => Some(a),
            Payload::Fock(_) => None,
        }
    }

    /// Largest photon number carried with nonzero weight (coherent: `None`).
    pub fn max_photons(&self) -> Option<usize> {
        self.fock_coefficients().map(|c| c.iter().rposition(|z| z.norm_sqr() > 0.0).unwrap_or(0))
    }

    /// `⟨ψ0|ψ⟩` between the states obtained by placing this input in the
    /// normalized modes `u0` and `u`.
    pub fn overlap(&self, u: &ModeVector, u0: &ModeVector) -> Result<C64> {
        match &self.kind {
            Payload::Fock(c) => overlap_fock(c, u, u0),
            Payload::Coherent(alpha) => overlap_coherent(*alpha, u, u0),
        }
    }

    /// Initial excitation mode for a run with `schedule` on `config`.
    pub fn initial_mode(&self, config: &SubEnsembleConfig, schedule: &ControlSchedule) -> Result<ModeVector> {
        match self.mode {
            InputMode::Photon => Ok(ModeVector::photon(config.m())),
            InputMode::DarkPolariton => dark_mode_vector(config, schedule.initial_envelope()),
        }
    }
}

fn check_unit(v: &ModeVector, name: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > 1e-10 {
        return Err(domain(format!("{name} has norm {n}, expected 1")));
    }
    Ok(())
}

/// `⟨ψ0|ψ⟩ = Σ_n |C_n|²·(u0†u)ⁿ` for the input `Σ C_n|n⟩` carried by modes `u` and `u0`.
pub fn overlap_fock(coefficients: &[C64], u: &ModeVector, u0: &ModeVector) -> Result<C64> {
    check_unit(u, "u")?;
    check_unit(u0, "u0")?;
    if u.len() != u0.len() {
        return Err(domain("mode vectors differ in length"));
    }
    let weight: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    if (weight - 1.0).abs() > 1e-10 {
        return Err(domain(format!("Fock coefficients have total weight {weight}, expected 1")));
    }
    let s = unit_inner(u0, u);
    let mut power = C64::new(1.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for c in coefficients {
        acc += power * c.norm_sqr();
        power *= s;
    }
    Ok(acc)
}

/// `⟨u0|u⟩` with both vectors rescaled to unit norm, so that the propagation
/// norm drift does not show up as a spurious overlap loss.
fn unit_inner(u0: &ModeVector, u: &ModeVector) -> C64 {
    u0.inner(u) / (u0.norm() * u.norm())
}

/// Inner product of the multimode coherent states `⊗_k|α·u0_k⟩` and `⊗_k|α·u_k⟩`.
pub fn overlap_coherent(alpha: C64, u: &ModeVector, u0: &ModeVector) -> Result<C64> {
    check_unit(u, "u")?;
    check_unit(u0, "u0")?;
    let a2 = alpha.norm_sqr();
    let exponent = a2 * (unit_inner(u0, u) - 1.0);
    Ok(exponent.exp())
}

/// Result of a storage ramp.
#[derive(Debug, Clone)]
pub struct StoredState {
    pub input: InputState,
    /// Mode the photons occupied at `t = 0`.
    pub initial_mode: ModeVector,
    /// `U(T)·v`, true dynamics.
    pub mode: ModeVector,
    /// `U0(T)·v`, homogeneous reference dynamics.
    pub reference_mode: ModeVector,
    pub propagator: Propagator,
    pub reference_propagator: Propagator,
}

impl StoredState {
    /// Per-mode coherent amplitudes `ᾱ_k` of the true stored state (coherent input only).
    pub fn coherent_amplitudes(&self) -> Option<Vec<C64>> {
        self.input.alpha().map(|a| self.mode.amplitudes().iter().map(|u| a * u).collect())
    }

    /// Reference amplitudes `α_k` (coherent input only).
    pub fn reference_coherent_amplitudes(&self) -> Option<Vec<C64>> {
        self.input
            .alpha()
            .map(|a| self.reference_mode.amplitudes().iter().map(|u| a * u).collect())
    }

    /// `⟨Ψ0(T)|Ψ(T)⟩`.
    pub fn overlap(&self) -> Result<C64> {
        self.input.overlap(&self.mode, &self.reference_mode)
    }
}

/// Runs a storage ramp under both the true and the reference dynamics.
pub fn storage_map(
    config: &SubEnsembleConfig,
    schedule: &ControlSchedule,
    input: &InputState,
    options: &PropagationOptions,
) -> Result<StoredState> {
    if schedule.direction != Direction::Storage {
        return Err(domain(format!("storage needs a storage schedule, got {}", schedule.direction)));
    }
    let steps = initial_steps(schedule);
    let initial_mode = input.initial_mode(config, schedule)?;
    let propagator = evolve_modes_with(config, schedule, steps, false, options)?;
    let reference_propagator = if config.is_homogeneous() {
        propagator.clone()
    } else {
        evolve_modes_with(config, schedule, steps, true, options)?
    };
    Ok(StoredState {
        input: input.clone(),
        mode: propagator.apply(&initial_mode)?,
        reference_mode: reference_propagator.apply(&initial_mode)?,
        initial_mode,
        propagator,
        reference_propagator,
    })
}

/// Result of a retrieval ramp.
#[derive(Debug, Clone)]
pub struct ReleasedState {
    /// Final mode vector of the true dynamics.
    pub mode: ModeVector,
    /// Weight in the bare photon mode.
    pub photon_weight: f64,
    /// Weight in the dark polariton at the final control value.
    pub dark_weight: f64,
    pub propagator: Propagator,
}

impl ReleasedState {
    /// Recovered photon-mode amplitude for a coherent input `α`.
    pub fn coherent_photon_amplitude(&self, alpha: C64) -> C64 {
        alpha * self.mode.photon_amplitude()
    }
}

/// Releases a stored mode, optionally after an exact hold of `hold` time units
/// at zero control.
pub fn retrieval_map(
    config: &SubEnsembleConfig,
    schedule: &ControlSchedule,
    stored: &ModeVector,
    hold: f64,
    options: &PropagationOptions,
) -> Result<ReleasedState> {
    if schedule.direction != Direction::Retrieval {
        return Err(domain(format!("retrieval needs a retrieval schedule, got {}", schedule.direction)));
    }
    if stored.len() != config.mode_count() {
        return Err(domain(format!(
            "stored state has {} modes, config has {}",
            stored.len(),
            config.mode_count()
        )));
    }
    if !(hold >= 0.0) {
        return Err(domain(format!("hold must be nonnegative, got {hold}")));
    }
    let held = if hold > 0.0 {
        let h = crate::model::hamiltonian_matrix(config, 0.0)?;
        apply_matrix(&propagate::expi_symmetric(h, hold), stored)?
    } else {
        stored.clone()
    };
    let propagator = evolve_modes_with(config, schedule, initial_steps(schedule), false, options)?;
    let mode = propagator.apply(&held)?;
    let dark = dark_mode_vector(config, schedule.final_envelope())?;
    Ok(ReleasedState {
        photon_weight: mode.photon_amplitude().norm_sqr(),
        dark_weight: dark.inner(&mode).norm_sqr(),
        mode,
        propagator,
    })
}

/// One snapshot of a single-excitation trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub envelope: f64,
    pub theta: f64,
    pub populations: Vec<f64>,
    /// `|⟨dark(f(t))|ψ(t)⟩|²`.
    pub dark_overlap: f64,
}

/// Samples `U(t)·v` along a propagator together with the instantaneous dark mode.
pub fn trajectory(config: &SubEnsembleConfig, propagator: &Propagator, v: &ModeVector) -> Result<Vec<TrajectoryPoint>> {
    propagator
        .matrices
        .iter()
        .zip(propagator.times.iter().zip(&propagator.envelope))
        .map(|(u, (&t, &f))| {
            let state = apply_matrix(u, v)?;
            let dark = dark_mode_vector(config, f)?;
            Ok(TrajectoryPoint {
                t,
                envelope: f,
                theta: mixing_angles(config, f)?.theta,
                populations: state.populations(),
                dark_overlap: dark.inner(&state).norm_sqr(),
            })
        })
        .collect()
}
