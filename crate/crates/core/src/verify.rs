//! Seeded randomized invariant suites with replayable counterexamples.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::leakage;
use crate::dynamics::{evolve_modes, initial_steps, InputState};
use crate::error::{domain, Result};
use crate::model::{dark_mode_vector, hamiltonian_matrix, mixing_angles, SubEnsembleConfig, C64};
use crate::oracle::{build_exact, collective_operators, commutator, contiguous_partition, excitation_operator, ExactRegister};
use crate::schedule::ControlSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    DarkKernel,
    MixingAngles,
    Unitarity,
    HomogeneousNull,
    OracleHermitian,
    OracleCommutators,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::DarkKernel,
        Suite::MixingAngles,
        Suite::Unitarity,
        Suite::HomogeneousNull,
        Suite::OracleHermitian,
        Suite::OracleCommutators,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::DarkKernel => "dark-kernel",
            Suite::MixingAngles => "mixing-angles",
            Suite::Unitarity => "unitarity",
            Suite::HomogeneousNull => "homogeneous-null",
            Suite::OracleHermitian => "oracle-hermitian",
            Suite::OracleCommutators => "oracle-commutators",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::DarkKernel => 1e-12,
            Suite::MixingAngles => 1e-10,
            Suite::Unitarity => 1e-9,
            Suite::HomogeneousNull => 1e-12,
            Suite::OracleHermitian | Suite::OracleCommutators => 0.0,
        }
    }

    /// Cases drawn per run; the propagating suites draw fewer.
    pub fn default_cases(self) -> usize {
        match self {
            Suite::DarkKernel | Suite::MixingAngles => 1000,
            Suite::Unitarity | Suite::HomogeneousNull => 12,
            Suite::OracleHermitian | Suite::OracleCommutators => 20,
        }
    }
}

/// One randomized input, self-contained so a failure can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub suite: Suite,
    pub seed: u64,
    pub index: usize,
    pub atom_counts: Vec<u64>,
    pub probe_couplings: Vec<f64>,
    pub control_weights: Vec<f64>,
    #[serde(default)]
    pub phases: Vec<f64>,
    pub envelope: f64,
    pub ramp_time: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    /// Largest defect seen; compared against [`Suite::tolerance`].
    pub worst: f64,
    pub failure: Option<(Case, String)>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

fn case_seed(seed: u64, suite: Suite) -> u64 {
    let offset = Suite::ALL.iter().position(|s| *s == suite).unwrap_or(0) as u64;
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(offset)
}

fn draw(suite: Suite, seed: u64, index: usize, rng: &mut ChaCha8Rng) -> Case {
    let (m, max_atoms) = match suite {
        Suite::OracleHermitian | Suite::OracleCommutators => (rng.gen_range(1..=3usize), 0),
        Suite::Unitarity | Suite::HomogeneousNull => (rng.gen_range(1..=4usize), 1_000_000),
        _ => (rng.gen_range(1..=8usize), 1_000_000),
    };
    let oracle = matches!(suite, Suite::OracleHermitian | Suite::OracleCommutators);
    let atom_counts: Vec<u64> = if oracle {
        let atoms = rng.gen_range(m.max(2)..=6usize);
        vec![atoms as u64]
    } else {
        (0..m).map(|_| rng.gen_range(1..=max_atoms)).collect()
    };
    let entries = if oracle { atom_counts[0] as usize } else { m };
    let mut probe_couplings: Vec<f64> = (0..entries).map(|_| rng.gen_range(0.01..2.0)).collect();
    let mut control_weights: Vec<f64> = (0..entries).map(|_| rng.gen_range(0.1..2.0)).collect();
    if suite == Suite::HomogeneousNull {
        probe_couplings = vec![probe_couplings[0]; m];
        control_weights = vec![control_weights[0]; m];
    }
    let phases = if oracle { (0..entries).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect() } else { Vec::new() };
    // oracle cases keep the partition size in `envelope`
    let envelope = if oracle { m as f64 } else { rng.gen_range(0.0..10.0) };
    Case {
        suite,
        seed,
        index,
        atom_counts,
        probe_couplings,
        control_weights,
        phases,
        envelope,
        ramp_time: rng.gen_range(10.0..40.0),
        peak: rng.gen_range(2.0..10.0),
    }
}

fn config_of(case: &Case) -> Result<SubEnsembleConfig> {
    SubEnsembleConfig::new(case.atom_counts.clone(), case.probe_couplings.clone(), case.control_weights.clone())?
        .with_unit_convention()
}

fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Defect of one case for its suite.
pub fn check(case: &Case) -> Result<f64> {
    match case.suite {
        Suite::DarkKernel => {
            let config = config_of(case)?;
            let v = dark_mode_vector(&config, case.envelope)?;
            let h = hamiltonian_matrix(&config, case.envelope)?;
            let hv: f64 = (0..h.nrows())
                .map(|i| (0..h.ncols()).map(|j| v.amplitudes()[j] * h[(i, j)]).sum::<C64>().norm_sqr())
                .sum::<f64>()
                .sqrt();
            Ok(hv.max((v.norm() - 1.0).abs()))
        }
        Suite::MixingAngles => {
            let config = config_of(case)?;
            let angles = mixing_angles(&config, case.envelope)?;
            let y: Vec<f64> = config
                .collective_couplings()
                .iter()
                .zip(config.control_weights())
                .map(|(c, w)| c / w)
                .collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut defect: f64 = 0.0;
            if case.envelope > 0.0 {
                let expected = norm / case.envelope;
                defect = defect.max((angles.theta.tan() - expected).abs() / expected.max(1.0));
            }
            for (j, phi) in angles.phis.iter().enumerate() {
                let below = y[..=j].iter().map(|v| v * v).sum::<f64>().sqrt();
                if below > 0.0 {
                    let expected = y[j + 1] / below;
                    defect = defect.max((phi.tan() - expected).abs() / expected.max(1.0));
                }
            }
            Ok(defect)
        }
        Suite::Unitarity => {
            let config = config_of(case)?;
            let schedule = ControlSchedule::storage(case.ramp_time, case.peak)?;
            let prop = evolve_modes(&config, &schedule, initial_steps(&schedule), false)?;
            let v = dark_mode_vector(&config, case.peak)?;
            let out = prop.apply(&v)?;
            Ok(prop.unitarity_defect.max((out.norm() - 1.0).abs()))
        }
        Suite::HomogeneousNull => {
            let config = config_of(case)?;
            let schedule = ControlSchedule::storage(case.ramp_time, case.peak)?;
            let mut worst: f64 = 0.0;
            for input in [InputState::single_photon(), InputState::photons(3), InputState::coherent(C64::new(1.5, -0.7))?] {
                worst = worst.max(leakage(&config, &schedule, &input)?.xi);
            }
            Ok(worst)
        }
        Suite::OracleHermitian => {
            let register = register_of(case)?;
            let h = build_exact(&register)?;
            let dense = h.matrix(case.peak)?;
            let hermitian = max_entry(&(&dense - dense.adjoint()));
            let number = excitation_operator(&h.basis);
            Ok(hermitian.max(max_entry(&commutator(&dense, &number))))
        }
        Suite::OracleCommutators => {
            let register = register_of(case)?;
            let partition = contiguous_partition(register.atoms(), case.envelope as usize)?;
            let ops = collective_operators(&register, &partition)?;
            let mut worst: f64 = 0.0;
            for i in 0..partition.len() {
                for j in 0..partition.len() {
                    let c = commutator(&ops.t_plus[i], &ops.t_minus[j]);
                    let expected = if i == j { ops.t_z[j].scale(2.0) } else { DMatrix::zeros(c.nrows(), c.ncols()) };
                    worst = worst.max(max_entry(&(c - expected)));
                }
            }
            Ok(worst)
        }
    }
}

fn register_of(case: &Case) -> Result<ExactRegister> {
    ExactRegister::with_phases(
        case.probe_couplings.clone(),
        case.control_weights.clone(),
        case.phases.clone(),
        2,
        2,
    )
}

fn judge(case: Case) -> (f64, Option<(Case, String)>) {
    let tol = case.suite.tolerance();
    match check(&case) {
        Ok(d) if d <= tol => (d, None),
        Ok(d) => {
            let msg = format!("defect {d:e} exceeds {tol:e}");
            (d, Some((case, msg)))
        }
        Err(e) => (f64::INFINITY, Some((case, e.to_string()))),
    }
}

/// Runs `suite` on `cases` inputs drawn from `seed`. Cases are drawn in order
/// and checked in parallel; the reported failure is the first one drawn.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, suite));
    let drawn: Vec<Case> = (0..cases).map(|i| draw(suite, seed, i, &mut rng)).collect();
    let results: Vec<_> = drawn.into_par_iter().map(judge).collect();
    let worst = results.iter().fold(0.0_f64, |acc, r| acc.max(r.0));
    let failure = results.into_iter().find_map(|r| r.1);
    SuiteReport { suite, cases, worst, failure }
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    Suite::ALL.iter().map(|&s| run_suite(s, seed, s.default_cases())).collect()
}

/// Re-checks a single stored case.
pub fn replay(case: &Case) -> SuiteReport {
    let (worst, failure) = judge(case.clone());
    SuiteReport { suite: case.suite, cases: 1, worst, failure }
}

/// Case `index` of `suite` under `seed`, as drawn by [`run_suite`].
pub fn nth_case(suite: Suite, seed: u64, index: usize) -> Result<Case> {
    if index >= 1 << 20 {
        return Err(domain("case index out of range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, suite));
    let mut case = None;
    for i in 0..=index {
        case = Some(draw(suite, seed, i, &mut rng));
    }
    Ok(case.expect("at least one case is drawn"))
}
