//! Exact-versus-bosonic comparison runs.

use crate::dynamics::{evolve_modes_with, initial_steps, PropagationOptions};
use crate::error::{domain, Error, Result};
use crate::model::{SubEnsembleConfig, C64};
use crate::propagate::snapshot_indices;
use crate::schedule::{ControlSchedule, Segment};

use super::{build_exact, check_partition, collective_operators, ExactHamiltonian, ExactRegister, ProductState};

/// Outcome of propagating the same photon input through the exact register and
/// through the bosonic sub-ensemble model.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub atoms: usize,
    pub groups: usize,
    pub photons: usize,
    /// Max over snapshots of the distance between the exact state projected on
    /// the collective Fock basis and the bosonic amplitudes.
    pub max_deviation: f64,
    /// `|⟨Φ_bosonic(T)|ψ_exact(T)⟩|²`, the bosonic state embedded in the register.
    pub final_overlap: f64,
    /// Exact weight outside the collective subspace at the end.
    pub final_leaked_weight: f64,
    pub max_leaked_weight: f64,
    /// Steps per ramp of the accepted exact run.
    pub steps: usize,
}

/// Splits `atoms` into `m` contiguous groups; earlier groups take the remainder.
pub fn contiguous_partition(atoms: usize, m: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 || m > atoms {
        return Err(domain(format!("cannot split {atoms} atoms into {m} nonempty groups")));
    }
    let base = atoms / m;
    let extra = atoms % m;
    let mut out = Vec::with_capacity(m);
    let mut next = 0;
    for g in 0..m {
        let size = base + usize::from(g < extra);
        out.push((next..next + size).collect());
        next += size;
    }
    Ok(out)
}

/// Occupation vectors of `modes` modes with `n` quanta in total.
fn occupations(modes: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(modes: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == modes {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(modes, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(modes, n, &mut Vec::with_capacity(modes), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `exp(−i·dt·(c_p·P + c_q·Q))·v` by a truncated Taylor series with substeps.
fn expmv(h: &ExactHamiltonian, c_p: f64, c_q: f64, dt: f64, v: &mut Vec<C64>) {
    let bound = c_p.abs() * h.probe.row_sum_norm() + c_q.abs() * h.control.row_sum_norm();
    let substeps = ((bound * dt.abs()) / 0.5).ceil().max(1.0) as usize;
    let tau = dt / substeps as f64;
    let mut term = vec![C64::new(0.0, 0.0); v.len()];
    let mut next = vec![C64::new(0.0, 0.0); v.len()];
    for _ in 0..substeps {
        term.copy_from_slice(v);
        for k in 1..=40 {
            next.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            let scale = C64::new(0.0, -tau / k as f64);
            h.probe.mul_add(scale * c_p, &term, &mut next);
            h.control.mul_add(scale * c_q, &term, &mut next);
            std::mem::swap(&mut term, &mut next);
            let mut size = 0.0;
            for (acc, t) in v.iter_mut().zip(&term) {
                *acc += t;
                size += t.norm_sqr();
            }
            if size < 1e-36 {
                break;
            }
        }
    }
}

struct ExactTrajectory {
    times: Vec<f64>,
    states: Vec<Vec<C64>>,
}

fn propagate_exact(
    h: &ExactHamiltonian,
    schedule: &ControlSchedule,
    initial: &[C64],
    steps: usize,
    options: &PropagationOptions,
) -> ExactTrajectory {
    let rule = options.integrator.rule();
    let mut psi = initial.to_vec();
    let mut out = ExactTrajectory { times: vec![0.0], states: vec![psi.clone()] };
    for seg in schedule.segments() {
        let (start, end) = seg.bounds();
        match seg {
            Segment::Hold { .. } => {
                expmv(h, 1.0, 0.0, end - start, &mut psi);
                out.times.push(end);
                out.states.push(psi.clone());
            }
            Segment::Ramp { .. } => {
                let dt = (end - start) / steps as f64;
                let keep = snapshot_indices(steps, options.samples);
                let mut next_keep = keep.iter().peekable();
                for i in 0..steps {
                    let t0 = start + i as f64 * dt;
                    let fs: Vec<f64> =
                        rule.nodes.iter().map(|x| schedule.envelope_in(&seg, t0 + x * dt)).collect();
                    for (fixed_w, node_w) in &rule.factors {
                        let fw: f64 = node_w.iter().zip(&fs).map(|(a, f)| a * f).sum();
                        expmv(h, *fixed_w, fw, dt, &mut psi);
                    }
                    if next_keep.peek() == Some(&&(i + 1)) {
                        next_keep.next();
                        out.times.push(if i + 1 == steps { end } else { t0 + dt });
                        out.states.push(psi.clone());
                    }
                }
            }
        }
    }
    out
}

/// Propagates `photons` photons (bare photon mode, atoms in `b`) through the
/// exact register and through the bosonic model built from `partition`, whose
/// bins take the group means of the per-atom couplings.
pub fn compare_to_bosonic(
    register: &ExactRegister,
    partition: &[Vec<usize>],
    schedule: &ControlSchedule,
    photons: usize,
    options: &PropagationOptions,
) -> Result<DiscrepancyReport> {
    check_partition(register.atoms(), partition)?;
    if photons == 0 || photons > register.max_excitations() || photons > register.max_photons() {
        return Err(domain(format!(
            "{photons} photons need 1 ≤ n ≤ min(excitation cap {}, photon cap {})",
            register.max_excitations(),
            register.max_photons()
        )));
    }
    let mean = |values: &[f64], group: &[usize]| group.iter().map(|&j| values[j]).sum::<f64>() / group.len() as f64;
    let config = SubEnsembleConfig::new(
        partition.iter().map(|g| g.len() as u64).collect(),
        partition.iter().map(|g| mean(register.probe_couplings(), g)).collect(),
        partition.iter().map(|g| mean(register.control_weights(), g)).collect(),
    )?;
    let m = config.m();

    let samples = options.samples.max(1);
    let start = initial_steps(schedule).div_ceil(samples) * samples;
    let bosonic = evolve_modes_with(&config, schedule, start, false, options)?;

    let hamiltonian = build_exact(register)?;
    let ops = collective_operators(register, partition)?;
    let basis = &hamiltonian.basis;
    let dim = basis.len();
    let vacuum = basis.index_of(&ProductState::ground(0)).expect("vacuum is always in the basis");

    // collective Fock states embedded in the register, normalized
    let creation: Vec<_> = std::iter::once(ops.photon.adjoint())
        .chain(ops.a.iter().map(|a| a.adjoint()))
        .chain(ops.c.iter().map(|c| c.adjoint()))
        .collect();
    let fock = occupations(2 * m + 1, photons);
    let mut embedded = Vec::with_capacity(fock.len());
    for occ in &fock {
        let mut v = nalgebra::DVector::<C64>::zeros(dim);
        v[vacuum] = C64::new(1.0, 0.0);
        for (mode, &k) in occ.iter().enumerate() {
            for _ in 0..k {
                v = &creation[mode] * v;
            }
        }
        let norm = v.norm();
        if norm > 0.0 {
            v /= C64::new(norm, 0.0);
        }
        embedded.push(v);
    }

    let mut initial = vec![C64::new(0.0, 0.0); dim];
    let input = basis.index_of(&ProductState::ground(photons as u32)).expect("photon state is in the basis");
    initial[input] = C64::new(1.0, 0.0);

    let mut steps = start;
    let mut coarse = propagate_exact(&hamiltonian, schedule, &initial, steps, options);
    let exact = loop {
        if 2 * steps > options.max_steps {
            return Err(Error::NotConverged { steps, defect: f64::NAN, change: f64::NAN });
        }
        steps *= 2;
        let fine = propagate_exact(&hamiltonian, schedule, &initial, steps, options);
        let last = |t: &ExactTrajectory| t.states.last().cloned().unwrap_or_default();
        let change = last(&fine)
            .iter()
            .zip(&last(&coarse))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if change < options.convergence_tolerance {
            break fine;
        }
        coarse = fine;
    };

    let bosonic_amplitudes = |t_index: usize| -> Vec<C64> {
        let u = bosonic.matrices[t_index].column(0);
        let n_fact = factorial(photons);
        fock.iter()
            .map(|occ| {
                let mut amp = C64::new((n_fact / occ.iter().map(|&k| factorial(k)).product::<f64>()).sqrt(), 0.0);
                for (mode, &k) in occ.iter().enumerate() {
                    amp *= u[mode].powu(k as u32);
                }
                amp
            })
            .collect()
    };

    let mut max_deviation: f64 = 0.0;
    let mut max_leaked: f64 = 0.0;
    let mut final_overlap = f64::NAN;
    let mut final_leaked = f64::NAN;
    let mut j = 0;
    for (i, &t) in bosonic.times.iter().enumerate() {
        while j < exact.times.len() && exact.times[j] < t - 1e-9 {
            j += 1;
        }
        if j >= exact.times.len() || (exact.times[j] - t).abs() > 1e-9 {
            continue;
        }
        let psi = nalgebra::DVector::from_column_slice(&exact.states[j]);
        let projected: Vec<C64> = embedded.iter().map(|e| e.dotc(&psi)).collect();
        let expected = bosonic_amplitudes(i);
        let deviation = projected
            .iter()
            .zip(&expected)
            .map(|(p, b)| (p - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let kept: f64 = projected.iter().map(|p| p.norm_sqr()).sum();
        let leaked = (1.0 - kept).max(0.0);
        max_deviation = max_deviation.max(deviation);
        max_leaked = max_leaked.max(leaked);
        let overlap: C64 = expected.iter().zip(&projected).map(|(b, p)| b.conj() * p).sum();
        final_overlap = overlap.norm_sqr().min(1.0);
        final_leaked = leaked;
    }

    Ok(DiscrepancyReport {
        atoms: register.atoms(),
        groups: m,
        photons,
        max_deviation,
        final_overlap,
        final_leaked_weight: final_leaked,
        max_leaked_weight: max_leaked,
        steps,
    })
}
