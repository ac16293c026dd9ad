//! Sub-ensemble description of an inhomogeneously coupled Λ-type medium.
//!
//! The medium is cut into `m` spatial bins. Bin σ holds `N_σ` atoms that share
//! one probe coupling `g_σ` and one control weight `w_σ`; the control Rabi
//! frequency of the bin is `Ω_σ(t) = w_σ·f(t)` for a common envelope `f`.
//!
//! In the single-excitation (bosonic) picture the system has `2m + 1` modes,
//! laid out as
//!
//! ```text
//! index 0          photon mode a
//! index 1..=m      optical spin waves A_σ   (|b⟩ ↔ |a⟩)
//! index m+1..=2m   stored spin waves  C_σ   (|b⟩ ↔ |c⟩)
//! ```
//!
//! The coupling matrix is real symmetric: `a ↔ A_σ` with strength `g_σ√N_σ`
//! and `A_σ ↔ C_σ` with strength `w_σ·f`. Frequencies are measured in units
//! where the homogeneous reference satisfies `g0·√N = 1`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;

/// The discretized system: per-bin atom counts and couplings together with the
/// homogeneous reference `(g0, omega0_weight)` and the deviations from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubEnsembleConfig {
    atom_counts: Vec<u64>,
    probe_couplings: Vec<f64>,
    control_weights: Vec<f64>,
    g0: f64,
    omega0_weight: f64,
    deltas: Vec<f64>,
    lambdas_weight: Vec<f64>,
    total_atoms: u64,
}

impl SubEnsembleConfig {
    /// Builds a config whose reference couplings are the `N_σ`-weighted means.
    pub fn new(
        atom_counts: Vec<u64>,
        probe_couplings: Vec<f64>,
        control_weights: Vec<f64>,
    ) -> Result<Self> {
        validate_parts(&atom_counts, &probe_couplings, &control_weights)?;
        let g0 = weighted_mean(&atom_counts, &probe_couplings);
        let w0 = weighted_mean(&atom_counts, &control_weights);
        Self::with_reference(atom_counts, probe_couplings, control_weights, g0, w0)
    }

    /// Builds a config with an explicit homogeneous reference.
    pub fn with_reference(
        atom_counts: Vec<u64>,
        probe_couplings: Vec<f64>,
        control_weights: Vec<f64>,
        g0: f64,
        omega0_weight: f64,
    ) -> Result<Self> {
        validate_parts(&atom_counts, &probe_couplings, &control_weights)?;
        if !g0.is_finite() || g0 < 0.0 {
            return Err(domain(format!("reference probe coupling g0 = {g0} must be finite and nonnegative")));
        }
        if !omega0_weight.is_finite() || omega0_weight < 0.0 {
            return Err(domain(format!(
                "reference control weight {omega0_weight} must be finite and nonnegative"
            )));
        }
        let deltas = probe_couplings.iter().map(|g| g - g0).collect();
        let lambdas_weight = control_weights.iter().map(|w| w - omega0_weight).collect();
        let total_atoms = atom_counts.iter().sum();
        Ok(Self {
            atom_counts,
            probe_couplings,
            control_weights,
            g0,
            omega0_weight,
            deltas,
            lambdas_weight,
            total_atoms,
        })
    }

    /// Builds a config from collective couplings `g_σ√N_σ` instead of per-atom ones.
    pub fn from_collective(
        atom_counts: Vec<u64>,
        collective_couplings: &[f64],
        control_weights: Vec<f64>,
    ) -> Result<Self> {
        if collective_couplings.len() != atom_counts.len() {
            return Err(domain("collective couplings and atom counts differ in length"));
        }
        let probe = atom_counts
            .iter()
            .zip(collective_couplings)
            .map(|(&n, &c)| c / (n as f64).sqrt())
            .collect();
        Self::new(atom_counts, probe, control_weights)
    }

    /// Homogeneous system with the same coupling in every bin.
    pub fn homogeneous(atom_counts: Vec<u64>, g: f64, w: f64) -> Result<Self> {
        let m = atom_counts.len();
        Self::new(atom_counts, vec![g; m], vec![w; m])
    }

    /// Rescales every probe coupling (and `g0`) so that `g0·√N = 1`.
    pub fn with_unit_convention(&self) -> Result<Self> {
        let scale = self.g0 * (self.total_atoms as f64).sqrt();
        if scale <= 0.0 {
            return Err(domain("reference probe coupling is zero; cannot normalize"));
        }
        Self::with_reference(
            self.atom_counts.clone(),
            self.probe_couplings.iter().map(|g| g / scale).collect(),
            self.control_weights.clone(),
            self.g0 / scale,
            self.omega0_weight,
        )
    }

    pub fn m(&self) -> usize {
        self.atom_counts.len()
    }

    /// Number of bosonic modes, `2m + 1`.
    pub fn mode_count(&self) -> usize {
        2 * self.m() + 1
    }

    pub fn atom_counts(&self) -> &[u64] {
        &self.atom_counts
    }

    pub fn probe_couplings(&self) -> &[f64] {
        &self.probe_couplings
    }

    pub fn control_weights(&self) -> &[f64] {
        &self.control_weights
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn omega0_weight(&self) -> f64 {
        self.omega0_weight
    }

    /// `δ_σ = g_σ − g0`.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `w_σ − omega0_weight`; the control part of `λ_σ` is this times `f(t)`.
    pub fn lambdas_weight(&self) -> &[f64] {
        &self.lambdas_weight
    }

    pub fn total_atoms(&self) -> u64 {
        self.total_atoms
    }

    /// `g_σ·√N_σ` for every bin.
    pub fn collective_couplings(&self) -> Vec<f64> {
        self.atom_counts
            .iter()
            .zip(&self.probe_couplings)
            .map(|(&n, &g)| g * (n as f64).sqrt())
            .collect()
    }

    /// True when the split `h = h0 + h1` has a vanishing `h1`.
    pub fn is_homogeneous(&self) -> bool {
        self.deltas.iter().all(|&d| d == 0.0) && self.lambdas_weight.iter().all(|&l| l == 0.0)
    }

    /// The homogeneous reference system itself, as a config.
    pub fn reference(&self) -> Result<Self> {
        let m = self.m();
        Self::with_reference(
            self.atom_counts.clone(),
            vec![self.g0; m],
            vec![self.omega0_weight; m],
            self.g0,
            self.omega0_weight,
        )
    }

    /// Direction of the stored spin wave in the slow limit, `y_σ = g_σ√N_σ / w_σ`.
    pub(crate) fn storage_weights(&self) -> Vec<f64> {
        self.collective_couplings()
            .iter()
            .zip(&self.control_weights)
            .map(|(c, w)| c / w)
            .collect()
    }
}

fn validate_parts(atom_counts: &[u64], probe: &[f64], control: &[f64]) -> Result<()> {
    let m = atom_counts.len();
    if m == 0 {
        return Err(domain("at least one sub-ensemble is required"));
    }
    if probe.len() != m || control.len() != m {
        return Err(domain(format!(
            "length mismatch: {} atom counts, {} probe couplings, {} control weights",
            m,
            probe.len(),
            control.len()
        )));
    }
    if let Some(i) = atom_counts.iter().position(|&n| n == 0) {
        return Err(domain(format!("atom count of sub-ensemble {} must be at least 1", i + 1)));
    }
    if let Some(i) = probe.iter().position(|g| !g.is_finite() || *g < 0.0) {
        return Err(domain(format!(
            "probe coupling of sub-ensemble {} must be finite and nonnegative, got {}",
            i + 1,
            probe[i]
        )));
    }
    if probe.iter().all(|&g| g == 0.0) {
        return Err(domain("at least one probe coupling must be positive"));
    }
    if let Some(i) = control.iter().position(|w| !w.is_finite() || *w <= 0.0) {
        return Err(domain(format!(
            "control weight of sub-ensemble {} must be finite and positive, got {}",
            i + 1,
            control[i]
        )));
    }
    Ok(())
}

fn weighted_mean(counts: &[u64], values: &[f64]) -> f64 {
    // equal values must reproduce themselves bit-exactly so that h1 vanishes
    if values.iter().all(|&v| v == values[0]) {
        return values[0];
    }
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    counts.iter().zip(values).map(|(&n, &v)| n as f64 * v).sum::<f64>() / total
}

/// Complex amplitudes over the `2m + 1` bosonic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    amplitudes: Vec<C64>,
    m: usize,
    normalized: bool,
}

impl ModeVector {
    pub fn new(m: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 2 * m + 1 {
            return Err(domain(format!(
                "mode vector has {} amplitudes, expected {}",
                amplitudes.len(),
                2 * m + 1
            )));
        }
        Ok(Self { amplitudes, m, normalized: false })
    }

    /// Like [`ModeVector::new`] but asserts unit norm within `1e-12`.
    pub fn new_normalized(m: usize, amplitudes: Vec<C64>) -> Result<Self> {
        let mut v = Self::new(m, amplitudes)?;
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(domain(format!("mode vector norm {norm} is not 1")));
        }
        v.normalized = true;
        Ok(v)
    }

    /// All weight in one mode.
    pub fn unit(m: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 2 * m + 1];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes, m, normalized: true }
    }

    pub fn photon(m: usize) -> Self {
        Self::unit(m, 0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn photon_amplitude(&self) -> C64 {
        self.amplitudes[0]
    }

    /// Amplitude of `A_σ`, `σ` counted from 1.
    pub fn a_amplitude(&self, sigma: usize) -> C64 {
        self.amplitudes[sigma]
    }

    /// Amplitude of `C_σ`, `σ` counted from 1.
    pub fn c_amplitude(&self, sigma: usize) -> C64 {
        self.amplitudes[self.m + sigma]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &ModeVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Column labels matching the mode layout.
    pub fn labels(m: usize) -> Vec<String> {
        let mut out = vec!["a".to_string()];
        out.extend((1..=m).map(|s| format!("A{s}")));
        out.extend((1..=m).map(|s| format!("C{s}")));
        out
    }
}

/// Mixing angles of the dark mode: `theta` rotates photon into spin wave,
/// `phis` distribute the spin wave over the bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingAngles {
    pub theta: f64,
    pub phis: Vec<f64>,
}

/// Cosines and sines of the mixing angles, evaluated from the coupling ratios
/// rather than through `atan` so that the limits come out exact.
struct AngleTrig {
    theta: (f64, f64),
    phis: Vec<(f64, f64)>,
}

fn check_envelope(f: f64) -> Result<()> {
    if !(f >= 0.0) || f.is_infinite() {
        return Err(domain(format!("control envelope value must be finite and nonnegative, got {f}")));
    }
    Ok(())
}

fn angle_trig(config: &SubEnsembleConfig, f: f64) -> Result<AngleTrig> {
    check_envelope(f)?;
    let y = config.storage_weights();
    let y_norm = y.iter().fold(0.0_f64, |acc, v| acc.hypot(*v));
    if y_norm == 0.0 && f == 0.0 {
        return Err(Error::Degenerate);
    }
    // tanθ = |y| / f; both legs scaled by a common hypotenuse
    let r = f.hypot(y_norm);
    let theta = (f / r, y_norm / r);

    let mut phis = Vec::with_capacity(y.len().saturating_sub(1));
    let mut partial = 0.0_f64;
    for j in 0..y.len().saturating_sub(1) {
        partial = partial.hypot(y[j]);
        let next = y[j + 1];
        if partial == 0.0 {
            phis.push((0.0, 1.0));
        } else {
            let h = partial.hypot(next);
            phis.push((partial / h, next / h));
        }
    }
    Ok(AngleTrig { theta, phis })
}

/// Mixing angles at envelope value `f` (so `Ω_σ = w_σ·f`).
///
/// `theta = π/2` exactly when `f = 0`. A `φ_j` whose preceding couplings all
/// vanish is set to `π/2`.
pub fn mixing_angles(config: &SubEnsembleConfig, f: f64) -> Result<MixingAngles> {
    let trig = angle_trig(config, f)?;
    let theta = if f == 0.0 { FRAC_PI_2 } else { trig.theta.1.atan2(trig.theta.0) };
    let phis = trig
        .phis
        .iter()
        .map(|&(c, s)| if c == 0.0 { FRAC_PI_2 } else { s.atan2(c) })
        .collect();
    Ok(MixingAngles { theta, phis })
}

/// The dark-mode (dark-state polariton) vector at envelope value `f`.
///
/// Photon component `cosθ`, every `A_σ` component exactly zero, and the spin
/// wave spread over `C_σ` by the hyperspherical angles `φ_j`.
pub fn dark_mode_vector(config: &SubEnsembleConfig, f: f64) -> Result<ModeVector> {
    let trig = angle_trig(config, f)?;
    let m = config.m();
    let (cos_t, sin_t) = trig.theta;
    let mut amps = vec![C64::new(0.0, 0.0); 2 * m + 1];
    amps[0] = C64::new(cos_t, 0.0);
    for c in 0..m {
        let mut coeff = -sin_t;
        if c > 0 {
            coeff *= trig.phis[c - 1].1;
        }
        for phi in &trig.phis[c..] {
            coeff *= phi.0;
        }
        amps[m + 1 + c] = C64::new(coeff, 0.0);
    }
    Ok(ModeVector { amplitudes: amps, m, normalized: true })
}

/// Homogeneous reference part `h0` of the coupling matrix.
fn reference_matrix(config: &SubEnsembleConfig, f: f64) -> DMatrix<f64> {
    let m = config.m();
    let mut h0 = DMatrix::zeros(2 * m + 1, 2 * m + 1);
    for (s, &n) in config.atom_counts.iter().enumerate() {
        let probe = config.g0 * (n as f64).sqrt();
        let control = config.omega0_weight * f;
        h0[(0, s + 1)] = probe;
        h0[(s + 1, 0)] = probe;
        h0[(s + 1, m + s + 1)] = control;
        h0[(m + s + 1, s + 1)] = control;
    }
    h0
}

/// Inhomogeneous part `h1`: only `δ_σ√N_σ` and `(w_σ − w0)·f` entries.
fn deviation_matrix(config: &SubEnsembleConfig, f: f64) -> DMatrix<f64> {
    let m = config.m();
    let mut h1 = DMatrix::zeros(2 * m + 1, 2 * m + 1);
    for (s, &n) in config.atom_counts.iter().enumerate() {
        let probe = config.deltas[s] * (n as f64).sqrt();
        let control = config.lambdas_weight[s] * f;
        h1[(0, s + 1)] = probe;
        h1[(s + 1, 0)] = probe;
        h1[(s + 1, m + s + 1)] = control;
        h1[(m + s + 1, s + 1)] = control;
    }
    h1
}

/// The `(2m+1)×(2m+1)` single-excitation coupling matrix at envelope value `f`.
///
/// Assembled as `h0 + h1`, so [`split_hamiltonian`] reproduces it bit-exactly.
pub fn hamiltonian_matrix(config: &SubEnsembleConfig, f: f64) -> Result<DMatrix<f64>> {
    check_envelope(f)?;
    Ok(reference_matrix(config, f) + deviation_matrix(config, f))
}

/// Splits the coupling matrix into the homogeneous reference and the
/// inhomogeneous remainder.
pub fn split_hamiltonian(config: &SubEnsembleConfig, f: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_envelope(f)?;
    Ok((reference_matrix(config, f), deviation_matrix(config, f)))
}

/// Bins sampled coupling profiles into `m` equal-length sub-ensembles.
///
/// Atoms are spread uniformly: each bin gets `total_atoms / m`, and the
/// remainder goes one atom per bin from the left. Couplings are the mean of
/// the samples in each bin; a bin that holds no sample takes the linearly
/// interpolated value at its center.
pub fn discretize_profiles(
    g_samples: &[(f64, f64)],
    w_samples: &[(f64, f64)],
    total_atoms: u64,
    m: usize,
) -> Result<SubEnsembleConfig> {
    if m == 0 {
        return Err(domain("bin count must be positive"));
    }
    if total_atoms == 0 {
        return Err(domain("total atom count must be positive"));
    }
    if (total_atoms as u128) < m as u128 {
        return Err(domain(format!("{total_atoms} atoms cannot fill {m} bins")));
    }
    for samples in [g_samples, w_samples] {
        if samples.len() < m {
            return Err(Error::ProfileResolution { samples: samples.len(), bins: m });
        }
        if samples.iter().any(|(z, v)| !z.is_finite() || !v.is_finite()) {
            return Err(domain("profile samples must be finite"));
        }
    }
    let g_sorted = sorted(g_samples);
    let w_sorted = sorted(w_samples);
    let lo = g_sorted[0].0.max(w_sorted[0].0);
    let hi = g_sorted[g_sorted.len() - 1].0.min(w_sorted[w_sorted.len() - 1].0);
    if !(hi >= lo) {
        return Err(domain("probe and control samples do not share a spatial interval"));
    }

    let probe = bin_means(&g_sorted, lo, hi, m)?;
    let control = bin_means(&w_sorted, lo, hi, m)?;

    let base = total_atoms / m as u64;
    let extra = (total_atoms % m as u64) as usize;
    let counts = (0..m).map(|s| base + u64::from(s < extra)).collect();
    SubEnsembleConfig::new(counts, probe, control)
}

fn sorted(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = samples.to_vec();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn bin_means(samples: &[(f64, f64)], lo: f64, hi: f64, m: usize) -> Result<Vec<f64>> {
    let width = (hi - lo) / m as f64;
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for &(z, v) in samples {
        if z < lo || z > hi {
            continue;
        }
        let bin = if width > 0.0 { (((z - lo) / width) as usize).min(m - 1) } else { 0 };
        sums[bin] += v;
        counts[bin] += 1;
    }
    if samples.iter().filter(|(z, _)| *z >= lo && *z <= hi).count() < m {
        return Err(Error::ProfileResolution {
            samples: samples.iter().filter(|(z, _)| *z >= lo && *z <= hi).count(),
            bins: m,
        });
    }
    Ok((0..m)
        .map(|s| {
            if counts[s] > 0 {
                sums[s] / counts[s] as f64
            } else {
                interpolate(samples, lo + (s as f64 + 0.5) * width)
            }
        })
        .collect())
}

fn interpolate(samples: &[(f64, f64)], z: f64) -> f64 {
    let idx = samples.partition_point(|s| s.0 < z);
    if idx == 0 {
        return samples[0].1;
    }
    if idx == samples.len() {
        return samples[idx - 1].1;
    }
    let (z0, v0) = samples[idx - 1];
    let (z1, v1) = samples[idx];
    if z1 == z0 {
        return v0;
    }
    v0 + (v1 - v0) * (z - z0) / (z1 - z0)
}
