//! Figures of merit for the memory: leakage at the end of storage, the ratios
//! of the stored spin-wave amplitudes, round-trip fidelity, and parameter sweeps.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{retrieval_map, storage_map, InputState, PropagationOptions, StoredState};
use crate::error::{domain, Error, Result};
use crate::model::{discretize_profiles, SubEnsembleConfig, C64};
use crate::schedule::{ControlSchedule, Direction};

/// `ξ = 1 − |⟨Ψ0(T)|Ψ(T)⟩|²` between the true and reference stored states.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub xi: f64,
    pub overlap: C64,
    pub m: usize,
    pub total_atoms: u64,
    pub ramp_time: f64,
    pub peak: f64,
    /// `(t, ξ(t))` along the storage ramp, at snapshot times shared by both runs.
    pub xi_trajectory: Vec<(f64, f64)>,
}

/// Clamps rounding excursions of a probability-like quantity into `[0, 1]`.
fn unit_interval(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn leakage_from(stored: &StoredState, config: &SubEnsembleConfig, schedule: &ControlSchedule) -> Result<LeakageReport> {
    let overlap = stored.overlap()?;
    let xi = unit_interval(1.0 - overlap.norm_sqr());

    let mut xi_trajectory = Vec::new();
    let reference = &stored.reference_propagator;
    let mut j = 0;
    for (i, &t) in stored.propagator.times.iter().enumerate() {
        while j < reference.times.len() && reference.times[j] < t - 1e-9 {
            j += 1;
        }
        if j < reference.times.len() && (reference.times[j] - t).abs() <= 1e-9 {
            let u = crate::dynamics::apply_matrix(&stored.propagator.matrices[i], &stored.initial_mode)?;
            let u0 = crate::dynamics::apply_matrix(&reference.matrices[j], &stored.initial_mode)?;
            let ov = stored.input.overlap(&u, &u0)?;
            xi_trajectory.push((t, unit_interval(1.0 - ov.norm_sqr())));
        }
    }
    Ok(LeakageReport {
        xi,
        overlap,
        m: config.m(),
        total_atoms: config.total_atoms(),
        ramp_time: schedule.ramp_time,
        peak: schedule.peak,
        xi_trajectory,
    })
}

/// Leakage at the end of a storage ramp.
pub fn leakage(config: &SubEnsembleConfig, schedule: &ControlSchedule, input: &InputState) -> Result<LeakageReport> {
    leakage_with(config, schedule, input, &PropagationOptions::default())
}

pub fn leakage_with(
    config: &SubEnsembleConfig,
    schedule: &ControlSchedule,
    input: &InputState,
    options: &PropagationOptions,
) -> Result<LeakageReport> {
    let stored = storage_map(config, schedule, input, options)?;
    leakage_from(&stored, config, schedule)
}

/// Leakage predicted from the slow-limit dark modes alone: one minus the
/// squared overlap of the stored directions `y_σ = g_σ√N_σ/w_σ` and `√N_σ`.
pub fn analytic_single_photon_leakage(config: &SubEnsembleConfig) -> f64 {
    let y: Vec<f64> = config.storage_weights();
    let y0: Vec<f64> = config.atom_counts().iter().map(|&n| (n as f64).sqrt()).collect();
    let dot: f64 = y.iter().zip(&y0).map(|(a, b)| a * b).sum();
    let ny: f64 = y.iter().map(|a| a * a).sum::<f64>();
    let n0: f64 = y0.iter().map(|a| a * a).sum::<f64>();
    unit_interval(1.0 - dot * dot / (ny * n0))
}

/// One pair of stored spin-wave amplitudes and the two competing predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioEntry {
    /// Bins compared, counted from 1: the ratio is `ᾱ_k / ᾱ_l`.
    pub k: usize,
    pub l: usize,
    /// `None` when `|ᾱ_l|` is below `1e-9`.
    pub measured: Option<C64>,
    /// `(g_k√N_k/w_k) / (g_l√N_l/w_l)`.
    pub dark_mode_prediction: f64,
    /// `(g_k√N_k / g_l√N_l)·(w_k/w_l)`.
    pub text_prediction: f64,
    pub deviation_from_dark_mode: Option<f64>,
    pub deviation_from_text: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub entries: Vec<RatioEntry>,
    /// Ratio expected for the reference storage, `√(N_k/N_l)`.
    pub reference_ratios: Vec<f64>,
}

/// Measured ratios of the stored `C`-amplitudes against bin 1, with both the
/// dark-mode prediction and the alternative `Ω_k/Ω_l` ordering.
pub fn stored_ratios(config: &SubEnsembleConfig, schedule: &ControlSchedule) -> Result<RatioReport> {
    if schedule.direction != Direction::Storage {
        return Err(domain("stored ratios need a storage schedule"));
    }
    if schedule.ramp_time < 100.0 {
        return Err(domain(format!(
            "stored ratios need a slow ramp (T ≥ 100), got T = {}",
            schedule.ramp_time
        )));
    }
    let stored = storage_map(config, schedule, &InputState::single_photon(), &PropagationOptions::default())?;
    let g = config.collective_couplings();
    let w = config.control_weights();
    let n = config.atom_counts();
    let l = 1;
    let mut entries = Vec::new();
    let mut reference_ratios = Vec::new();
    for k in 2..=config.m() {
        let denom = stored.mode.c_amplitude(l);
        let measured = (denom.norm() >= 1e-9).then(|| stored.mode.c_amplitude(k) / denom);
        let dark = (g[k - 1] / w[k - 1]) / (g[l - 1] / w[l - 1]);
        let text = (g[k - 1] / g[l - 1]) * (w[k - 1] / w[l - 1]);
        let rel = |p: f64| measured.map(|r| (r - p).norm() / p.abs());
        entries.push(RatioEntry {
            k,
            l,
            measured,
            dark_mode_prediction: dark,
            text_prediction: text,
            deviation_from_dark_mode: rel(dark),
            deviation_from_text: rel(text),
        });
        reference_ratios.push((n[k - 1] as f64 / n[l - 1] as f64).sqrt());
    }
    Ok(RatioReport { entries, reference_ratios })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    /// `|⟨Ψ(0)|Ψ(final)⟩|²`.
    pub fidelity: f64,
    pub infidelity: f64,
    /// Leakage at the end of the storage leg of the same run.
    pub midpoint: LeakageReport,
    /// Final weight in the bare photon mode (single excitation).
    pub photon_weight: f64,
    /// Final weight in the dark polariton at the final control value.
    pub dark_weight: f64,
}

/// Stores, holds for `hold`, and retrieves; compares the released state with
/// the input state.
pub fn roundtrip_fidelity(
    config: &SubEnsembleConfig,
    storage: &ControlSchedule,
    hold: f64,
    retrieval: &ControlSchedule,
    input: &InputState,
) -> Result<RoundtripReport> {
    roundtrip_fidelity_with(config, storage, hold, retrieval, input, &PropagationOptions::default())
}

pub fn roundtrip_fidelity_with(
    config: &SubEnsembleConfig,
    storage: &ControlSchedule,
    hold: f64,
    retrieval: &ControlSchedule,
    input: &InputState,
    options: &PropagationOptions,
) -> Result<RoundtripReport> {
    let stored = storage_map(config, storage, input, options)?;
    let midpoint = leakage_from(&stored, config, storage)?;
    let released = retrieval_map(config, retrieval, &stored.mode, hold, options)?;
    let overlap = input.overlap(&released.mode, &stored.initial_mode)?;
    let fidelity = unit_interval(overlap.norm_sqr());
    Ok(RoundtripReport {
        fidelity,
        infidelity: 1.0 - fidelity,
        midpoint,
        photon_weight: released.photon_weight,
        dark_weight: released.dark_weight,
    })
}

/// Round trip with mirrored storage and retrieval legs taken from `schedule`.
pub fn roundtrip_from_schedule(
    config: &SubEnsembleConfig,
    schedule: &ControlSchedule,
    input: &InputState,
) -> Result<RoundtripReport> {
    roundtrip_fidelity(config, &schedule.storage_leg(), schedule.hold, &schedule.retrieval_leg(), input)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Probe couplings `g_σ = g0·(1 + s·x_σ)` for a fixed zero-mean linear shape `x`.
    Inhomogeneity,
    /// Number of bins used to discretize a fixed continuous profile.
    SubEnsembles,
    RampTime,
    PhotonNumber,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Inhomogeneity => "inhomogeneity",
            SweepAxis::SubEnsembles => "m",
            SweepAxis::RampTime => "ramp-time",
            SweepAxis::PhotonNumber => "photon-number",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inhomogeneity" | "s" => Ok(SweepAxis::Inhomogeneity),
            "m" | "sub-ensembles" => Ok(SweepAxis::SubEnsembles),
            "ramp-time" | "T" => Ok(SweepAxis::RampTime),
            "photon-number" | "n" => Ok(SweepAxis::PhotonNumber),
            other => Err(domain(format!(
                "unknown sweep axis `{other}` (expected inhomogeneity, m, ramp-time or photon-number)"
            ))),
        }
    }
}

/// Sampled continuous coupling profiles over a common interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub probe: Vec<(f64, f64)>,
    pub control: Vec<(f64, f64)>,
    pub total_atoms: u64,
}

impl Profile {
    /// Piecewise-linear profile through the bin centers of `config` on `[0, 1]`.
    pub fn from_config(config: &SubEnsembleConfig) -> Self {
        let m = config.m();
        let centers = (0..m).map(|s| (s as f64 + 0.5) / m as f64);
        let mut probe: Vec<(f64, f64)> = centers.clone().zip(config.probe_couplings().iter().copied()).collect();
        let mut control: Vec<(f64, f64)> = centers.zip(config.control_weights().iter().copied()).collect();
        for samples in [&mut probe, &mut control] {
            let first = samples[0].1;
            let last = samples[samples.len() - 1].1;
            samples.insert(0, (0.0, first));
            samples.push((1.0, last));
        }
        Self { probe, control, total_atoms: config.total_atoms() }
    }

    /// Resamples densely enough for any bin count up to `m`, then bins.
    pub fn discretize(&self, m: usize) -> Result<SubEnsembleConfig> {
        let dense = |samples: &[(f64, f64)]| -> Vec<(f64, f64)> {
            let lo = samples.first().map_or(0.0, |s| s.0);
            let hi = samples.last().map_or(1.0, |s| s.0);
            let count = (64 * m).max(samples.len());
            (0..count)
                .map(|i| {
                    let z = lo + (hi - lo) * (i as f64 + 0.5) / count as f64;
                    (z, interpolate(samples, z))
                })
                .collect()
        };
        discretize_profiles(&dense(&self.probe), &dense(&self.control), self.total_atoms, m)
    }
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
        v0
    } else {
        v0 + (v1 - v0) * (z - z0) / (z1 - z0)
    }
}

/// Zero-mean linear inhomogeneity shape with `max |x_σ| = 1`.
pub fn linear_shape(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    (0..m).map(|s| 2.0 * s as f64 / (m - 1) as f64 - 1.0).collect()
}

/// Everything a sweep varies around.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub config: SubEnsembleConfig,
    /// Continuous profile for the `m` axis; defaults to [`Profile::from_config`].
    pub profile: Option<Profile>,
    pub schedule: ControlSchedule,
    pub input: InputState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub leakage: LeakageReport,
    pub roundtrip_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Fixed-width scientific format with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

impl SweepTable {
    pub fn xi(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.leakage.xi).collect()
    }

    pub fn infidelity(&self) -> Vec<f64> {
        self.rows.iter().map(|r| 1.0 - r.roundtrip_fidelity).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},xi,overlap_re,overlap_im,roundtrip_fidelity,roundtrip_infidelity\n",
            self.axis.name()
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt12(r.value),
                fmt12(r.leakage.xi),
                fmt12(r.leakage.overlap.re),
                fmt12(r.leakage.overlap.im),
                fmt12(r.roundtrip_fidelity),
                fmt12(1.0 - r.roundtrip_fidelity)
            );
        }
        out
    }
}

/// Whether `values` never decreases (`slack` absorbs rounding).
pub fn is_nondecreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - slack)
}

pub fn is_nonincreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn point(template: &SweepTemplate, axis: SweepAxis, value: f64) -> Result<(SubEnsembleConfig, ControlSchedule, InputState)> {
    let mut config = template.config.clone();
    let mut schedule = template.schedule.storage_leg();
    let mut input = template.input.clone();
    match axis {
        SweepAxis::Inhomogeneity => {
            let x = linear_shape(config.m());
            let g0 = config.g0();
            let probe: Vec<f64> = x.iter().map(|xs| g0 * (1.0 + value * xs)).collect();
            if probe.iter().any(|&g| g < 0.0) {
                return Err(domain(format!("inhomogeneity {value} drives a probe coupling negative")));
            }
            config = SubEnsembleConfig::with_reference(
                config.atom_counts().to_vec(),
                probe,
                config.control_weights().to_vec(),
                g0,
                config.omega0_weight(),
            )?;
        }
        SweepAxis::SubEnsembles => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(domain(format!("bin count must be a positive integer, got {value}")));
            }
            let profile = template.profile.clone().unwrap_or_else(|| Profile::from_config(&template.config));
            config = profile.discretize(value as usize)?;
        }
        SweepAxis::RampTime => {
            schedule.ramp_time = value;
            schedule.validate()?;
        }
        SweepAxis::PhotonNumber => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(domain(format!("photon number must be a nonnegative integer, got {value}")));
            }
            input = InputState::photons(value as usize).with_mode(template.input.mode);
        }
    }
    Ok((config, schedule, input))
}

/// Evaluates leakage and round-trip fidelity at every grid value. Points run
/// in parallel; rows keep the grid order.
pub fn sweep(template: &SweepTemplate, axis: SweepAxis, grid: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(domain("sweep grid is empty"));
    }
    let rows = grid
        .par_iter()
        .map(|&value| {
            let (config, schedule, input) = point(template, axis, value)?;
            let report =
                roundtrip_fidelity(&config, &schedule, template.schedule.hold, &schedule.retrieval_leg(), &input)?;
            Ok(SweepRow { value, leakage: report.midpoint, roundtrip_fidelity: report.fidelity })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { axis, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inhomogeneous() -> SubEnsembleConfig {
        SubEnsembleConfig::from_collective(vec![500, 500], &[1.0, 1.2], vec![1.0, 1.0])
            .unwrap()
            .with_unit_convention()
            .unwrap()
    }

    #[test]
    fn analytic_leakage_matches_hand_value() {
        // 1 − [(1 + 1.2)/(√2·√2.44)]²
        let expected = 1.0 - (2.2f64 / (2.0f64.sqrt() * 2.44f64.sqrt())).powi(2);
        assert!((analytic_single_photon_leakage(&inhomogeneous()) - expected).abs() < 1e-15);
        assert!((expected - 8.21e-3).abs() < 3e-5);
    }

    #[test]
    fn homogeneous_leakage_vanishes() {
        let cfg = SubEnsembleConfig::homogeneous(vec![300, 700], 0.03, 1.0).unwrap();
        let sched = ControlSchedule::storage(50.0, 20.0).unwrap();
        let report = leakage(&cfg, &sched, &InputState::single_photon()).unwrap();
        assert_eq!(report.xi, 0.0);
    }

    #[test]
    fn fock_leakage_grows_with_photon_number() {
        let cfg = inhomogeneous();
        let sched = ControlSchedule::storage(100.0, 20.0).unwrap();
        let xi: Vec<f64> = (1..=3)
            .map(|n| leakage(&cfg, &sched, &InputState::photons(n)).unwrap().xi)
            .collect();
        let s = leakage(&cfg, &sched, &InputState::single_photon()).unwrap().overlap;
        for (n, x) in xi.iter().enumerate() {
            let closed = 1.0 - s.norm_sqr().powi(n as i32 + 1);
            assert!((x - closed).abs() < 1e-12);
        }
        assert!(xi[0] < xi[1] && xi[1] < xi[2]);
    }

    #[test]
    fn xi_trajectory_ends_at_report_value() {
        let cfg = inhomogeneous();
        let sched = ControlSchedule::storage(100.0, 20.0).unwrap();
        let report = leakage(&cfg, &sched, &InputState::single_photon()).unwrap();
        let last = report.xi_trajectory.last().unwrap();
        assert_eq!(last.0, 100.0);
        assert!((last.1 - report.xi).abs() < 1e-15);
        assert!(report.xi_trajectory[0].1.abs() < 1e-15);
    }

    #[test]
    fn ratios_need_slow_ramp() {
        let sched = ControlSchedule::storage(20.0, 20.0).unwrap();
        assert!(stored_ratios(&inhomogeneous(), &sched).is_err());
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("ramp-time".parse::<SweepAxis>().unwrap(), SweepAxis::RampTime);
        assert!("detuning".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn shape_is_zero_mean() {
        for m in 1..6 {
            let x = linear_shape(m);
            assert!(x.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn profile_round_trips_bins() {
        let cfg = SubEnsembleConfig::new(vec![50, 50], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let back = Profile::from_config(&cfg).discretize(2).unwrap();
        assert_eq!(back.atom_counts(), &[50, 50]);
        assert!((back.probe_couplings()[0] - 1.125).abs() < 1e-3);
    }

    #[test]
    fn csv_layout() {
        let cfg = SubEnsembleConfig::homogeneous(vec![10], 0.3, 1.0).unwrap();
        let template = SweepTemplate {
            config: cfg,
            profile: None,
            schedule: ControlSchedule::storage(10.0, 5.0).unwrap(),
            input: InputState::single_photon(),
        };
        let table = sweep(&template, SweepAxis::PhotonNumber, &[1.0, 2.0]).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "photon-number,xi,overlap_re,overlap_im,roundtrip_fidelity,roundtrip_infidelity");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1.00000000000e0,0.00000000000e0,"));
        assert!(sweep(&template, SweepAxis::PhotonNumber, &[]).is_err());
        assert!(sweep(&template, SweepAxis::PhotonNumber, &[1.5]).is_err());
    }
}
