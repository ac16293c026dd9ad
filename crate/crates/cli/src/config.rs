//! Run configuration documents (TOML) and their validation.

use std::path::PathBuf;

use serde::Deserialize;

use eit_memory::analysis::{Profile, SweepAxis, SweepTemplate};
use eit_memory::dynamics::{InputMode, InputState, PropagationOptions};
use eit_memory::model::{discretize_profiles, SubEnsembleConfig, C64};
use eit_memory::oracle::ExactRegister;
use eit_memory::propagate::Integrator;
use eit_memory::schedule::{ControlSchedule, Direction, Shape};

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemSection>,
    pub schedule: Option<ScheduleSection>,
    pub input: Option<InputSection>,
    pub propagation: Option<PropagationSection>,
    pub sweep: Option<SweepSection>,
    pub oracle: Option<OracleSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub atom_counts: Option<Vec<u64>>,
    /// Per-atom couplings `g_σ`.
    pub probe_couplings: Option<Vec<f64>>,
    /// Collective couplings `g_σ√N_σ`; exclusive with `probe_couplings`.
    pub collective_couplings: Option<Vec<f64>>,
    pub control_weights: Option<Vec<f64>>,
    pub g0: Option<f64>,
    pub omega0_weight: Option<f64>,
    #[serde(default = "yes")]
    pub unit_convention: bool,
    pub profile: Option<ProfileSection>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// `[position, g]` samples.
    pub probe: Vec<[f64; 2]>,
    /// `[position, w]` samples.
    pub control: Vec<[f64; 2]>,
    pub total_atoms: u64,
    pub bins: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub ramp_time: f64,
    #[serde(default = "default_peak")]
    pub peak: f64,
    #[serde(default)]
    pub shape: Shape,
    #[serde(default)]
    pub hold: f64,
}

fn default_peak() -> f64 {
    20.0
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    #[default]
    Fock,
    Coherent,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    #[serde(default)]
    pub kind: InputKind,
    /// Photon number of a Fock input; exclusive with `coefficients`.
    pub photons: Option<usize>,
    /// `[re, im]` amplitudes of `|0⟩, |1⟩, …`.
    pub coefficients: Option<Vec<[f64; 2]>>,
    pub alpha: Option<[f64; 2]>,
    #[serde(default)]
    pub mode: InputMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    pub integrator: Option<Integrator>,
    pub unitarity_tolerance: Option<f64>,
    pub convergence_tolerance: Option<f64>,
    pub max_steps: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<String>,
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub atom_counts: Vec<usize>,
    #[serde(default = "one_group")]
    pub groups: Vec<usize>,
    #[serde(default = "one")]
    pub photons: usize,
    /// `[position, g√N]` samples on `[0, 1]`; atoms sit at cell midpoints.
    #[serde(default = "flat")]
    pub probe_profile: Vec<[f64; 2]>,
    #[serde(default = "flat")]
    pub control_profile: Vec<[f64; 2]>,
}

fn one_group() -> Vec<usize> {
    vec![1]
}

fn one() -> usize {
    1
}

fn flat() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [1.0, 1.0]]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// A schema or validation problem, with the line it refers to when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the `[name]` header, for errors found after parsing.
fn section_line(text: &str, name: &str) -> Option<usize> {
    let header = format!("[{name}]");
    text.lines().position(|l| l.trim() == header).map(|i| i + 1)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })
}

/// Fully validated inputs for the commands.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: Option<SubEnsembleConfig>,
    pub profile: Option<Profile>,
    pub schedule: ControlSchedule,
    pub input: InputState,
    pub options: PropagationOptions,
    pub sweep_axis: Option<String>,
    pub sweep_grid: Option<Vec<f64>>,
    pub oracle: Option<OracleSection>,
    pub output: Option<PathBuf>,
}

impl Resolved {
    pub fn template(&self) -> Option<SweepTemplate> {
        Some(SweepTemplate {
            config: self.config.clone()?,
            profile: self.profile.clone(),
            schedule: self.schedule,
            input: self.input.clone(),
        })
    }
}

pub fn load(text: &str) -> Result<Resolved, ConfigError> {
    let raw = parse(text)?;
    let at = |section: &'static str| {
        let line = section_line(text, section);
        move |e: eit_memory::Error| ConfigError { line, message: format!("[{section}] {e}") }
    };

    let (config, profile) = match &raw.system {
        Some(system) => {
            let (c, p) = build_system(system).map_err(at("system"))?;
            (Some(c), p)
        }
        None => (None, None),
    };

    let schedule = match &raw.schedule {
        Some(s) => {
            let mut sched = ControlSchedule::new(Direction::Roundtrip, s.ramp_time, s.peak).map_err(at("schedule"))?;
            sched.shape = s.shape;
            sched.hold = s.hold;
            sched.validate().map_err(at("schedule"))?;
            sched
        }
        None => ControlSchedule::roundtrip(200.0, default_peak(), 0.0).map_err(at("schedule"))?,
    };

    let input = match &raw.input {
        Some(i) => build_input(i).map_err(at("input"))?,
        None => InputState::single_photon(),
    };

    let mut options = PropagationOptions::default();
    if let Some(p) = &raw.propagation {
        options.integrator = p.integrator.unwrap_or(options.integrator);
        options.unitarity_tolerance = p.unitarity_tolerance.unwrap_or(options.unitarity_tolerance);
        options.convergence_tolerance = p.convergence_tolerance.unwrap_or(options.convergence_tolerance);
        options.max_steps = p.max_steps.unwrap_or(options.max_steps);
        options.samples = p.samples.unwrap_or(options.samples);
        if !(options.unitarity_tolerance > 0.0) || !(options.convergence_tolerance > 0.0) || options.samples == 0 {
            return Err(ConfigError {
                line: section_line(text, "propagation"),
                message: "[propagation] tolerances and samples must be positive".into(),
            });
        }
    }

    if let Some(o) = &raw.oracle {
        validate_oracle(o).map_err(|message| ConfigError { line: section_line(text, "oracle"), message })?;
    }

    let (sweep_axis, sweep_grid) = match raw.sweep {
        Some(s) => (s.axis, s.grid),
        None => (None, None),
    };

    Ok(Resolved {
        config,
        profile,
        schedule,
        input,
        options,
        sweep_axis,
        sweep_grid,
        oracle: raw.oracle,
        output: raw.output.and_then(|o| o.dir),
    })
}

fn build_system(s: &SystemSection) -> eit_memory::Result<(SubEnsembleConfig, Option<Profile>)> {
    let config_error = |msg: &str| eit_memory::Error::Config(msg.to_string());
    if let Some(p) = &s.profile {
        if s.atom_counts.is_some() || s.probe_couplings.is_some() || s.collective_couplings.is_some() {
            return Err(config_error("give either a profile or explicit bins, not both"));
        }
        let probe: Vec<(f64, f64)> = p.probe.iter().map(|s| (s[0], s[1])).collect();
        let control: Vec<(f64, f64)> = p.control.iter().map(|s| (s[0], s[1])).collect();
        let mut config = discretize_profiles(&probe, &control, p.total_atoms, p.bins)?;
        if s.unit_convention {
            config = config.with_unit_convention()?;
        }
        let profile = Profile { probe, control, total_atoms: p.total_atoms };
        return Ok((config, Some(profile)));
    }
    let counts = s.atom_counts.clone().ok_or_else(|| config_error("missing atom_counts"))?;
    let m = counts.len();
    let weights = s.control_weights.clone().unwrap_or_else(|| vec![1.0; m]);
    let probe = match (&s.probe_couplings, &s.collective_couplings) {
        (Some(_), Some(_)) => return Err(config_error("probe_couplings and collective_couplings are exclusive")),
        (Some(g), None) => g.clone(),
        (None, Some(c)) => {
            if c.len() != m {
                return Err(config_error("collective_couplings and atom_counts differ in length"));
            }
            counts.iter().zip(c).map(|(&n, &c)| c / (n as f64).sqrt()).collect()
        }
        (None, None) => return Err(config_error("missing probe_couplings or collective_couplings")),
    };
    let config = match (s.g0, s.omega0_weight) {
        (None, None) => SubEnsembleConfig::new(counts, probe, weights)?,
        (g0, w0) => {
            let base = SubEnsembleConfig::new(counts.clone(), probe.clone(), weights.clone())?;
            SubEnsembleConfig::with_reference(
                counts,
                probe,
                weights,
                g0.unwrap_or(base.g0()),
                w0.unwrap_or(base.omega0_weight()),
            )?
        }
    };
    let config = if s.unit_convention { config.with_unit_convention()? } else { config };
    Ok((config, None))
}

fn build_input(i: &InputSection) -> eit_memory::Result<InputState> {
    let config_error = |msg: &str| eit_memory::Error::Config(msg.to_string());
    let state = match i.kind {
        InputKind::Fock => {
            if i.alpha.is_some() {
                return Err(config_error("alpha belongs to a coherent input"));
            }
            match (i.photons, &i.coefficients) {
                (Some(_), Some(_)) => return Err(config_error("photons and coefficients are exclusive")),
                (Some(n), None) => InputState::photons(n),
                (None, Some(c)) => InputState::fock(c.iter().map(|z| C64::new(z[0], z[1])).collect())?,
                (None, None) => InputState::single_photon(),
            }
        }
        InputKind::Coherent => {
            if i.photons.is_some() || i.coefficients.is_some() {
                return Err(config_error("photons and coefficients belong to a Fock input"));
            }
            let a = i.alpha.ok_or_else(|| config_error("coherent input needs alpha"))?;
            InputState::coherent(C64::new(a[0], a[1]))?
        }
    };
    Ok(state.with_mode(i.mode))
}

fn validate_oracle(o: &OracleSection) -> Result<(), String> {
    if o.atom_counts.is_empty() || o.groups.is_empty() {
        return Err("[oracle] atom_counts and groups must be nonempty".into());
    }
    if o.atom_counts.contains(&0) || o.groups.contains(&0) {
        return Err("[oracle] atom counts and group counts must be positive".into());
    }
    if o.photons == 0 {
        return Err("[oracle] photons must be positive".into());
    }
    for profile in [&o.probe_profile, &o.control_profile] {
        if profile.is_empty() || profile.iter().flatten().any(|x| !x.is_finite()) {
            return Err("[oracle] profiles need finite samples".into());
        }
        if profile.iter().any(|s| s[1] < 0.0) {
            return Err("[oracle] profile values must be nonnegative".into());
        }
    }
    Ok(())
}

fn interpolate(samples: &[[f64; 2]], z: f64) -> f64 {
    let idx = samples.partition_point(|s| s[0] < z);
    if idx == 0 {
        return samples[0][1];
    }
    if idx == samples.len() {
        return samples[idx - 1][1];
    }
    let [z0, v0] = samples[idx - 1];
    let [z1, v1] = samples[idx];
    if z1 == z0 {
        v0
    } else {
        v0 + (v1 - v0) * (z - z0) / (z1 - z0)
    }
}

/// Register of `atoms` atoms sampled from the oracle profiles.
pub fn oracle_register(o: &OracleSection, atoms: usize) -> eit_memory::Result<ExactRegister> {
    let z = |j: usize| (j as f64 + 0.5) / atoms as f64;
    let g = (0..atoms).map(|j| interpolate(&o.probe_profile, z(j)) / (atoms as f64).sqrt()).collect();
    let w = (0..atoms).map(|j| interpolate(&o.control_profile, z(j))).collect();
    ExactRegister::with_phases(g, w, vec![0.0; atoms], o.photons, o.photons)
}

/// Parses a comma-separated grid such as `25,50,100`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("grid value {s:?} is not a number")))
        .collect()
}

pub fn parse_axis(name: &str) -> Result<SweepAxis, String> {
    name.parse::<SweepAxis>().map_err(|e| e.to_string())
}
