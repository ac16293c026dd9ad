use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("profile resolution below bin count: {samples} samples for {bins} bins")]
    ProfileResolution { samples: usize, bins: usize },

    #[error("degenerate: no coupling (all probe couplings vanish and the control is off)")]
    Degenerate,

    #[error("propagation not converged after {steps} steps (unitarity defect {defect:e}, last change {change:e})")]
    NotConverged { steps: usize, defect: f64, change: f64 },

    #[error(
        "dimension over budget: {atoms} atoms with excitation cap {excitations} give {dimension} states \
         (limits: {atom_limit} atoms, {state_limit} states)"
    )]
    DimensionOverBudget {
        atoms: usize,
        excitations: usize,
        dimension: u128,
        atom_limit: usize,
        state_limit: usize,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
