//! Error types shared by every solver stage.

use serde::Serialize;
use thiserror::Error;

use crate::coupling::PicardTrace;

/// One validation problem found in a configuration document.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigViolation {
    /// Dotted path of the offending field, e.g. `grid.nv1`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An angle sum reached the guard band below pi/2 where the inverse
    /// tangent map blows up.
    #[error("blow-up proximity{}: |theta2| + |thetaB| = {angle_sum} >= {limit}", at_x(.x))]
    BlowUpProximity {
        x: Option<f64>,
        angle_sum: f64,
        limit: f64,
    },

    /// Particle velocity met a field characteristic speed.
    #[error(
        "separation violated at x = {x}, v = ({v1}, {v2}): margin {margin} below floor {floor}"
    )]
    SeparationViolation {
        x: f64,
        v1: f64,
        v2: f64,
        margin: f64,
        floor: f64,
    },

    /// Support of f or of the fields reached the edge of the computational grid.
    #[error("domain exit: {0}")]
    DomainExit(String),

    #[error("invalid configuration: {}", join_violations(.0))]
    Config(Vec<ConfigViolation>),

    /// Initial data fail one of the smallness/support assumptions.
    #[error("initial data assumptions failed: {0}")]
    Assumptions(String),

    #[error("Picard iteration did not converge after {iterations} iterations")]
    PicardNonConvergence {
        iterations: usize,
        trace: Box<PicardTrace>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("output encoding error: {0}")]
    Encode(String),
}

fn at_x(x: &Option<f64>) -> String {
    x.map(|x| format!(" at x = {x}")).unwrap_or_default()
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl SimError {
    /// Short machine-readable class name, written to `summary.json`.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Domain(_) => "domain",
            SimError::BlowUpProximity { .. } => "blow_up_proximity",
            SimError::SeparationViolation { .. } => "separation_violation",
            SimError::DomainExit(_) => "domain_exit",
            SimError::Config(_) => "config",
            SimError::Assumptions(_) => "assumptions",
            SimError::PicardNonConvergence { .. } => "picard_non_convergence",
            SimError::Io(_) => "io",
            SimError::Encode(_) => "encode",
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Domain(_) => 2,
            SimError::Assumptions(_) => 3,
            SimError::BlowUpProximity { .. } => 4,
            SimError::SeparationViolation { .. } => 5,
            SimError::DomainExit(_) => 6,
            SimError::PicardNonConvergence { .. } => 7,
            SimError::Io(_) | SimError::Encode(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
