use std::fmt;

use thiserror::Error;

/// A single violated invariant of a market configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    TooFewFirms(usize),
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    ShareOutOfRange {
        firm: usize,
        value: f64,
    },
    SharesSum(f64),
    NonPositiveSwitchingCost(f64),
    CostOutOfRange {
        firm: usize,
        value: f64,
    },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::TooFewFirms(n) => write!(f, "at least 2 firms required, got {n}"),
            ConfigViolation::LengthMismatch { field, expected, found } => {
                write!(f, "{field} has {found} entries but there are {expected} firms")
            }
            ConfigViolation::ShareOutOfRange { firm, value } => {
                write!(f, "share of firm {firm} is {value}, must lie in (0,1)")
            }
            ConfigViolation::SharesSum(sum) => write!(f, "shares sum to {sum}, must sum to 1"),
            ConfigViolation::NonPositiveSwitchingCost(s) => {
                write!(f, "switching cost must be positive, got {s}")
            }
            ConfigViolation::CostOutOfRange { firm, value } => {
                write!(f, "marginal cost of firm {firm} is {value}, must lie in [0,1)")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("valuation {0} lies outside [0,1]")]
    Domain(f64),

    #[error("invalid distribution parameters: {0}")]
    Distribution(String),

    #[error("invalid market configuration: {}", join(.0))]
    Config(Vec<ConfigViolation>),

    #[error("invalid price profile: {0}")]
    Prices(String),

    #[error("quadrature did not converge (error estimate {residual:e})")]
    Quadrature { residual: f64 },

    #[error("degenerate equilibrium: FOC Jacobian is singular")]
    Degenerate,

    #[error("equilibrium solve failed at s = {s}: {reason}")]
    Resolve { s: f64, reason: String },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join(violations: &[ConfigViolation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
