//! Error type shared by all modules.
//!
//! Two broad classes matter to callers (and set the CLI exit codes):
//! input/structure problems ([`CqedError::Validation`], [`CqedError::Io`],
//! [`CqedError::Parse`], [`CqedError::SingularMatrix`]) versus numerical or
//! physical failures during an otherwise well-formed computation
//! ([`CqedError::Convergence`], [`CqedError::Singularity`],
//! [`CqedError::NotAResonance`], [`CqedError::InvalidFit`]).

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum CqedError {
    /// Malformed or physically inadmissible input (nonpositive element value,
    /// duplicate node, probability out of range, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The capacitance matrix cannot be inverted; `node` names a node with no
    /// capacitive path to ground (or the first node of a degenerate block).
    #[error("singular capacitance matrix: node '{node}' has no capacitive path to ground")]
    SingularMatrix { node: String },

    /// An iterative or truncated computation failed its convergence check.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A closed-form expression was evaluated at a pole (e.g. the dispersive
    /// shift at zero detuning or at the straddling point Δ = −α).
    #[error("singular operating point: {0}")]
    Singularity(String),

    /// The trace handed to the resonance fitter does not contain a usable dip.
    #[error("no resonance found: {0}")]
    NotAResonance(String),

    /// The fit converged to an unphysical result; the message carries the
    /// offending values as diagnostics.
    #[error("invalid fit: {0}")]
    InvalidFit(String),

    /// Filesystem failure, tagged with the path involved.
    #[error("I/O error on '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A structured input file (netlist, config, trace CSV, ...) failed to parse.
    #[error("parse error in '{path}': {message}")]
    Parse { path: String, message: String },
}

impl CqedError {
    /// Helper for I/O errors carrying the path.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CqedError::Io {
            path: path.into(),
            source,
        }
    }

    /// Helper for parse errors carrying the path.
    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        CqedError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CqedError>;
