use num_complex::Complex64 as C64;
use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed drive protocol: {0}")]
    InvalidProtocol(String),

    #[error("state is under-truncated at t = {time}: tail occupation {tail:.3e} exceeds {threshold:.1e}")]
    UnderTruncated { time: f64, tail: f64, threshold: f64 },

    #[error("norm drift {drift:.3e} exceeds tolerance {tolerance:.1e} at t = {time}")]
    NormDrift { time: f64, drift: f64, tolerance: f64 },

    #[error("degenerate point: |g z - f| = {gap:.3e} at z = {z}; eigenfrequencies cross")]
    DegeneratePoint { z: C64, gap: f64 },

    #[error("trajectory entered the degeneracy disk around f/g at t = {time} (z = {z})")]
    NearDegeneracy { time: f64, z: C64 },

    #[error("{quantity} is outside its validity domain: {reason}")]
    DomainViolation { quantity: &'static str, reason: String },

    #[error("overlap never reached the target {target} within the search window")]
    NotAttained { target: f64 },

    #[error("every crossing of the target overlap {target} lies inside the turning-point guard band")]
    GuardBand { target: f64 },

    #[error("infeasible protocol geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("lost track of the Wigner maximum at t = {time}")]
    LostTrack { time: f64 },

    #[error("no spectral peak within {max_bins} bins of {omega}")]
    NoPeak { omega: f64, max_bins: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } | Self::Io(_) | Self::InvalidParameter(_) | Self::InvalidProtocol(_) => 2,
            Self::NotAttained { .. } | Self::GuardBand { .. } | Self::InfeasibleGeometry(_) => 4,
            _ => 3,
        }
    }

    /// Stable variant name for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidParameter(_) => "invalid_parameter",
            Self::InvalidProtocol(_) => "invalid_protocol",
            Self::UnderTruncated { .. } => "under_truncated",
            Self::NormDrift { .. } => "norm_drift",
            Self::DegeneratePoint { .. } => "degenerate_point",
            Self::NearDegeneracy { .. } => "near_degeneracy",
            Self::DomainViolation { .. } => "domain_violation",
            Self::NotAttained { .. } => "not_attained",
            Self::GuardBand { .. } => "guard_band",
            Self::InfeasibleGeometry(_) => "infeasible_geometry",
            Self::LostTrack { .. } => "lost_track",
            Self::NoPeak { .. } => "no_peak",
            Self::Parse { .. } => "parse",
            Self::Config(_) => "config",
            Self::Io(_) => "io",
        }
    }
}
