use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("query outside the weight's domain: {0}")]
    Domain(String),
    #[error("weight is singular: {0}")]
    Singularity(String),
    #[error("subharmonicity violated at ({x}, {y}): laplacian = {value:e}")]
    Subharmonicity { x: f64, y: f64, value: f64 },
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("domain too large: e^phi overflows at radius {radius}")]
    DomainTooLarge { radius: f64 },
    #[error("monomial degree {degree} too large: its weighted norm is below the floating-point floor")]
    DegreeTooLarge { degree: usize },
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error("conflicting verdicts: {fired:?}")]
    ConflictingVerdicts {
        fired: Vec<String>,
        report: Box<crate::compactness::CompactnessReport>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Consistency(_)
                | Error::ConflictingVerdicts { .. }
                | Error::DomainTooLarge { .. }
                | Error::DegreeTooLarge { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Singularity(_) => "singularity",
            Error::Subharmonicity { .. } => "subharmonicity",
            Error::Resolution(_) => "resolution",
            Error::EmptyRegion(_) => "empty_region",
            Error::Usage(_) => "usage",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DomainTooLarge { .. } => "domain_too_large",
            Error::DegreeTooLarge { .. } => "degree_too_large",
            Error::Consistency(_) => "consistency",
            Error::ConflictingVerdicts { .. } => "conflicting_verdicts",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
