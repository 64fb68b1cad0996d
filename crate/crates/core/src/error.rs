use thiserror::Error;

/// Errors raised by the lattice, enumeration and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site {0} is not part of the lattice")]
    SiteOutside(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cost guard `{guard}` exceeded: {detail}")]
    CostGuard { guard: &'static str, detail: String },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("site {site} is imbalanced: out-degree {out}, in-degree {inn}")]
    Imbalanced { site: String, out: u32, inn: u32 },

    #[error("not contained in the graph: {0}")]
    NotContained(String),

    #[error("path touches the ghost site")]
    TouchesGhost,

    #[error("paired graph has no switchable component set")]
    NotSwitchable,

    #[error("empty projection class")]
    EmptyClass,

    #[error("quadrature schemes disagree by {delta:e} (tolerance {tolerance:e})")]
    SchemeDisagreement { delta: f64, tolerance: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
