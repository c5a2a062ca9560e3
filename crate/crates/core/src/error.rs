use thiserror::Error;

use crate::transmission::AmbivalenceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("genome length {0} out of range (1..={max})", max = crate::space::MAX_GENOME_LENGTH)]
    GenomeLength(u32),

    #[error("schema order {order} out of range for genome length {length}")]
    SchemaOrder { order: usize, length: u32 },

    #[error("locus {locus} is out of range for genome length {length}")]
    LocusOutOfRange { locus: u32, length: u32 },

    #[error("locus {locus} is duplicated or out of order (loci must be strictly increasing)")]
    LocusOrder { locus: u32 },

    #[error("theme {theme} out of range (theme count {count})")]
    ThemeOutOfRange { theme: usize, count: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid fitness: {0}")]
    InvalidFitness(String),

    #[error("expected fitness is zero; selection undefined")]
    ZeroExpectation,

    #[error("transmission arity is {expected} but {found} parents were given")]
    ArityMismatch { expected: usize, found: usize },

    #[error("invalid transmission: {0}")]
    InvalidTransmission(String),

    #[error("{what} is infeasible at this size ({detail})")]
    Infeasible { what: &'static str, detail: String },

    #[error("unsupported transmission kind for the fast path: {0}; use naive variation")]
    UnsupportedKind(String),

    #[error("transmission is not ambivalent under the partitioning (max deviation {:.3e})", .0.max_deviation)]
    NotAmbivalent(Box<AmbivalenceReport>),

    #[error("invalid configuration: {0}")]
    Config(String),
}
