use thiserror::Error;

#[derive(Debug, Error)]
pub enum CloakError {
    #[error("invalid minimal model: {0}")]
    InvalidModel(String),
    #[error("label ({r},{s}) out of range for M({p},{q})")]
    LabelOutOfRange { r: u32, s: u32, p: u32, q: u32 },
    #[error("label set is not closed under fusion: {0} x {1} contains {2}")]
    NotFusionClosed(String, String, String),
    #[error("level {level} exceeds the configured bound {max}")]
    LevelOverflow { level: usize, max: usize },
    #[error("Gram rank {found} at level {level} does not match the expected {expected}")]
    GramRank {
        level: usize,
        found: usize,
        expected: usize,
    },
    #[error("F-symbol consistency failure: {0}")]
    FSymbol(String),
    #[error("insufficient series coefficients: need {need}, have {have}")]
    SeriesTooShort { need: usize, have: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("size overflow: {0}")]
    SizeOverflow(String),
    #[error("configuration error in `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CloakError>;

impl CloakError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 4 for size overflows.
    pub fn exit_code(&self) -> i32 {
        match self {
            CloakError::InvalidModel(_)
            | CloakError::LabelOutOfRange { .. }
            | CloakError::NotFusionClosed(..)
            | CloakError::Config { .. }
            | CloakError::Unsupported(_)
            | CloakError::Io(_) => 2,
            CloakError::GramRank { .. }
            | CloakError::FSymbol(_)
            | CloakError::SeriesTooShort { .. }
            | CloakError::Numerical(_) => 3,
            CloakError::LevelOverflow { .. } | CloakError::SizeOverflow(_) => 4,
        }
    }
}
