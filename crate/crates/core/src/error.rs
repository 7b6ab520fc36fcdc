use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LseError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LseError {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("constraints Cx = d are inconsistent: constraint residual ||C C^+ d - d|| = {residual:.3e} (||d|| = {d_norm:.3e})")]
    InconsistentConstraints { residual: f64, d_norm: f64 },

    #[error("constraint matrix has rank {rank} < {rows} rows; use the null-space method instead")]
    RankDeficientConstraints { rank: usize, rows: usize },

    #[error("augmented system is singular (pivot {pivot:.3e} at column {column})")]
    SingularSystem { pivot: f64, column: usize },

    #[error("dense fallback refused: dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("null space of C is trivial; pass the pseudoinverse variant to generate anyway")]
    TrivialNullSpace,

    #[error("B^T G B is singular (N(A) and N(C) intersect in dimension {nullity}); pass the pseudoinverse variant")]
    SingularProjectedGram { nullity: usize },

    #[error("{component}: {source}")]
    Component {
        component: &'static str,
        #[source]
        source: Box<LseError>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LseError {
    pub(crate) fn mismatch(context: &'static str, expected: usize, found: usize) -> Self {
        LseError::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn in_component(self, component: &'static str) -> Self {
        LseError::Component {
            component,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping component attribution layers.
    pub fn root(&self) -> &LseError {
        match self {
            LseError::Component { source, .. } => source.root(),
            other => other,
        }
    }
}
