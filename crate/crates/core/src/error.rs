use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} is constant and cannot be standardized")]
    ConstantColumn(usize),
    #[error("weighted median of an empty sample")]
    EmptySample,
    #[error("feature {0} is already active in the inner-product cache")]
    AlreadyActive(usize),
    #[error("design matrix is not standardized (column {0})")]
    NotStandardized(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("least-squares fit is rank deficient")]
    RankDeficient,
    #[error("column {0} is identically zero")]
    DegenerateColumn(usize),
    #[error("group {0} is not orthonormal")]
    NonOrthonormalGroup(usize),
    #[error("soft-threshold path requires lambda1_new >= lambda1 ({new} < {current})")]
    InvalidPath { current: f64, new: f64 },
    #[error("did not converge within {limit} sweeps at grid point {index}")]
    NotConverged { index: usize, limit: usize },
    #[error("grid {n1}x{n2} is too small (need at least 3x3)")]
    GridTooSmall { n1: usize, n2: usize },
    #[error("groups {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("reference solver diverged: {0}")]
    Diverged(String),
    #[error("at grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_grid_point(self, index: usize) -> Error {
        match self {
            Error::NotConverged { limit, .. } => Error::NotConverged { index, limit },
            e => Error::AtGridPoint {
                index,
                source: Box::new(e),
            },
        }
    }
}
