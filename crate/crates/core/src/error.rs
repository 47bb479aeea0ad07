use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in group `{group}` at row {row}, column {column}")]
    NonFinite { group: String, row: usize, column: usize },

    #[error("dimension mismatch ({context}): expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },

    #[error("need at least 2 groups, found {found}")]
    TooFewGroups { found: usize },

    #[error("group `{group}` has {found} observations, at least {required} required")]
    TooFewObservations { group: String, found: usize, required: usize },

    #[error("duplicate group label `{0}`")]
    DuplicateLabel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimated variance {0:e} is not positive; the statistic cannot be standardised")]
    NonPositiveVariance(f64),

    #[error("coordinate {coordinate} has zero within-group variance")]
    SingularScale { coordinate: usize },

    #[error("variance denominator {0:e} is not positive")]
    NegativeDenominator(f64),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("unknown output format `{0}`")]
    UnknownFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for errors meaning the data were valid but the statistic could not
    /// be standardised (a degenerate replication, not a caller mistake).
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::NonPositiveVariance(_) | Error::SingularScale { .. } | Error::NegativeDenominator(_))
    }

    pub(crate) fn too_few(group: &str, found: usize, required: usize) -> Self {
        Error::TooFewObservations { group: group.to_string(), found, required }
    }
}
