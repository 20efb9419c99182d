use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("observation does not match model family: {0}")]
    FamilyMismatch(String),

    #[error("linear predictor {value:.3} exceeds the overflow bound of {bound}")]
    Overflow { value: f64, bound: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("ill-conditioned matrix (condition number {condition:.3e}): {context}")]
    IllConditioned { condition: f64, context: String },

    #[error("empirical Fisher information is singular at draw {draw}: {source}")]
    SingularAtDraw {
        draw: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dataset is empty")]
    EmptyData,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("need at least {needed} posterior draws, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("optimizer did not converge after {iterations} iterations (score norm {score_norm:.3e})")]
    NonConvergence { iterations: usize, score_norm: f64 },

    #[error("coefficient estimates diverged (max |beta| = {0:.3e})")]
    Divergence(f64),

    #[error("operation not supported for this model: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerical state of a fit rather than by
    /// malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::NotPositiveDefinite(_)
                | Error::Singular(_)
                | Error::IllConditioned { .. }
                | Error::SingularAtDraw { .. }
                | Error::RankDeficient
                | Error::NonConvergence { .. }
                | Error::Divergence(_)
                | Error::InsufficientDraws { .. }
        )
    }
}
