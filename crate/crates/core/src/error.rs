use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("expected {expected} {what}, found {found}")]
    Count {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("joint {joint}: invalid limits ({reason})")]
    InvalidLimits { joint: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("regressor is rank deficient ({rank} of {columns}); weak directions: {directions}")]
    RankDeficient {
        rank: usize,
        columns: usize,
        directions: String,
    },

    #[error("covariance lost positive definiteness at update {step} (min diagonal {min_diag:e})")]
    NotPositiveDefinite { step: usize, min_diag: f64 },

    #[error("trajectory infeasible: {0}")]
    Infeasible(String),

    #[error("no feasible candidate within {budget} evaluations")]
    NoFeasibleCandidate { budget: usize },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
