use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid position: {0}")]
    InvalidPosition(String),
    #[error("aperture undefined for a geometry with {0} element(s)")]
    UndefinedAperture(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),
    #[error("rank deficient least-squares problem: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("ill-conditioned {what}: condition number {cond:.3e}")]
    IllConditioned { what: &'static str, cond: f64 },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("branch infeasible: T = {t} is below the required {required}")]
    InfeasibleBranch { t: usize, required: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSignal(_)
                | Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
                | Error::NonConvergence(_)
        )
    }
}
