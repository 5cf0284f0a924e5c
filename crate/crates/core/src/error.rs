use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("LP solver failed: {0}")]
    Solver(String),

    #[error("graph construction failed: {0}")]
    Construction(String),

    #[error("no feasible design: {0}")]
    NoFeasibleDesign(String),

    #[error("malformed design file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
