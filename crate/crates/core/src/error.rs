use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("advice is infeasible at offline vertex {vertex}: total {total}")]
    InfeasibleAdvice { vertex: usize, total: f64 },

    #[error("arrival {arrival}: advice must be integral (a single vertex with value 1)")]
    FractionalAdvice { arrival: usize },

    #[error("this algorithm requires an unweighted instance")]
    Weighted,

    #[error("lp: {0}")]
    Lp(String),

    #[error("lp is infeasible")]
    LpInfeasible,

    #[error("lp is unbounded")]
    LpUnbounded,

    #[error("n = {n} exceeds the embedded solver cap {cap}; export the LP instead")]
    TooLarge { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
