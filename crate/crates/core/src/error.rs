use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("class index {index} out of range for {num_classes} classes")]
    InvalidClass { index: usize, num_classes: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid linear program: {0}")]
    InvalidProgram(String),
    #[error("nothing to constrain: model has {0} class(es), need at least 2")]
    NothingToConstrain(usize),
    #[error(
        "perturbation LP is infeasible ({rows} rows, {negative_rows} with negative margin); \
         a smoothing noise flipped the linearized prediction, use soft mode"
    )]
    Infeasible { rows: usize, negative_rows: usize },
    #[error("perturbation LP is unbounded")]
    Unbounded,
    #[error("simplex did not terminate within {0} iterations")]
    IterationLimit(usize),
    #[error("input {index}: {source}")]
    AtInput {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
