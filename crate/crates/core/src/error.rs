use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate country code `{0}`")]
    DuplicateCountry(String),

    #[error("country `{code}` has non-positive GDP {gdp}")]
    NonPositiveGdp { code: String, gdp: String },

    #[error("country `{0}` has an empty continent tag")]
    EmptyContinent(String),

    #[error("self-loop trade link on `{0}`")]
    SelfLoop(String),

    #[error("duplicate trade link {0} -> {1}")]
    DuplicateLink(String, String),

    #[error("trade link {exporter} -> {importer} has non-positive volume {volume}")]
    NonPositiveVolume {
        exporter: String,
        importer: String,
        volume: String,
    },

    #[error("trade link {exporter} -> {importer} references unknown country `{code}`")]
    UnknownEndpoint {
        exporter: String,
        importer: String,
        code: String,
    },

    #[error("capacity mode gdp-cab requires CAB for: {}", .0.join(", "))]
    MissingCab(Vec<String>),

    #[error("unknown country `{0}`")]
    UnknownCountry(String),

    #[error("invalid cascade parameters: {0}")]
    InvalidParams(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("not enough points for a tail fit: need 3, found {0}")]
    InsufficientPoints(usize),

    #[error("constant input vector: rank correlation undefined")]
    ConstantVector,

    #[error("randomization failed: {0}")]
    Randomization(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
