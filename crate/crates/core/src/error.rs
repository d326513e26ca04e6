use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open database {path}: {message}")]
    DatabaseOpen { path: PathBuf, message: String },

    #[error("database has no user tables")]
    NoUserTables,

    #[error("unknown table: {0}")]
    UnknownTable(String),

    #[error("unknown column: {table}.{column}")]
    UnknownColumn { table: String, column: String },

    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),

    #[error("unbound slot: {0}")]
    UnboundSlot(String),

    #[error("unknown slot: {0}")]
    UnknownSlot(String),

    #[error("no scripted response for {template} (digest {digest:?})")]
    NoScriptedResponse { template: String, digest: String },

    #[error("llm transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("embedding input is empty")]
    EmptyEmbeddingInput,

    #[error("vector dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("extraction parse error at line {line}: {message}")]
    ExtractionParse { line: usize, message: String },

    #[error("could not parse extraction response: {raw:?}")]
    ExtractionFailed { raw: String },

    #[error("no SQL statement in reply: {raw:?}")]
    NoStatement { raw: String },

    #[error("invalid seed pool: {0}")]
    InvalidSeedPool(String),

    #[error("search result is not a unique value")]
    NotUnique,

    #[error("invalid knowledge record: {0}")]
    InvalidKnowledge(String),

    #[error("relation mapping: {0}")]
    RelationMapping(String),

    #[error("unsupported SQL construct: {0}")]
    UnsupportedSql(String),

    #[error("SQL parse error: {0}")]
    SqlParse(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
