use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate ({lon}, {lat})")]
    InvalidCoordinate { lon: f64, lat: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    /// Input file violates its schema. `row` is the 1-based line number when known.
    #[error("{}", schema_message(.file, .row, .message))]
    Schema {
        file: String,
        row: Option<u64>,
        message: String,
    },

    #[error("street network has no nodes")]
    EmptyNetwork,

    #[error("run contains no matched segments")]
    EmptyRun,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn schema_message(file: &str, row: &Option<u64>, message: &str) -> String {
    match row {
        Some(row) => format!("{file}, row {row}: {message}"),
        None => format!("{file}: {message}"),
    }
}

impl Error {
    pub(crate) fn schema(file: impl Into<String>, row: Option<u64>, message: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            row,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
