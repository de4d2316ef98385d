use std::path::PathBuf;

/// Errors surfaced by the samplers, configuration, and I/O layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A truncation-index search exceeded the hard cap. The finite
    /// representation guarantees a.s.-finite truncation levels, but a
    /// near-degenerate stick realization (lengths close to zero) can make the
    /// tail vanish too slowly to invert in practice.
    #[error("degenerate truncation schedule: no index with xi below threshold within {cap} steps")]
    DegenerateSchedule { cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    DataFormat {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
