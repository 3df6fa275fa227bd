use std::io;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all engine modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    /// Malformed text input (CSV events, labels, traces), with 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Event coordinates outside the sensor geometry.
    #[error("{context}: coordinate ({x}, {y}) outside sensor geometry {width}x{height}")]
    OutOfBounds {
        context: String,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },

    /// Binary stream does not look like the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// Binary stream ended mid-structure.
    #[error("truncated input at byte offset {offset}: {msg}")]
    Truncated { offset: u64, msg: String },

    /// A label window with t_start >= t_end.
    #[error("invalid label window for class {class}: [{t_start}, {t_end})")]
    InvalidWindow { class: u32, t_start: u64, t_end: u64 },

    #[error("empty trial: {0}")]
    EmptyTrial(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Training loss became non-finite.
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    /// A pipeline stage failed; carries the stage name for reporting.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by unusable input files or arguments
    /// (CLI exit code 2) rather than a failure mid-pipeline (exit code 1).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Parse { .. }
                | Error::OutOfBounds { .. }
                | Error::Format(_)
                | Error::Truncated { .. }
                | Error::Config(_)
        )
    }
}
