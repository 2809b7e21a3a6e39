use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (bad config, bad argument).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Phantom geometry collapsed or left the grid.
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("singular system: {0}")]
    Singular(String),

    /// A loss or objective became NaN or infinite.
    #[error("divergence: {0}")]
    Divergence(String),

    #[error("format error: {0}")]
    Format(String),

    /// A pipeline stage failed; carries the stage name.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(source),
        }
    }

    /// True for errors caused by the caller's input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Invalid(_) | Error::Shape(_) | Error::Domain(_) | Error::Format(_) | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
