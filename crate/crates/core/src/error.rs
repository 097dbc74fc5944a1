use std::fmt;

use crate::volume::MixtureFit;

/// Pipeline stage labels attached to localization failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Crop,
    Features,
    Candidates,
    CoarseSearch,
    Refinement,
    Centerline,
    Endpoints,
    Snake,
    Resampling,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Crop => "crop",
            Stage::Features => "features",
            Stage::Candidates => "candidates",
            Stage::CoarseSearch => "coarse-search",
            Stage::Refinement => "refinement",
            Stage::Centerline => "centerline",
            Stage::Endpoints => "endpoints",
            Stage::Snake => "snake",
            Stage::Resampling => "resampling",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("mixture fit failed: {reason}")]
    MixtureFit { reason: String, fit: MixtureFit },
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("point outside cochlea model: {0}")]
    OutsideModel(String),
    #[error("ESD outside modeled range: {0} mm")]
    EsdOutOfRange(f64),
    #[error("no candidates for ESD {0} mm")]
    NoCandidates(f64),
    #[error("no fixed-length path (beam emptied at node {reached} of {wanted})")]
    NoFixedLengthPath { reached: usize, wanted: usize },
    #[error("no admissible array candidate")]
    NoAdmissibleCandidate,
    #[error("too many medial axes: {count} (cap {cap})")]
    TooManyAxes { count: usize, cap: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => e.at(stage),
        })
    }
}
