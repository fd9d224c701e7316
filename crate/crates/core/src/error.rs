use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the pipeline stages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A byte stream or document does not follow its declared layout.
    #[error("format error in `{field}`: {detail}")]
    Format { field: &'static str, detail: String },

    /// A value violates a type invariant.
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    /// Operand shapes do not agree.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// An index falls outside its container.
    #[error("index out of range in {op}: {detail}")]
    Index { op: &'static str, detail: String },

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {term}{}", step.map(|s| alloc::format!(" at step {s}")).unwrap_or_default())]
    NonFinite { term: String, step: Option<usize> },

    /// Two planes have no intersection line.
    #[error("planes {0} and {1} are parallel")]
    ParallelPlanes(u32, u32),

    /// A pipeline stage failed; `source` is the underlying error.
    #[error("{stage} stage: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    /// The innermost error beneath any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Self::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Wraps `self` with the name of the stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Self::Stage { stage, source: Box::new(self) }
    }

    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Self::Invalid { what, detail: detail.into() }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Self::Shape { op, detail: detail.into() }
    }

    pub(crate) fn format(field: &'static str, detail: impl Into<String>) -> Self {
        Self::Format { field, detail: detail.into() }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
