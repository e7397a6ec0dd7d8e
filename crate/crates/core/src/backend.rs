use alloc::string::String;
use alloc::vec::Vec;

/// Failure reported by a translation or scoring backend.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// The backend rejected the request as malformed. Retrying will not help.
    #[error("backend rejected batch as malformed: {0}")]
    Rejected(String),
    /// Retries were exhausted without a successful response.
    #[error("backend unavailable after {attempts} attempts: {message}")]
    Exhausted { attempts: u32, message: String },
    /// The backend answered, but the answer does not line up with the request.
    #[error("backend response mismatch: {0}")]
    Protocol(String),
}

impl BackendError {
    /// Whether the error must stop the whole run rather than one batch.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, BackendError::Exhausted { .. })
    }
}

/// Split `len` items into consecutive ranges of at most `size`.
pub(crate) fn batch_ranges(len: usize, size: usize) -> Vec<core::ops::Range<usize>> {
    let size = size.max(1);
    (0..len)
        .step_by(size)
        .map(|start| start..(start + size).min(len))
        .collect()
}
