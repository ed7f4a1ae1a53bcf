use thiserror::Error;

/// A type alias for `Result<T, Error>`.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the clustering routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The raw input is not a square array.
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        /// Offending row.
        row: usize,
        /// Length of the offending row.
        len: usize,
        /// Expected length (the number of rows).
        expected: usize,
    },

    /// Two mirrored entries differ by more than the symmetrization tolerance.
    #[error("entries ({i},{j}) and ({j},{i}) differ beyond tolerance")]
    AsymmetryBeyondTolerance { i: usize, j: usize },

    /// An off-diagonal entry is negative.
    #[error("negative entry at ({i},{j})")]
    NegativeEntry { i: usize, j: usize },

    /// A diagonal entry is nonzero beyond tolerance.
    #[error("nonzero diagonal entry at ({i},{i})")]
    NonzeroDiagonal { i: usize },

    /// An object index does not address any object.
    #[error("object index {index} out of range for {n} objects")]
    IndexOutOfRange { index: usize, n: usize },

    /// A pair operation was given the same cluster twice.
    #[error("labels p={p} and q={q} must name distinct clusters")]
    SameCluster { p: usize, q: usize },

    /// A cluster label does not address a live cluster.
    #[error("cluster label {label} is not live")]
    DeadLabel { label: usize },

    /// Moving the requested unit would leave its source cluster empty.
    #[error("moving the unit would empty source cluster {label}")]
    WouldEmptySourceCluster { label: usize },

    /// A unit member does not belong to the declared source cluster.
    #[error("object {object} is not a member of source cluster {label}")]
    UnitNotInSource { object: usize, label: usize },

    /// Hierarchical clustering needs at least two objects.
    #[error("need at least two objects, got {n}")]
    TooFewObjects { n: usize },

    /// A requested cluster count is outside the valid range.
    #[error("cluster count {k} out of range for {n} objects")]
    KOutOfRange { k: usize, n: usize },

    /// The reduction factor must lie strictly between 0 and 1.
    #[error("reduction factor must lie in (0, 1), got {alpha}")]
    AlphaOutOfRange { alpha: f64 },

    /// A level view does not refine the partition being refined.
    #[error("unit containing object {object} spans more than one target cluster")]
    ViewDoesNotRefineTarget { object: usize },

    /// The initial partition handed to the k-means iteration is unusable.
    #[error("initial partition has {actual} clusters, expected {expected}")]
    BadInitialPartition { expected: usize, actual: usize },

    /// A cluster label is not used by any object.
    #[error("cluster {label} has no members")]
    EmptyCluster { label: usize },

    /// A scalar parameter is outside its documented range.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: &'static str },

    /// A checked-mode consistency verification failed.
    #[error("consistency check failed: {context}")]
    CheckFailed { context: String },
}
