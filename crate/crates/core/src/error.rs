//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while configuring or running a detection.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The sliding windows do not fit: `2A > n`.
    #[error("window too large: 2A = {twice_window} exceeds the series length n = {n}")]
    WindowTooLarge { twice_window: usize, n: usize },

    /// A NaN or infinity was found in the data.
    #[error("non-finite value at position {index} (1-based)")]
    NonFinite { index: usize },

    /// A slope/intercept target was requested on a series without abscissae.
    #[error("target `{target}` requires regression data (x,y pairs or a sampling step)")]
    MissingCovariate { target: &'static str },

    /// Slope estimation needs at least two distinct abscissae per window.
    #[error("degenerate window: A = {window}, slope estimation needs A >= 2")]
    DegenerateWindow { window: usize },

    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Step-2 segment is too short to carry the requested test.
    #[error("segment too short: {len} points where at least {min} are needed")]
    SegmentTooShort { len: usize, min: usize },

    /// A two-sample test cannot be formed because dispersion vanished.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// Zero covariate spread inside a regression segment.
    #[error("degenerate design: zero covariate spread")]
    DegenerateDesign,

    /// Empty input series.
    #[error("empty series")]
    EmptySeries,

    /// A metric that requires matching change-point counts was asked to
    /// compare mismatched segmentations.
    #[error("K mismatch: estimate has {estimated} change points, truth has {truth}")]
    KMismatch { estimated: usize, truth: usize },

    /// The requested segmentation cannot exist (e.g. K_max segments of the
    /// minimal length do not fit in the series).
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    /// Malformed scenario file or inconsistent generator specification.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}
