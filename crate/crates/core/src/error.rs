//! Error type shared across validation, fitting, and estimation.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes surfaced by dataset validation, nuisance fitting, and the
/// estimators. Variants carry enough context to be actionable from the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A required column is absent from the input.
    MissingColumn(String),
    /// Treatment value outside {0, 1}.
    NonBinaryTreatment(String),
    /// A long-term outcome was supplied on an experimental row.
    LongTermOutcomeInExperiment(String),
    /// A domain × arm cell has no rows.
    EmptyArm(String),
    /// Operation requires a nonempty dataset or subset.
    EmptyDataset(String),
    /// A (domain, arm) or finer cell needed for a fit has no rows.
    EmptyCell(String),
    /// Requested regression target is not observed in the requested domain.
    TargetUnavailable(String),
    /// Design matrix is singular and jitter was disabled.
    SingularDesign(String),
    /// Classification fit saw a single class.
    OneClassOnly(String),
    /// A propensity or probability denominator fell below the trim level.
    PositivityViolation(String),
    /// Instrument too weak: a bespoke-instrument denominator fell below the
    /// relevance floor.
    WeakInstrument(String),
    /// Instrument column is not binary on the observational rows.
    ZNotBinary(String),
    /// Proxy/instrument column required but absent.
    NoProxy(String),
    /// Bridge function required by the strategy was not supplied.
    MissingBridge(String),
    /// Nuisance function required by the estimator was not fitted.
    MissingNuisance(String),
    /// Strategy S1 needs a short-term outcome density and none is available.
    UnsupportedContinuousM(String),
    /// Linear system too ill-conditioned to trust after regularization.
    IllConditioned(String),
    /// Discrete density requested with more levels than the configured cap.
    TooManyLevels(String),
    /// A cross-fitting fold is missing a (domain, arm) cell.
    FoldTooSmall(String),
    /// Generator spec is internally inconsistent.
    InvalidSpec(String),
    /// Ground-truth method not available for this generator.
    MethodUnavailable(String),
    /// Requested assumption violation is not supported for this generator.
    UnsupportedViolation(String),
    /// Conditioning event has zero probability in an enumerated world.
    ZeroProbabilityCell(String),
    /// Malformed input that does not fit a more specific variant.
    Validation(String),
}

impl Error {
    /// Short machine-readable tag, stable across messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing-column",
            Error::NonBinaryTreatment(_) => "non-binary-treatment",
            Error::LongTermOutcomeInExperiment(_) => "long-term-outcome-in-experiment",
            Error::EmptyArm(_) => "empty-arm",
            Error::EmptyDataset(_) => "empty-dataset",
            Error::EmptyCell(_) => "empty-cell",
            Error::TargetUnavailable(_) => "target-unavailable",
            Error::SingularDesign(_) => "singular-design",
            Error::OneClassOnly(_) => "one-class-only",
            Error::PositivityViolation(_) => "positivity-violation",
            Error::WeakInstrument(_) => "weak-instrument",
            Error::ZNotBinary(_) => "z-not-binary",
            Error::NoProxy(_) => "no-proxy",
            Error::MissingBridge(_) => "missing-bridge",
            Error::MissingNuisance(_) => "missing-nuisance",
            Error::UnsupportedContinuousM(_) => "unsupported-continuous-m",
            Error::IllConditioned(_) => "ill-conditioned",
            Error::TooManyLevels(_) => "too-many-levels",
            Error::FoldTooSmall(_) => "fold-too-small",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::MethodUnavailable(_) => "method-unavailable",
            Error::UnsupportedViolation(_) => "unsupported-violation",
            Error::ZeroProbabilityCell(_) => "zero-probability-cell",
            Error::Validation(_) => "validation",
        }
    }

    fn message(&self) -> &str {
        match self {
            Error::MissingColumn(m)
            | Error::NonBinaryTreatment(m)
            | Error::LongTermOutcomeInExperiment(m)
            | Error::EmptyArm(m)
            | Error::EmptyDataset(m)
            | Error::EmptyCell(m)
            | Error::TargetUnavailable(m)
            | Error::SingularDesign(m)
            | Error::OneClassOnly(m)
            | Error::PositivityViolation(m)
            | Error::WeakInstrument(m)
            | Error::ZNotBinary(m)
            | Error::NoProxy(m)
            | Error::MissingBridge(m)
            | Error::MissingNuisance(m)
            | Error::UnsupportedContinuousM(m)
            | Error::IllConditioned(m)
            | Error::TooManyLevels(m)
            | Error::FoldTooSmall(m)
            | Error::InvalidSpec(m)
            | Error::MethodUnavailable(m)
            | Error::UnsupportedViolation(m)
            | Error::ZeroProbabilityCell(m)
            | Error::Validation(m) => m,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code(), self.message())
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
