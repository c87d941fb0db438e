use thiserror::Error;

/// Errors produced by the protocol laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its physical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Post-selection removed every event, so no bit error rate exists.
    #[error("no conclusive events: the post-selection probability is zero")]
    NoConclusiveEvents,

    /// Adaptive quadrature exhausted its panel budget before reaching the
    /// requested tolerance.
    #[error(
        "quadrature did not converge: estimated error {error_estimate:.3e} \
         after {panels} panels (requested tolerance {tolerance:.3e})"
    )]
    QuadratureNonConvergence {
        error_estimate: f64,
        tolerance: f64,
        panels: usize,
    },

    /// An empty grid, inverted range, or otherwise unusable configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Too few samples to run a statistical test.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
