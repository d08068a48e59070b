use thiserror::Error;

/// Errors reported by the analysis and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// `alpha + beta == 0` leaves the chain without a steady state.
    #[error("degenerate channel parameters: alpha + beta must be positive")]
    DegenerateChannel,

    /// A parameter that must be a probability fell outside `[0, 1]`.
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    /// Closed-form pmf evaluation was requested past its stability cutoff.
    #[error("closed-form pmf is unstable for n = {n}; cutoff is {cutoff} (use the dynamic-program pmf instead)")]
    ClosedFormCutoff { n: usize, cutoff: usize },

    /// Closed-form evaluation produced values outside [0, 1] beyond rounding noise.
    #[error("closed-form pmf lost precision at n = {n} (worst deviation {deviation:e})")]
    ClosedFormUnstable { n: usize, deviation: f64 },

    /// System or simulation configuration violated a structural constraint.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An analytical expression was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
