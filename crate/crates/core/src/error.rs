use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("degenerate threshold: both rules have coefficient {0}, the drift sum never changes sign")]
    Degenerate(f64),

    #[error("singular pair state (x_c = {x_c}, x_cc = {x_cc}): conditional frequencies given D are undefined")]
    SingularState { x_c: f64, x_cc: f64 },

    #[error("integration step too large: component moved by {delta:.3e} at t = {t}")]
    StepTooLarge { t: f64, delta: f64 },

    #[error("invalid degree sequence: n = {n}, k = {k} ({reason})")]
    InvalidDegreeSequence { n: usize, k: usize, reason: &'static str },

    #[error("failed to generate a connected simple {k}-regular graph on {n} nodes after {attempts} attempts")]
    GenerationFailed { n: usize, k: usize, attempts: usize },

    #[error("negative fitness {fitness} (omega = {omega}); imitation updating needs nonnegative weights")]
    NegativeFitness { fitness: f64, omega: f64 },

    #[error("rule {0} has no microscopic model; only PC and IM can drive this engine")]
    UnsupportedRule(String),
}
