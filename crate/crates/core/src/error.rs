use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state outside the model's admissible region, or a singular frame.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator could not continue. Carries the last accepted sample.
    #[error("integration failed at parameter {}: {message}", last.as_ref().map_or(f64::NAN, |(t, _)| *t))]
    Integration {
        message: String,
        last: Option<(f64, Vec<f64>)>,
    },

    /// The operation needs a closed form the model family does not provide.
    #[error("unsupported for model '{model}': {what}")]
    Unsupported { model: String, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
