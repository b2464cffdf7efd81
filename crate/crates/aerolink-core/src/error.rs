use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),

    #[error("links do not share a common transmit correlation")]
    CorrelationMismatch,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("rate curve stays below the spectral efficiency of every mode")]
    EmptyTable,

    #[error("distance {d_km} km outside the operating range [{lo_km}, {hi_km})")]
    OutOfRange { d_km: f64, lo_km: f64, hi_km: f64 },

    #[error("unsupported modulation order {0}")]
    Modulation(u32),

    #[error("at least one trial is required")]
    NoTrials,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("inverted range [{lo}, {hi}]")]
    InvertedRange { lo: f64, hi: f64 },
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { name, value })
    }
}
