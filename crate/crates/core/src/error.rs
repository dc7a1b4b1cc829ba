use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `af` sits inside (or too close to) a stability zone around `n²`,
    /// where the requested approximation does not hold.
    #[error("af = {af} is resonant: |af - {n}^2| = {distance:.3e} within zone width {width:.3e}")]
    ResonantAf {
        af: f64,
        n: u32,
        distance: f64,
        width: f64,
    },

    /// A denominator of the large-q ratio `x` or of the correction factor
    /// vanished (happens near `af = n²`).
    #[error("singular angle: {what} denominator {denominator:.3e} at af = {af}, q = {q}")]
    SingularAngle {
        what: &'static str,
        af: f64,
        q: f64,
        denominator: f64,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("sine integral argument {0} outside [0, 1e7]")]
    SineIntegralDomain(f64),

    #[error("cannot parse forcing model: {0}")]
    Parse(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    /// True for errors caused by the caller's arguments, as opposed to a
    /// numerical or I/O failure during the run.
    pub fn is_bad_argument(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::ResonantAf { .. }
                | Error::SineIntegralDomain(_)
                | Error::Parse(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
