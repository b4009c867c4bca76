//! Exit-code mapping for library errors.

use std::fmt;

use larvest::data::DataError;
use larvest::field::FieldError;
use larvest::inference::InferenceError;
use larvest::sim::SimError;
use larvest::synth::SynthError;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_FIT: u8 = 3;
pub const EXIT_NO_ADMISSIBLE: u8 = 4;
pub const EXIT_VARIANCE: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Failure::new(EXIT_PARSE, message)
    }

    /// Prefixes the message with where it happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_OTHER, e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let code = if matches!(e, DataError::Io(_)) { EXIT_OTHER } else { EXIT_PARSE };
        Failure::new(code, e.to_string())
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        let code = if matches!(e, FieldError::InvalidDocument(_)) { EXIT_PARSE } else { EXIT_FIT };
        Failure::new(code, e.to_string())
    }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        let code = match e {
            InferenceError::NoAdmissibleCandidate { .. } => EXIT_NO_ADMISSIBLE,
            InferenceError::VarianceUndefined { .. } => EXIT_VARIANCE,
            InferenceError::Data(_) | InferenceError::InvalidPrior(_) | InferenceError::InvalidGrid(_) => {
                EXIT_PARSE
            }
            _ => EXIT_OTHER,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = if matches!(e, SimError::InvalidConfig(_)) { EXIT_PARSE } else { EXIT_OTHER };
        Failure::new(code, e.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        let code = match e {
            SynthError::InvalidFamily(_) | SynthError::BelowThreshold { .. } => EXIT_PARSE,
            SynthError::Data(_) => EXIT_OTHER,
        };
        Failure::new(code, e.to_string())
    }
}
