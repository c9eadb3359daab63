use bsarec_core::Error;

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const DIVERGED: u8 = 3;
/// A significance comparison was requested but one side has fewer than two seeds.
pub const NO_SIGNIFICANCE: u8 = 4;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            error: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn with_code(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Diverged(_) => DIVERGED,
            Error::Parameter(_) => USAGE,
            _ => DATA,
        };
        Failure::with_code(code, e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        match error.downcast::<Error>() {
            Ok(e) => e.into(),
            Err(error) => Failure { code: DATA, error },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::with_code(DATA, e)
    }
}
