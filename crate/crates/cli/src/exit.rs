//! Process exit codes.

use nvcharge::Error;

pub const SUCCESS: u8 = 0;
pub const INPUT_ERROR: u8 = 2;
pub const NOT_CONVERGED: u8 = 3;
pub const CONDITIONING: u8 = 4;

/// How a command that produced output finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => SUCCESS,
            Status::NotConverged => NOT_CONVERGED,
        }
    }
}

/// Exit code for a failed command, chosen from the first library error in
/// the chain. Anything else (I/O, bad arguments, config) is an input error.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Conditioning(_) => CONDITIONING,
                Error::Numeric(_) | Error::Singular(_) | Error::Bracket(_) | Error::Sweep(_) => NOT_CONVERGED,
                Error::Domain(_) | Error::Parse { .. } | Error::Indeterminate(_) => INPUT_ERROR,
            };
        }
    }
    INPUT_ERROR
}
