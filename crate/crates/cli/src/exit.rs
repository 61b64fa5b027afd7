//! Process exit codes: 0 success, 1 usage or configuration error, 2 data
//! error, 3 numerical failure.

use std::fmt;

pub const OK: i32 = 0;
pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERICAL: i32 = 3;

/// Bad command line or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<nwpcorr::Error>() {
            return if e.is_numerical() {
                NUMERICAL
            } else if e.is_data_error() || matches!(e, nwpcorr::Error::DimensionMismatch(_)) {
                DATA
            } else {
                USAGE
            };
        }
    }
    DATA
}
