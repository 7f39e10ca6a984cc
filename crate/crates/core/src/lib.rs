// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod schrodinger;
pub mod bundle;
pub mod report;
pub mod transport;
pub mod evolution;
pub mod scenario;

pub use error::{Error, FieldError, Result};
