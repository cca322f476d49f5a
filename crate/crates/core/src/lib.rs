// Negated float comparisons are deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consistency;
pub mod controller;
pub mod cstr;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod sdp;
pub mod synthesis;
pub mod verify;

pub use error::{Error, Result};
