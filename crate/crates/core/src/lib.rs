pub mod channel;
pub mod cli;
pub mod error;
pub mod improper_gp;
pub mod linalg;
pub mod proper_pure;
pub mod rates;
pub mod region;
pub mod timesharing;

pub use error::{Error, Result};
