pub mod commands;
pub mod config;
pub mod coupling;
pub mod dq2d;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod linear;
pub mod oracle;
pub mod rabi;
pub mod selfcheck;
pub mod spectrum;
pub mod textio;
pub mod units;

pub use error::{Error, Result};
