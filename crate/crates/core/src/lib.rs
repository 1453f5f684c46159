pub mod copula;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod margins;
pub mod optim;
pub mod pairs;
pub mod pitfall;
pub mod signal;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Exec;
