pub mod agents;
pub mod error;
pub mod estimation;
pub mod fgn;
pub mod lob;
pub mod numeric;
pub mod options;
pub mod returns;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
