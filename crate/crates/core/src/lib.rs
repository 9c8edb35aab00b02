pub mod dmr;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod lattice;
pub mod metrics;
pub mod pme;
pub mod rng;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use temporal::{CenterWidth, ClipMask, Interval};
