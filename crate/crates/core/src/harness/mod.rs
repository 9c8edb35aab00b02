//! End-to-end training, evaluation and reporting on top of the models.

pub mod ablate;
pub mod config;
pub mod evaluate;
pub mod model;
pub mod report;
pub mod train;

pub use ablate::*;
pub use config::*;
pub use evaluate::*;
pub use model::*;
pub use report::*;
pub use train::*;
