pub mod cli;
pub mod ebpredict;
pub mod error;
pub mod fdr;
pub mod month;
pub mod normal;
pub mod panel;
pub mod prior;
pub mod qmlfit;
pub mod rng;
pub mod select;
pub mod signals;
pub mod simgen;

pub use error::{Error, Result};
pub use month::Month;
