#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod fd;
pub mod frame;
pub mod geometry;
pub mod grid;
pub mod parallel;
pub mod state;

pub use error::{Error, Result};
pub use grid::{FdOrder, Grid, Topology};
pub use state::StateField;
pub mod boundary;
pub mod checks;
pub mod config;
pub mod evolution;
pub mod hyperbolicity;
pub mod norms;
pub mod recipes;
pub mod runner;
pub mod scenarios;
pub mod snapshot;
