#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod correlators;
pub mod entropy;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod grid;
pub mod pipeline;
pub mod plot;
pub mod store;
pub mod symplectic;
