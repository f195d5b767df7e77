//! Gene set analysis toolkit with an explicit model of the analytical
//! degrees of freedom: desk-scale enrichment engines, a dependency-aware
//! choice graph over preprocessing and parameter options, and a stepwise
//! greedy optimiser that quantifies how far results can be tweaked under
//! three goals, on true and permuted sample labels.

pub mod cli;
pub mod corpus;
pub mod diffexpr;
pub mod enrichment;
pub mod error;
pub mod multiverse;
pub mod preprocess;
pub mod seed;
pub mod special;
pub mod study;
pub mod synthdata;

pub use error::{AuditError, Result};
