//! Decides whether a conformal structure `[g]` and a projective structure
//! `[Γ]` on a coordinate chart come from one metric, and reconstructs that
//! metric when they do.

pub mod cli;
pub mod compat;
pub mod cone;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod recover;
pub mod scenario;

pub use error::{Error, Result};
