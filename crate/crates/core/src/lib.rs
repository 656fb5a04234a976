//! Pathwise coordinate descent for L1-penalized problems: the lasso family,
//! the fused lasso signal approximator on chains and pixel grids, the
//! general fused lasso, and independent optimality checks.

pub mod error;
pub mod flsa1d;
pub mod flsa2d;
pub mod fused_general;
pub mod lasso_family;
pub mod numeric;
pub mod oracle;

pub use error::{Error, Result};
