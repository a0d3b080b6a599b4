//! Optimal transport, Wasserstein geodesics and displacement-convexity
//! curvature probes on finite metric-measure spaces.

// `!(x > 0.0)` also rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approxgh;
pub mod curvature;
pub mod entropy;
pub mod error;
pub mod geodesy;
pub mod inequalities;
pub mod io;
pub mod mmspace;
pub mod smooth1d;
pub mod transport;
pub mod trial;

pub use error::{Error, Result};
