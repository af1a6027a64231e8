//! Online cardinality estimation with many small models keyed by canonical
//! hashes of subquery DAGs.

// `!(x > 0.0)` deliberately also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod canonhash;
pub mod error;
pub mod featurize;
pub mod hierarchy;
pub mod learners;
pub mod oracle;
pub mod querygraph;
pub mod schema;
pub mod sim;

pub use error::{Error, Result};
