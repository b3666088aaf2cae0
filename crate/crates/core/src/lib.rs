//! Categorical data mining over coded relational records: target-set
//! construction, mRMR feature selection, decision trees, association rules
//! and cross-validated evaluation.

pub mod apriori;
pub mod error;
pub mod eval;
pub mod info;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod schema;
pub mod select;
pub mod synth;
pub mod target;
pub mod tree;

pub use error::{Error, Result};
pub use schema::{AttributeDescriptor, AttributeKind, CellValue, Dataset, DatasetSchema};
