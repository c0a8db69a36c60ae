//! Exact set-similarity joins under the filter-verification framework.
//!
//! Sets are preprocessed into a linearized token/offset layout
//! ([`collection`]), candidates are produced by an incremental inverted-index
//! nested loop ([`joiners`]: AllPairs, PPJoin, GroupJoin), serialized into
//! budgeted candidate chunks and verified by a pool of worker groups
//! ([`verify`]) while the producer keeps generating ([`pipeline`]).
//!
//! ```
//! use ssjoin::collection::{build_dictionary, preprocess, RawRecord};
//! use ssjoin::pipeline::{run_join, JoinResult, PipelineConfig};
//! use ssjoin::joiners::Algorithm;
//! use ssjoin::similarity::SimilarityPredicate;
//!
//! let records: Vec<RawRecord> = ["a b c d", "a b c d", "x y"]
//!     .iter()
//!     .map(|line| RawRecord::from_line(line))
//!     .collect();
//! let dictionary = build_dictionary(&records).unwrap();
//! let collection = preprocess(&records, &dictionary).unwrap();
//! let predicate = SimilarityPredicate::jaccard("0.8").unwrap();
//! let report = run_join(&collection, &predicate, Algorithm::PPJoin, &PipelineConfig::default()).unwrap();
//! assert_eq!(report.result, JoinResult::Count(1));
//! ```

pub mod cli;
pub mod collection;
mod error;
pub mod filters;
pub mod joiners;
pub mod oracle;
pub mod pipeline;
pub mod similarity;
pub mod verify;

pub use error::{Error, Result};
