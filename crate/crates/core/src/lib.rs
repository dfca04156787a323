//! Global-feature image retrieval over precomputed feature maps.
//!
//! The crate covers the whole global-only pipeline:
//!
//! * [`pooling`] turns `H × W × C` activation maps into descriptors with
//!   GeM, Regional-GeM and multi-scale Scale-GeM, plus a thresholded ReLU.
//! * [`index`] stores unit-norm descriptors and answers exact top-k queries.
//! * [`rerank`] refines the query and its top-`M` results using only those
//!   descriptors and re-sorts them.
//! * [`eval`] computes mAP under the Medium/Hard protocols and mAP@k.
//! * [`tune`] searches one pooling power at a time, coarse then fine.
//! * [`tensor_file`] reads and writes the `SGT1` tensor format.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory, and the
//! `superglobal` binary exposes the same pipeline on files.

pub mod cli;
pub mod error;
pub mod eval;
pub mod index;
pub mod pooling;
pub mod rerank;
pub mod synthetic;
pub mod tensor;
pub mod tensor_file;
pub mod tune;

pub use error::{Error, Result};
pub use eval::{average_precision, evaluate, GroundTruth, Interpolation, Protocol, QueryTruth};
pub use index::{DescriptorIndex, Hit, RankedList};
pub use pooling::{
    extract_batch, extract_descriptor, gem_pool, regional_gem, regional_lp_map, scale_gem, whiten,
    PoolingConfig, ScaleSet,
};
pub use rerank::{expand_query, refine_database, rerank, RerankParams};
pub use tensor::{l2_normalize, relu_threshold, Descriptor, DescriptorSet, FeatureMap, WhiteningParams};
pub use tensor_file::{read_tensor, write_tensor, TensorFile};
pub use tune::{tune_parameter, TuneOutcome, TuneSpec, TunedParameter};
