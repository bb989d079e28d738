//! Stream oracles, fault localization and fault-based data acquisition for
//! prediction decoders.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
#![allow(clippy::type_complexity)]
pub mod datamodel;
pub mod decoders;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod oracles;
pub mod heuristics;
pub mod slicing;
pub mod special;
pub mod localization;
pub mod repair;
pub mod synthgen;
pub mod config;
pub mod evaluation;
pub mod cli;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub type Label = datamodel::Label<f64>;
pub type Sample = datamodel::Sample<f64>;
pub type Dataset = datamodel::Dataset<f64>;
pub type PredictionRecord = datamodel::PredictionRecord<f64>;
pub type FittedDecoder = decoders::FittedDecoder<f64>;
pub type Bounds = oracles::Bounds<f64>;
pub type OracleConfig = oracles::OracleConfig<f64>;
pub type CorrectionRecord = heuristics::CorrectionRecord<f64>;
pub type SliceFamily = slicing::SliceFamily<f64>;
