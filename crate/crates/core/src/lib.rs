//! Threshold-testing mechanisms and audits of their privacy.
//!
//! The crate contains the sparse vector technique (SVT), generalized private
//! threshold testing (GPTT), quantitative evidence that GPTT has unbounded
//! privacy loss, and count-reconstruction attacks built on GPTT.
//!
//! ```
//! use gptt_audit::audit::{log_ratio, CounterexampleSpec};
//!
//! // ε₁ = ε₂ = 0.5, eight copies of each query
//! let spec = CounterexampleSpec::new(8, 0.5, 0.5).unwrap();
//! assert!(log_ratio(&spec).unwrap() > 2.0 * 0.5);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod audit;
pub mod datagen;
pub mod error;
pub mod histogram;
pub mod mechanisms;
pub mod noise;

pub use error::{Error, Result};
pub use histogram::{Histogram, NeighborPair, Query, QueryKind};
pub use mechanisms::{Answer, GpttParams, SvtParams, ThresholdVector};
pub use noise::{LaplaceDist, Rng};
