//! Complex question generation from knowledge-graph query graphs.
//!
//! The crate is `no_std` (with `alloc`) and carries everything that is pure
//! computation: a small reverse-mode differentiation engine over dense
//! `f64` tensors, the query-graph data model with sub-question matchers,
//! corpus preprocessing, the CoG2Q / CoGSub2Q / CoGSub^m2Q model family,
//! teacher-forced training with Adam, decoding and BLEU / ROUGE-L scoring.
//!
//! File formats, checkpoints and the command-line tool live in the `cqg`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod kg;
pub mod math;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod synth;
pub mod tensor;
pub mod text;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
