//! Video text spotting that recognizes each text stream once.
//!
//! The pipeline localizes text per frame with temporally refined confidence
//! maps, links regions into streams by embedding similarity, scores region
//! quality, and recognizes only the best region of each stream. Neural stages
//! (backbone, flow, recognizer) are represented by the data they would emit;
//! [`simkit`] produces such data synthetically.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod objectives;
pub mod pipeline;
pub mod quality;
pub mod simkit;
pub mod tracker;

pub use error::{Error, Result};
