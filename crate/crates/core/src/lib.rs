//! Conversational satisfaction and dialogue breakdown prediction.
//!
//! The crate covers the whole pipeline: conversation ingestion
//! ([`data`]), behavioral features with online scaling ([`features`]),
//! rule-based weak labels and agreement statistics ([`weak`]), a small
//! deterministic neural toolkit ([`nn`]), the assembled recurrent model
//! ([`model`]) and training/evaluation ([`harness`]).

pub mod data;
pub mod error;
pub mod features;
pub mod harness;
pub mod model;
pub mod nn;
pub mod weak;

pub use error::{Error, Result};
