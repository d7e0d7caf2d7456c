//! Joint intent detection and slot filling on a shared causal transformer
//! trunk, with an extra latent dialogue action layer that is trained
//! alongside the language-modeling and tagging heads and fused into decoding.
//!
//! Module map:
//! - [`numerics`]: dense `f64` tensors, a reverse-mode tape, stable
//!   activations and a finite-difference gradient checker.
//! - [`model`]: the trunk and the intent / slot / LM / action heads.
//! - [`training`]: losses, AdamW, the training loop and few-shot adaptation.
//! - [`decoding`]: action-fused next-token distributions, greedy and beam
//!   search, fused slot tagging.
//! - [`data`]: corpora, JSONL / CoNLL formats, vocabulary, K-shot sampling and
//!   the synthetic source/target language generator.
//! - [`harness`]: metrics, ablations, throughput benchmarks and reports.
//! - [`cli`]: the `lada` command-line driver.

pub mod cli;
pub mod data;
pub mod decoding;
mod error;
pub mod harness;
mod hash;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
