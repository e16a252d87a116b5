//! Scale-aware Siamese single-object tracker with a full one-pass
//! evaluation harness.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: deterministic dense kernels (convolution, correlation,
//!   pooling, softmax).
//! - [`backbone`]: the feature extractor, scale stacks, scale-equivariant
//!   convolution, and per-scale depthwise correlation.
//! - [`psa`]: pairwise scale-channel attention (self- and cross-attention).
//! - [`apn`]: scale-aware anchor proposal (feature fusion and the anchor
//!   generation network).
//! - [`tracker`]: the end-to-end tracking loop with ablation toggles.
//! - [`mod@bench`]: dataset loading, one-pass evaluation, metrics, scale
//!   variation analysis, and a synthetic sequence generator.
//!
//! Nothing here is trained: weights come from a seeded deterministic init
//! (or from a weights file), and correctness is established by structural
//! invariants and independent oracles rather than by accuracy numbers.

pub mod apn;
pub mod backbone;
pub mod bench;
pub mod calls;
pub mod config;
pub mod error;
pub mod psa;
pub mod tensor;
pub mod tracker;
pub mod weights;

pub use error::{Error, Result};
