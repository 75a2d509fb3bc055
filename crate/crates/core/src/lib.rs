//! Salient relevance maps for small CNNs.
//!
//! The pipeline has two steps: epsilon-rule layer-wise relevance
//! propagation turns a network's top-class score into a per-pixel
//! relevance map, and context-aware saliency detection refines that map
//! into the salient relevance (SR) map. Supporting modules provide the
//! inference runtime that records activations, Canny edge extraction
//! for presentation overlays, and the SSIM-ratio evaluation protocol.

pub mod casal;
pub mod edges;
pub mod error;
pub mod io;
pub mod lrp;
pub mod metrics;
pub mod netrt;
pub mod tensor;

pub use error::{Result, SrError};
