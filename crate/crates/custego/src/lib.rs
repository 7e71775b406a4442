//! Intra-only quad-tree video codec with block-structure steganography.
//!
//! The crate is organized around a simplified HEVC-style encoder whose
//! coding-unit (CU) partition is driven by rate-distortion optimization.
//! On top of the codec:
//!
//! * [`stc`] implements syndrome-trellis-code embedding and extraction,
//! * [`stego`] maps CU sizes to carrier bits, derives recompression-based
//!   three-level embedding costs, and runs the full embed/extract pipeline,
//! * [`cbssm`] computes the block-structure stability features (BQUM/BSIM)
//!   used for steganalysis and the restoration-bound analysis,
//! * [`eval`] carries the quality/rate metrics, a naive forced-8x8 baseline
//!   embedder, a from-scratch logistic-regression detector, and the
//!   experiment grid runner.

pub mod bits;
pub mod cbssm;
pub mod codec;
pub mod error;
pub mod eval;
pub mod frame_io;
pub mod quadtree;
pub mod stc;
pub mod stego;

pub use error::{Error, Result};
