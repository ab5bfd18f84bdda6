//! Two-phase underwater domain adaptation.
//!
//! The crate holds everything that is pure computation: image containers and
//! color math, the synthetic formation model, evaluation metrics, a small
//! autodiff engine with the translator / enhancer / critic networks, the
//! adversarial and perceptual losses, the rank-based quality scorer, both
//! adaptation phases and the score-routed inference pipeline.
//!
//! It builds without `std` (only `alloc` is required). File formats, PNG IO
//! and the command line live in the companion `uwda` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adapt;
pub mod autograd;
pub mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod ruiqa;
pub mod synth;
pub mod tensor;

pub use autograd::{Graph, Var};
pub use error::{Error, Result};
pub use image::{ImageBuf, LabImage, NormImage, UnitImage};
pub use tensor::Tensor;
