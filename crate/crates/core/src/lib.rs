//! Self-augmented visual contrastive decoding.
//!
//! A decoding loop that contrasts next-token logits computed on a clean
//! image (expert) with logits computed on an augmented copy (amateur),
//! truncates the vocabulary with an entropy-adaptive threshold, and picks
//! the augmentation by asking the model itself.
//!
//! Modules, bottom-up:
//!
//! - [`dist`]: softmax, entropy, thresholds, argmax.
//! - [`augment`]: the six seeded image augmentations.
//! - [`backend`]: model access trait plus a scripted synthetic backend.
//! - [`engine`]: candidate sets, contrast, sampling and the decode loop.
//! - [`sas`]: selection prompt rendering and answer parsing.
//! - [`trace`], [`suite`], [`ablation`]: experiment plumbing.

pub mod ablation;
pub mod augment;
pub mod backend;
pub mod dist;
pub mod engine;
pub mod error;
pub mod par;
pub mod sas;
pub mod suite;
pub mod trace;

pub use augment::{AugmentationKind, RasterImage};
pub use backend::{Backend, BackendSession, SyntheticBackend, SyntheticScript};
pub use dist::{EntropyBits, LogitVector, ProbVector};
pub use engine::{
    CandidateSet, DecodeResult, DecodingParams, Sampling, StepTrace, StopReason, ThresholdMode,
};
pub use error::{AugmentError, BackendError, DistError, EngineError};
pub use sas::{SasOutcome, SasPrompt, TemplateId};
