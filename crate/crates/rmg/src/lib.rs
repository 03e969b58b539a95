//! Radiomyography (RMG) hand-gesture pipeline.
//!
//! The crate covers the full desk-scale loop: synthetic MIMO near-field
//! baseband generation ([`synth`]), the five-step preprocessing chain
//! ([`preprocess`]), STFT/CWT spectrogram ensembles ([`timefreq`]),
//! transformer and CNN classifiers with deterministic training
//! ([`learn`]), cross-validation / transfer-learning harnesses
//! ([`evalharness`]), the sEMG comparison toolkit ([`benchmark`]), and
//! dataset/model/report persistence plus SVG plotting ([`io`]).
//!
//! Runnable walkthroughs for each stage live in `examples/`; the `rmg`
//! binary exposes the same stages as subcommands.

pub mod benchmark;
pub mod error;
pub mod evalharness;
pub mod io;
pub mod learn;
pub mod preprocess;
pub mod synth;
pub mod timefreq;

pub use error::{Result, RmgError};
