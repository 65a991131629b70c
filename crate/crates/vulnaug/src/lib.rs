//! Streaming data augmentation for imbalanced code-vulnerability
//! embedding datasets.
//!
//! The crate works on function-level embedding blocks (a fixed `L x d`
//! matrix per sample) and provides:
//!
//! - a bit-exact on-disk dataset container with offset-indexed random
//!   access ([`container`]);
//! - five representation-level augmentation operators — linear
//!   interpolation and extrapolation, stochastic perturbation, binary
//!   interpolation and gaussian scaling — in blind and conditioned
//!   (flaw-span-preserving) modes, plus random oversampling
//!   ([`operators`], [`pipeline`]);
//! - a token-subsequence locator that finds a flaw line's tokens inside a
//!   function, with a recursive boundary-trimming fallback ([`spanlocate`]);
//! - a linear probe classifier and precision/recall/F1/AUC metrics
//!   ([`probe`]);
//! - a synthetic planted-signal dataset generator ([`synth`]) and a study
//!   matrix runner that compares strategies end-to-end ([`repro`]).
//!
//! All randomness is counter-based ([`rng`]): every draw is a pure function
//! of `(seed, domain, stream, counter)`, so identical configurations yield
//! byte-identical artifacts regardless of execution order.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `vulnaug` binary for the equivalent command-line surface.

pub mod container;
pub mod spanlocate;
pub mod error;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
