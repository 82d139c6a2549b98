//! Viewpoint-leakage analysis and the B-PEA privacy mechanism for proactive
//! 360-degree video streaming.
//!
//! A proactive streaming client uploads its predicted viewpoint together with
//! the error of its previous prediction. An eavesdropper who knows both can
//! place the actual viewpoint on a small circle and guess it. This crate
//! quantifies that leakage ([`leakage`]), implements the noisy-error
//! mechanism that caps it at a per-user level ([`bpea`]), checks both
//! against a simulated attacker ([`oracle`]), and compares the mechanism
//! with viewpoint-noise baselines ([`baselines`]) in a tile-based streaming
//! simulator ([`streaming`], [`harness`]).

pub mod baselines;
pub mod bpea;
pub mod error;
pub mod harness;
pub mod leakage;
pub mod oracle;
pub mod rng;
pub mod sphere;
pub mod streaming;

pub use error::{Error, Result};
