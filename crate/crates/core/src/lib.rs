//! JPEG forgery localization toolkit.
//!
//! The crate covers the whole benchmark chain for aligned double-JPEG
//! forgeries: a baseline JPEG coefficient codec ([`jpeg`]), forgery case
//! synthesis ([`synth`]), the shared block-resolution map type ([`maps`]),
//! pixel- and coefficient-domain detectors ([`detect`]), first-digit
//! classifiers ([`classifier`]), multi-scale map fusion ([`fusion`]) and the
//! threshold-sweep evaluation protocol ([`eval`]).

pub mod classifier;
pub mod detect;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod imageio;
pub mod jpeg;
pub mod maps;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
