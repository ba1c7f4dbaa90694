//! Robust autoregressive hidden semi-Markov models.
//!
//! A sequence is explained by `K` hidden regimes. Each regime emits samples
//! through an autoregressive model with generalized-t (Student-t) noise and
//! stays active for an explicitly modelled number of samples before the
//! chain renews through the transition matrix. The crate provides
//!
//! - exact log-domain forward/backward message passing ([`messages`]),
//! - Viterbi decoding of the joint regime/counter path ([`inference`]),
//! - EM and complete-data learning ([`learning`]),
//! - ancestral sampling ([`simulate`]),
//! - resampling, z-scoring and label rasterization ([`preprocess`]),
//! - by-sample and event-level scoring ([`evaluate`]).
//!
//! All numerical code is generic over a [`Real`] scalar; the aliases at the
//! crate root fix it to `f64`, which is what the file formats and the CLI use.

// `!(x > 0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluate;
pub mod formats;
pub mod inference;
pub mod learning;
pub mod linalg;
pub mod messages;
pub mod model;
pub mod observation;
pub mod preprocess;
pub mod rng;
pub mod simulate;
pub mod special;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{Error, Result};
pub use model::{HiddenPath, ModelParams, RegimeParams, Sequence};

/// Floating point scalar the engine is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Double precision model, the format used on disk.
pub type Model = ModelParams<f64>;
/// Single precision model.
pub type Model32 = ModelParams<f32>;
pub type Regime = RegimeParams<f64>;
pub type Signal = Sequence<f64>;
pub type ForwardResult = messages::ForwardResult<f64>;
pub type SuffStats = learning::SuffStats<f64>;
pub type FitResult = learning::FitResult<f64>;
