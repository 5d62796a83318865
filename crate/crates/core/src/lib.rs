//! Click-through-rate prediction with selective-kernel attention over explicit
//! multi-order feature crosses.
//!
//! Each example is a set of categorical fields. Every field value is embedded
//! into a `k`-dimensional vector; all second-order and third-order field
//! combinations are materialized as elementwise products of those vectors
//! ("crosses"). A selective-kernel layer pools each cross channel, squeezes the
//! statistics through a small bottleneck, and produces per-channel weights
//! `(a_c, b_c)` with `a_c + b_c = 1` that trade the second-order branch
//! against the third-order one. The weighted map feeds a ReLU MLP whose
//! output is added to a first-order linear term and squashed by a sigmoid.
//!
//! The crate is self-contained: [`engine`] provides tensors and reverse-mode
//! gradients, [`crosses`] and [`sk_attention`] implement the cross and
//! attention layers, [`network`] assembles the model and its ablations and
//! baselines, [`training`] runs Adam with early stopping and reports AUC and
//! logloss, and [`ingest`] turns delimited text into encoded splits.
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability; the `fiinet` binary exposes the same workflows as subcommands.

pub mod cli;
pub mod crosses;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod network;
pub mod sk_attention;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
