//! Nonlinear soil-structure interaction full-order model and a data-driven
//! AE-LSTM reduced order model of it.
//!
//! The crate covers the whole pipeline: a beam-on-nonlinear-springs monopile
//! finite element model integrated with implicit Newmark (the FOM), a seeded
//! multisine forcing generator, a small hand-rolled neural engine (dense
//! layers, an LSTM cell, Adam), autoencoder + autoregressive LSTM training
//! (the ROM), and quantitative FOM-vs-ROM evaluation.

// Validation guards are written `!(x > 0.0)` on purpose: the negated form
// also rejects NaN, which plain `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evaluate;
pub mod forcing;
pub mod integrator;
pub mod neural;
pub mod pipeline;
pub mod rom;
pub mod soil;
pub mod structure;
