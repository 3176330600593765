//! Quantized convolution primitives with a measurement harness.
//!
//! The crate implements five convolution primitives — standard, grouped,
//! depthwise separable, shift and add — over 8-bit tensors quantized with a
//! uniform symmetric power-of-two scheme, in two interchangeable forms:
//!
//! - [`reference`]: literal scalar kernels that define correctness;
//! - [`fastpath`]: an im2col formulation with a two-patch column buffer,
//!   two-filter blocking and a packed dual multiply-accumulate, bit-exact
//!   with the reference kernels (add convolution has no fast path).
//!
//! Around the kernels sit [`quant`] (the power-of-two quantizer), [`bnfold`]
//! (batch-norm folding, plus an explicit quantized BN layer for add
//! convolution), [`cost`] (parameter/MAC counts and gain ratios),
//! [`instrument`] (operation and memory-access counting) and [`bench`]
//! (sweeps, latency statistics, CSV, regression).
//!
//! Start with the runnable examples: `cargo run --release --example
//! primitive_tour`, then `quantize_roundtrip`, `fold_bn`, `bitexact_verify`,
//! `cost_table`, `access_ratio` and `latency_sweep`. The same functionality
//! is scripted by the thin `bench` binary.

pub mod bench;
pub mod bnfold;
pub mod cost;
mod error;
pub mod fastpath;
pub mod instrument;
pub mod layer;
pub mod quant;
pub mod reference;
pub mod tensor;

pub use error::{Error, Result};
pub use instrument::{ExecPath, OpCounters};
pub use layer::{LayerSpec, LayerWeights, PrimitiveKind, ShiftTable};
pub use quant::{FloatTensor, FloatWeights};
pub use tensor::{QTensor, QWeights};
